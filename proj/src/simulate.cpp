#include "pst/simulate.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

#include "pst/baselines.hpp"
#include "pst/basis.hpp"
#include "pst/errors.hpp"
#include "pst/model_scores.hpp"
#include "pst/parallel.hpp"
#include "pst/posthoc.hpp"
#include "pst/pst_test.hpp"

namespace pst::sim {

namespace {

// stream ids within one replicate seed
constexpr std::uint64_t kDesignStream = 0;
constexpr std::uint64_t kOutcomeStream = 1;

Eigen::MatrixXd covariance_matrix(const CovarianceSpec& spec, int size) {
  Eigen::MatrixXd cov(size, size);
  for (int i = 0; i < size; ++i) {
    for (int j = 0; j < size; ++j) {
      double correlation = (i == j) ? 1.0 : 0.0;
      if (spec.kind == CovKind::ar1) {
        correlation = std::pow(spec.rho, std::abs(i - j));
      } else if (spec.kind == CovKind::exchangeable && i != j) {
        correlation = spec.rho;
      }
      cov(i, j) = spec.scale * correlation;
    }
  }
  return cov;
}

void validate_cov(const CovarianceSpec& spec, const std::string& name) {
  if (!(spec.scale > 0)) {
    throw ValidationError("covariance for region '" + name +
                          "': variance must be positive");
  }
  if (spec.kind != CovKind::identity && !(std::abs(spec.rho) < 1.0)) {
    throw ValidationError("covariance for region '" + name +
                          "': need |rho| < 1");
  }
}

struct RegionBlock {
  std::string name;
  std::vector<int> columns;
  Eigen::MatrixXd chol;  // lower triangular factor
};

RegionBlock make_block(const std::string& name, std::vector<int> columns,
                       const CovarianceSpec& spec) {
  RegionBlock block;
  block.name = name;
  block.columns = std::move(columns);
  const int size = static_cast<int>(block.columns.size());
  const Eigen::LLT<Eigen::MatrixXd> llt(covariance_matrix(spec, size));
  if (llt.info() != Eigen::Success) {
    throw NumericError("covariance factorization failed for region '" + name +
                       "'");
  }
  block.chol = llt.matrixL();
  return block;
}

std::vector<RegionBlock> make_blocks(const Scenario& scenario) {
  std::vector<RegionBlock> blocks;
  std::vector<int> neg_cols, pos_cols, null_cols;
  std::vector<bool> taken(static_cast<std::size_t>(scenario.p), false);
  for (int j = scenario.neg.start; j < scenario.neg.start + scenario.neg.size;
       ++j) {
    neg_cols.push_back(j);
    taken[static_cast<std::size_t>(j)] = true;
  }
  for (int j = scenario.pos.start; j < scenario.pos.start + scenario.pos.size;
       ++j) {
    pos_cols.push_back(j);
    taken[static_cast<std::size_t>(j)] = true;
  }
  for (int j = 0; j < scenario.p; ++j) {
    if (!taken[static_cast<std::size_t>(j)]) null_cols.push_back(j);
  }
  if (!neg_cols.empty()) {
    blocks.push_back(make_block("negative", neg_cols, scenario.neg.cov));
  }
  if (!pos_cols.empty()) {
    blocks.push_back(make_block("positive", pos_cols, scenario.pos.cov));
  }
  if (!null_cols.empty()) {
    blocks.push_back(make_block("null", null_cols, scenario.null_cov));
  }
  return blocks;
}

Eigen::MatrixXd sample_design(const Scenario& scenario,
                              const std::vector<RegionBlock>& blocks,
                              rng::Stream& stream) {
  Eigen::MatrixXd g(scenario.n, scenario.p);
  for (const auto& block : blocks) {
    const int size = static_cast<int>(block.columns.size());
    Eigen::MatrixXd z(scenario.n, size);
    for (int i = 0; i < scenario.n; ++i) {
      for (int j = 0; j < size; ++j) z(i, j) = stream.next_normal();
    }
    const Eigen::MatrixXd values = z * block.chol.transpose();
    for (int j = 0; j < size; ++j) g.col(block.columns[j]) = values.col(j);
  }
  if (scenario.center) {
    g.rowwise() -= g.colwise().mean();
  }
  return g;
}

double nearest_rank_quantile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  std::size_t k = static_cast<std::size_t>(
      std::ceil(q * static_cast<double>(values.size())));
  if (k < 1) k = 1;
  if (k > values.size()) k = values.size();
  return values[k - 1];
}

double rate_se(double rate, int count) {
  return count > 0 ? std::sqrt(rate * (1.0 - rate) / count) : 0.0;
}

struct MethodRep {
  bool ok = false;
  std::string error;
  bool reject = false;
  bool has_posthoc = false;
  bool proj_any_false = false;
  double proj_fdp = 0;
  double proj_power = 0;
  bool unproj_any_false = false;
  double unproj_fdp = 0;
  double unproj_hit = 0;
  double loc_false_frac = 0;
};

struct RepResult {
  bool ok = false;
  std::string error;
  std::vector<MethodRep> methods;
};

Dataset make_intercept_dataset(const Eigen::MatrixXd& g,
                               const Eigen::VectorXd& y) {
  Dataset data;
  data.y = y;
  data.x = Eigen::MatrixXd::Ones(g.rows(), 1);
  data.g = g;
  data.family = Family::binomial;
  return data;
}

// Post hoc bookkeeping against the two truth conventions: region membership
// for the unprojected scores and the 0.2-quantile rule on |Delta P mu| for
// the projected scores.
void posthoc_metrics(const PosthocResult& posthoc,
                     const Standardization& standardization,
                     const std::vector<bool>& signal_loc, double beta,
                     const Eigen::VectorXd& mu_hat, const Basis& basis,
                     double truth_quantile, Eigen::Index n, MethodRep& rep) {
  const Eigen::Index p = posthoc.standardized.size();
  rep.has_posthoc = true;

  std::vector<bool> undefined(static_cast<std::size_t>(p), false);
  for (const int j : posthoc.undefined_locations) {
    undefined[static_cast<std::size_t>(j)] = true;
  }

  const std::vector<int> rejected = posthoc.rejected_locations();

  // unprojected truth: signal regions, active only when beta > 0
  int n_null_loc = 0, false_rej = 0, true_rej = 0, n_signal = 0;
  for (Eigen::Index j = 0; j < p; ++j) {
    const bool is_signal = beta > 0 && signal_loc[static_cast<std::size_t>(j)];
    if (is_signal) ++n_signal;
    else ++n_null_loc;
  }
  for (const int j : rejected) {
    const bool is_signal = beta > 0 && signal_loc[static_cast<std::size_t>(j)];
    if (is_signal) ++true_rej;
    else ++false_rej;
  }
  rep.unproj_any_false = false_rej > 0;
  rep.unproj_fdp = rejected.empty()
                       ? 0.0
                       : static_cast<double>(false_rej) /
                             static_cast<double>(rejected.size());
  rep.unproj_hit =
      n_signal > 0 ? static_cast<double>(true_rej) / n_signal : 0.0;
  rep.loc_false_frac =
      n_null_loc > 0 ? static_cast<double>(false_rej) / n_null_loc : 0.0;

  // projected truth
  std::vector<bool> proj_null(static_cast<std::size_t>(p), true);
  int n_proj_signal = 0;
  if (beta > 0) {
    const Eigen::VectorXd projected_mean =
        basis.q * (basis.q.transpose() * mu_hat);
    const Eigen::VectorXd standardized_mean =
        std::sqrt(static_cast<double>(n)) *
        standardization.delta.cwiseProduct(projected_mean);
    std::vector<double> defined_values;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (!undefined[static_cast<std::size_t>(j)]) {
        defined_values.push_back(std::abs(standardized_mean[j]));
      }
    }
    const double cutoff = nearest_rank_quantile(defined_values, truth_quantile);
    for (Eigen::Index j = 0; j < p; ++j) {
      if (undefined[static_cast<std::size_t>(j)]) continue;
      if (std::abs(standardized_mean[j]) > cutoff) {
        proj_null[static_cast<std::size_t>(j)] = false;
        ++n_proj_signal;
      }
    }
  }
  int proj_false = 0, proj_true = 0;
  for (const int j : rejected) {
    if (proj_null[static_cast<std::size_t>(j)]) ++proj_false;
    else ++proj_true;
  }
  rep.proj_any_false = proj_false > 0;
  rep.proj_fdp = rejected.empty() ? 0.0
                                  : static_cast<double>(proj_false) /
                                        static_cast<double>(rejected.size());
  rep.proj_power =
      n_proj_signal > 0 ? static_cast<double>(proj_true) / n_proj_signal : 0.0;
}

}  // namespace

void validate_scenario(const Scenario& scenario) {
  if (scenario.n < 10) throw ValidationError("scenario: n must be >= 10");
  if (scenario.p < 2) throw ValidationError("scenario: p must be >= 2");
  if (scenario.replicates < 1) {
    throw ValidationError("scenario: replicates must be >= 1");
  }
  if (!(scenario.alpha > 0 && scenario.alpha < 1)) {
    throw ValidationError("scenario: alpha must lie in (0, 1)");
  }
  const auto check_region = [&](const Region& region, const char* name) {
    if (region.size < 0 || region.start < 0 ||
        region.start + region.size > scenario.p) {
      std::ostringstream what;
      what << "scenario: region '" << name << "' [" << region.start + 1 << ", "
           << region.start + region.size << "] falls outside 1.."
           << scenario.p;
      throw ValidationError(what.str());
    }
    if (region.size > 0) validate_cov(region.cov, name);
  };
  check_region(scenario.neg, "negative");
  check_region(scenario.pos, "positive");
  validate_cov(scenario.null_cov, "null");
  const bool disjoint =
      scenario.neg.start + scenario.neg.size <= scenario.pos.start ||
      scenario.pos.start + scenario.pos.size <= scenario.neg.start;
  if (scenario.neg.size > 0 && scenario.pos.size > 0 && !disjoint) {
    throw ValidationError("scenario: signal regions overlap");
  }
  for (const double beta : scenario.betas) {
    if (beta < 0) throw ValidationError("scenario: beta must be >= 0");
  }
}

Eigen::MatrixXd generate_design(const Scenario& scenario, rng::Stream& stream) {
  validate_scenario(scenario);
  return sample_design(scenario, make_blocks(scenario), stream);
}

Eigen::VectorXd linear_predictor(const Eigen::MatrixXd& g,
                                 const Scenario& scenario, double beta,
                                 const Eigen::VectorXd& omega_neg,
                                 const Eigen::VectorXd& omega_pos) {
  if (omega_neg.size() != scenario.neg.size ||
      omega_pos.size() != scenario.pos.size || g.cols() < scenario.p) {
    throw ValidationError("linear_predictor: weight lengths do not match the "
                          "scenario regions");
  }
  Eigen::VectorXd eta =
      Eigen::VectorXd::Constant(g.rows(), scenario.alpha0);
  if (scenario.neg.size > 0) {
    eta -= beta * g.middleCols(scenario.neg.start, scenario.neg.size) *
           omega_neg;
  }
  if (scenario.pos.size > 0) {
    eta += 2.0 * beta * g.middleCols(scenario.pos.start, scenario.pos.size) *
           omega_pos;
  }
  return eta;
}

Eigen::VectorXd simulate_outcome(const Eigen::MatrixXd& g,
                                 const Scenario& scenario, double beta,
                                 rng::Stream& stream) {
  if (beta < 0) throw ValidationError("simulate_outcome: beta must be >= 0");
  Eigen::VectorXd omega_neg = Eigen::VectorXd::Ones(scenario.neg.size);
  Eigen::VectorXd omega_pos = Eigen::VectorXd::Ones(scenario.pos.size);
  if (scenario.coef_mode == CoefMode::uniform) {
    for (Eigen::Index j = 0; j < omega_neg.size(); ++j) {
      omega_neg[j] = 0.5 + stream.next_double();
    }
    for (Eigen::Index j = 0; j < omega_pos.size(); ++j) {
      omega_pos[j] = 1.0 + 2.0 * stream.next_double();
    }
  }
  const Eigen::VectorXd eta =
      linear_predictor(g, scenario, beta, omega_neg, omega_pos);
  Eigen::VectorXd y(g.rows());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double prob = 1.0 / (1.0 + std::exp(-eta[i]));
    y[i] = stream.next_double() < prob ? 1.0 : 0.0;
  }
  return y;
}

std::string MethodSpec::name() const {
  switch (kind) {
    case Kind::pst_pca: return "pca:" + std::to_string(r);
    case Kind::pst_apca: return "apca";
    case Kind::spu_inf: return "spu_inf";
    case Kind::aspu: return "aspu";
  }
  return "unknown";
}

MethodSpec parse_method(const std::string& text) {
  MethodSpec spec;
  if (text == "apca") {
    spec.kind = MethodSpec::Kind::pst_apca;
    return spec;
  }
  if (text == "spu_inf") {
    spec.kind = MethodSpec::Kind::spu_inf;
    return spec;
  }
  if (text == "aspu") {
    spec.kind = MethodSpec::Kind::aspu;
    return spec;
  }
  if (text.rfind("pca:", 0) == 0) {
    spec.kind = MethodSpec::Kind::pst_pca;
    try {
      spec.r = std::stoi(text.substr(4));
    } catch (const std::exception&) {
      throw ValidationError("cannot parse method '" + text + "'");
    }
    if (spec.r < 1) throw ValidationError("method '" + text + "': r must be >= 1");
    return spec;
  }
  throw ValidationError("unknown method '" + text +
                        "' (expected pca:<r>, apca, spu_inf, or aspu)");
}

StudyReport run_study(const Scenario& scenario,
                      const std::vector<MethodSpec>& methods) {
  validate_scenario(scenario);
  if (methods.empty()) throw ValidationError("run_study: no methods given");

  const std::vector<RegionBlock> blocks = make_blocks(scenario);
  std::vector<bool> signal_loc(static_cast<std::size_t>(scenario.p), false);
  for (int j = scenario.neg.start; j < scenario.neg.start + scenario.neg.size;
       ++j) {
    signal_loc[static_cast<std::size_t>(j)] = true;
  }
  for (int j = scenario.pos.start; j < scenario.pos.start + scenario.pos.size;
       ++j) {
    signal_loc[static_cast<std::size_t>(j)] = true;
  }
  const bool any_pst =
      std::any_of(methods.begin(), methods.end(), [](const MethodSpec& m) {
        return m.kind == MethodSpec::Kind::pst_pca ||
               m.kind == MethodSpec::Kind::pst_apca;
      });

  StudyReport report;
  std::set<std::string> failure_set;

  for (std::size_t beta_index = 0; beta_index < scenario.betas.size();
       ++beta_index) {
    const double beta = scenario.betas[beta_index];

    // Calibrate the projected-score truth: mu_hat estimates E[S] under this
    // beta from an independent set of replicates.
    Eigen::VectorXd mu_hat = Eigen::VectorXd::Zero(scenario.p);
    if (beta > 0 && any_pst && scenario.calibration_replicates > 0) {
      std::vector<Eigen::VectorXd> cal(static_cast<std::size_t>(
          scenario.calibration_replicates));
      std::vector<char> cal_ok(cal.size(), 0);
      parallel_for(
          cal.size(),
          [&](std::size_t k) {
            const std::uint64_t cal_seed =
                rng::derive_seed(scenario.seed, 2 * beta_index + 1, k);
            rng::Stream design_stream(cal_seed, kDesignStream);
            rng::Stream outcome_stream(cal_seed, kOutcomeStream);
            try {
              const Eigen::MatrixXd g =
                  sample_design(scenario, blocks, design_stream);
              const Eigen::VectorXd y =
                  simulate_outcome(g, scenario, beta, outcome_stream);
              const Dataset data = make_intercept_dataset(g, y);
              const NullFit fit = fit_null(data);
              cal[k] = compute_scores(data, fit).s;
              cal_ok[k] = 1;
            } catch (const std::exception&) {
              cal_ok[k] = 0;
            }
          },
          scenario.threads);
      int used = 0;
      for (std::size_t k = 0; k < cal.size(); ++k) {
        if (cal_ok[k]) {
          mu_hat += cal[k];
          ++used;
        }
      }
      if (used == 0) {
        throw NumericError("run_study: every calibration replicate failed");
      }
      mu_hat /= static_cast<double>(used);
    }

    std::vector<RepResult> results(static_cast<std::size_t>(
        scenario.replicates));
    parallel_for(
        results.size(),
        [&](std::size_t rep) {
          RepResult& out = results[rep];
          out.methods.resize(methods.size());
          const std::uint64_t rep_seed =
              rng::derive_seed(scenario.seed, 2 * beta_index, rep);
          rng::Stream design_stream(rep_seed, kDesignStream);
          rng::Stream outcome_stream(rep_seed, kOutcomeStream);

          Dataset data;
          NullFit fit;
          ScoreModel scores;
          try {
            const Eigen::MatrixXd g =
                sample_design(scenario, blocks, design_stream);
            const Eigen::VectorXd y =
                simulate_outcome(g, scenario, beta, outcome_stream);
            data = make_intercept_dataset(g, y);
            fit = fit_null(data);
            scores = compute_scores(data, fit);
            out.ok = true;
          } catch (const std::exception& error) {
            out.error = error.what();
            return;
          }

          for (std::size_t mi = 0; mi < methods.size(); ++mi) {
            MethodRep& rep_out = out.methods[mi];
            const std::uint64_t method_seed =
                rng::derive_seed(rep_seed, 100 + mi);
            try {
              const MethodSpec& method = methods[mi];
              if (method.kind == MethodSpec::Kind::pst_pca ||
                  method.kind == MethodSpec::Kind::pst_apca) {
                Basis basis;
                if (method.kind == MethodSpec::Kind::pst_pca) {
                  basis = pca_basis(data, method.r);
                  rep_out.reject =
                      pst_statistic(scores, basis).p_value < scenario.alpha;
                } else {
                  const AdaptiveResult adaptive =
                      adaptive_pca_test(data, fit, scenario.alpha);
                  rep_out.reject = adaptive.overall_reject;
                  // Post hoc uses the explored basis; at least the first
                  // block even when the first step fails.
                  const Eigen::Index first_chunk =
                      adaptive.per_step.empty() ? 1 : adaptive.per_step[0].r;
                  const Eigen::Index r_use =
                      std::min(adaptive.basis.r(),
                               std::max(adaptive.selected_r, first_chunk));
                  basis.q = adaptive.basis.q.leftCols(r_use);
                  basis.kind = BasisKind::weighted_pca;
                }
                const PosthocResult posthoc = posthoc_inference(
                    scores, basis, scenario.alpha, scenario.mc_draws,
                    method_seed, 1, std::min(scenario.mc_draws, 1000));
                const Standardization standardization =
                    project_and_standardize(scores, basis);
                posthoc_metrics(posthoc, standardization, signal_loc, beta,
                                mu_hat, basis, scenario.truth_quantile,
                                scores.n, rep_out);
              } else {
                const PermutationScheme scheme(data, fit,
                                               scenario.permutations,
                                               method_seed, 1);
                if (method.kind == MethodSpec::Kind::spu_inf) {
                  rep_out.reject =
                      spu_test(scores, spu_infinity, scheme).p_value <
                      scenario.alpha;
                } else {
                  rep_out.reject =
                      aspu_test(scores, default_aspu_gammas(), scheme)
                          .p_value < scenario.alpha;
                }
              }
              rep_out.ok = true;
            } catch (const std::exception& error) {
              rep_out.error = error.what();
            }
          }
        },
        scenario.threads);

    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      MethodBetaStats stats;
      stats.method = methods[mi].name();
      stats.beta = beta;
      int used = 0, failures = 0, posthoc_count = 0;
      double rejects = 0, proj_fwer = 0, proj_fdr = 0, proj_power = 0;
      double unproj_fwer = 0, unproj_fdr = 0, unproj_hit = 0, loc_false = 0;
      for (const RepResult& rep : results) {
        if (!rep.ok) {
          ++failures;
          failure_set.insert(rep.error);
          continue;
        }
        const MethodRep& m = rep.methods[mi];
        if (!m.ok) {
          ++failures;
          failure_set.insert(m.error);
          continue;
        }
        ++used;
        rejects += m.reject ? 1 : 0;
        if (m.has_posthoc) {
          ++posthoc_count;
          proj_fwer += m.proj_any_false ? 1 : 0;
          proj_fdr += m.proj_fdp;
          proj_power += m.proj_power;
          unproj_fwer += m.unproj_any_false ? 1 : 0;
          unproj_fdr += m.unproj_fdp;
          unproj_hit += m.unproj_hit;
          loc_false += m.loc_false_frac;
        }
      }
      stats.replicates_used = used;
      stats.failures = failures;
      stats.reject_rate = used > 0 ? rejects / used : 0.0;
      stats.reject_se = rate_se(stats.reject_rate, used);
      if (posthoc_count > 0) {
        stats.proj_fwer = proj_fwer / posthoc_count;
        stats.proj_fwer_se = rate_se(stats.proj_fwer, posthoc_count);
        stats.proj_fdr = proj_fdr / posthoc_count;
        stats.proj_power = proj_power / posthoc_count;
        stats.unproj_fwer = unproj_fwer / posthoc_count;
        stats.unproj_fdr = unproj_fdr / posthoc_count;
        stats.unproj_hit_rate = unproj_hit / posthoc_count;
        stats.loc_type1_rate = loc_false / posthoc_count;
      } else {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        stats.proj_fwer = stats.proj_fwer_se = stats.proj_fdr = nan;
        stats.proj_power = stats.unproj_fwer = stats.unproj_fdr = nan;
        stats.unproj_hit_rate = stats.loc_type1_rate = nan;
      }
      report.rows.push_back(stats);
    }
  }
  report.failure_messages.assign(failure_set.begin(), failure_set.end());
  return report;
}

BasisFunction fourier_basis_fn() {
  return [](int j, double v) {
    if (j == 0) return 1.0;
    const int harmonic = (j + 1) / 2;
    const double angle = 2.0 * std::numbers::pi * harmonic * v;
    return std::numbers::sqrt2 * (j % 2 == 1 ? std::cos(angle)
                                             : std::sin(angle));
  };
}

double grid_statistic(const Eigen::VectorXd& y,
                      const Eigen::MatrixXd& field_fine, int grid_size,
                      const BasisFunction& basis_fn, int r) {
  const int p_max = static_cast<int>(field_fine.cols());
  if (grid_size < 1 || p_max % grid_size != 0) {
    std::ostringstream what;
    what << "grid statistic: grid size " << grid_size
         << " does not nest into the finest grid " << p_max;
    throw ValidationError(what.str());
  }
  const int stride = p_max / grid_size;

  Dataset data;
  data.y = y;
  data.x = Eigen::MatrixXd::Ones(y.size(), 1);
  data.family = Family::gaussian;
  data.g.resize(y.size(), grid_size);
  Eigen::MatrixXd basis_values(grid_size, r);
  for (int k = 0; k < grid_size; ++k) {
    data.g.col(k) = field_fine.col(static_cast<Eigen::Index>(k) * stride);
    const double v = static_cast<double>(k) / grid_size;
    for (int j = 0; j < r; ++j) basis_values(k, j) = basis_fn(j, v);
  }
  const NullFit fit = fit_null(data);
  const ScoreModel scores = compute_scores(data, fit);
  // The statistic depends on the basis only through its column space, so
  // orthonormalizing the discretized functions changes nothing.
  return pst_statistic(scores, custom_basis(basis_values)).statistic;
}

GridStudyReport grid_refinement_study(const GridStudyConfig& config) {
  if (config.grid_sizes.size() < 2) {
    throw ValidationError("grid study: need at least two grid sizes");
  }
  for (std::size_t t = 0; t + 1 < config.grid_sizes.size(); ++t) {
    const int coarse = config.grid_sizes[t];
    const int fine = config.grid_sizes[t + 1];
    if (coarse < 1 || fine <= coarse || fine % coarse != 0) {
      std::ostringstream what;
      what << "grid study: sizes must be strictly increasing nested "
              "refinements; "
           << fine << " is not a multiple of " << coarse;
      throw ValidationError(what.str());
    }
  }
  if (config.r < 1 || config.r >= config.n - 1) {
    throw ValidationError("grid study: need 1 <= r < n - 1");
  }
  if (config.replicates < 1) {
    throw ValidationError("grid study: replicates must be >= 1");
  }

  const int p_max = config.grid_sizes.back();
  const int h = config.harmonics;

  // Harmonic tables on the finest grid; coarser grids subsample them.
  Eigen::MatrixXd cos_table(h, p_max), sin_table(h, p_max);
  for (int k = 0; k < p_max; ++k) {
    const double v = static_cast<double>(k) / p_max;
    for (int j = 0; j < h; ++j) {
      cos_table(j, k) = std::cos(2.0 * std::numbers::pi * (j + 1) * v);
      sin_table(j, k) = std::sin(2.0 * std::numbers::pi * (j + 1) * v);
    }
  }

  GridStudyReport report;
  report.grid_sizes = config.grid_sizes;
  report.statistics.resize(config.replicates,
                           static_cast<Eigen::Index>(config.grid_sizes.size()));

  parallel_for(
      static_cast<std::size_t>(config.replicates),
      [&](std::size_t rep) {
        rng::Stream stream(rng::derive_seed(config.seed, 0xF1E1D, rep), 0);
        // Smooth random field per subject: offset, damped harmonics, and a
        // localized bump. The bump is not band limited, so coarse grids
        // carry real discretization error and refinement has work to do.
        Eigen::VectorXd offset(config.n);
        Eigen::MatrixXd coef_cos(config.n, h), coef_sin(config.n, h);
        Eigen::VectorXd bump_amp(config.n), bump_center(config.n),
            bump_width(config.n);
        for (int i = 0; i < config.n; ++i) {
          offset[i] = stream.next_normal();
          for (int j = 0; j < h; ++j) {
            const double damping = 1.0 / ((j + 1.0) * (j + 1.0));
            coef_cos(i, j) = damping * stream.next_normal();
            coef_sin(i, j) = damping * stream.next_normal();
          }
          bump_amp[i] = 2.0 * stream.next_normal();
          bump_center[i] = 0.25 + 0.5 * stream.next_double();
          bump_width[i] = 0.03 + 0.05 * stream.next_double();
        }
        // Outcome tied to the field's mean level so the statistic is O(n).
        Eigen::VectorXd y(config.n);
        for (int i = 0; i < config.n; ++i) {
          y[i] = offset[i] + stream.next_normal();
        }
        Eigen::MatrixXd field_fine =
            (offset * Eigen::RowVectorXd::Ones(p_max)) +
            coef_cos * cos_table + coef_sin * sin_table;
        for (int i = 0; i < config.n; ++i) {
          for (int k = 0; k < p_max; ++k) {
            const double shift =
                (static_cast<double>(k) / p_max - bump_center[i]) /
                bump_width[i];
            field_fine(i, k) += bump_amp[i] * std::exp(-0.5 * shift * shift);
          }
        }

        for (std::size_t t = 0; t < config.grid_sizes.size(); ++t) {
          report.statistics(static_cast<Eigen::Index>(rep),
                            static_cast<Eigen::Index>(t)) =
              grid_statistic(y, field_fine, config.grid_sizes[t],
                             fourier_basis_fn(), config.r);
        }
      },
      config.threads);

  for (std::size_t t = 0; t + 1 < config.grid_sizes.size(); ++t) {
    std::vector<double> changes;
    for (int rep = 0; rep < config.replicates; ++rep) {
      const double coarse = report.statistics(rep, static_cast<Eigen::Index>(t));
      const double fine =
          report.statistics(rep, static_cast<Eigen::Index>(t + 1));
      changes.push_back(std::abs(fine - coarse) / std::abs(coarse));
    }
    std::sort(changes.begin(), changes.end());
    const std::size_t mid = changes.size() / 2;
    report.median_rel_change.push_back(
        changes.size() % 2 == 1
            ? changes[mid]
            : 0.5 * (changes[mid - 1] + changes[mid]));
  }
  return report;
}

}  // namespace pst::sim
