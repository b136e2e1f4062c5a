#include "pst/baselines.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "pst/dist.hpp"
#include "pst/errors.hpp"
#include "pst/parallel.hpp"
#include "pst/rng.hpp"

namespace pst {

namespace {

double spu_statistic(const Eigen::VectorXd& s, int gamma) {
  if (gamma == spu_infinity) return s.cwiseAbs().maxCoeff();
  double total = 0;
  for (Eigen::Index j = 0; j < s.size(); ++j) {
    total += std::pow(s[j], gamma);
  }
  return total;
}

void check_gamma(int gamma) {
  if (gamma != spu_infinity && gamma < 1) {
    std::ostringstream what;
    what << "SPU power gamma = " << gamma
         << " must be a positive integer or spu_infinity";
    throw ValidationError(what.str());
  }
}

}  // namespace

TestOutcome sum_test(const ScoreModel& scores, const Eigen::VectorXd& zeta) {
  if (zeta.size() != scores.p()) {
    throw ValidationError("sum test: zeta length does not match p");
  }
  if (zeta.isZero(0.0)) {
    throw ValidationError("sum test: zeta must be nonzero");
  }
  const double denom = scores.quad_form(zeta);
  const double scale = scores.info_factor.squaredNorm() /
                       static_cast<double>(scores.n) * zeta.squaredNorm();
  if (denom <= 0 || denom <= scale * 1e-14) {
    throw NumericError(
        "sum test: zeta' omega_hat zeta is numerically zero; the weights lie "
        "in the null space of the information");
  }
  TestOutcome outcome;
  const double inner = scores.s.dot(zeta);
  outcome.statistic = static_cast<double>(scores.n) * inner * inner / denom;
  outcome.df = 1;
  outcome.p_value = dist::chi_squared_sf(outcome.statistic, 1.0);
  return outcome;
}

TestOutcome rao_score_test(const ScoreModel& scores) {
  const Eigen::Index p = scores.p();
  if (p >= scores.n - scores.m) {
    std::ostringstream what;
    what << "Rao score test: omega_hat is singular for p = " << p
         << " >= n - m = " << scores.n - scores.m;
    throw NumericError(what.str());
  }
  const Eigen::MatrixXd omega = scores.info_factor.transpose() *
                                scores.info_factor /
                                static_cast<double>(scores.n);
  const Eigen::LLT<Eigen::MatrixXd> llt(omega);
  if (llt.info() != Eigen::Success) {
    throw NumericError("Rao score test: omega_hat is not invertible");
  }
  TestOutcome outcome;
  outcome.statistic =
      static_cast<double>(scores.n) * scores.s.dot(llt.solve(scores.s));
  outcome.df = p;
  outcome.p_value =
      dist::chi_squared_sf(outcome.statistic, static_cast<double>(p));
  return outcome;
}

PermutationScheme::PermutationScheme(const Dataset& data, const NullFit& fit,
                                     int count, std::uint64_t seed,
                                     unsigned threads)
    : count_(count), seed_(seed), threads_(threads) {
  validate(data);
  if (count < 1) throw ValidationError("permutation count must be >= 1");
  const double y_mean = data.y.mean();
  if ((data.y.array() - y_mean).abs().maxCoeff() == 0.0) {
    throw ValidationError(
        "degenerate permutation scheme: the outcome is constant");
  }
  g_ = data.g;
  y_ = data.y;
  residuals_ = data.y - fit.fitted;

  if (data.family == Family::gaussian) {
    strategy_ = Strategy::gaussian_residual;
    if (data.m() > 0) {
      const Eigen::HouseholderQR<Eigen::MatrixXd> qr(data.x);
      x_basis_ = qr.householderQ() *
                 Eigen::MatrixXd::Identity(data.n(), data.m());
    }
    return;
  }

  const bool intercept_only =
      data.m() == 0 ||
      (data.m() == 1 &&
       (data.x.col(0).array() - data.x(0, 0)).abs().maxCoeff() == 0.0);
  if (intercept_only) {
    // Null fitted values are permutation invariant here, so the scores can
    // be recomputed without refitting.
    strategy_ = Strategy::label_permutation;
    fitted_ = fit.fitted;
  } else {
    strategy_ = Strategy::label_refit;
    x_ = data.x;
  }
}

Eigen::VectorXd PermutationScheme::permuted_scores(int index) const {
  const Eigen::Index n = g_.rows();
  rng::Stream stream(seed_, static_cast<std::uint64_t>(index));

  if (strategy_ == Strategy::label_refit) {
    // Label permutation with a refit of the null model. A permuted fit can
    // hit separation; retry on a derived stream so the result stays a pure
    // function of (seed, index).
    for (int attempt = 0; attempt < 8; ++attempt) {
      const std::vector<int> perm = stream.permutation(static_cast<int>(n));
      Dataset permuted;
      permuted.x = x_;
      permuted.g = g_;
      permuted.family = Family::binomial;
      permuted.y.resize(n);
      for (Eigen::Index i = 0; i < n; ++i) permuted.y[i] = y_[perm[i]];
      try {
        const NullFit refit = fit_null(permuted);
        return compute_scores(permuted, refit).s;
      } catch (const NumericError&) {
        stream = rng::Stream(rng::derive_seed(seed_, index, attempt + 1), 0);
      }
    }
    throw NumericError(
        "permutation scheme: null refits kept failing under permuted labels");
  }

  const std::vector<int> perm = stream.permutation(static_cast<int>(n));
  Eigen::VectorXd shuffled(n);
  if (strategy_ == Strategy::label_permutation) {
    for (Eigen::Index i = 0; i < n; ++i) shuffled[i] = y_[perm[i]];
    return g_.transpose() * (shuffled - fitted_) / static_cast<double>(n);
  }

  // Gaussian residual permutation, re-residualized against X.
  for (Eigen::Index i = 0; i < n; ++i) shuffled[i] = residuals_[perm[i]];
  if (x_basis_.cols() > 0) {
    shuffled -= x_basis_ * (x_basis_.transpose() * shuffled);
  }
  return g_.transpose() * shuffled / static_cast<double>(n);
}

TestOutcome spu_test(const ScoreModel& scores, int gamma,
                     const PermutationScheme& scheme) {
  check_gamma(gamma);
  if (scheme.count() < 1) {
    throw ValidationError("spu test: empty permutation scheme");
  }
  const double observed = std::abs(spu_statistic(scores.s, gamma));
  std::vector<double> permuted(static_cast<std::size_t>(scheme.count()));
  parallel_for(
      permuted.size(),
      [&](std::size_t b) {
        permuted[b] = std::abs(spu_statistic(
            scheme.permuted_scores(static_cast<int>(b)), gamma));
      },
      scheme.threads());
  double count_ge = 0;
  for (const double value : permuted) {
    if (value >= observed) ++count_ge;
  }
  TestOutcome outcome;
  outcome.statistic = spu_statistic(scores.s, gamma);
  outcome.df = 0;
  outcome.p_value =
      (1.0 + count_ge) / (static_cast<double>(scheme.count()) + 1.0);
  return outcome;
}

AspuResult aspu_test(const ScoreModel& scores, std::vector<int> gammas,
                     const PermutationScheme& scheme) {
  if (gammas.empty()) {
    throw ValidationError("aspu test: the gamma set is empty");
  }
  for (const int gamma : gammas) check_gamma(gamma);

  const std::size_t n_gamma = gammas.size();
  const std::size_t b = static_cast<std::size_t>(scheme.count());

  std::vector<double> observed(n_gamma);
  for (std::size_t k = 0; k < n_gamma; ++k) {
    observed[k] = std::abs(spu_statistic(scores.s, gammas[k]));
  }

  // permuted[k][b]: |T_b| for gamma_k, from one shared ensemble
  std::vector<std::vector<double>> permuted(n_gamma,
                                            std::vector<double>(b, 0.0));
  parallel_for(
      b,
      [&](std::size_t idx) {
        const Eigen::VectorXd s =
            scheme.permuted_scores(static_cast<int>(idx));
        for (std::size_t k = 0; k < n_gamma; ++k) {
          permuted[k][idx] = std::abs(spu_statistic(s, gammas[k]));
        }
      },
      scheme.threads());

  std::vector<std::vector<double>> sorted = permuted;
  for (auto& column : sorted) std::sort(column.begin(), column.end());

  const auto count_ge = [](const std::vector<double>& asc, double value) {
    return static_cast<double>(
        asc.end() - std::lower_bound(asc.begin(), asc.end(), value));
  };

  AspuResult result;
  result.min_p_statistic = 1.0;
  for (std::size_t k = 0; k < n_gamma; ++k) {
    const double p_k = (1.0 + count_ge(sorted[k], observed[k])) /
                       (static_cast<double>(b) + 1.0);
    result.per_gamma_p.emplace_back(gammas[k], p_k);
    result.min_p_statistic = std::min(result.min_p_statistic, p_k);
  }

  // min-p for each permutation against the rest of the ensemble
  std::vector<double> min_p(b, 1.0);
  for (std::size_t idx = 0; idx < b; ++idx) {
    for (std::size_t k = 0; k < n_gamma; ++k) {
      // #{b' >= value} includes the draw itself, matching the smoothed
      // numerator (1 + #{b' != b}) over B
      const double p_bk =
          count_ge(sorted[k], permuted[k][idx]) / static_cast<double>(b);
      min_p[idx] = std::min(min_p[idx], p_bk);
    }
  }
  double count_le = 0;
  for (const double value : min_p) {
    if (value <= result.min_p_statistic) ++count_le;
  }
  result.p_value = (1.0 + count_le) / (static_cast<double>(b) + 1.0);
  return result;
}

}  // namespace pst
