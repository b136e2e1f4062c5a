#include "pst/posthoc.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pst/errors.hpp"
#include "pst/parallel.hpp"
#include "pst/rng.hpp"

namespace pst {

namespace {

constexpr double kPsdRelTolerance = 1e-10;

struct Standardizer {
  Eigen::MatrixXd scaled_map;  // delta * Q * V^{1/2}, p x r
  Eigen::VectorXd delta;       // 0 at undefined locations
  std::vector<int> undefined_locations;
};

// Builds delta and the map used both for the observed standardization and
// for the Monte Carlo null draws. Negative eigenvalues of V beyond the PSD
// tolerance are an error; within tolerance they are clipped to zero.
Standardizer make_standardizer(const ScoreModel& scores, const Basis& basis) {
  const Eigen::MatrixXd v = scores.v_hat(basis.q);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(v);
  const double max_eig = std::max(eig.eigenvalues().maxCoeff(), 0.0);
  const double floor = -kPsdRelTolerance * std::max(max_eig, 1.0);
  Eigen::VectorXd roots(eig.eigenvalues().size());
  for (Eigen::Index i = 0; i < roots.size(); ++i) {
    const double lambda = eig.eigenvalues()[i];
    if (lambda < floor) {
      std::ostringstream what;
      what << "V_hat is not positive semidefinite: eigenvalue " << lambda
           << " below tolerance";
      throw NumericError(what.str());
    }
    roots[i] = std::sqrt(std::max(lambda, 0.0));
  }
  const Eigen::MatrixXd v_sqrt = eig.eigenvectors() * roots.asDiagonal() *
                                 eig.eigenvectors().transpose();

  Standardizer out;
  out.scaled_map = basis.q * v_sqrt;  // rows give V^{1/2} Q' e_j
  const Eigen::Index p = basis.p();
  out.delta = Eigen::VectorXd::Zero(p);
  const double cutoff =
      kPsdRelTolerance * std::max(out.scaled_map.rowwise().squaredNorm().maxCoeff(), 0.0);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double variance = out.scaled_map.row(j).squaredNorm();
    if (variance <= cutoff) {
      out.undefined_locations.push_back(static_cast<int>(j));
      out.scaled_map.row(j).setZero();
    } else {
      out.delta[j] = 1.0 / std::sqrt(variance);
      out.scaled_map.row(j) *= out.delta[j];
    }
  }
  if (static_cast<Eigen::Index>(out.undefined_locations.size()) == p) {
    throw NumericError(
        "every projected score has numerically zero variance; nothing to "
        "standardize");
  }
  return out;
}

double empirical_quantile(const std::vector<double>& sorted, double level) {
  // k-th order statistic, k = ceil(level * B), clamped to the sample
  const std::size_t b = sorted.size();
  std::size_t k = static_cast<std::size_t>(
      std::ceil(level * static_cast<double>(b)));
  if (k < 1) k = 1;
  if (k > b) k = b;
  return sorted[k - 1];
}

}  // namespace

Standardization project_and_standardize(const ScoreModel& scores,
                                        const Basis& basis) {
  if (basis.p() != scores.p()) {
    throw ValidationError("project_and_standardize: dimension mismatch");
  }
  const Standardizer std_map = make_standardizer(scores, basis);
  Standardization out;
  out.projected = basis.q * (basis.q.transpose() * scores.s);
  out.delta = std_map.delta;
  out.undefined_locations = std_map.undefined_locations;
  out.standardized = std::sqrt(static_cast<double>(scores.n)) *
                     std_map.delta.cwiseProduct(out.projected);
  return out;
}

McNull mc_null_distribution(const Basis& basis, const ScoreModel& scores,
                            int b, std::uint64_t seed, unsigned threads,
                            int min_b) {
  if (b < min_b) {
    std::ostringstream what;
    what << "Monte Carlo sample size b = " << b << " is below the floor "
         << min_b;
    throw ValidationError(what.str());
  }
  const Standardizer std_map = make_standardizer(scores, basis);
  const Eigen::Index r = basis.r();

  McNull null_dist;
  null_dist.sorted_max.assign(static_cast<std::size_t>(b), 0.0);
  parallel_for(
      static_cast<std::size_t>(b),
      [&](std::size_t draw) {
        rng::Stream stream(seed, draw);
        Eigen::VectorXd z(r);
        for (Eigen::Index i = 0; i < r; ++i) z[i] = stream.next_normal();
        null_dist.sorted_max[draw] =
            (std_map.scaled_map * z).cwiseAbs().maxCoeff();
      },
      threads);
  std::sort(null_dist.sorted_max.begin(), null_dist.sorted_max.end());
  return null_dist;
}

std::vector<int> PosthocResult::rejected_locations() const {
  std::vector<int> out;
  for (Eigen::Index j = 0; j < standardized.size(); ++j) {
    if (std::abs(standardized[j]) > threshold_c) out.push_back(static_cast<int>(j));
  }
  return out;
}

PosthocResult posthoc_inference(const ScoreModel& scores, const Basis& basis,
                                double alpha, int b, std::uint64_t seed,
                                unsigned threads, int min_b) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ValidationError("posthoc: alpha must lie in (0, 1)");
  }
  const Standardization standardized = project_and_standardize(scores, basis);
  const McNull null_dist = mc_null_distribution(basis, scores, b, seed,
                                                threads, min_b);

  PosthocResult result;
  result.projected = standardized.projected;
  result.standardized = standardized.standardized;
  result.undefined_locations = standardized.undefined_locations;
  result.alpha = alpha;
  result.b = b;
  result.seed = seed;
  result.max_null_samples = null_dist.sorted_max;
  result.threshold_c = empirical_quantile(null_dist.sorted_max, 1.0 - alpha);

  const auto& sorted = null_dist.sorted_max;
  const double denom = static_cast<double>(b) + 1.0;
  result.p_values.resize(standardized.standardized.size());
  for (Eigen::Index j = 0; j < result.p_values.size(); ++j) {
    const double t = std::abs(standardized.standardized[j]);
    const auto first_ge = std::lower_bound(sorted.begin(), sorted.end(), t);
    const auto count_ge = static_cast<double>(sorted.end() - first_ge);
    result.p_values[j] = (1.0 + count_ge) / denom;
  }
  for (const int j : standardized.undefined_locations) {
    result.p_values[j] = 1.0;
  }
  return result;
}

}  // namespace pst
