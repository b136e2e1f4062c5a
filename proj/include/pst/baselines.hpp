#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "pst/dataset.hpp"
#include "pst/model_scores.hpp"

namespace pst {

struct TestOutcome {
  double statistic = 0;
  double p_value = 1;
  Eigen::Index df = 0;
};

// One-df score test with fixed weights: n (s'zeta)^2 / (zeta' omega_hat zeta).
TestOutcome sum_test(const ScoreModel& scores, const Eigen::VectorXd& zeta);

// Classical Rao test n s' omega_hat^{-1} s on p degrees of freedom.
// Requires p < n - m so the information is invertible.
TestOutcome rao_score_test(const ScoreModel& scores);

// Resampling engine for the permutation baselines. Strategy by family:
// gaussian uses residual permutation re-residualized against X
// (Freedman-Lane); binomial with an intercept-only design permutes outcome
// labels; binomial with covariates permutes labels and refits the null.
class PermutationScheme {
 public:
  PermutationScheme(const Dataset& data, const NullFit& fit, int count,
                    std::uint64_t seed, unsigned threads = 0);

  int count() const { return count_; }
  std::uint64_t seed() const { return seed_; }
  unsigned threads() const { return threads_; }

  // Score vector under the index-th permutation; pure function of
  // (seed, index).
  Eigen::VectorXd permuted_scores(int index) const;

 private:
  enum class Strategy { gaussian_residual, label_permutation, label_refit };

  Strategy strategy_;
  int count_;
  std::uint64_t seed_;
  unsigned threads_;
  Eigen::MatrixXd g_;
  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;
  Eigen::VectorXd residuals_;  // gaussian strategy
  Eigen::VectorXd fitted_;     // label permutation strategy
  Eigen::MatrixXd x_basis_;    // orthonormal basis of col(X), gaussian strategy
};

inline constexpr int spu_infinity = 0;  // gamma tag for the max statistic

// Sum of powered scores: sum_j s_j^gamma for finite gamma >= 1, max_j |s_j|
// for spu_infinity. Permutation p-value on |statistic|.
TestOutcome spu_test(const ScoreModel& scores, int gamma,
                     const PermutationScheme& scheme);

struct AspuResult {
  double min_p_statistic = 1;  // smallest per-gamma permutation p-value
  double p_value = 1;
  std::vector<std::pair<int, double>> per_gamma_p;
};

// Adaptive SPU: min-p combination over the gamma set, calibrated on the
// shared permutation ensemble.
AspuResult aspu_test(const ScoreModel& scores, std::vector<int> gammas,
                     const PermutationScheme& scheme);

inline std::vector<int> default_aspu_gammas() {
  return {1, 2, 3, 4, 5, 6, spu_infinity};
}

}  // namespace pst
