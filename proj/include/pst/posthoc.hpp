#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "pst/basis.hpp"
#include "pst/model_scores.hpp"

namespace pst {

// Projected scores Q Q's and their standardization. standardized is
// sqrt(n) * delta * projected, the scale on which the Monte Carlo null of
// ||delta Q V^{1/2} Z||_inf lives. Locations whose projected variance is
// numerically zero are flagged and excluded from the maximum.
struct Standardization {
  Eigen::VectorXd projected;
  Eigen::VectorXd standardized;  // 0 at undefined locations
  Eigen::VectorXd delta;         // 0 at undefined locations
  std::vector<int> undefined_locations;
};

Standardization project_and_standardize(const ScoreModel& scores,
                                        const Basis& basis);

struct McNull {
  std::vector<double> sorted_max;  // B draws of ||delta Q V^{1/2} Z||_inf
};

// b independent N_r(0, I) draws, each mapped through the r-dimensional
// square root and maximized over retained locations. One Philox stream per
// draw index, so the sample is identical at any thread count.
McNull mc_null_distribution(const Basis& basis, const ScoreModel& scores,
                            int b, std::uint64_t seed, unsigned threads = 0,
                            int min_b = 1000);

struct PosthocResult {
  Eigen::VectorXd projected;
  Eigen::VectorXd standardized;
  Eigen::VectorXd p_values;  // smoothed: (1 + #{draws >= |t_j|}) / (B + 1)
  std::vector<int> undefined_locations;
  double threshold_c = 0;  // empirical (1 - alpha) quantile of the max null
  double alpha = 0;
  int b = 0;
  std::uint64_t seed = 0;
  std::vector<double> max_null_samples;  // sorted, retained for audit

  bool rejected(Eigen::Index j) const {
    return std::abs(standardized[j]) > threshold_c;
  }
  std::vector<int> rejected_locations() const;
};

// Single-step maxT inference on the standardized projected scores.
PosthocResult posthoc_inference(const ScoreModel& scores, const Basis& basis,
                                double alpha, int b, std::uint64_t seed,
                                unsigned threads = 0, int min_b = 1000);

}  // namespace pst
