#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pst/dataset.hpp"
#include "pst/rng.hpp"

namespace pst::sim {

enum class CovKind { identity, ar1, exchangeable };

struct CovarianceSpec {
  CovKind kind = CovKind::identity;
  double rho = 0.0;
  double scale = 1.0;  // marginal variance
};

// Contiguous predictor block drawn from its own multivariate normal.
struct Region {
  int start = 0;
  int size = 0;
  CovarianceSpec cov;
};

enum class CoefMode { constant, uniform };

struct Scenario {
  int n = 200;
  int p = 200;
  Region neg;  // negative association with the outcome
  Region pos;  // positive association, doubled weight
  CovarianceSpec null_cov;  // remaining predictors
  std::vector<double> betas = {0.0};
  CoefMode coef_mode = CoefMode::constant;
  int replicates = 1000;
  std::uint64_t seed = 0;
  double alpha0 = std::log(399.0 / 229.0);
  bool center = true;  // per-replicate column centering of G
  double alpha = 0.05;
  int mc_draws = 10000;      // posthoc Monte Carlo draws
  int permutations = 1000;   // SPU / aSPU permutations
  int calibration_replicates = 200;  // for the projected-score truth mean
  double truth_quantile = 0.2;
  unsigned threads = 0;
};

void validate_scenario(const Scenario& scenario);

// Draws the predictor block: each region from its multivariate normal via
// a triangular factorization, plus optional column centering.
Eigen::MatrixXd generate_design(const Scenario& scenario, rng::Stream& stream);

// Bernoulli outcomes from logit(E y_i) = alpha0 - beta w1'G_neg + 2 beta
// w2'G_pos. Uniform mode draws w1 ~ U(0.5, 1.5), w2 ~ U(1, 3) per replicate.
Eigen::VectorXd simulate_outcome(const Eigen::MatrixXd& g,
                                 const Scenario& scenario, double beta,
                                 rng::Stream& stream);

// The linear predictor for given weights; exposed for direct checks.
Eigen::VectorXd linear_predictor(const Eigen::MatrixXd& g,
                                 const Scenario& scenario, double beta,
                                 const Eigen::VectorXd& omega_neg,
                                 const Eigen::VectorXd& omega_pos);

struct MethodSpec {
  enum class Kind { pst_pca, pst_apca, spu_inf, aspu };
  Kind kind = Kind::pst_pca;
  int r = 10;  // pca dimension (pst_pca only)

  std::string name() const;
};

MethodSpec parse_method(const std::string& text);

struct MethodBetaStats {
  std::string method;
  double beta = 0;
  int replicates_used = 0;
  int failures = 0;
  double reject_rate = 0;  // global test
  double reject_se = 0;
  // post hoc metrics; NaN for methods without a posthoc stage
  double proj_fwer = 0, proj_fwer_se = 0, proj_fdr = 0, proj_power = 0;
  double unproj_fwer = 0, unproj_fdr = 0, unproj_hit_rate = 0;
  double loc_type1_rate = 0;
};

struct StudyReport {
  std::vector<MethodBetaStats> rows;
  std::vector<std::string> failure_messages;  // deduplicated, for the manifest
};

StudyReport run_study(const Scenario& scenario,
                      const std::vector<MethodSpec>& methods);

// Nested-grid convergence study: a smooth latent field per subject is
// discretized at each grid size and the statistic is tracked as the grid
// refines. Grid sizes must be strictly increasing, each dividing the next.
struct GridStudyConfig {
  int n = 40;
  std::vector<int> grid_sizes = {32, 64, 128, 256, 512, 1024, 2048, 4096};
  int r = 3;           // smooth basis functions (Fourier)
  int harmonics = 12;  // latent field harmonics
  int replicates = 100;
  std::uint64_t seed = 0;
  unsigned threads = 0;
};

struct GridStudyReport {
  std::vector<int> grid_sizes;
  Eigen::MatrixXd statistics;              // replicates x grids
  std::vector<double> median_rel_change;   // one per grid transition
};

GridStudyReport grid_refinement_study(const GridStudyConfig& config);

// basis_fn(j, v): j-th basis function at v in [0, 1)
using BasisFunction = std::function<double(int, double)>;

// 1, sqrt(2) cos(2 pi v), sqrt(2) sin(2 pi v), sqrt(2) cos(4 pi v), ...
BasisFunction fourier_basis_fn();

// Statistic for one grid: subsample the finest-grid field at the matching
// stride, discretize the basis functions, and run the projected test.
double grid_statistic(const Eigen::VectorXd& y,
                      const Eigen::MatrixXd& field_fine, int grid_size,
                      const BasisFunction& basis_fn, int r);

}  // namespace pst::sim
