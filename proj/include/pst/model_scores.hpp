#pragma once

#include <Eigen/Dense>

#include "pst/dataset.hpp"

namespace pst {

struct NullFit {
  Eigen::VectorXd alpha_hat;  // length m
  Eigen::VectorXd fitted;     // length n
  Eigen::VectorXd gamma;      // length n, (y_i - fitted_i)^2
  double sigma2_hat = 0.0;    // gaussian only: rss / n
  int iterations = 0;
  bool converged = true;
};

struct FitOptions {
  int max_iterations = 50;
  double tolerance = 1e-8;        // max abs coefficient change
  double separation_bound = 1e2;  // |coef| beyond this flags separation
};

// Fits the covariate-only null model: closed-form least squares for the
// gaussian family, IRLS with the logit link for the binomial family.
NullFit fit_null(const Dataset& data, const FitOptions& opts = {});

// Score vector for the predictor block together with the effective
// information in factored form, omega_hat = info_factor' info_factor / n.
// The p x p information is never materialized here.
struct ScoreModel {
  Eigen::VectorXd s;            // length p
  Eigen::MatrixXd info_factor;  // n x p
  Eigen::Index n = 0;
  Eigen::Index m = 0;  // nuisance rank, needed for the r < n - m constraint

  Eigen::Index p() const { return s.size(); }

  // v' omega_hat v
  double quad_form(const Eigen::VectorXd& v) const;
  // Q' omega_hat Q, r x r for a p x r matrix Q
  Eigen::MatrixXd v_hat(const Eigen::MatrixXd& q) const;
};

ScoreModel compute_scores(const Dataset& data, const NullFit& fit);

// The factor F with omega_hat = F'F / n, shared by compute_scores and the
// weighted PCA basis. Binomial: F = W^{1/2}G - W^{1/2}X(X'WX)^{-1}X'WG with
// W = diag((y - fitted)^2). Gaussian: W = sigma2_hat * I, which collapses to
// F = sigma_hat * (I - H)G.
Eigen::MatrixXd information_factor(const Dataset& data, const NullFit& fit);

struct ResidualRotation {
  Eigen::VectorXd y_rot;  // length n - m
  Eigen::MatrixXd g_rot;  // (n - m) x p
};

// Rotates outcome and predictors by an orthonormal basis A of the orthogonal
// complement of col(X), so AA' = I - H and A'A = I. Gaussian family only.
ResidualRotation residual_rotation(const Dataset& data);

}  // namespace pst
