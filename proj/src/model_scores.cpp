#include "pst/model_scores.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <cmath>
#include <limits>
#include <sstream>

#include "pst/errors.hpp"

namespace pst {

namespace {

NullFit fit_gaussian(const Dataset& data) {
  NullFit fit;
  const Eigen::Index n = data.n();
  if (data.m() > 0) {
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(data.x);
    fit.alpha_hat = qr.solve(data.y);
    fit.fitted = data.x * fit.alpha_hat;
  } else {
    fit.alpha_hat.resize(0);
    fit.fitted = Eigen::VectorXd::Zero(n);
  }
  fit.gamma = (data.y - fit.fitted).array().square();
  fit.sigma2_hat = fit.gamma.sum() / static_cast<double>(n);
  fit.iterations = 0;
  fit.converged = true;
  return fit;
}

NullFit fit_binomial(const Dataset& data, const FitOptions& opts) {
  NullFit fit;
  const Eigen::Index n = data.n();
  const Eigen::Index m = data.m();
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd mu = Eigen::VectorXd::Constant(n, 0.5);
  int iter = 0;
  bool converged = (m == 0);
  while (!converged) {
    if (iter >= opts.max_iterations) {
      std::ostringstream what;
      what << "null model IRLS did not converge after " << iter
           << " iterations";
      throw ConvergenceError(what.str(), iter);
    }
    const Eigen::VectorXd weights = mu.array() * (1.0 - mu.array());
    const Eigen::MatrixXd xtwx =
        data.x.transpose() * weights.asDiagonal() * data.x;
    const Eigen::VectorXd gradient = data.x.transpose() * (data.y - mu);
    const Eigen::VectorXd step = xtwx.ldlt().solve(gradient);
    alpha += step;
    ++iter;
    if (!alpha.allFinite() ||
        alpha.cwiseAbs().maxCoeff() > opts.separation_bound) {
      std::ostringstream what;
      what << "null model coefficients diverged (|coef| > "
           << opts.separation_bound << " at iteration " << iter
           << "); perfect separation suspected";
      throw NumericError(what.str());
    }
    mu = (1.0 + (-(data.x * alpha).array()).exp()).inverse();
    converged = step.cwiseAbs().maxCoeff() < opts.tolerance;
  }
  fit.alpha_hat = alpha;
  fit.fitted = mu;
  fit.gamma = (data.y - mu).array().square();
  fit.sigma2_hat = 0.0;
  fit.iterations = iter;
  fit.converged = true;
  return fit;
}

}  // namespace

NullFit fit_null(const Dataset& data, const FitOptions& opts) {
  validate(data);
  return data.family == Family::gaussian ? fit_gaussian(data)
                                         : fit_binomial(data, opts);
}

Eigen::MatrixXd information_factor(const Dataset& data, const NullFit& fit) {
  const Eigen::Index n = data.n();
  const Eigen::Index m = data.m();

  if (data.family == Family::gaussian) {
    // Gamma = sigma2_hat * I, so F = sigma_hat * (I - H) G.
    const double sigma = std::sqrt(std::max(fit.sigma2_hat, 0.0));
    if (m == 0) return sigma * data.g;
    // a residual norm at rounding level means the null fit is exact
    const double y_scale = data.y.squaredNorm() / static_cast<double>(n);
    if (fit.sigma2_hat <= 1e-24 * std::max(y_scale, 1.0)) {
      throw NumericError(
          "X'GammaX is singular: the null fit is exact (residual variance is "
          "zero), leaving every nuisance direction degenerate");
    }
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(data.x);
    Eigen::MatrixXd q_thin =
        qr.householderQ() * Eigen::MatrixXd::Identity(n, m);
    return sigma * (data.g - q_thin * (q_thin.transpose() * data.g));
  }

  // Binomial: Gamma = diag((y - fitted)^2).
  const Eigen::VectorXd weights = fit.gamma;
  const Eigen::VectorXd root = weights.cwiseSqrt();
  if (m == 0) return root.asDiagonal() * data.g;

  const Eigen::MatrixXd xtwx =
      data.x.transpose() * weights.asDiagonal() * data.x;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(xtwx);
  const double max_eig = eig.eigenvalues().maxCoeff();
  const double cutoff =
      std::max(max_eig, 1.0) * std::numeric_limits<double>::epsilon() *
      static_cast<double>(m);
  if (eig.eigenvalues().minCoeff() <= cutoff) {
    std::ostringstream what;
    what << "X'GammaX is singular; degenerate nuisance direction [";
    const Eigen::VectorXd null_dir = eig.eigenvectors().col(0);
    for (Eigen::Index j = 0; j < m; ++j) {
      what << (j ? ", " : "") << null_dir[j];
    }
    what << "]";
    throw NumericError(what.str());
  }
  const Eigen::MatrixXd xtwg =
      data.x.transpose() * (weights.asDiagonal() * data.g);
  const Eigen::MatrixXd solved =
      eig.eigenvectors() * (eig.eigenvalues().cwiseInverse().asDiagonal() *
                            (eig.eigenvectors().transpose() * xtwg));
  return root.asDiagonal() * data.g - (root.asDiagonal() * data.x) * solved;
}

ScoreModel compute_scores(const Dataset& data, const NullFit& fit) {
  if (fit.fitted.size() != data.n()) {
    throw ValidationError("compute_scores: null fit does not match dataset");
  }
  ScoreModel model;
  model.s = data.g.transpose() * (data.y - fit.fitted) /
            static_cast<double>(data.n());
  model.info_factor = information_factor(data, fit);
  model.n = data.n();
  model.m = data.m();
  return model;
}

double ScoreModel::quad_form(const Eigen::VectorXd& v) const {
  return (info_factor * v).squaredNorm() / static_cast<double>(n);
}

Eigen::MatrixXd ScoreModel::v_hat(const Eigen::MatrixXd& q) const {
  const Eigen::MatrixXd fq = info_factor * q;
  Eigen::MatrixXd v = fq.transpose() * fq / static_cast<double>(n);
  return 0.5 * (v + v.transpose());
}

ResidualRotation residual_rotation(const Dataset& data) {
  validate(data);
  if (data.family != Family::gaussian) {
    throw ValidationError("residual rotation requires the gaussian family");
  }
  const Eigen::Index n = data.n();
  const Eigen::Index m = data.m();
  if (m == 0) return {data.y, data.g};

  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> rank_check(data.x);
  if (rank_check.rank() < m) {
    std::ostringstream what;
    what << "residual rotation: X is rank deficient (rank "
         << rank_check.rank() << " < " << m << ")";
    throw ValidationError(what.str());
  }
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(data.x);
  const Eigen::MatrixXd q_full =
      qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd a = q_full.rightCols(n - m);
  return {a.transpose() * data.y, a.transpose() * data.g};
}

}  // namespace pst
