#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "pst/dataset.hpp"
#include "pst/model_scores.hpp"
#include "pst/rng.hpp"

namespace test_support {

inline Eigen::MatrixXd random_matrix(pst::rng::Stream& stream,
                                     Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = stream.next_normal();
  }
  return out;
}

inline Eigen::VectorXd random_vector(pst::rng::Stream& stream,
                                     Eigen::Index size) {
  Eigen::VectorXd out(size);
  for (Eigen::Index i = 0; i < size; ++i) out[i] = stream.next_normal();
  return out;
}

// Random instance with an intercept plus m - 1 covariate columns. Gaussian
// outcomes are standard normal plus a covariate effect; binomial outcomes
// are Bernoulli from a logistic model in the covariates only.
inline pst::Dataset random_dataset(pst::Family family, Eigen::Index n,
                                   Eigen::Index m, Eigen::Index p,
                                   std::uint64_t seed) {
  pst::rng::Stream stream(seed, 0);
  pst::Dataset data;
  data.family = family;
  data.x.resize(n, m);
  if (m > 0) {
    data.x.col(0).setOnes();
    for (Eigen::Index j = 1; j < m; ++j) {
      data.x.col(j) = random_vector(stream, n);
    }
  }
  data.g = random_matrix(stream, n, p);
  data.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double eta = 0.2;
    for (Eigen::Index j = 1; j < m; ++j) eta += 0.3 * data.x(i, j);
    if (family == pst::Family::gaussian) {
      data.y[i] = eta + stream.next_normal();
    } else {
      const double prob = 1.0 / (1.0 + std::exp(-eta));
      data.y[i] = stream.next_double() < prob ? 1.0 : 0.0;
    }
  }
  return data;
}

// Densely materialized effective information, built from the blockwise
// formula with explicit inverses. Independent of the factored route.
inline Eigen::MatrixXd dense_information(const pst::Dataset& data,
                                         const pst::NullFit& fit) {
  const double n = static_cast<double>(data.n());
  if (data.family == pst::Family::gaussian) {
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(data.n(), data.n());
    if (data.m() > 0) {
      h = data.x *
          (data.x.transpose() * data.x).inverse() * data.x.transpose();
    }
    const Eigen::MatrixXd centered =
        (Eigen::MatrixXd::Identity(data.n(), data.n()) - h) * data.g;
    return fit.sigma2_hat * data.g.transpose() * centered / n;
  }
  const Eigen::MatrixXd gamma = fit.gamma.asDiagonal();
  const Eigen::MatrixXd omega_beta = data.g.transpose() * gamma * data.g / n;
  if (data.m() == 0) return omega_beta;
  const Eigen::MatrixXd omega_alpha = data.x.transpose() * gamma * data.x / n;
  const Eigen::MatrixXd omega_cross = data.x.transpose() * gamma * data.g / n;
  return omega_beta -
         omega_cross.transpose() * omega_alpha.inverse() * omega_cross;
}

}  // namespace test_support
