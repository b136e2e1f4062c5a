#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "pst/baselines.hpp"
#include "pst/basis.hpp"
#include "pst/dist.hpp"
#include "pst/errors.hpp"
#include "pst/pst_test.hpp"
#include "test_support.hpp"

using namespace pst;
using test_support::random_dataset;
using test_support::random_matrix;
using test_support::random_vector;

namespace {

Basis unit_basis(Eigen::Index p, Eigen::Index j) {
  Basis basis;
  basis.q = Eigen::MatrixXd::Zero(p, 1);
  basis.q(j, 0) = 1.0;
  basis.kind = BasisKind::custom;
  return basis;
}

Basis identity_basis(Eigen::Index p) {
  Basis basis;
  basis.q = Eigen::MatrixXd::Identity(p, p);
  basis.kind = BasisKind::custom;
  return basis;
}

Eigen::MatrixXd random_orthogonal(rng::Stream& stream, Eigen::Index r) {
  const Eigen::MatrixXd raw = random_matrix(stream, r, r);
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(raw);
  return qr.householderQ() * Eigen::MatrixXd::Identity(r, r);
}

}  // namespace

TEST_CASE("r = 1 with Q = e_j reduces to the sum test") {
  const Dataset data = random_dataset(Family::binomial, 30, 2, 6, 211);
  const ScoreModel scores = compute_scores(data, fit_null(data));
  for (Eigen::Index j = 0; j < 6; ++j) {
    const PstResult pst = pst_statistic(scores, unit_basis(6, j));
    const TestOutcome sum = sum_test(scores, Eigen::VectorXd::Unit(6, j));
    CHECK(pst.statistic == doctest::Approx(sum.statistic).epsilon(1e-12));
    CHECK(pst.p_value == doctest::Approx(sum.p_value).epsilon(1e-12));
  }
}

TEST_CASE("full-space statistic equals the dense-inverse oracle (40x6)") {
  for (const Family family : {Family::gaussian, Family::binomial}) {
    const Dataset data = random_dataset(family, 40, 2, 6, 223);
    const ScoreModel scores = compute_scores(data, fit_null(data));
    const PstResult pst = pst_statistic(scores, identity_basis(6));

    const Eigen::MatrixXd omega = scores.info_factor.transpose() *
                                  scores.info_factor / 40.0;
    const double oracle = 40.0 * scores.s.dot(omega.inverse() * scores.s);
    CHECK(pst.statistic == doctest::Approx(oracle).epsilon(1e-10));
    CHECK(pst.df == 6);
  }
}

TEST_CASE("statistic solves the restricted Rayleigh quotient") {
  const Dataset data = random_dataset(Family::gaussian, 35, 2, 20, 227);
  const ScoreModel scores = compute_scores(data, fit_null(data));
  const Basis basis = pca_basis(data, 5);
  const PstResult pst = pst_statistic(scores, basis);

  // top generalized eigenvalue of (n z z', V)
  const Eigen::VectorXd z = basis.q.transpose() * scores.s;
  const Eigen::MatrixXd a = 35.0 * z * z.transpose();
  const Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> eig(
      a, scores.v_hat(basis.q));
  CHECK(pst.statistic ==
        doctest::Approx(eig.eigenvalues().maxCoeff()).epsilon(1e-8));

  // no random direction in the subspace beats the maximizer
  rng::Stream stream(229, 0);
  double best = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const Eigen::VectorXd zeta = basis.q * random_vector(stream, 5);
    const double numerator = scores.s.dot(zeta);
    const double value =
        35.0 * numerator * numerator / scores.quad_form(zeta);
    best = std::max(best, value);
  }
  CHECK(best <= pst.statistic * (1.0 + 1e-10));
}

TEST_CASE("statistic is invariant under basis rotation") {
  const Dataset data = random_dataset(Family::binomial, 40, 2, 15, 233);
  const ScoreModel scores = compute_scores(data, fit_null(data));
  const Basis basis = pca_basis(data, 6);
  const PstResult reference = pst_statistic(scores, basis);

  rng::Stream stream(239, 0);
  for (int trial = 0; trial < 20; ++trial) {
    Basis rotated;
    rotated.q = basis.q * random_orthogonal(stream, 6);
    rotated.kind = BasisKind::custom;
    const PstResult result = pst_statistic(scores, rotated);
    CHECK(std::abs(result.statistic - reference.statistic) <
          1e-8 * reference.statistic);
  }
}

TEST_CASE("statistic is invariant to rescaling G (gaussian)") {
  Dataset data = random_dataset(Family::gaussian, 30, 2, 8, 241);
  const ScoreModel scores = compute_scores(data, fit_null(data));
  const Basis basis = pca_basis(data, 3);
  const double reference = pst_statistic(scores, basis).statistic;

  data.g *= 7.25;
  const ScoreModel scaled_scores = compute_scores(data, fit_null(data));
  const Basis scaled_basis = pca_basis(data, 3);
  const double scaled = pst_statistic(scaled_scores, scaled_basis).statistic;
  CHECK(std::abs(scaled - reference) < 1e-8 * reference);
}

TEST_CASE("pca-basis PST equals the principal component regression score test") {
  for (const Family family : {Family::gaussian, Family::binomial}) {
    const Dataset data = random_dataset(family, 50, 3, 12, 251);
    const NullFit fit = fit_null(data);
    const ScoreModel scores = compute_scores(data, fit);
    const Basis basis = pca_basis(data, 4);
    const PstResult pst = pst_statistic(scores, basis);

    // classical score test with the principal scores T = G Q as predictors
    Dataset pc_regression = data;
    pc_regression.g = data.g * basis.q;
    const ScoreModel pc_scores =
        compute_scores(pc_regression, fit_null(pc_regression));
    const TestOutcome rao = rao_score_test(pc_scores);
    CHECK(pst.statistic == doctest::Approx(rao.statistic).epsilon(1e-8));
    CHECK(static_cast<Eigen::Index>(rao.df) == pst.df);
  }
}

TEST_CASE("chi2 and exact p-values agree for large gaussian samples") {
  const Dataset data = random_dataset(Family::gaussian, 220, 2, 30, 257);
  const ScoreModel scores = compute_scores(data, fit_null(data));
  const Basis basis = pca_basis(data, 4);
  const PstResult asymptotic = pst_statistic(scores, basis);
  const PstResult exact = pst_exact_normal(data, basis);
  CHECK(std::abs(asymptotic.p_value - exact.p_value) < 0.01);
}

TEST_CASE("exact statistic increases along nested bases") {
  const Dataset data = random_dataset(Family::gaussian, 30, 2, 20, 263);
  const Basis wide = pca_basis(data, 6);
  double previous = 0;
  for (Eigen::Index r = 1; r <= 6; ++r) {
    Basis nested;
    nested.q = wide.q.leftCols(r);
    nested.kind = BasisKind::custom;
    const double statistic = pst_exact_normal(data, nested).statistic;
    CHECK(statistic >= previous - 1e-10);
    previous = statistic;
  }
}

TEST_CASE("exact test rejects r = n - m as degenerate input") {
  const Dataset data = random_dataset(Family::gaussian, 10, 2, 9, 269);
  Basis basis;
  basis.q = Eigen::MatrixXd::Identity(9, 8);
  basis.kind = BasisKind::custom;
  CHECK_THROWS_AS(pst_exact_normal(data, basis), ValidationError);
}

TEST_CASE("outcome orthogonal to the projection span gives zero statistic") {
  // X empty keeps the rotation trivial; y is orthogonal to the single
  // predictor column that spans W.
  Dataset data;
  data.y.resize(4);
  data.y << 1, -1, 0, 0;
  data.x.resize(4, 0);
  data.g.resize(4, 1);
  data.g << 0, 0, 1, 1;
  data.family = Family::gaussian;
  Basis basis;
  basis.q = Eigen::MatrixXd::Identity(1, 1);
  basis.kind = BasisKind::custom;
  const PstResult result = pst_exact_normal(data, basis);
  CHECK(result.statistic == doctest::Approx(0.0));
  CHECK(result.p_value == doctest::Approx(1.0));
}

TEST_CASE("exact test reports the detected rank when G_rot Q is deficient") {
  Dataset data = random_dataset(Family::gaussian, 12, 1, 6, 271);
  data.g.col(1) = data.g.col(0);
  Basis basis;
  basis.q = Eigen::MatrixXd::Zero(6, 2);
  basis.q(0, 0) = 1.0;
  basis.q(1, 1) = 1.0;  // both map to the same rotated column
  basis.kind = BasisKind::custom;
  try {
    pst_exact_normal(data, basis);
    FAIL("expected rank error");
  } catch (const NumericError& error) {
    CHECK(std::string(error.what()).find("rank 1") != std::string::npos);
  }
}

TEST_CASE("exact null cdf is a proper distribution function") {
  const Eigen::Index nm = 30, r = 5;
  CHECK(exact_null_cdf(-1.0, nm, r) == 0.0);
  CHECK(exact_null_cdf(0.0, nm, r) == 0.0);
  CHECK(exact_null_cdf(30.0, nm, r) == 1.0);
  double previous = 0;
  for (double t = 0.5; t < 30.0; t += 0.5) {
    const double value = exact_null_cdf(t, nm, r);
    CHECK(value >= previous);
    CHECK(value <= 1.0);
    previous = value;
  }
}

TEST_CASE("singular V_hat raises an error that asks for basis repair") {
  // p > n - m: a basis direction orthogonal to the information span makes
  // V_hat singular.
  const Dataset data = random_dataset(Family::gaussian, 10, 2, 14, 277);
  const ScoreModel scores = compute_scores(data, fit_null(data));
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(scores.info_factor,
                                              Eigen::ComputeFullV);
  Basis basis;
  basis.q.resize(14, 2);
  basis.q.col(0) = svd.matrixV().col(0);
  basis.q.col(1) = svd.matrixV().col(13);
  basis.kind = BasisKind::custom;
  try {
    pst_statistic(scores, basis);
    FAIL("expected singularity error");
  } catch (const NumericError& error) {
    CHECK(std::string(error.what()).find("repair") != std::string::npos);
  }
}

TEST_CASE("alpha_star is exactly 1/21 at alpha = 0.05") {
  const Dataset data = random_dataset(Family::gaussian, 30, 1, 10, 281);
  const NullFit fit = fit_null(data);
  const AdaptiveResult result = adaptive_pca_test(data, fit, 0.05);
  CHECK(std::abs(result.alpha_star - 1.0 / 21.0) < 1e-15);
}

TEST_CASE("adaptive chunks beyond n - m - 1 are rejected") {
  const Dataset data = random_dataset(Family::gaussian, 20, 1, 30, 283);
  const NullFit fit = fit_null(data);
  CHECK_THROWS_AS(adaptive_pca_test(data, fit, 0.05, {10, 10}),
                  ValidationError);
  CHECK_THROWS_AS(adaptive_pca_test(data, fit, 1.5), ValidationError);
}

TEST_CASE("adaptive honors a custom chunk schedule") {
  const Dataset data = random_dataset(Family::gaussian, 40, 1, 20, 291);
  const NullFit fit = fit_null(data);
  const AdaptiveResult result = adaptive_pca_test(data, fit, 0.05, {2, 3, 4});
  REQUIRE_FALSE(result.per_step.empty());
  CHECK(result.per_step[0].r == 2);
  if (result.per_step.size() > 1) CHECK(result.per_step[1].r == 5);
  if (result.per_step.size() > 2) CHECK(result.per_step[2].r == 9);
}

TEST_CASE("first-step failure selects dimension zero") {
  // scan null datasets for one whose first block fails to reject
  for (int seed = 0; seed < 50; ++seed) {
    const Dataset data =
        random_dataset(Family::gaussian, 50, 1, 25, rng::derive_seed(299, seed));
    const AdaptiveResult result =
        adaptive_pca_test(data, fit_null(data), 0.05);
    if (!result.per_step.front().rejected) {
      CHECK(result.selected_r == 0);
      CHECK_FALSE(result.overall_reject);
      CHECK(result.per_step.size() == 1);
      return;
    }
  }
  FAIL("no first-step failure in 50 null datasets");
}

TEST_CASE("adaptive stops at the first non-rejection") {
  const Dataset data = random_dataset(Family::gaussian, 40, 1, 20, 293);
  const NullFit fit = fit_null(data);
  const AdaptiveResult result = adaptive_pca_test(data, fit, 0.05);
  for (std::size_t i = 0; i + 1 < result.per_step.size(); ++i) {
    CHECK(result.per_step[i].rejected);
  }
  if (!result.per_step.empty() && !result.per_step.back().rejected) {
    CHECK(result.selected_r ==
          (result.per_step.size() > 1
               ? result.per_step[result.per_step.size() - 2].r
               : 0));
  }
  CHECK(result.overall_reject == result.per_step.front().rejected);
}

TEST_CASE("adaptive detects signal aligned with the leading component") {
  // Predictors share one strong factor; the outcome loads on that factor.
  const int replicates = 60;
  int rejects_null = 0, rejects_signal = 0, selected_ge_5 = 0;
  for (int rep = 0; rep < replicates; ++rep) {
    rng::Stream stream(rng::derive_seed(307, rep), 0);
    const int n = 80, p = 30;
    const Eigen::VectorXd factor = random_vector(stream, n);
    const Eigen::VectorXd loadings =
        Eigen::VectorXd::Ones(p) + 0.1 * random_vector(stream, p);
    Dataset data;
    data.x = Eigen::MatrixXd::Ones(n, 1);
    data.g = 3.0 * factor * loadings.transpose() + random_matrix(stream, n, p);
    data.family = Family::gaussian;

    data.y = random_vector(stream, n);
    const NullFit fit_b0 = fit_null(data);
    rejects_null += adaptive_pca_test(data, fit_b0, 0.05).overall_reject;

    data.y += 1.5 * factor;
    const NullFit fit_b1 = fit_null(data);
    const AdaptiveResult result = adaptive_pca_test(data, fit_b1, 0.05);
    rejects_signal += result.overall_reject;
    selected_ge_5 += result.selected_r >= 5;
  }
  CHECK(rejects_signal >= 55);      // power near 1 under strong signal
  CHECK(selected_ge_5 >= 55);       // the first 5-component block rejects
  CHECK(rejects_null <= 10);        // null rate far from 1
}
