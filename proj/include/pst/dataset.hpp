#pragma once

#include <Eigen/Dense>
#include <string>

namespace pst {

enum class Family { gaussian, binomial };

const char* family_name(Family family);
Family parse_family(const std::string& name);

// Outcome, nuisance design and predictor block. The nuisance design may be
// empty (m = 0); include an intercept column explicitly if one is wanted.
struct Dataset {
  Eigen::VectorXd y;  // length n
  Eigen::MatrixXd x;  // n x m, full column rank
  Eigen::MatrixXd g;  // n x p
  Family family = Family::gaussian;

  Eigen::Index n() const { return y.size(); }
  Eigen::Index m() const { return x.cols(); }
  Eigen::Index p() const { return g.cols(); }
};

// Throws ValidationError: shape mismatch, non-finite values, n <= m,
// rank-deficient x, or binomial outcomes outside {0, 1}.
void validate(const Dataset& data);

}  // namespace pst
