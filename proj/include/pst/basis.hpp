#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "pst/dataset.hpp"
#include "pst/model_scores.hpp"

namespace pst {

enum class BasisKind { pca, weighted_pca, partition, custom };

const char* basis_kind_name(BasisKind kind);

struct Basis {
  Eigen::MatrixXd q;  // p x r, orthonormal columns
  BasisKind kind = BasisKind::custom;

  Eigen::Index p() const { return q.rows(); }
  Eigen::Index r() const { return q.cols(); }
};

struct Partition {
  std::vector<std::vector<int>> groups;  // 0-based predictor indices
};

// Leading right singular vectors of G, residualized by I - H when a
// nuisance design is present. Throws if r exceeds the numerical rank.
Basis pca_basis(const Dataset& data, Eigen::Index r);

// Right singular vectors of the information factor, so the projected scores
// are uncorrelated under the estimated information: q_j' omega_hat q_k = 0.
Basis weighted_pca_basis(const Dataset& data, const NullFit& fit,
                         Eigen::Index r);

// Same construction, but takes every available direction up to r_cap instead
// of failing when r_cap exceeds the numerical rank.
Basis weighted_pca_basis_up_to(const Dataset& data, const NullFit& fit,
                               Eigen::Index r_cap);

// Unit-normalized group indicator columns; groups must be disjoint.
Basis partition_basis(const Partition& partition, Eigen::Index p);

// Re-orthonormalizes user-supplied columns through a rank-revealing QR.
// Throws if the columns are numerically rank deficient.
Basis custom_basis(const Eigen::MatrixXd& q_raw);

struct BasisDiagnostics {
  double orthonormality_error = 0;  // max abs entry of Q'Q - I
  Eigen::Index v_hat_rank = 0;
  double v_hat_condition = 0;  // max/min retained eigenvalue of Q'omega_hat Q
  bool v_hat_invertible = false;
  double tolerance = 0;  // relative eigenvalue cutoff used
};

// Diagnostics only; callers decide what to do with a failing basis.
BasisDiagnostics validate_basis(const Basis& basis, const ScoreModel& scores,
                                double tolerance = 1e-10);

// Flips column signs so the largest-magnitude entry of each column is
// positive; keeps file output stable across factorization backends.
void normalize_column_signs(Eigen::MatrixXd& q);

}  // namespace pst
