#include "pst/basis.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <limits>
#include <sstream>

#include "pst/errors.hpp"

namespace pst {

namespace {

// Singular values below max(rows, cols) * eps * sigma_max count as zero.
Eigen::Index numerical_rank(const Eigen::VectorXd& singular_values,
                            Eigen::Index rows, Eigen::Index cols) {
  if (singular_values.size() == 0) return 0;
  const double cutoff = static_cast<double>(std::max(rows, cols)) *
                        std::numeric_limits<double>::epsilon() *
                        singular_values[0];
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < singular_values.size(); ++i) {
    if (singular_values[i] > cutoff) ++rank;
  }
  return rank;
}

Basis svd_basis(const Eigen::MatrixXd& matrix, Eigen::Index r, BasisKind kind) {
  const Eigen::BDCSVD<Eigen::MatrixXd> svd(matrix, Eigen::ComputeThinV);
  const Eigen::Index rank =
      numerical_rank(svd.singularValues(), matrix.rows(), matrix.cols());
  if (r > rank) {
    std::ostringstream what;
    what << basis_kind_name(kind) << " basis: requested r = " << r
         << " exceeds the numerical rank " << rank;
    throw ValidationError(what.str());
  }
  Basis basis;
  basis.q = svd.matrixV().leftCols(r);
  basis.kind = kind;
  normalize_column_signs(basis.q);
  return basis;
}

void check_r_bounds(Eigen::Index r, Eigen::Index n, Eigen::Index m) {
  if (r < 1) throw ValidationError("basis dimension r must be at least 1");
  if (r >= n - m) {
    std::ostringstream what;
    what << "basis dimension r = " << r << " must satisfy r < n - m = "
         << n - m;
    throw ValidationError(what.str());
  }
}

}  // namespace

const char* basis_kind_name(BasisKind kind) {
  switch (kind) {
    case BasisKind::pca: return "pca";
    case BasisKind::weighted_pca: return "weighted_pca";
    case BasisKind::partition: return "partition";
    case BasisKind::custom: return "custom";
  }
  return "unknown";
}

void normalize_column_signs(Eigen::MatrixXd& q) {
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    Eigen::Index pivot = 0;
    q.col(j).cwiseAbs().maxCoeff(&pivot);
    if (q(pivot, j) < 0) q.col(j) = -q.col(j);
  }
}

Basis pca_basis(const Dataset& data, Eigen::Index r) {
  validate(data);
  check_r_bounds(r, data.n(), data.m());
  if (data.m() == 0) return svd_basis(data.g, r, BasisKind::pca);
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(data.x);
  const Eigen::MatrixXd q_thin =
      qr.householderQ() * Eigen::MatrixXd::Identity(data.n(), data.m());
  const Eigen::MatrixXd residualized =
      data.g - q_thin * (q_thin.transpose() * data.g);
  return svd_basis(residualized, r, BasisKind::pca);
}

Basis weighted_pca_basis(const Dataset& data, const NullFit& fit,
                         Eigen::Index r) {
  validate(data);
  check_r_bounds(r, data.n(), data.m());
  return svd_basis(information_factor(data, fit), r, BasisKind::weighted_pca);
}

Basis weighted_pca_basis_up_to(const Dataset& data, const NullFit& fit,
                               Eigen::Index r_cap) {
  validate(data);
  check_r_bounds(r_cap, data.n(), data.m());
  const Eigen::MatrixXd factor = information_factor(data, fit);
  const Eigen::BDCSVD<Eigen::MatrixXd> svd(factor, Eigen::ComputeThinV);
  const Eigen::Index rank =
      numerical_rank(svd.singularValues(), factor.rows(), factor.cols());
  if (rank < 1) {
    throw NumericError("weighted pca: the information factor has rank zero");
  }
  Basis basis;
  basis.q = svd.matrixV().leftCols(std::min(r_cap, rank));
  basis.kind = BasisKind::weighted_pca;
  normalize_column_signs(basis.q);
  return basis;
}

Basis partition_basis(const Partition& partition, Eigen::Index p) {
  if (partition.groups.empty()) {
    throw ValidationError("partition: no groups given");
  }
  std::vector<int> owner(static_cast<std::size_t>(p), -1);
  Basis basis;
  basis.q = Eigen::MatrixXd::Zero(p, static_cast<Eigen::Index>(
                                         partition.groups.size()));
  basis.kind = BasisKind::partition;
  for (std::size_t j = 0; j < partition.groups.size(); ++j) {
    const auto& group = partition.groups[j];
    if (group.empty()) {
      std::ostringstream what;
      what << "partition: group " << j + 1 << " is empty";
      throw ValidationError(what.str());
    }
    const double norm = 1.0 / std::sqrt(static_cast<double>(group.size()));
    for (int index : group) {
      if (index < 0 || index >= p) {
        std::ostringstream what;
        what << "partition: index " << index + 1 << " outside 1.." << p;
        throw ValidationError(what.str());
      }
      if (owner[static_cast<std::size_t>(index)] >= 0) {
        std::ostringstream what;
        what << "partition: index " << index + 1 << " appears in groups "
             << owner[static_cast<std::size_t>(index)] + 1 << " and " << j + 1;
        throw ValidationError(what.str());
      }
      owner[static_cast<std::size_t>(index)] = static_cast<int>(j);
      basis.q(index, static_cast<Eigen::Index>(j)) = norm;
    }
  }
  return basis;
}

Basis custom_basis(const Eigen::MatrixXd& q_raw) {
  if (q_raw.cols() < 1 || q_raw.rows() < q_raw.cols()) {
    throw ValidationError("custom basis: need p x r values with p >= r >= 1");
  }
  if (!q_raw.allFinite()) {
    throw ValidationError("custom basis: non-finite values present");
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(q_raw);
  if (qr.rank() < q_raw.cols()) {
    std::ostringstream what;
    what << "custom basis: columns are rank deficient (rank " << qr.rank()
         << " of " << q_raw.cols() << ")";
    throw ValidationError(what.str());
  }
  Basis basis;
  basis.q = qr.householderQ() *
            Eigen::MatrixXd::Identity(q_raw.rows(), q_raw.cols());
  basis.kind = BasisKind::custom;
  normalize_column_signs(basis.q);
  return basis;
}

BasisDiagnostics validate_basis(const Basis& basis, const ScoreModel& scores,
                                double tolerance) {
  if (basis.p() != scores.p()) {
    std::ostringstream what;
    what << "basis has " << basis.p() << " rows but the score vector has "
         << scores.p() << " entries";
    throw ValidationError(what.str());
  }
  BasisDiagnostics diag;
  diag.tolerance = tolerance;
  const Eigen::Index r = basis.r();
  const Eigen::MatrixXd gram = basis.q.transpose() * basis.q;
  diag.orthonormality_error =
      (gram - Eigen::MatrixXd::Identity(r, r)).cwiseAbs().maxCoeff();

  const Eigen::MatrixXd v = scores.v_hat(basis.q);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(v);
  const double max_eig = std::max(eig.eigenvalues().maxCoeff(), 0.0);
  const double cutoff = max_eig * tolerance;
  Eigen::Index rank = 0;
  double min_retained = 0;
  for (Eigen::Index i = 0; i < r; ++i) {
    if (eig.eigenvalues()[i] > cutoff) {
      if (rank == 0) min_retained = eig.eigenvalues()[i];
      min_retained = std::min(min_retained, eig.eigenvalues()[i]);
      ++rank;
    }
  }
  diag.v_hat_rank = rank;
  diag.v_hat_invertible = (rank == r) && max_eig > 0;
  diag.v_hat_condition = diag.v_hat_invertible
                             ? max_eig / min_retained
                             : std::numeric_limits<double>::infinity();
  return diag;
}

}  // namespace pst
