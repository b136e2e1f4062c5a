#include "pst/dataset.hpp"

#include <Eigen/QR>
#include <sstream>

#include "pst/errors.hpp"

namespace pst {

const char* family_name(Family family) {
  return family == Family::gaussian ? "gaussian" : "binomial";
}

Family parse_family(const std::string& name) {
  if (name == "gaussian") return Family::gaussian;
  if (name == "binomial") return Family::binomial;
  throw ValidationError("unknown family '" + name +
                        "' (expected gaussian or binomial)");
}

void validate(const Dataset& data) {
  const Eigen::Index n = data.n();
  std::ostringstream what;
  if (n == 0) throw ValidationError("dataset: outcome is empty");
  if (data.x.rows() != n || data.g.rows() != n) {
    what << "dataset: row mismatch: y has " << n << " rows, x has "
         << data.x.rows() << ", g has " << data.g.rows();
    throw ValidationError(what.str());
  }
  if (data.p() == 0) throw ValidationError("dataset: predictor block is empty");
  if (n <= data.m()) {
    what << "dataset: need n > m, got n = " << n << ", m = " << data.m();
    throw ValidationError(what.str());
  }
  if (!data.y.allFinite() || !data.x.allFinite() || !data.g.allFinite()) {
    throw ValidationError("dataset: non-finite values present");
  }
  if (data.family == Family::binomial) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (data.y[i] != 0.0 && data.y[i] != 1.0) {
        what << "dataset: binomial outcome must be 0/1, found " << data.y[i]
             << " at row " << i + 1;
        throw ValidationError(what.str());
      }
    }
  }
  if (data.m() > 0) {
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(data.x);
    if (qr.rank() < data.m()) {
      what << "dataset: nuisance design is rank deficient (rank " << qr.rank()
           << " of " << data.m() << " columns)";
      throw ValidationError(what.str());
    }
  }
}

}  // namespace pst
