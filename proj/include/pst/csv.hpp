#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "pst/basis.hpp"

namespace pst::io {

struct NamedMatrix {
  std::vector<std::string> names;
  Eigen::MatrixXd values;
};

// Matrix CSV: one header row of column names, then numeric rows.
NamedMatrix read_matrix_csv(const std::string& path);

// Single numeric column with a header.
Eigen::VectorXd read_vector_csv(const std::string& path);

// Numeric matrix where the header row is optional (basis files).
Eigen::MatrixXd read_numeric_csv(const std::string& path);

// Two columns (index, group), 1-based indices; header optional.
Partition read_partition_csv(const std::string& path, Eigen::Index p);

// Shortest round-trip decimal representation.
std::string format_double(double value);

void write_matrix_csv(const std::string& path,
                      const std::vector<std::string>& header,
                      const Eigen::MatrixXd& values);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace pst::io
