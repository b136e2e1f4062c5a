#include "pst/csv.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "pst/errors.hpp"

namespace pst::io {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream stream(line);
  while (std::getline(stream, field, ',')) {
    // trim surrounding whitespace and optional quotes
    const auto begin = field.find_first_not_of(" \t\r\"");
    const auto end = field.find_last_not_of(" \t\r\"");
    fields.push_back(begin == std::string::npos
                         ? std::string()
                         : field.substr(begin, end - begin + 1));
  }
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

bool parse_double(const std::string& text, double& out) {
  const char* begin = text.data();
  const char* end = begin + text.size();
  const auto result = std::from_chars(begin, end, out);
  return result.ec == std::errc() && result.ptr == end;
}

std::vector<std::vector<std::string>> read_rows(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw ValidationError("cannot open file: " + path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(file, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(split_line(line));
  }
  if (rows.empty()) throw ValidationError("file is empty: " + path);
  return rows;
}

Eigen::MatrixXd rows_to_matrix(const std::vector<std::vector<std::string>>& rows,
                               std::size_t first_row, const std::string& path) {
  const std::size_t n_rows = rows.size() - first_row;
  if (n_rows == 0) throw ValidationError("no data rows in " + path);
  const std::size_t n_cols = rows[first_row].size();
  Eigen::MatrixXd values(n_rows, n_cols);
  for (std::size_t i = 0; i < n_rows; ++i) {
    const auto& row = rows[first_row + i];
    if (row.size() != n_cols) {
      std::ostringstream what;
      what << path << ": row " << first_row + i + 1 << " has " << row.size()
           << " fields, expected " << n_cols;
      throw ValidationError(what.str());
    }
    for (std::size_t j = 0; j < n_cols; ++j) {
      if (!parse_double(row[j], values(static_cast<Eigen::Index>(i),
                                       static_cast<Eigen::Index>(j)))) {
        std::ostringstream what;
        what << path << ": cannot parse '" << row[j] << "' at row "
             << first_row + i + 1 << ", column " << j + 1;
        throw ValidationError(what.str());
      }
    }
  }
  return values;
}

bool is_numeric_row(const std::vector<std::string>& row) {
  double ignored;
  for (const auto& field : row) {
    if (!parse_double(field, ignored)) return false;
  }
  return !row.empty();
}

}  // namespace

NamedMatrix read_matrix_csv(const std::string& path) {
  const auto rows = read_rows(path);
  if (is_numeric_row(rows[0])) {
    throw ValidationError(path + ": expected a header row of column names");
  }
  NamedMatrix out;
  out.names = rows[0];
  out.values = rows_to_matrix(rows, 1, path);
  if (static_cast<std::size_t>(out.values.cols()) != out.names.size()) {
    throw ValidationError(path + ": header and data column counts differ");
  }
  return out;
}

Eigen::VectorXd read_vector_csv(const std::string& path) {
  const NamedMatrix matrix = read_matrix_csv(path);
  if (matrix.values.cols() != 1) {
    std::ostringstream what;
    what << path << ": expected a single column, found "
         << matrix.values.cols();
    throw ValidationError(what.str());
  }
  return matrix.values.col(0);
}

Eigen::MatrixXd read_numeric_csv(const std::string& path) {
  const auto rows = read_rows(path);
  const std::size_t first_row = is_numeric_row(rows[0]) ? 0 : 1;
  return rows_to_matrix(rows, first_row, path);
}

Partition read_partition_csv(const std::string& path, Eigen::Index p) {
  const Eigen::MatrixXd raw = read_numeric_csv(path);
  if (raw.cols() != 2) {
    std::ostringstream what;
    what << path << ": partition files need two columns (index, group), found "
         << raw.cols();
    throw ValidationError(what.str());
  }
  std::map<long long, std::vector<int>> by_group;
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    const double index_value = raw(i, 0);
    const double group_value = raw(i, 1);
    const long long index = static_cast<long long>(index_value);
    const long long group = static_cast<long long>(group_value);
    if (index != index_value || group != group_value) {
      std::ostringstream what;
      what << path << ": non-integer entry at row " << i + 1;
      throw ValidationError(what.str());
    }
    if (index < 1 || index > p) {
      std::ostringstream what;
      what << path << ": index " << index << " outside 1.." << p << " at row "
           << i + 1;
      throw ValidationError(what.str());
    }
    by_group[group].push_back(static_cast<int>(index - 1));
  }
  Partition partition;
  for (auto& [group, members] : by_group) {
    partition.groups.push_back(std::move(members));
  }
  return partition;
}

std::string format_double(double value) {
  char buffer[32];
  const auto result =
      std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, result.ptr);
}

void write_matrix_csv(const std::string& path,
                      const std::vector<std::string>& header,
                      const Eigen::MatrixXd& values) {
  std::ofstream file(path);
  if (!file) throw ValidationError("cannot write file: " + path);
  for (std::size_t j = 0; j < header.size(); ++j) {
    file << (j ? "," : "") << header[j];
  }
  file << "\n";
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      file << (j ? "," : "") << format_double(values(i, j));
    }
    file << "\n";
  }
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream file(path);
  if (!file) throw ValidationError("cannot write file: " + path);
  file << content;
}

}  // namespace pst::io
