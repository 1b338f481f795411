#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <string>

#include "dqgm/problems.hpp"

namespace dqgm::problems {
namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

bool blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(),
                     [](unsigned char c) { return std::isspace(c) != 0; });
}

// Next line that is neither a comment nor blank; false at end of input.
bool next_data_line(std::istream& in, std::string& line, std::size_t& number) {
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty() && line.front() == '%') continue;
    if (blank(line)) continue;
    return true;
  }
  return false;
}

double parse_value(std::istringstream& fields, std::size_t number) {
  std::string token;
  if (!(fields >> token)) throw ParseError(number, "missing value");
  try {
    std::size_t used = 0;
    const double v = std::stod(token, &used);
    if (used != token.size()) throw ParseError(number, "malformed value '" + token + "'");
    return v;
  } catch (const std::logic_error&) {
    throw ParseError(number, "malformed value '" + token + "'");
  }
}

void expect_end(std::istringstream& fields, std::size_t number) {
  std::string extra;
  if (fields >> extra) throw ParseError(number, "unexpected trailing token '" + extra + "'");
}

}  // namespace

Eigen::MatrixXd parse_matrix_market(std::istream& in) {
  std::string line;
  std::size_t number = 0;
  if (!std::getline(in, line)) throw ParseError(1, "empty input");
  ++number;
  std::istringstream header(lower(line));
  std::string banner, object, format, field, symmetry;
  header >> banner >> object >> format >> field >> symmetry;
  if (banner != "%%matrixmarket") throw ParseError(number, "missing %%MatrixMarket banner");
  if (object != "matrix") throw ParseError(number, "object must be 'matrix'");
  if (format != "coordinate" && format != "array")
    throw ParseError(number, "format must be 'coordinate' or 'array'");
  if (field == "complex" || field == "hermitian")
    throw UnsupportedField("field '" + field + "' is not real");
  if (field != "real" && field != "integer" && field != "double" && field != "pattern")
    throw UnsupportedField("unknown field '" + field + "'");
  if (symmetry != "general" && symmetry != "symmetric")
    throw ParseError(number, "symmetry must be 'general' or 'symmetric'");
  const bool pattern = field == "pattern";
  const bool symmetric = symmetry == "symmetric";
  if (pattern && format == "array") throw ParseError(number, "pattern field requires coordinate format");

  if (!next_data_line(in, line, number)) throw ParseError(number, "missing size line");
  std::istringstream size_line(line);
  long rows = 0, cols = 0, entries = 0;
  if (!(size_line >> rows >> cols)) throw ParseError(number, "malformed size line");
  if (format == "coordinate" && !(size_line >> entries)) throw ParseError(number, "missing entry count");
  expect_end(size_line, number);
  if (rows < 1 || cols < 1 || entries < 0) throw ParseError(number, "nonpositive dimensions");
  if (symmetric && rows != cols) throw ParseError(number, "symmetric matrix must be square");

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(rows, cols);
  if (format == "coordinate") {
    for (long k = 0; k < entries; ++k) {
      if (!next_data_line(in, line, number))
        throw ParseError(number, "expected " + std::to_string(entries) + " entries, found " +
                                     std::to_string(k));
      std::istringstream fields(line);
      long i = 0, j = 0;
      if (!(fields >> i >> j)) throw ParseError(number, "malformed entry indices");
      if (i < 1 || i > rows || j < 1 || j > cols) throw ParseError(number, "entry index out of range");
      const double v = pattern ? 1.0 : parse_value(fields, number);
      expect_end(fields, number);
      a(i - 1, j - 1) += v;
      if (symmetric && i != j) a(j - 1, i - 1) += v;
    }
  } else {
    // Column-major; symmetric arrays list only the lower triangle.
    for (long j = 0; j < cols; ++j) {
      for (long i = symmetric ? j : 0; i < rows; ++i) {
        if (!next_data_line(in, line, number))
          throw ParseError(number, "array ended early at entry (" + std::to_string(i + 1) + ", " +
                                       std::to_string(j + 1) + ")");
        std::istringstream fields(line);
        const double v = parse_value(fields, number);
        expect_end(fields, number);
        a(i, j) = v;
        if (symmetric) a(j, i) = v;
      }
    }
  }
  if (next_data_line(in, line, number)) throw ParseError(number, "more entries than the header declares");
  return a;
}

Eigen::MatrixXd load_matrix_market(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return parse_matrix_market(in);
}

}  // namespace dqgm::problems
