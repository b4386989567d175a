#include "dampopt/mmio.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace dampopt {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string next_data_line(std::istream& in) {
  std::string line;
  while (std::getline(in, line)) {
    auto first = line.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) continue;
    if (line[first] == '%') continue;
    return line;
  }
  throw ValidationError("matrix market file truncated");
}

}  // namespace

Mat read_matrix_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open matrix file: " + path);

  std::string header;
  if (!std::getline(in, header))
    throw ValidationError("empty matrix file: " + path);
  std::istringstream hs(header);
  std::string banner, object, format, field, symmetry;
  hs >> banner >> object >> format >> field >> symmetry;
  if (banner != "%%MatrixMarket" || lower(object) != "matrix")
    throw ValidationError("not a matrix market file: " + path);
  format = lower(format);
  field = lower(field);
  symmetry = lower(symmetry);
  if (field != "real" && field != "integer")
    throw ValidationError("unsupported matrix field '" + field + "' in " + path);
  if (symmetry != "general" && symmetry != "symmetric")
    throw ValidationError("unsupported matrix symmetry '" + symmetry + "' in " + path);

  if (format == "array") {
    std::istringstream sz(next_data_line(in));
    Index rows = 0, cols = 0;
    sz >> rows >> cols;
    if (rows <= 0 || cols <= 0)
      throw ValidationError("bad dimensions in " + path);
    Mat a(rows, cols);
    if (symmetry == "general") {
      for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) {
          std::istringstream v(next_data_line(in));
          v >> a(i, j);
          if (!v) throw ValidationError("bad entry in " + path);
        }
    } else {
      if (rows != cols) throw ValidationError("symmetric matrix not square in " + path);
      for (Index j = 0; j < cols; ++j)
        for (Index i = j; i < rows; ++i) {
          std::istringstream v(next_data_line(in));
          double x = 0;
          v >> x;
          if (!v) throw ValidationError("bad entry in " + path);
          a(i, j) = x;
          a(j, i) = x;
        }
    }
    return a;
  }

  if (format != "coordinate")
    throw ValidationError("unsupported matrix format '" + format + "' in " + path);

  std::istringstream sz(next_data_line(in));
  Index rows = 0, cols = 0;
  long nnz = 0;
  sz >> rows >> cols >> nnz;
  if (rows <= 0 || cols <= 0 || nnz < 0)
    throw ValidationError("bad dimensions in " + path);
  if (symmetry == "symmetric" && rows != cols)
    throw ValidationError("symmetric matrix not square in " + path);
  Mat a = Mat::Zero(rows, cols);
  for (long k = 0; k < nnz; ++k) {
    std::istringstream v(next_data_line(in));
    Index i = 0, j = 0;
    double x = 0;
    v >> i >> j >> x;
    if (!v || i < 1 || i > rows || j < 1 || j > cols)
      throw ValidationError("bad coordinate entry in " + path);
    a(i - 1, j - 1) += x;
    if (symmetry == "symmetric" && i != j) a(j - 1, i - 1) += x;
  }
  return a;
}

void write_matrix_market(const std::string& path, const Mat& a,
                         const std::string& comment) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write matrix file: " + path);
  out << "%%MatrixMarket matrix array real general\n";
  if (!comment.empty()) out << "% " << comment << "\n";
  out.precision(17);
  out << a.rows() << " " << a.cols() << "\n";
  for (Index j = 0; j < a.cols(); ++j)
    for (Index i = 0; i < a.rows(); ++i) out << a(i, j) << "\n";
  if (!out) throw ValidationError("write failed: " + path);
}

}  // namespace dampopt
