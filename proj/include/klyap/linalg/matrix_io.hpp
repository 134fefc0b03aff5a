#pragma once

#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace klyap {

// Plain-text matrix format: a "rows cols" header line followed by one line
// per row of whitespace-separated entries, printed with round-trip precision.

template <typename Derived>
void write_matrix(std::ostream& os, const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  os << m.rows() << ' ' << m.cols() << '\n';
  os << std::setprecision(std::numeric_limits<Scalar>::max_digits10);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) os << ' ';
      os << m(i, j);
    }
    os << '\n';
  }
}

inline Eigen::MatrixXd read_matrix(std::istream& is) {
  Eigen::Index rows = -1, cols = -1;
  if (!(is >> rows >> cols) || rows < 0 || cols < 0) {
    throw std::runtime_error("read_matrix: malformed dimension header");
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j)
      if (!(is >> m(i, j))) throw std::runtime_error("read_matrix: truncated data");
  return m;
}

template <typename Derived>
void save_matrix(const std::string& path, const Eigen::MatrixBase<Derived>& m) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("save_matrix: cannot open " + path);
  write_matrix(os, m);
}

inline Eigen::MatrixXd load_matrix(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_matrix: cannot open " + path);
  return read_matrix(is);
}

}  // namespace klyap
