#pragma once

#include <cstddef>
#include <vector>

#include "firth/matrix.hpp"

namespace firth {

// Dense symmetric matrix. Construction rejects entries that are not
// symmetric within 1e-12 absolute.
class SymMatrix {
 public:
  static SymMatrix zeros(std::size_t n);
  static SymMatrix identity(std::size_t n);
  static SymMatrix diagonal(const std::vector<double>& diag);

  // Row-major n*n entries.
  SymMatrix(std::size_t n, std::vector<double> entries);
  explicit SymMatrix(const Matrix& m);

  std::size_t size() const noexcept { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return a_[i * n_ + j]; }
  // Writes both (i, j) and (j, i).
  void set(std::size_t i, std::size_t j, double v) {
    a_[i * n_ + j] = v;
    a_[j * n_ + i] = v;
  }
  void add(std::size_t i, std::size_t j, double v);

  double trace() const;
  double frobenius_norm() const;
  const std::vector<double>& entries() const noexcept { return a_; }

 private:
  SymMatrix() = default;
  std::size_t n_ = 0;
  std::vector<double> a_;
};

struct SymEigen {
  std::vector<double> values;  // ascending
  Matrix vectors;              // column k is the unit eigenvector of values[k]
};

// Cyclic Jacobi. Stops when the off-diagonal Frobenius norm drops to
// 1e-12 of the matrix Frobenius norm, or after 100 sweeps.
SymEigen sym_eigen(const SymMatrix& m);
std::vector<double> sym_eigenvalues(const SymMatrix& m);

struct AmendedLogDet {
  double log_det = 0.0;
  std::size_t rank = 0;
};

inline constexpr double kDefaultRankTol = 1e-9;

// Sum of log eigenvalues above rel_tol * max eigenvalue ("amended"
// determinant of a rank-deficient PSD matrix). Throws NotPsd when an
// eigenvalue is below -rel_tol * max eigenvalue.
AmendedLogDet amended_log_det(const SymMatrix& m, double rel_tol = kDefaultRankTol);

}  // namespace firth
