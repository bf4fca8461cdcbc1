#include "firth/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "firth/error.hpp"

namespace firth {

namespace {

constexpr double kSymmetryTol = 1e-12;
constexpr double kJacobiRelTol = 1e-12;
constexpr int kMaxSweeps = 100;

void check_symmetric(std::size_t n, const std::vector<double>& a) {
  if (n == 0) throw InvalidInput("symmetric matrix must have n >= 1");
  if (a.size() != n * n) {
    throw InvalidInput("symmetric matrix of size " + std::to_string(n) + " given " +
                       std::to_string(a.size()) + " entries");
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = std::abs(a[i * n + j] - a[j * n + i]);
      if (!(d <= kSymmetryTol)) {
        throw InvalidInput("matrix not symmetric at (" + std::to_string(i) + ", " +
                           std::to_string(j) + ")");
      }
    }
  }
}

double off_diagonal_norm(std::size_t n, const std::vector<double>& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) s += a[i * n + j] * a[i * n + j];
  return std::sqrt(s);
}

}  // namespace

SymMatrix SymMatrix::zeros(std::size_t n) {
  if (n == 0) throw InvalidInput("symmetric matrix must have n >= 1");
  SymMatrix m;
  m.n_ = n;
  m.a_.assign(n * n, 0.0);
  return m;
}

SymMatrix SymMatrix::identity(std::size_t n) {
  SymMatrix m = zeros(n);
  for (std::size_t i = 0; i < n; ++i) m.a_[i * n + i] = 1.0;
  return m;
}

SymMatrix SymMatrix::diagonal(const std::vector<double>& diag) {
  SymMatrix m = zeros(diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) m.a_[i * m.n_ + i] = diag[i];
  return m;
}

SymMatrix::SymMatrix(std::size_t n, std::vector<double> entries)
    : n_(n), a_(std::move(entries)) {
  check_symmetric(n_, a_);
}

SymMatrix::SymMatrix(const Matrix& m) : n_(m.rows()) {
  if (m.rows() != m.cols()) throw InvalidInput("symmetric matrix must be square");
  a_.assign(m.values().begin(), m.values().end());
  check_symmetric(n_, a_);
}

void SymMatrix::add(std::size_t i, std::size_t j, double v) {
  a_[i * n_ + j] += v;
  if (i != j) a_[j * n_ + i] += v;
}

double SymMatrix::trace() const {
  double t = 0.0;
  for (std::size_t i = 0; i < n_; ++i) t += a_[i * n_ + i];
  return t;
}

double SymMatrix::frobenius_norm() const {
  double s = 0.0;
  for (double v : a_) s += v * v;
  return std::sqrt(s);
}

SymEigen sym_eigen(const SymMatrix& m) {
  const std::size_t n = m.size();
  std::vector<double> a = m.entries();
  Matrix v(n, n);
  for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;

  const double target = kJacobiRelTol * m.frobenius_norm();
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    if (off_diagonal_norm(n, a) <= target) break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        if (apq == 0.0) continue;
        const double app = a[p * n + p];
        const double aqq = a[q * n + q];
        // Rotation zeroing a(p, q), smaller of the two angles.
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k * n + p];
          const double akq = a[k * n + q];
          a[k * n + p] = c * akp - s * akq;
          a[k * n + q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p * n + k];
          const double aqk = a[q * n + k];
          a[p * n + k] = c * apk - s * aqk;
          a[q * n + k] = s * apk + c * aqk;
        }
        a[p * n + q] = 0.0;
        a[q * n + p] = 0.0;

        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a[x * n + x] < a[y * n + y]; });

  SymEigen out;
  out.values.resize(n);
  out.vectors = Matrix(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a[order[k] * n + order[k]];
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
  }
  return out;
}

std::vector<double> sym_eigenvalues(const SymMatrix& m) { return sym_eigen(m).values; }

AmendedLogDet amended_log_det(const SymMatrix& m, double rel_tol) {
  if (!(rel_tol >= 0.0)) throw InvalidInput("rel_tol must be nonnegative");
  const std::vector<double> eig = sym_eigenvalues(m);
  const double max_eig = eig.back();
  AmendedLogDet out;
  if (max_eig <= 0.0) {
    if (eig.front() < 0.0) throw NotPsd("matrix has only negative or zero eigenvalues");
    return out;
  }
  const double cutoff = rel_tol * max_eig;
  for (double lam : eig) {
    if (lam < -cutoff) {
      throw NotPsd("eigenvalue " + std::to_string(lam) + " below -" + std::to_string(cutoff));
    }
    if (lam > cutoff) {
      out.log_det += std::log(lam);
      ++out.rank;
    }
  }
  return out;
}

}  // namespace firth
