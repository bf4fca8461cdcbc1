#include "firth/matrix.hpp"

#include <cmath>
#include <string>

#include "firth/error.hpp"

namespace firth {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
  if (data_.size() != rows * cols) {
    throw InvalidInput("matrix " + std::to_string(rows) + "x" + std::to_string(cols) +
                       " given " + std::to_string(data_.size()) + " values");
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

}  // namespace firth
