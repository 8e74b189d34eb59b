#include "turnover/matrix.hpp"

#include <cmath>

#include "turnover/error.hpp"

namespace turnover {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ShapeError("matrix " + shape_string() + " needs " + std::to_string(rows_ * cols_) +
                     " values, got " + std::to_string(data_.size()));
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() == 0 ? 0 : rows.begin()->size()) {
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ShapeError("ragged matrix literal");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

std::string Matrix::shape_string() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: cannot multiply " + a.shape_string() + " by " + b.shape_string());
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out_row = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      auto b_row = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aik * b_row[j];
    }
  }
  return out;
}

void affine(const Matrix& w, std::span<const double> x, std::span<const double> bias,
            std::span<double> out) {
  if (x.size() != w.cols() || out.size() != w.rows() ||
      (!bias.empty() && bias.size() != w.rows())) {
    throw ShapeError("affine: weight " + w.shape_string() + " with input of length " +
                     std::to_string(x.size()));
  }
  for (std::size_t i = 0; i < w.rows(); ++i) {
    double acc = bias.empty() ? 0.0 : bias[i];
    auto w_row = w.row(i);
    for (std::size_t k = 0; k < w.cols(); ++k) acc += w_row[k] * x[k];
    out[i] = acc;
  }
}

void transpose_times(const Matrix& w, std::span<const double> g, std::span<double> out) {
  if (g.size() != w.rows() || out.size() != w.cols()) {
    throw ShapeError("transpose_times: weight " + w.shape_string() + " with gradient of length " +
                     std::to_string(g.size()));
  }
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t i = 0; i < w.rows(); ++i) {
    const double gi = g[i];
    auto w_row = w.row(i);
    for (std::size_t k = 0; k < w.cols(); ++k) out[k] += w_row[k] * gi;
  }
}

bool all_finite(std::span<const double> values) noexcept {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace turnover
