// Copyright 2026 The gradsync Authors
// SPDX-License-Identifier: Apache-2.0

#include "gradsync/tensor.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace gradsync {
namespace {

void require_same_length(std::size_t a, std::size_t b, const char* op) {
  if (a != b) throw DimensionError(fmt::format("{}: length mismatch ({} vs {})", op, a, b));
}

void require_finite(std::span<const double> x, const char* op) {
  if (!all_finite(x)) throw NumericError(fmt::format("{}: non-finite result", op));
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw DimensionError(
        fmt::format("Matrix: {} values for a {}x{} shape", data_.size(), rows, cols));
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

ParamVector axpy(double alpha, const GradVector& x, const ParamVector& y) {
  ParamVector out = y;
  axpy_inplace(alpha, x, out);
  return out;
}

void axpy_inplace(double alpha, const GradVector& x, ParamVector& y) {
  require_same_length(x.size(), y.size(), "axpy");
  if (!std::isfinite(alpha)) throw NumericError("axpy: non-finite scalar");
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += alpha * x[i];
  require_finite(y.values(), "axpy");
}

GradVector accumulate(const GradVector& acc, const GradVector& g) {
  GradVector out = acc;
  accumulate_into(out, g);
  return out;
}

void accumulate_into(GradVector& acc, const GradVector& g) {
  require_same_length(acc.size(), g.size(), "accumulate");
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
  require_finite(acc.values(), "accumulate");
}

GradVector scale(const GradVector& g, double c) {
  GradVector out = g;
  for (double& v : out) v *= c;
  require_finite(out.values(), "scale");
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  require_same_length(a.size(), b.size(), "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::vector<double> matvec(const Matrix& a, std::span<const double> x) {
  require_same_length(a.cols(), x.size(), "matvec");
  std::vector<double> y(a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r) y[r] = dot(a.row(r), x);
  return y;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  require_same_length(a.cols(), b.rows(), "matmul");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  }
  return c;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<double> sigmoid(std::span<const double> x) {
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = sigmoid(x[i]);
  return y;
}

std::vector<double> relu(std::span<const double> x) {
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
  return y;
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) return {};
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

bool all_finite(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace gradsync
