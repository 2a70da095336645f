// Copyright 2026 The gradsync Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "gradsync/errors.hpp"

namespace gradsync {

/// Flat vector of 64-bit reals. The tag keeps parameters and gradients from
/// being mixed up; both share one layout so collectives can treat them as
/// plain buffers.
template <class Tag>
class DenseVector {
 public:
  DenseVector() = default;
  explicit DenseVector(std::size_t n, double fill = 0.0) : data_(n, fill) {}
  DenseVector(std::initializer_list<double> values) : data_(values) {}
  explicit DenseVector(std::vector<double> values) : data_(std::move(values)) {}

  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  const std::vector<double>& raw() const { return data_; }

  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  /// Sets every entry to +0.0 (bitwise zero).
  void zero() {
    for (double& v : data_) v = 0.0;
  }

  bool operator==(const DenseVector&) const = default;

 private:
  std::vector<double> data_;
};

struct ParamTag;
struct GradTag;
using ParamVector = DenseVector<ParamTag>;
using GradVector = DenseVector<GradTag>;

/// Row-major dense matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<const double> values() const { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Returns y + alpha * x. Throws DimensionError on length mismatch and
/// NumericError if the result is not finite.
ParamVector axpy(double alpha, const GradVector& x, const ParamVector& y);

/// In-place y += alpha * x (same contract as axpy).
void axpy_inplace(double alpha, const GradVector& x, ParamVector& y);

/// Returns acc + g.
GradVector accumulate(const GradVector& acc, const GradVector& g);

/// In-place acc += g.
void accumulate_into(GradVector& acc, const GradVector& g);

GradVector scale(const GradVector& g, double c);

/// Left-to-right dot product.
double dot(std::span<const double> a, std::span<const double> b);

/// y = A x. Each output is a left-to-right dot product.
std::vector<double> matvec(const Matrix& a, std::span<const double> x);

/// C = A B.
Matrix matmul(const Matrix& a, const Matrix& b);

double sigmoid(double x);
std::vector<double> sigmoid(std::span<const double> x);
std::vector<double> relu(std::span<const double> x);

/// Numerically stable softmax (max-shifted).
std::vector<double> softmax(std::span<const double> logits);

/// True when every entry is finite.
bool all_finite(std::span<const double> x);

}  // namespace gradsync
