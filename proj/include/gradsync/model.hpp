// Copyright 2026 The gradsync Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "gradsync/rng.hpp"
#include "gradsync/tensor.hpp"

namespace gradsync {

enum class ModelKind { kLogReg, kMlp };

/// Shape of a classifier.
///
/// Parameter layout (flat, concatenated in this order):
///   logreg: W [classes x input_dim] row-major, b [classes]
///   mlp:    W1 [hidden x input_dim], b1 [hidden], W2 [classes x hidden], b2 [classes]
/// The MLP hidden layer uses ReLU; both models end in softmax + cross-entropy.
struct ModelSpec {
  ModelKind kind = ModelKind::kLogReg;
  std::size_t input_dim = 1;
  std::size_t hidden_dim = 0;
  std::size_t classes = 2;

  static ModelSpec logreg(std::size_t input_dim, std::size_t classes);
  static ModelSpec mlp(std::size_t input_dim, std::size_t hidden_dim, std::size_t classes);

  /// Throws ConfigError unless input_dim >= 1, classes >= 2 and (for mlp) hidden_dim >= 1.
  void validate() const;
  std::size_t param_count() const;

  bool operator==(const ModelSpec&) const = default;
};

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& s);

/// A mini-batch (or any labelled sample set): one row of `inputs` per label.
struct Batch {
  Matrix inputs;
  std::vector<std::size_t> labels;

  std::size_t size() const { return labels.size(); }
};

struct GradientResult {
  GradVector gradient;
  double loss = 0.0;
};

struct Evaluation {
  double accuracy = 0.0;
  double loss = 0.0;
};

/// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
ParamVector init_params(const ModelSpec& spec, Rng& rng);

/// Mean cross-entropy loss over the batch and its gradient (mean-reduced).
/// Throws DimensionError on shape mismatch and NumericError on non-finite
/// activations, loss or gradient.
GradientResult compute_gradient(const ModelSpec& spec, const ParamVector& params,
                                const Batch& batch);

/// Mean cross-entropy loss only (no gradient).
double compute_loss(const ModelSpec& spec, const ParamVector& params, const Batch& batch);

/// Accuracy and mean loss. Argmax ties resolve to the lowest class index.
Evaluation evaluate(const ModelSpec& spec, const ParamVector& params, const Batch& data);

}  // namespace gradsync
