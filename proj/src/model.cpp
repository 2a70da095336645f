// Copyright 2026 The gradsync Authors
// SPDX-License-Identifier: Apache-2.0

#include "gradsync/model.hpp"

#include <cmath>

#include <fmt/format.h>

namespace gradsync {
namespace {

// Offsets of each block inside the flat parameter vector.
struct Layout {
  std::size_t w1 = 0, b1 = 0, w2 = 0, b2 = 0, total = 0;
};

Layout layout_of(const ModelSpec& spec) {
  Layout l;
  if (spec.kind == ModelKind::kLogReg) {
    l.w1 = 0;
    l.b1 = spec.classes * spec.input_dim;
    l.total = l.b1 + spec.classes;
  } else {
    l.w1 = 0;
    l.b1 = spec.hidden_dim * spec.input_dim;
    l.w2 = l.b1 + spec.hidden_dim;
    l.b2 = l.w2 + spec.classes * spec.hidden_dim;
    l.total = l.b2 + spec.classes;
  }
  return l;
}

void check_shapes(const ModelSpec& spec, const ParamVector& params, const Batch& batch) {
  spec.validate();
  if (params.size() != spec.param_count()) {
    throw DimensionError(fmt::format("model expects {} parameters, got {}", spec.param_count(),
                                     params.size()));
  }
  if (batch.inputs.rows() != batch.labels.size()) {
    throw DimensionError(fmt::format("batch has {} input rows but {} labels", batch.inputs.rows(),
                                     batch.labels.size()));
  }
  if (batch.inputs.cols() != spec.input_dim) {
    throw DimensionError(fmt::format("batch has {} features, model expects {}",
                                     batch.inputs.cols(), spec.input_dim));
  }
  for (std::size_t label : batch.labels) {
    if (label >= spec.classes) {
      throw DimensionError(fmt::format("label {} out of range for {} classes", label, spec.classes));
    }
  }
}

// z[out] = W[out x in] x + b, with W and b read straight from the flat buffer.
void affine(std::span<const double> p, std::size_t w_off, std::size_t b_off, std::size_t out,
            std::span<const double> x, std::vector<double>& z) {
  z.resize(out);
  for (std::size_t r = 0; r < out; ++r) {
    z[r] = dot(p.subspan(w_off + r * x.size(), x.size()), x) + p[b_off + r];
  }
}

// Per-sample cross-entropy: log-sum-exp(z) - z[label].
double cross_entropy(std::span<const double> z, std::size_t label) {
  double m = z[0];
  for (double v : z) m = v > m ? v : m;
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  return m + std::log(s) - z[label];
}

std::size_t argmax_lowest(std::span<const double> z) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < z.size(); ++i) {
    if (z[i] > z[best]) best = i;
  }
  return best;
}

// Logits of one sample; hidden pre-activations are kept for the backward pass.
void forward(const ModelSpec& spec, const Layout& l, std::span<const double> p,
             std::span<const double> x, std::vector<double>& hidden_pre,
             std::vector<double>& hidden, std::vector<double>& logits) {
  if (spec.kind == ModelKind::kLogReg) {
    affine(p, l.w1, l.b1, spec.classes, x, logits);
    return;
  }
  affine(p, l.w1, l.b1, spec.hidden_dim, x, hidden_pre);
  hidden = relu(hidden_pre);
  affine(p, l.w2, l.b2, spec.classes, hidden, logits);
}

}  // namespace

ModelSpec ModelSpec::logreg(std::size_t input_dim, std::size_t classes) {
  return ModelSpec{ModelKind::kLogReg, input_dim, 0, classes};
}

ModelSpec ModelSpec::mlp(std::size_t input_dim, std::size_t hidden_dim, std::size_t classes) {
  return ModelSpec{ModelKind::kMlp, input_dim, hidden_dim, classes};
}

void ModelSpec::validate() const {
  if (input_dim < 1) throw ConfigError("model input_dim must be >= 1");
  if (classes < 2) throw ConfigError("model classes must be >= 2");
  if (kind == ModelKind::kMlp && hidden_dim < 1) throw ConfigError("mlp hidden_dim must be >= 1");
}

std::size_t ModelSpec::param_count() const { return layout_of(*this).total; }

std::string to_string(ModelKind kind) { return kind == ModelKind::kLogReg ? "logreg" : "mlp"; }

ModelKind parse_model_kind(const std::string& s) {
  if (s == "logreg") return ModelKind::kLogReg;
  if (s == "mlp") return ModelKind::kMlp;
  throw ConfigError(fmt::format("unknown model kind '{}'", s));
}

ParamVector init_params(const ModelSpec& spec, Rng& rng) {
  spec.validate();
  const Layout l = layout_of(spec);
  ParamVector p(l.total);
  auto fill = [&](std::size_t off, std::size_t count, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = 0; i < count; ++i) p[off + i] = rng.uniform(-bound, bound);
  };
  if (spec.kind == ModelKind::kLogReg) {
    fill(l.w1, spec.classes * spec.input_dim, spec.input_dim);
  } else {
    fill(l.w1, spec.hidden_dim * spec.input_dim, spec.input_dim);
    fill(l.w2, spec.classes * spec.hidden_dim, spec.hidden_dim);
  }
  return p;
}

GradientResult compute_gradient(const ModelSpec& spec, const ParamVector& params,
                                const Batch& batch) {
  check_shapes(spec, params, batch);
  if (batch.size() == 0) throw DimensionError("compute_gradient: empty batch");

  const Layout l = layout_of(spec);
  const std::span<const double> p = params.values();
  GradVector grad(l.total);
  double loss = 0.0;

  std::vector<double> hidden_pre, hidden, logits, dhidden;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    const std::span<const double> x = batch.inputs.row(s);
    const std::size_t label = batch.labels[s];
    forward(spec, l, p, x, hidden_pre, hidden, logits);
    loss += cross_entropy(logits, label);

    // dL/dz = softmax(z) - onehot(label)
    std::vector<double> dz = softmax(logits);
    dz[label] -= 1.0;

    if (spec.kind == ModelKind::kLogReg) {
      for (std::size_t c = 0; c < spec.classes; ++c) {
        for (std::size_t j = 0; j < spec.input_dim; ++j) grad[l.w1 + c * spec.input_dim + j] += dz[c] * x[j];
        grad[l.b1 + c] += dz[c];
      }
      continue;
    }

    const std::size_t h = spec.hidden_dim;
    dhidden.assign(h, 0.0);
    for (std::size_t c = 0; c < spec.classes; ++c) {
      for (std::size_t j = 0; j < h; ++j) {
        grad[l.w2 + c * h + j] += dz[c] * hidden[j];
        dhidden[j] += p[l.w2 + c * h + j] * dz[c];
      }
      grad[l.b2 + c] += dz[c];
    }
    for (std::size_t j = 0; j < h; ++j) {
      const double d = hidden_pre[j] > 0.0 ? dhidden[j] : 0.0;
      for (std::size_t k = 0; k < spec.input_dim; ++k) grad[l.w1 + j * spec.input_dim + k] += d * x[k];
      grad[l.b1 + j] += d;
    }
  }

  const double inv = 1.0 / static_cast<double>(batch.size());
  for (double& g : grad) g *= inv;
  loss *= inv;
  if (!std::isfinite(loss) || !all_finite(grad.values())) {
    throw NumericError("compute_gradient: non-finite loss or gradient");
  }
  return {std::move(grad), loss};
}

double compute_loss(const ModelSpec& spec, const ParamVector& params, const Batch& batch) {
  return evaluate(spec, params, batch).loss;
}

Evaluation evaluate(const ModelSpec& spec, const ParamVector& params, const Batch& data) {
  check_shapes(spec, params, data);
  if (data.size() == 0) throw DimensionError("evaluate: empty data");

  const Layout l = layout_of(spec);
  std::vector<double> hidden_pre, hidden, logits;
  std::size_t correct = 0;
  double loss = 0.0;
  for (std::size_t s = 0; s < data.size(); ++s) {
    forward(spec, l, params.values(), data.inputs.row(s), hidden_pre, hidden, logits);
    loss += cross_entropy(logits, data.labels[s]);
    if (argmax_lowest(logits) == data.labels[s]) ++correct;
  }
  const double n = static_cast<double>(data.size());
  if (!std::isfinite(loss)) throw NumericError("evaluate: non-finite loss");
  return {static_cast<double>(correct) / n, loss / n};
}

}  // namespace gradsync
