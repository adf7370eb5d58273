#pragma once

// Surrogate downstream model: a logistic head over the feature encoding with
// a frozen base block (the broadcast backbone) and a trainable delta block
// that never leaves the client. Training is one weighted gradient step at a
// time on synthetic mini-batches, with global-norm clipping.

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "fedtab/encoding.hpp"
#include "fedtab/schema.hpp"

namespace fedtab {

enum class OptimizerKind { Sgd, AdamW };

struct LearnerState {
  std::vector<double> base_weights;  // frozen between broadcasts
  double base_bias = 0.0;
  std::vector<double> delta_weights;  // trainable, zero-initialized each round
  double bias_delta = 0.0;
  double learning_rate = 5e-5;
  double clip_norm = 1.0;

  static LearnerState init(std::span<const double> base, double base_bias, double lr) {
    LearnerState s;
    s.base_weights.assign(base.begin(), base.end());
    s.base_bias = base_bias;
    s.delta_weights.assign(base.size(), 0.0);
    s.learning_rate = lr;
    return s;
  }
};

// Adam moments for the optional AdamW path (weight decay 0)
struct AdamMoments {
  std::vector<double> m, v;
  double m_bias = 0.0, v_bias = 0.0;
  long step = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double logistic_loss(double z, int y) {
  // -y log p - (1-y) log(1-p), stable form
  const double m = z > 0 ? z : 0.0;
  return m - static_cast<double>(y) * z + std::log(std::exp(-m) + std::exp(z - m));
}

inline double preactivation(const LearnerState& s, std::span<const double> x) {
  double z = s.base_bias + s.bias_delta;
  for (size_t i = 0; i < x.size(); ++i) z += (s.base_weights[i] + s.delta_weights[i]) * x[i];
  return z;
}

inline double predict_score(const LearnerState& s, const FeatureEncoder& enc, const Record& r) {
  return sigmoid(preactivation(s, enc.encode(r)));
}

// per-record loss under the current adapted state
inline double record_loss(const LearnerState& s, const FeatureEncoder& enc, const Schema& schema,
                          const Record& r) {
  return logistic_loss(preactivation(s, enc.encode(r)), schema.label_value(r));
}

inline double weighted_loss(const LearnerState& s, const FeatureEncoder& enc, const Schema& schema,
                            const std::vector<Record>& batch, std::span<const double> weights) {
  double total = 0.0;
  for (size_t i = 0; i < batch.size(); ++i)
    total += weights[i] * record_loss(s, enc, schema, batch[i]);
  return total;
}

namespace detail {

inline void check_batch(const Schema& schema, const std::vector<Record>& batch,
                        std::span<const double> weights) {
  if (batch.empty() || batch.size() != weights.size())
    throw std::invalid_argument("weighted_step: batch/weights size mismatch");
  double sum = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw std::invalid_argument("weighted_step: negative weight");
    sum += w;
  }
  if (std::fabs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("weighted_step: weights must sum to 1");
  for (const auto& r : batch) {
    auto it = r.find(schema.label_field);
    if (it == r.end() || it->second.kind != Value::Kind::Category)
      throw std::invalid_argument("weighted_step: unlabeled record in batch");
  }
}

// gradient of sum_i w_i * loss_i with respect to (delta, bias_delta)
inline void weighted_gradient(const LearnerState& s, const FeatureEncoder& enc,
                              const Schema& schema, const std::vector<Record>& batch,
                              std::span<const double> weights, std::vector<double>& g_w,
                              double& g_b) {
  g_w.assign(s.delta_weights.size(), 0.0);
  g_b = 0.0;
  for (size_t i = 0; i < batch.size(); ++i) {
    const std::vector<double> x = enc.encode(batch[i]);
    const double err = sigmoid(preactivation(s, x)) - schema.label_value(batch[i]);
    const double c = weights[i] * err;
    for (size_t k = 0; k < x.size(); ++k) g_w[k] += c * x[k];
    g_b += c;
  }
}

inline void clip_global_norm(std::vector<double>& g_w, double& g_b, double max_norm) {
  double sq = g_b * g_b;
  for (double g : g_w) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (double& g : g_w) g *= scale;
    g_b *= scale;
  }
}

}  // namespace detail

// One SGD step on the weighted batch loss; only the delta block moves.
inline LearnerState weighted_step(LearnerState s, const FeatureEncoder& enc, const Schema& schema,
                                  const std::vector<Record>& batch,
                                  std::span<const double> weights) {
  detail::check_batch(schema, batch, weights);
  std::vector<double> g_w;
  double g_b = 0.0;
  detail::weighted_gradient(s, enc, schema, batch, weights, g_w, g_b);
  detail::clip_global_norm(g_w, g_b, s.clip_norm);
  for (size_t k = 0; k < g_w.size(); ++k) s.delta_weights[k] -= s.learning_rate * g_w[k];
  s.bias_delta -= s.learning_rate * g_b;
  return s;
}

// AdamW variant (weight decay 0), same clipped gradient.
inline LearnerState weighted_step_adamw(LearnerState s, AdamMoments& adam,
                                        const FeatureEncoder& enc, const Schema& schema,
                                        const std::vector<Record>& batch,
                                        std::span<const double> weights) {
  detail::check_batch(schema, batch, weights);
  if (adam.m.size() != s.delta_weights.size()) {
    adam.m.assign(s.delta_weights.size(), 0.0);
    adam.v.assign(s.delta_weights.size(), 0.0);
  }
  std::vector<double> g_w;
  double g_b = 0.0;
  detail::weighted_gradient(s, enc, schema, batch, weights, g_w, g_b);
  detail::clip_global_norm(g_w, g_b, s.clip_norm);

  ++adam.step;
  const double bc1 = 1.0 - std::pow(adam.beta1, static_cast<double>(adam.step));
  const double bc2 = 1.0 - std::pow(adam.beta2, static_cast<double>(adam.step));
  auto update = [&](double& param, double& m, double& v, double g) {
    m = adam.beta1 * m + (1.0 - adam.beta1) * g;
    v = adam.beta2 * v + (1.0 - adam.beta2) * g * g;
    param -= s.learning_rate * (m / bc1) / (std::sqrt(v / bc2) + adam.eps);
  };
  for (size_t k = 0; k < g_w.size(); ++k)
    update(s.delta_weights[k], adam.m[k], adam.v[k], g_w[k]);
  update(s.bias_delta, adam.m_bias, adam.v_bias, g_b);
  return s;
}

}  // namespace fedtab
