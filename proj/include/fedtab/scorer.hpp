#pragma once

// The exportable utility proxy: a tanh-bounded linear head over the record
// encoding. Scorers weight synthetic mini-batches during local adaptation,
// are refreshed against the validation signal q through the clip/normalize
// weighting, and travel between clients as a small binary payload. Pooled
// scorers are compared only through within-group rank normalization, which
// makes heterogeneous calibrations commensurable.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedtab/encoding.hpp"
#include "fedtab/learner.hpp"
#include "fedtab/schema.hpp"

namespace fedtab {

struct ScorerState {
  std::string task_id;
  std::vector<double> feature_weights;
  double bias = 0.0;
  double learning_rate = 5e-5;
  double w_min = 0.05;
  double w_max = 0.95;
  int update_budget = 0;    // max applied refreshes per round
  int updates_applied = 0;

  static ScorerState init(std::string task_id, size_t dim, double lr, double w_min, double w_max,
                          int budget) {
    if (!(0.0 < w_min && w_min < w_max && w_max < 1.0))
      throw std::invalid_argument("scorer: clip_bounds must satisfy 0 < w_min < w_max < 1");
    ScorerState s;
    s.task_id = std::move(task_id);
    s.feature_weights.assign(dim, 0.0);
    s.learning_rate = lr;
    s.w_min = w_min;
    s.w_max = w_max;
    s.update_budget = budget;
    return s;
  }
};

inline double score_logit(const ScorerState& s, std::span<const double> x) {
  double z = s.bias;
  for (size_t i = 0; i < x.size(); ++i) z += s.feature_weights[i] * x[i];
  return z;
}

// bounded score in (-1, 1); tanh saturates to exactly +-1.0 in double
// precision around |logit| > 19, so the open interval is restored explicitly
inline double score(const ScorerState& s, const FeatureEncoder& enc, const Record& r) {
  constexpr double kInterior = 1.0 - 1e-16;
  return std::clamp(std::tanh(score_logit(s, enc.encode(r))), -kInterior, kInterior);
}

// s -> clip((s+1)/2, w_min, w_max), then normalize to sum 1
inline std::vector<double> batch_weights(std::span<const double> scores, double w_min,
                                         double w_max) {
  if (scores.empty()) throw std::invalid_argument("batch_weights: empty batch");
  std::vector<double> w(scores.size());
  double sum = 0.0;
  for (size_t i = 0; i < scores.size(); ++i) {
    w[i] = std::clamp((scores[i] + 1.0) * 0.5, w_min, w_max);
    sum += w[i];
  }
  for (double& x : w) x /= sum;
  return w;
}

struct ScorerUpdateResult {
  ScorerState scorer;
  bool applied = false;
};

// One gradient step on q * sum_x w_phi(x) * loss(x; theta+delta) with respect
// to the scorer parameters, differentiating through the clip/normalize
// weighting (clip plateaus contribute zero gradient). Skipped, not failed,
// when the per-round budget is exhausted.
inline ScorerUpdateResult scorer_update(ScorerState s, const FeatureEncoder& scorer_enc,
                                        double q, const std::vector<Record>& batch,
                                        const LearnerState& learner,
                                        const FeatureEncoder& learner_enc) {
  if (batch.empty()) throw std::invalid_argument("scorer_update: empty batch");
  if (s.updates_applied >= s.update_budget) return {std::move(s), false};

  const size_t n = batch.size();
  std::vector<std::vector<double>> feats(n);
  std::vector<double> clipped(n), dclip(n), losses(n);
  double total = 0.0;
  for (size_t i = 0; i < n; ++i) {
    feats[i] = scorer_enc.encode(batch[i]);
    const double t = std::tanh(score_logit(s, feats[i]));
    const double raw = (t + 1.0) * 0.5;
    clipped[i] = std::clamp(raw, s.w_min, s.w_max);
    // zero through the plateaus, 0.5*(1-tanh^2) inside
    dclip[i] = (raw > s.w_min && raw < s.w_max) ? 0.5 * (1.0 - t * t) : 0.0;
    losses[i] = record_loss(learner, learner_enc, scorer_enc.schema(), batch[i]);
    total += clipped[i];
  }
  double weighted = 0.0;
  for (size_t i = 0; i < n; ++i) weighted += clipped[i] / total * losses[i];

  // dJ/du_i = q * dclip_i * (loss_i - weighted_mean_loss) / total
  std::vector<double> g(s.feature_weights.size(), 0.0);
  double g_bias = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double du = q * dclip[i] * (losses[i] - weighted) / total;
    for (size_t k = 0; k < g.size(); ++k) g[k] += du * feats[i][k];
    g_bias += du;
  }
  for (size_t k = 0; k < g.size(); ++k) s.feature_weights[k] -= s.learning_rate * g[k];
  s.bias -= s.learning_rate * g_bias;
  ++s.updates_applied;
  return {std::move(s), true};
}

// objective value used by the finite-difference tests
inline double scorer_objective(const ScorerState& s, const FeatureEncoder& scorer_enc, double q,
                               const std::vector<Record>& batch, const LearnerState& learner,
                               const FeatureEncoder& learner_enc) {
  std::vector<double> scores(batch.size());
  for (size_t i = 0; i < batch.size(); ++i)
    scores[i] = score(s, scorer_enc, batch[i]);
  const std::vector<double> w = batch_weights(scores, s.w_min, s.w_max);
  double total = 0.0;
  for (size_t i = 0; i < batch.size(); ++i)
    total += w[i] * record_loss(learner, learner_enc, scorer_enc.schema(), batch[i]);
  return q * total;
}

// Average ranks (ties share the mean of their positions) affinely mapped onto
// [-1, 1]. Exactly invariant under any strictly increasing transform of the
// inputs.
inline std::vector<double> rank_normalize(std::span<const double> group_scores) {
  const size_t g = group_scores.size();
  if (g < 2) throw std::invalid_argument("rank_normalize: group size must be >= 2");

  std::vector<size_t> order(g);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return group_scores[a] < group_scores[b]; });

  std::vector<double> ranks(g, 0.0);
  size_t i = 0;
  while (i < g) {
    size_t j = i;
    while (j + 1 < g && group_scores[order[j + 1]] == group_scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based
    for (size_t k = i; k <= j; ++k) ranks[order[k]] = avg_rank;
    i = j + 1;
  }

  std::vector<double> out(g);
  for (size_t k = 0; k < g; ++k)
    out[k] = 2.0 * (ranks[k] - 1.0) / static_cast<double>(g - 1) - 1.0;
  return out;
}

struct ScorerPool {
  struct Member {
    uint32_t client_id = 0;
    ScorerState scorer;
  };
  std::string task_id;
  std::vector<Member> members;  // all share task_id
};

enum class AggKind { Mean, Median };

// Per scorer: score all G candidates and rank-normalize; then aggregate
// across scorers per candidate (mean by default, median as the robust
// option).
inline std::vector<double> pooled_preference(const std::vector<const ScorerState*>& scorers,
                                             const FeatureEncoder& enc,
                                             const std::vector<Record>& group,
                                             AggKind agg = AggKind::Mean) {
  if (scorers.empty()) throw std::invalid_argument("pooled_preference: empty scorer set");
  const size_t g = group.size();
  std::vector<std::vector<double>> normalized;
  normalized.reserve(scorers.size());
  for (const ScorerState* s : scorers) {
    std::vector<double> raw(g);
    for (size_t j = 0; j < g; ++j) raw[j] = score(*s, enc, group[j]);
    normalized.push_back(rank_normalize(raw));
  }

  std::vector<double> pooled(g, 0.0);
  if (agg == AggKind::Mean) {
    for (size_t j = 0; j < g; ++j) {
      double sum = 0.0;
      for (const auto& row : normalized) sum += row[j];
      pooled[j] = sum / static_cast<double>(normalized.size());
    }
  } else {
    for (size_t j = 0; j < g; ++j) {
      std::vector<double> col(normalized.size());
      for (size_t k = 0; k < normalized.size(); ++k) col[k] = normalized[k][j];
      std::sort(col.begin(), col.end());
      const size_t m = col.size();
      pooled[j] = (m % 2 == 1) ? col[m / 2] : 0.5 * (col[m / 2 - 1] + col[m / 2]);
    }
  }
  return pooled;
}

// --- export payload -------------------------------------------------------
//
// versioned little-endian binary: u32 version, u32 task length, task bytes,
// u32 dim, dim f64 weights, f64 bias. This is exactly what uplink accounting
// measures in simulator mode; it carries no record data.

constexpr uint32_t kScorerPayloadVersion = 1;

namespace detail {

inline void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

inline void put_f64(std::vector<uint8_t>& out, double d) {
  uint64_t bits = 0;
  std::memcpy(&bits, &d, sizeof(bits));
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(bits >> (8 * i)));
}

struct ByteReader {
  std::span<const uint8_t> data;
  size_t pos = 0;

  bool u32(uint32_t& v) {
    if (pos + 4 > data.size()) return false;
    v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(data[pos + i]) << (8 * i);
    pos += 4;
    return true;
  }
  bool f64(double& d) {
    if (pos + 8 > data.size()) return false;
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(data[pos + i]) << (8 * i);
    std::memcpy(&d, &bits, sizeof(d));
    pos += 8;
    return true;
  }
  bool bytes(std::string& s, size_t n) {
    if (pos + n > data.size()) return false;
    s.assign(reinterpret_cast<const char*>(data.data() + pos), n);
    pos += n;
    return true;
  }
  bool done() const { return pos == data.size(); }
};

}  // namespace detail

inline std::vector<uint8_t> encode_scorer_payload(const ScorerState& s) {
  std::vector<uint8_t> out;
  detail::put_u32(out, kScorerPayloadVersion);
  detail::put_u32(out, static_cast<uint32_t>(s.task_id.size()));
  out.insert(out.end(), s.task_id.begin(), s.task_id.end());
  detail::put_u32(out, static_cast<uint32_t>(s.feature_weights.size()));
  for (double w : s.feature_weights) detail::put_f64(out, w);
  detail::put_f64(out, s.bias);
  return out;
}

inline ScorerState decode_scorer_payload(std::span<const uint8_t> payload) {
  detail::ByteReader r{payload};
  uint32_t version = 0, task_len = 0, dim = 0;
  ScorerState s;
  if (!r.u32(version) || version != kScorerPayloadVersion)
    throw std::runtime_error("scorer payload: bad version");
  if (!r.u32(task_len) || !r.bytes(s.task_id, task_len))
    throw std::runtime_error("scorer payload: truncated task id");
  if (!r.u32(dim) || payload.size() - r.pos < static_cast<size_t>(dim) * 8 + 8)
    throw std::runtime_error("scorer payload: truncated weights");
  s.feature_weights.resize(dim);
  for (uint32_t i = 0; i < dim; ++i)
    if (!r.f64(s.feature_weights[i])) throw std::runtime_error("scorer payload: truncated weights");
  if (!r.f64(s.bias)) throw std::runtime_error("scorer payload: truncated bias");
  if (!r.done()) throw std::runtime_error("scorer payload: trailing bytes");
  return s;
}

}  // namespace fedtab
