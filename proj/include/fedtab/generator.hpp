#pragma once

// Client-local synthetic table generator: an order-1 autoregressive
// categorical policy over the schema's fixed key order. Each field has a
// logit table conditioned on the target label and the previous field's
// action; numeric fields act over bin indices and emit bin midpoints; the
// label field is forced to the condition's target label. This is the
// smallest policy class where nucleus sampling, sequence-level importance
// ratios, and the KL to a frozen reference are all exactly computable.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedtab/rng.hpp"
#include "fedtab/schema.hpp"
#include "fedtab/scorer.hpp"
#include "fedtab/serialization.hpp"

namespace fedtab {

struct GeneratorPolicy {
  struct FieldTable {
    size_t n_ctx = 1;      // actions of the previous field (1 for the first)
    size_t n_actions = 0;  // tokens/bins plus the missing action
    std::vector<double> logits;  // [label][ctx][action], 2 * n_ctx * n_actions
  };

  double temperature = 1.0;
  double top_p = 0.95;
  bool allow_missing = true;
  size_t label_pos = 0;
  std::vector<size_t> actions_per_field;  // label field counts its two labels
  std::vector<FieldTable> tables;         // label field has an empty table

  std::span<double> row(size_t field, int label, size_t ctx) {
    FieldTable& t = tables[field];
    return {t.logits.data() + (static_cast<size_t>(label) * t.n_ctx + ctx) * t.n_actions,
            t.n_actions};
  }
  std::span<const double> row(size_t field, int label, size_t ctx) const {
    const FieldTable& t = tables[field];
    return {t.logits.data() + (static_cast<size_t>(label) * t.n_ctx + ctx) * t.n_actions,
            t.n_actions};
  }

  size_t parameter_count() const {
    size_t n = 0;
    for (const auto& t : tables) n += t.logits.size();
    return n;
  }

  // number of conditional rows carrying parameters
  size_t row_count() const {
    size_t n = 0;
    for (size_t f = 0; f < tables.size(); ++f) {
      if (f == label_pos) continue;
      n += 2 * tables[f].n_ctx;
    }
    return n;
  }

  bool same_shape(const GeneratorPolicy& other) const {
    if (tables.size() != other.tables.size()) return false;
    for (size_t f = 0; f < tables.size(); ++f)
      if (tables[f].n_ctx != other.tables[f].n_ctx ||
          tables[f].n_actions != other.tables[f].n_actions)
        return false;
    return true;
  }
};

namespace detail {

inline size_t field_action_count(const Schema& schema, const FieldSpec& f, bool allow_missing) {
  if (f.name == schema.label_field) return 2;
  const size_t base = f.kind == FieldKind::Categorical ? f.vocabulary.size() : f.bin_count();
  return base + (allow_missing ? 1 : 0);
}

// -1 when the value has no action (missing while missing actions are off)
inline int action_of_value(const Schema& schema, const FieldSpec& f, const Value& v,
                           bool allow_missing) {
  if (f.name == schema.label_field) {
    return v.category == schema.task.positive_label ? 1 : 0;
  }
  const size_t base = f.kind == FieldKind::Categorical ? f.vocabulary.size() : f.bin_count();
  if (v.is_missing()) return allow_missing ? static_cast<int>(base) : -1;
  if (f.kind == FieldKind::Categorical) {
    for (size_t t = 0; t < f.vocabulary.size(); ++t)
      if (f.vocabulary[t] == v.category) return static_cast<int>(t);
    return -1;
  }
  return static_cast<int>(f.bin_of(v.number));
}

inline Value value_of_action(const Schema& schema, const FieldSpec& f, int action,
                             const std::string& target_label) {
  if (f.name == schema.label_field) return Value::cat(target_label);
  const size_t base = f.kind == FieldKind::Categorical ? f.vocabulary.size() : f.bin_count();
  if (static_cast<size_t>(action) >= base) return Value::missing();
  if (f.kind == FieldKind::Categorical) return Value::cat(f.vocabulary[action]);
  return Value::num(f.bin_midpoint(static_cast<size_t>(action)));
}

}  // namespace detail

inline GeneratorPolicy make_policy(const Schema& schema, bool allow_missing = true,
                                   double temperature = 1.0, double top_p = 0.95) {
  GeneratorPolicy p;
  p.temperature = temperature;
  p.top_p = top_p;
  p.allow_missing = allow_missing;
  p.label_pos = schema.label_index();
  size_t prev_actions = 1;
  for (const auto& f : schema.fields) {
    const size_t n = detail::field_action_count(schema, f, allow_missing);
    p.actions_per_field.push_back(n);
    GeneratorPolicy::FieldTable t;
    t.n_ctx = prev_actions;
    t.n_actions = n;
    if (f.name != schema.label_field) t.logits.assign(2 * t.n_ctx * t.n_actions, 0.0);
    p.tables.push_back(std::move(t));
    prev_actions = n;
  }
  return p;
}

// Add-alpha fitted transition counts from labeled records; a rough stand-in
// for a generator pretrained on in-domain data.
inline GeneratorPolicy fit_policy(const Schema& schema, const std::vector<Record>& train,
                                  double smoothing = 1.0, bool allow_missing = true,
                                  double temperature = 1.0, double top_p = 0.95) {
  GeneratorPolicy p = make_policy(schema, allow_missing, temperature, top_p);
  std::vector<std::vector<double>> counts(p.tables.size());
  for (size_t f = 0; f < p.tables.size(); ++f) counts[f].assign(p.tables[f].logits.size(), 0.0);

  for (const auto& r : train) {
    auto label_it = r.find(schema.label_field);
    if (label_it == r.end() || label_it->second.kind != Value::Kind::Category) continue;
    const int label =
        label_it->second.category == schema.task.positive_label ? 1 : 0;
    int prev = 0;
    for (size_t f = 0; f < schema.fields.size(); ++f) {
      const FieldSpec& spec = schema.fields[f];
      auto it = r.find(spec.name);
      const Value v = it == r.end() ? Value::missing() : it->second;
      const int a = detail::action_of_value(schema, spec, v, allow_missing);
      if (a < 0) {
        prev = 0;  // fall back to a fixed context when the value is unrepresentable
        continue;
      }
      if (f != p.label_pos) {
        const auto& t = p.tables[f];
        counts[f][(static_cast<size_t>(label) * t.n_ctx + static_cast<size_t>(prev)) *
                      t.n_actions +
                  static_cast<size_t>(a)] += 1.0;
      }
      prev = a;
    }
  }
  for (size_t f = 0; f < p.tables.size(); ++f)
    for (size_t i = 0; i < p.tables[f].logits.size(); ++i)
      p.tables[f].logits[i] = std::log(counts[f][i] + smoothing);
  return p;
}

// Temperature-scaled softmax with nucleus truncation: the smallest prefix of
// descending probabilities with cumulative mass >= top_p, renormalized.
// Sampling log-probabilities and importance ratios both live on this
// truncated distribution.
struct RowDist {
  std::vector<double> probs;       // renormalized, zero outside the nucleus
  std::vector<uint8_t> in_support;
};

inline RowDist truncated_row(const GeneratorPolicy& p, size_t field, int label, size_t ctx) {
  const std::span<const double> logits = p.row(field, label, ctx);
  const size_t n = logits.size();
  RowDist d;
  d.probs.assign(n, 0.0);
  d.in_support.assign(n, 0);

  double max_logit = logits[0];
  for (double l : logits) max_logit = std::max(max_logit, l);
  std::vector<double> soft(n);
  double sum = 0.0;
  for (size_t i = 0; i < n; ++i) {
    soft[i] = std::exp((logits[i] - max_logit) / p.temperature);
    sum += soft[i];
  }
  for (double& s : soft) s /= sum;

  if (p.top_p >= 1.0) {
    d.probs = soft;
    std::fill(d.in_support.begin(), d.in_support.end(), 1);
    return d;
  }

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return soft[a] > soft[b]; });
  double cum = 0.0, mass = 0.0;
  for (size_t i : order) {
    d.in_support[i] = 1;
    cum += soft[i];
    mass += soft[i];
    if (cum >= p.top_p) break;
  }
  for (size_t i = 0; i < n; ++i)
    if (d.in_support[i]) d.probs[i] = soft[i] / mass;
  return d;
}

struct SampledRecord {
  Record record;
  std::vector<int> actions;   // per field, label field included
  std::vector<double> logps;  // per field, 0 for the forced label
  double total_logp = 0.0;
};

inline SampledRecord sample_record(const GeneratorPolicy& p, const Schema& schema,
                                   int target_label, Rng& rng) {
  const std::string& label_token =
      target_label == 1 ? schema.task.positive_label : schema.task.negative_label;
  SampledRecord out;
  int prev = 0;
  for (size_t f = 0; f < schema.fields.size(); ++f) {
    const FieldSpec& spec = schema.fields[f];
    int action;
    double logp = 0.0;
    if (f == p.label_pos) {
      action = target_label;  // forced, probability 1
    } else {
      const RowDist d = truncated_row(p, f, target_label, static_cast<size_t>(prev));
      const double u = rng.next_double();
      double cum = 0.0;
      action = -1;
      for (size_t a = 0; a < d.probs.size(); ++a) {
        if (!d.in_support[a]) continue;
        cum += d.probs[a];
        action = static_cast<int>(a);
        if (u < cum) break;
      }
      logp = std::log(d.probs[static_cast<size_t>(action)]);
    }
    out.record[spec.name] = detail::value_of_action(schema, spec, action, label_token);
    out.actions.push_back(action);
    out.logps.push_back(logp);
    out.total_logp += logp;
    prev = action;
  }
  return out;
}

struct GenCandidate {
  std::string text;
  bool parse_ok = false;
  ParseErrorKind parse_error = ParseErrorKind::None;
  Record parsed;         // from the emitted text, when it parses
  Record action_record;  // from the sampled actions, always schema-valid
  std::vector<int> actions;
  double logp_sampled = 0.0;
  int target_label = 0;
};

struct CandidateGroup {
  SynthesisCondition condition;
  std::vector<GenCandidate> candidates;
};

namespace detail {

// corrupts emitted text only; sampled actions and log-probs stay intact
inline std::string malform_text(std::string text, Rng& rng) {
  switch (rng.next_below(3)) {
    case 0:  // drop the closing brace
      if (!text.empty()) text.pop_back();
      return text;
    case 1:  // truncate mid-record
      return text.substr(0, text.size() / 2);
    default:  // strip the opening brace
      return text.empty() ? text : text.substr(1);
  }
}

}  // namespace detail

inline CandidateGroup sample_group(const GeneratorPolicy& p, const Schema& schema,
                                   const SynthesisCondition& condition, size_t group_size,
                                   Rng& rng, double malform_prob = 0.0) {
  if (group_size < 2) throw std::invalid_argument("sample_group: G must be >= 2");
  const int target_label = condition.target_label == schema.task.positive_label ? 1 : 0;

  CandidateGroup group;
  group.condition = condition;
  for (size_t j = 0; j < group_size; ++j) {
    SampledRecord s = sample_record(p, schema, target_label, rng);
    GenCandidate c;
    c.text = serialize_record(schema, s.record);
    if (malform_prob > 0.0 && rng.next_bernoulli(malform_prob))
      c.text = detail::malform_text(c.text, rng);
    c.action_record = std::move(s.record);
    c.actions = std::move(s.actions);
    c.logp_sampled = s.total_logp;
    c.target_label = target_label;
    auto block = extract_brace_block(c.text, &c.parse_error);
    if (block) {
      ParseResult parsed = parse_record(schema, *block);
      c.parse_ok = parsed.ok;
      c.parse_error = parsed.error;
      if (parsed.ok) c.parsed = std::move(parsed.record);
    }
    group.candidates.push_back(std::move(c));
  }
  return group;
}

enum class RewardForm { Linear, TanhPooled };

// total reward: beta*pooled + lambda_fmt*fmt, or the tanh(beta*pooled)
// variant behind the config switch
inline std::vector<double> compose_reward(std::span<const double> pooled,
                                          std::span<const double> fmt, double beta,
                                          double lambda_fmt,
                                          RewardForm form = RewardForm::Linear) {
  if (pooled.size() != fmt.size())
    throw std::invalid_argument("compose_reward: length mismatch");
  std::vector<double> total(pooled.size());
  for (size_t i = 0; i < pooled.size(); ++i) {
    const double s = form == RewardForm::Linear ? beta * pooled[i] : std::tanh(beta * pooled[i]);
    total[i] = s + lambda_fmt * fmt[i];
  }
  return total;
}

// Group-relative advantages: center on the group mean, standardize by the
// population std (all zeros when the group is flat), clip to +-clip.
inline std::vector<double> advantages(std::span<const double> total, double clip = 5.0) {
  if (total.size() < 2) throw std::invalid_argument("advantages: G must be >= 2");
  const size_t g = total.size();
  double mean = 0.0;
  for (double t : total) mean += t;
  mean /= static_cast<double>(g);

  std::vector<double> a(g);
  double var = 0.0;
  for (size_t i = 0; i < g; ++i) {
    a[i] = total[i] - mean;
    var += a[i] * a[i];
  }
  const double std_dev = std::sqrt(var / static_cast<double>(g));
  if (std_dev < 1e-8) return std::vector<double>(g, 0.0);
  for (double& x : a) x = std::clamp(x / std_dev, -clip, clip);
  return a;
}

struct RewardBundle {
  std::vector<double> pooled;
  std::vector<double> fmt;
  std::vector<double> total;
  std::vector<double> advantages;
  double beta = 1.0;
  double lambda_fmt = 0.5;
};

struct ScoredGroup {
  CandidateGroup group;
  RewardBundle rewards;
};

struct GrpoConfig {
  double learning_rate = 1e-2;  // table-policy default; LLM-scale deployments run ~1e-6
  double clip_range = 0.2;
  double kl_coeff = 0.01;
  double advantage_clip = 5.0;
};

namespace detail {

struct CandidateEval {
  double logp_new = 0.0;
  bool in_support = true;
};

inline CandidateEval eval_candidate_logp(const GeneratorPolicy& p, const GenCandidate& c) {
  CandidateEval e;
  int prev = 0;
  for (size_t f = 0; f < c.actions.size(); ++f) {
    const int a = c.actions[f];
    if (f != p.label_pos) {
      const RowDist d = truncated_row(p, f, c.target_label, static_cast<size_t>(prev));
      if (!d.in_support[static_cast<size_t>(a)]) {
        e.in_support = false;
        return e;
      }
      e.logp_new += std::log(d.probs[static_cast<size_t>(a)]);
    }
    prev = a;
  }
  return e;
}

inline double row_kl(std::span<const double> new_logits, std::span<const double> ref_logits,
                     double temperature, std::vector<double>* grad_out) {
  const size_t n = new_logits.size();
  auto log_softmax = [&](std::span<const double> l, std::vector<double>& out) {
    double mx = l[0];
    for (double v : l) mx = std::max(mx, v);
    double sum = 0.0;
    out.resize(n);
    for (size_t i = 0; i < n; ++i) {
      out[i] = (l[i] - mx) / temperature;
      sum += std::exp(out[i]);
    }
    const double lse = std::log(sum);
    for (double& v : out) v -= lse;
  };
  std::vector<double> lp, lq;
  log_softmax(new_logits, lp);
  log_softmax(ref_logits, lq);
  double kl = 0.0;
  for (size_t i = 0; i < n; ++i) kl += std::exp(lp[i]) * (lp[i] - lq[i]);
  if (grad_out) {
    grad_out->resize(n);
    for (size_t i = 0; i < n; ++i)
      (*grad_out)[i] = std::exp(lp[i]) * ((lp[i] - lq[i]) - kl) / temperature;
  }
  return kl;
}

}  // namespace detail

// PPO-style surrogate: mean over candidates of min(rho*A, clip(rho)*A) minus
// kl_coeff times the mean full-row KL(policy || reference). rho is the
// sequence-level ratio exp(logp_new - logp_sampled) on the truncated
// distributions.
inline double grpo_objective(const GeneratorPolicy& policy, const GeneratorPolicy& reference,
                             const std::vector<ScoredGroup>& groups, double clip_range,
                             double kl_coeff) {
  size_t m = 0;
  double surrogate = 0.0;
  for (const auto& sg : groups) {
    if (sg.rewards.advantages.size() != sg.group.candidates.size())
      throw std::invalid_argument("grpo: group missing rewards");
    for (size_t j = 0; j < sg.group.candidates.size(); ++j) {
      const auto& c = sg.group.candidates[j];
      const double a = sg.rewards.advantages[j];
      const detail::CandidateEval e = detail::eval_candidate_logp(policy, c);
      const double rho = e.in_support ? std::exp(e.logp_new - c.logp_sampled) : 0.0;
      const double unclipped = rho * a;
      const double clipped = std::clamp(rho, 1.0 - clip_range, 1.0 + clip_range) * a;
      surrogate += std::min(unclipped, clipped);
      ++m;
    }
  }
  if (m == 0) throw std::invalid_argument("grpo: no candidates");
  surrogate /= static_cast<double>(m);

  double kl = 0.0;
  for (size_t f = 0; f < policy.tables.size(); ++f) {
    if (f == policy.label_pos) continue;
    for (int label = 0; label < 2; ++label)
      for (size_t ctx = 0; ctx < policy.tables[f].n_ctx; ++ctx)
        kl += detail::row_kl(policy.row(f, label, ctx), reference.row(f, label, ctx),
                             policy.temperature, nullptr);
  }
  kl /= static_cast<double>(policy.row_count());
  return surrogate - kl_coeff * kl;
}

// One gradient-ascent step on the surrogate objective; the reference policy
// is untouched.
inline GeneratorPolicy grpo_update(GeneratorPolicy policy, const GeneratorPolicy& reference,
                                   const std::vector<ScoredGroup>& groups,
                                   const GrpoConfig& cfg) {
  if (!policy.same_shape(reference))
    throw std::invalid_argument("grpo_update: reference shape mismatch");

  std::vector<std::vector<double>> grad(policy.tables.size());
  for (size_t f = 0; f < policy.tables.size(); ++f)
    grad[f].assign(policy.tables[f].logits.size(), 0.0);

  size_t m = 0;
  for (const auto& sg : groups) {
    if (sg.rewards.advantages.size() != sg.group.candidates.size())
      throw std::invalid_argument("grpo: group missing rewards");
    m += sg.group.candidates.size();
  }
  if (m == 0) throw std::invalid_argument("grpo: no candidates");

  for (const auto& sg : groups) {
    for (size_t j = 0; j < sg.group.candidates.size(); ++j) {
      const auto& c = sg.group.candidates[j];
      const double a = sg.rewards.advantages[j];
      const detail::CandidateEval e = detail::eval_candidate_logp(policy, c);
      if (!e.in_support) continue;  // clipped to a constant, no gradient
      const double rho = std::exp(e.logp_new - c.logp_sampled);
      const double unclipped = rho * a;
      const double clipped = std::clamp(rho, 1.0 - cfg.clip_range, 1.0 + cfg.clip_range) * a;
      if (unclipped > clipped) continue;  // min picks the flat clipped branch
      const double coeff = a * rho / static_cast<double>(m);

      int prev = 0;
      for (size_t f = 0; f < c.actions.size(); ++f) {
        const int act = c.actions[f];
        if (f != policy.label_pos) {
          const RowDist d = truncated_row(policy, f, c.target_label, static_cast<size_t>(prev));
          const auto& t = policy.tables[f];
          const size_t base = (static_cast<size_t>(c.target_label) * t.n_ctx +
                               static_cast<size_t>(prev)) *
                              t.n_actions;
          for (size_t k = 0; k < t.n_actions; ++k) {
            if (!d.in_support[k]) continue;
            const double indicator = k == static_cast<size_t>(act) ? 1.0 : 0.0;
            grad[f][base + k] += coeff * (indicator - d.probs[k]) / policy.temperature;
          }
        }
        prev = act;
      }
    }
  }

  const double kl_scale = cfg.kl_coeff / static_cast<double>(policy.row_count());
  std::vector<double> row_grad;
  for (size_t f = 0; f < policy.tables.size(); ++f) {
    if (f == policy.label_pos) continue;
    const auto& t = policy.tables[f];
    for (int label = 0; label < 2; ++label) {
      for (size_t ctx = 0; ctx < t.n_ctx; ++ctx) {
        detail::row_kl(policy.row(f, label, ctx), reference.row(f, label, ctx),
                       policy.temperature, &row_grad);
        const size_t base = (static_cast<size_t>(label) * t.n_ctx + ctx) * t.n_actions;
        for (size_t k = 0; k < t.n_actions; ++k) grad[f][base + k] -= kl_scale * row_grad[k];
      }
    }
  }

  for (size_t f = 0; f < policy.tables.size(); ++f)
    for (size_t i = 0; i < policy.tables[f].logits.size(); ++i)
      policy.tables[f].logits[i] += cfg.learning_rate * grad[f][i];
  return policy;
}

struct RefineStepTrace {
  double mean_pooled = 0.0;
  double mean_fmt = 0.0;
  double adv_mean = 0.0;
  double adv_std = 0.0;
  double adv_min = 0.0;
  double adv_max = 0.0;
};

struct RefineResult {
  GeneratorPolicy policy;
  std::vector<RefineStepTrace> trace;          // one entry per GRPO step
  std::vector<uint64_t> advantage_histogram;   // 10 bins across [-5, 5]
};

struct RewardComposition {
  double beta = 1.0;
  double lambda_fmt = 0.5;
  RewardForm form = RewardForm::Linear;
  AggKind aggregation = AggKind::Mean;
};

// One refinement pass: per step, take batch_conditions conditions in order,
// sample a group per condition, score with the pooled scorers plus the
// format reward, and apply one GRPO step against the round-start reference.
inline RefineResult refine_round(GeneratorPolicy policy,
                                 const std::vector<const ScorerState*>& scorers,
                                 const FeatureEncoder& scorer_enc, const Schema& schema,
                                 const std::vector<SynthesisCondition>& conditions, size_t steps,
                                 size_t batch_conditions, size_t group_size,
                                 const GrpoConfig& grpo, const RewardComposition& reward,
                                 Rng& rng, double malform_prob = 0.0) {
  if (steps * batch_conditions > conditions.size())
    throw std::invalid_argument("refine_round: not enough conditions for the schedule");

  const GeneratorPolicy reference = policy;  // frozen for the whole round
  RefineResult result;
  result.advantage_histogram.assign(10, 0);

  size_t next_condition = 0;
  for (size_t step = 0; step < steps; ++step) {
    std::vector<ScoredGroup> scored;
    RefineStepTrace t;
    t.adv_min = std::numeric_limits<double>::infinity();
    t.adv_max = -std::numeric_limits<double>::infinity();
    size_t n_candidates = 0;
    double adv_sq = 0.0;

    for (size_t b = 0; b < batch_conditions; ++b) {
      const SynthesisCondition& cond = conditions[next_condition++];
      CandidateGroup group = sample_group(policy, schema, cond, group_size, rng, malform_prob);

      std::vector<Record> records;
      std::vector<double> fmt;
      records.reserve(group.candidates.size());
      for (const auto& c : group.candidates) {
        records.push_back(c.action_record);
        fmt.push_back(format_reward(schema, cond, c.text));
      }
      RewardBundle bundle;
      bundle.beta = reward.beta;
      bundle.lambda_fmt = reward.lambda_fmt;
      bundle.pooled = pooled_preference(scorers, scorer_enc, records, reward.aggregation);
      bundle.fmt = std::move(fmt);
      bundle.total =
          compose_reward(bundle.pooled, bundle.fmt, reward.beta, reward.lambda_fmt, reward.form);
      bundle.advantages = advantages(bundle.total, grpo.advantage_clip);

      for (size_t j = 0; j < bundle.advantages.size(); ++j) {
        const double a = bundle.advantages[j];
        t.mean_pooled += bundle.pooled[j];
        t.mean_fmt += bundle.fmt[j];
        t.adv_mean += a;
        adv_sq += a * a;
        t.adv_min = std::min(t.adv_min, a);
        t.adv_max = std::max(t.adv_max, a);
        const double clip = grpo.advantage_clip;
        size_t bin = static_cast<size_t>(std::clamp((a + clip) / (2.0 * clip) * 10.0, 0.0, 9.0));
        ++result.advantage_histogram[bin];
        ++n_candidates;
      }
      scored.push_back({std::move(group), std::move(bundle)});
    }

    policy = grpo_update(std::move(policy), reference, scored, grpo);

    const double inv = 1.0 / static_cast<double>(n_candidates);
    t.mean_pooled *= inv;
    t.mean_fmt *= inv;
    t.adv_mean *= inv;
    t.adv_std = std::sqrt(std::max(0.0, adv_sq * inv - t.adv_mean * t.adv_mean));
    result.trace.push_back(t);
  }

  result.policy = std::move(policy);
  return result;
}

}  // namespace fedtab
