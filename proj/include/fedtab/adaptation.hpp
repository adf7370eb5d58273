#pragma once

// The inner/middle levels of a round on one client: T weighted learner steps
// on generator batches, with a scorer refresh against the validation signal
// every m steps.

#include <functional>
#include <vector>

#include "fedtab/generator.hpp"
#include "fedtab/learner.hpp"
#include "fedtab/metrics.hpp"
#include "fedtab/scorer.hpp"

namespace fedtab {

struct AdaptationConfig {
  size_t steps = 1500;          // T
  size_t refresh_interval = 15; // m
  size_t batch_size = 4;
  double synthetic_positive_rate = 0.5;  // label mix of generated batches
  OptimizerKind optimizer = OptimizerKind::Sgd;
};

struct AdaptationTrace {
  std::vector<double> losses;  // weighted batch loss before each step
  std::vector<std::pair<size_t, double>> q_history;  // (t, q) at each refresh attempt
  size_t refreshes_applied = 0;
  size_t refreshes_skipped = 0;  // budget exhausted
};

struct AdaptationResult {
  LearnerState learner;
  ScorerState scorer;
  AdaptationTrace trace;
};

// Alternates batch sampling, scorer weighting, and one weighted step; every
// m steps evaluates q = 1 - MCC on the validation split under the current
// adapted state and applies one scorer update (subject to the budget).
inline AdaptationResult local_adaptation_loop(LearnerState learner, const GeneratorPolicy& policy,
                                              ScorerState scorer,
                                              const std::vector<Record>& validation,
                                              const Schema& schema,
                                              const FeatureEncoder& learner_enc,
                                              const FeatureEncoder& scorer_enc,
                                              const AdaptationConfig& cfg, Rng& rng) {
  if (cfg.steps < 1 || cfg.refresh_interval < 1)
    throw std::invalid_argument("local_adaptation_loop: T and m must be >= 1");

  AdamMoments adam;
  AdaptationTrace trace;
  for (size_t t = 1; t <= cfg.steps; ++t) {
    std::vector<Record> batch;
    batch.reserve(cfg.batch_size);
    for (size_t b = 0; b < cfg.batch_size; ++b) {
      const int label = rng.next_bernoulli(cfg.synthetic_positive_rate) ? 1 : 0;
      batch.push_back(sample_record(policy, schema, label, rng).record);
    }

    std::vector<double> scores(batch.size());
    for (size_t i = 0; i < batch.size(); ++i) scores[i] = score(scorer, scorer_enc, batch[i]);
    const std::vector<double> weights = batch_weights(scores, scorer.w_min, scorer.w_max);

    trace.losses.push_back(weighted_loss(learner, learner_enc, schema, batch, weights));
    learner = cfg.optimizer == OptimizerKind::Sgd
                  ? weighted_step(std::move(learner), learner_enc, schema, batch, weights)
                  : weighted_step_adamw(std::move(learner), adam, learner_enc, schema, batch,
                                        weights);

    if (t % cfg.refresh_interval == 0) {
      const ValidationSignal signal = validation_loss(
          [&](const Record& r) { return predict_score(learner, learner_enc, r); }, schema,
          validation);
      trace.q_history.emplace_back(t, signal.q);
      ScorerUpdateResult updated =
          scorer_update(std::move(scorer), scorer_enc, signal.q, batch, learner, learner_enc);
      scorer = std::move(updated.scorer);
      if (updated.applied)
        ++trace.refreshes_applied;
      else
        ++trace.refreshes_skipped;
    }
  }
  return {std::move(learner), std::move(scorer), std::move(trace)};
}

}  // namespace fedtab
