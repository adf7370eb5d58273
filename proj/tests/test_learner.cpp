#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "helpers.hpp"

using namespace fedtab;
using testutil::heart_record;
using testutil::heart_schema;

namespace {

struct Toy {
  Schema schema = heart_schema();
  std::vector<Record> train;
  FeatureEncoder enc;
  FeatureEncoder scorer_enc;

  Toy() {
    Rng rng(3);
    for (int i = 0; i < 20; ++i) train.push_back(testutil::random_heart_record(rng, false));
    enc = FeatureEncoder::fit(schema, train, false);
    scorer_enc = FeatureEncoder::fit(schema, train, true);
  }
};

LearnerState zero_learner(const FeatureEncoder& enc, double lr) {
  const std::vector<double> base(enc.dim(), 0.0);
  return LearnerState::init(base, 0.0, lr);
}

}  // namespace

TEST_CASE("predict_score") {
  const Toy toy;
  SUBCASE("zero weights score 0.5 everywhere") {
    const LearnerState s = zero_learner(toy.enc, 0.1);
    for (const auto& r : toy.train) CHECK(predict_score(s, toy.enc, r) == 0.5);
  }
  SUBCASE("delta on base equals merged weights") {
    LearnerState split = zero_learner(toy.enc, 0.1);
    LearnerState merged = split;
    Rng rng(5);
    for (size_t i = 0; i < split.base_weights.size(); ++i) {
      split.base_weights[i] = rng.next_in(-1, 1);
      split.delta_weights[i] = rng.next_in(-1, 1);
      merged.base_weights[i] = split.base_weights[i] + split.delta_weights[i];
    }
    for (const auto& r : toy.train)
      CHECK(predict_score(split, toy.enc, r) ==
            doctest::Approx(predict_score(merged, toy.enc, r)).epsilon(1e-15));
  }
  SUBCASE("hand-computed sigmoid on a 2-dim slice") {
    // encoding: [Age std, Age missing, Sex=M, Sex=F, Sex missing]
    LearnerState s = zero_learner(toy.enc, 0.1);
    s.delta_weights[2] = 1.5;  // Sex == M slot
    s.bias_delta = -0.5;
    const Record r = heart_record(50, "M", "healthy");
    const std::vector<double> x = toy.enc.encode(r);
    CHECK(x[2] == 1.0);
    CHECK(predict_score(s, toy.enc, r) == doctest::Approx(sigmoid(1.0)).epsilon(1e-15));
  }
}

TEST_CASE("weighted_step degenerate weight patterns") {
  const Toy toy;
  const std::vector<Record> batch(toy.train.begin(), toy.train.begin() + 4);

  SUBCASE("all weight on one sample equals the single-sample step") {
    const LearnerState s0 = zero_learner(toy.enc, 0.05);
    const LearnerState all_on_2 =
        weighted_step(s0, toy.enc, toy.schema, batch, std::vector<double>{0, 0, 1, 0});
    const LearnerState single =
        weighted_step(s0, toy.enc, toy.schema, {batch[2]}, std::vector<double>{1});
    CHECK(all_on_2.delta_weights == single.delta_weights);
    CHECK(all_on_2.bias_delta == single.bias_delta);
  }
  SUBCASE("uniform weights equal the mean-loss step") {
    LearnerState s0 = zero_learner(toy.enc, 0.05);
    const std::vector<double> uniform(4, 0.25);
    const LearnerState stepped = weighted_step(s0, toy.enc, toy.schema, batch, uniform);
    // mean-loss gradient computed by hand
    std::vector<double> g(toy.enc.dim(), 0.0);
    double gb = 0.0;
    for (const auto& r : batch) {
      const auto x = toy.enc.encode(r);
      const double err = 0.5 - toy.schema.label_value(r);
      for (size_t k = 0; k < x.size(); ++k) g[k] += 0.25 * err * x[k];
      gb += 0.25 * err;
    }
    double norm = gb * gb;
    for (double v : g) norm += v * v;
    norm = std::sqrt(norm);
    const double scale = norm > 1.0 ? 1.0 / norm : 1.0;
    for (size_t k = 0; k < g.size(); ++k)
      CHECK(stepped.delta_weights[k] == doctest::Approx(-0.05 * scale * g[k]).epsilon(1e-12));
  }
  SUBCASE("weight-sum and label preconditions") {
    const LearnerState s0 = zero_learner(toy.enc, 0.05);
    CHECK_THROWS_AS(
        weighted_step(s0, toy.enc, toy.schema, batch, std::vector<double>{0.5, 0.5, 0.5, 0.5}),
        std::invalid_argument);
    std::vector<Record> unlabeled = batch;
    unlabeled[1].erase("label");
    CHECK_THROWS_AS(
        weighted_step(s0, toy.enc, toy.schema, unlabeled, std::vector<double>(4, 0.25)),
        std::invalid_argument);
  }
}

TEST_CASE("analytic weighted gradient matches central finite differences") {
  const Toy toy;
  std::vector<Record> batch(toy.train.begin(), toy.train.begin() + 5);
  const std::vector<double> weights{0.1, 0.3, 0.2, 0.25, 0.15};

  LearnerState s = zero_learner(toy.enc, 1.0);
  Rng rng(13);
  for (auto& w : s.base_weights) w = rng.next_in(-0.5, 0.5);
  for (auto& w : s.delta_weights) w = rng.next_in(-0.5, 0.5);
  s.bias_delta = 0.2;
  s.clip_norm = 1e9;  // inactive so the step exposes the raw gradient

  const LearnerState stepped = weighted_step(s, toy.enc, toy.schema, batch, weights);
  const double h = 1e-6;
  for (size_t k = 0; k < s.delta_weights.size(); ++k) {
    LearnerState plus = s, minus = s;
    plus.delta_weights[k] += h;
    minus.delta_weights[k] -= h;
    const double fd = (weighted_loss(plus, toy.enc, toy.schema, batch, weights) -
                       weighted_loss(minus, toy.enc, toy.schema, batch, weights)) /
                      (2 * h);
    const double analytic = (s.delta_weights[k] - stepped.delta_weights[k]) / s.learning_rate;
    if (std::fabs(fd) > 1e-12)
      CHECK(std::fabs(analytic - fd) / std::fabs(fd) <= 1e-6);
    else
      CHECK(std::fabs(analytic - fd) <= 1e-9);
  }
}

TEST_CASE("gradient clipping caps the global norm") {
  const Toy toy;
  // far-off weights make the raw gradient large
  LearnerState s = zero_learner(toy.enc, 1.0);
  s.bias_delta = -30.0;
  s.clip_norm = 1.0;
  std::vector<Record> batch;
  for (int i = 0; i < 4; ++i) batch.push_back(heart_record(60 + i, "M", "heartdisease"));
  const LearnerState stepped = weighted_step(s, toy.enc, toy.schema, batch,
                                             std::vector<double>(4, 0.25));
  double step_norm = std::pow(stepped.bias_delta - s.bias_delta, 2);
  for (size_t k = 0; k < s.delta_weights.size(); ++k)
    step_norm += std::pow(stepped.delta_weights[k] - s.delta_weights[k], 2);
  step_norm = std::sqrt(step_norm) / s.learning_rate;
  CHECK(step_norm == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("frozen base: bytes identical across steps") {
  const Toy toy;
  LearnerState s = zero_learner(toy.enc, 0.1);
  Rng rng(31);
  for (auto& w : s.base_weights) w = rng.next_in(-1, 1);
  const std::vector<double> base_copy = s.base_weights;
  std::vector<Record> batch(toy.train.begin(), toy.train.begin() + 4);
  for (int i = 0; i < 50; ++i)
    s = weighted_step(std::move(s), toy.enc, toy.schema, batch, std::vector<double>(4, 0.25));
  CHECK(std::memcmp(s.base_weights.data(), base_copy.data(),
                    base_copy.size() * sizeof(double)) == 0);
}

TEST_CASE("descent sanity: repeated steps do not increase the weighted loss") {
  const Toy toy;
  LearnerState s = zero_learner(toy.enc, 1e-3);
  std::vector<Record> batch;
  for (int i = 0; i < 2; ++i) batch.push_back(heart_record(70 + i, "M", "heartdisease"));
  for (int i = 0; i < 2; ++i) batch.push_back(heart_record(25 + i, "F", "healthy"));
  const std::vector<double> weights(4, 0.25);
  double prev = weighted_loss(s, toy.enc, toy.schema, batch, weights);
  for (int i = 0; i < 200; ++i) {
    s = weighted_step(std::move(s), toy.enc, toy.schema, batch, weights);
    const double cur = weighted_loss(s, toy.enc, toy.schema, batch, weights);
    CHECK(cur <= prev + 1e-12);
    prev = cur;
  }
}

TEST_CASE("adamw option also reduces the loss") {
  const Toy toy;
  LearnerState s = zero_learner(toy.enc, 1e-2);
  AdamMoments adam;
  std::vector<Record> batch;
  for (int i = 0; i < 2; ++i) batch.push_back(heart_record(70 + i, "M", "heartdisease"));
  for (int i = 0; i < 2; ++i) batch.push_back(heart_record(25 + i, "F", "healthy"));
  const std::vector<double> weights(4, 0.25);
  const double before = weighted_loss(s, toy.enc, toy.schema, batch, weights);
  for (int i = 0; i < 100; ++i)
    s = weighted_step_adamw(std::move(s), adam, toy.enc, toy.schema, batch, weights);
  CHECK(weighted_loss(s, toy.enc, toy.schema, batch, weights) < before);
}

namespace {

AdaptationResult run_loop(const Toy& toy, size_t steps, size_t interval, int budget ,
                          uint64_t seed) {
  const GeneratorPolicy policy = fit_policy(toy.schema, toy.train, 1.0);
  LearnerState learner = zero_learner(toy.enc, 0.05);
  ScorerState scorer = ScorerState::init("heart", toy.scorer_enc.dim(), 0.5, 0.05, 0.95, budget);
  std::vector<Record> val(toy.train.begin(), toy.train.begin() + 8);
  AdaptationConfig cfg;
  cfg.steps = steps;
  cfg.refresh_interval = interval;
  Rng rng(seed);
  return local_adaptation_loop(std::move(learner), policy, std::move(scorer), val, toy.schema,
                               toy.enc, toy.scorer_enc, cfg, rng);
}

}  // namespace

TEST_CASE("local adaptation schedule arithmetic") {
  const Toy toy;
  SUBCASE("T=1, m=2: one step, zero refreshes") {
    const AdaptationResult r = run_loop(toy, 1, 2, 100, 1);
    CHECK(r.trace.losses.size() == 1);
    CHECK(r.trace.q_history.empty());
    CHECK(r.trace.refreshes_applied == 0);
  }
  SUBCASE("T=30, m=15: refreshes exactly at t=15 and t=30") {
    const AdaptationResult r = run_loop(toy, 30, 15, 100, 1);
    REQUIRE(r.trace.q_history.size() == 2);
    CHECK(r.trace.q_history[0].first == 15);
    CHECK(r.trace.q_history[1].first == 30);
    CHECK(r.trace.refreshes_applied == 2);
  }
  SUBCASE("budget caps applied refreshes") {
    const AdaptationResult r = run_loop(toy, 60, 10, 3, 1);
    CHECK(r.trace.refreshes_applied == 3);
    CHECK(r.trace.refreshes_skipped == 3);
  }
}

TEST_CASE("loop determinism: same seed, same trace") {
  const Toy toy;
  const AdaptationResult a = run_loop(toy, 40, 10, 100, 9);
  const AdaptationResult b = run_loop(toy, 40, 10, 100, 9);
  CHECK(a.trace.losses == b.trace.losses);
  CHECK(a.learner.delta_weights == b.learner.delta_weights);
  CHECK(a.scorer.feature_weights == b.scorer.feature_weights);
}

TEST_CASE("frozen uniform scorer reduces the loop to plain SGD") {
  const Toy toy;
  const GeneratorPolicy policy = fit_policy(toy.schema, toy.train, 1.0);
  std::vector<Record> val(toy.train.begin(), toy.train.begin() + 8);

  // budget 0 keeps the zero scorer frozen; zero scores mean uniform weights
  LearnerState learner = zero_learner(toy.enc, 0.05);
  ScorerState scorer = ScorerState::init("heart", toy.scorer_enc.dim(), 0.5, 0.05, 0.95, 0);
  AdaptationConfig cfg;
  cfg.steps = 25;
  cfg.refresh_interval = 5;
  Rng rng_loop(99);
  const AdaptationResult loop =
      local_adaptation_loop(zero_learner(toy.enc, 0.05), policy, std::move(scorer), val,
                            toy.schema, toy.enc, toy.scorer_enc, cfg, rng_loop);

  // replay the same stream manually with unweighted SGD
  LearnerState manual = zero_learner(toy.enc, 0.05);
  Rng rng_manual(99);
  for (size_t t = 1; t <= cfg.steps; ++t) {
    std::vector<Record> batch;
    for (size_t b = 0; b < cfg.batch_size; ++b) {
      const int label = rng_manual.next_bernoulli(0.5) ? 1 : 0;
      batch.push_back(sample_record(policy, toy.schema, label, rng_manual).record);
    }
    manual = weighted_step(std::move(manual), toy.enc, toy.schema, batch,
                           std::vector<double>(batch.size(), 0.25));
  }
  CHECK(loop.learner.delta_weights == manual.delta_weights);
  CHECK(loop.learner.bias_delta == manual.bias_delta);
}

TEST_CASE("batch weights are invariant to transforms preserving clipped ratios") {
  // interior scores scaled jointly: clipped values keep their ratios, so the
  // normalized weights and therefore the step are bit-identical
  const Toy toy;
  const std::vector<Record> batch(toy.train.begin(), toy.train.begin() + 3);
  const std::vector<double> scores{0.0, 0.3, 0.8};  // clipped values 0.5, 0.65, 0.9
  // halving every clipped value is exact in binary, so ratios survive bitwise
  std::vector<double> scaled;
  for (double s : scores) scaled.push_back(2.0 * (0.5 * ((s + 1.0) * 0.5)) - 1.0);

  const auto w1 = batch_weights(scores, 0.05, 0.95);
  const auto w2 = batch_weights(scaled, 0.05, 0.95);
  REQUIRE(w1.size() == w2.size());
  for (size_t i = 0; i < w1.size(); ++i) CHECK(w1[i] == doctest::Approx(w2[i]).epsilon(1e-15));

  const LearnerState s0 = zero_learner(toy.enc, 0.05);
  const LearnerState a = weighted_step(s0, toy.enc, toy.schema, batch, w1);
  const LearnerState b = weighted_step(s0, toy.enc, toy.schema, batch, w2);
  CHECK(a.delta_weights == b.delta_weights);
}
