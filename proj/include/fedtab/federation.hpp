#pragma once

// Round orchestration: broadcast, parallel client adaptation, scorer upload,
// within-task pooling, redistribution, on-premise generator refinement, and
// (optionally) uniform LoRA-delta aggregation. All cross-client effects pass
// through tagged frames; per-client randomness is derived from
// (seed, round, client, phase) so results are independent of the order in
// which clients are processed.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "fedtab/adaptation.hpp"
#include "fedtab/dataset.hpp"
#include "fedtab/encoding.hpp"
#include "fedtab/generator.hpp"
#include "fedtab/learner.hpp"
#include "fedtab/messages.hpp"
#include "fedtab/metrics.hpp"
#include "fedtab/rng.hpp"
#include "fedtab/schema.hpp"
#include "fedtab/scorer.hpp"

namespace fedtab {

enum class Mode { ScorerOnly, LoraAggregation };

struct SimConfig {
  Mode mode = Mode::ScorerOnly;
  int rounds = 2;
  std::vector<uint64_t> seeds = {0, 1, 2};
  double participation = 1.0;
  bool reverse_client_order = false;
  bool persist_delta = false;  // Algorithm default: re-initialize each round

  AdaptationConfig adaptation;
  double learner_lr = 5e-5;
  double clip_norm = 1.0;

  double scorer_lr = 5e-5;
  double w_min = 0.05;
  double w_max = 0.95;
  int scorer_update_budget = -1;  // -1: every scheduled refresh (T/m)

  bool refine_enabled = true;
  size_t group_size = 8;
  size_t grpo_steps = 300;
  size_t grpo_batch_conditions = 2;
  size_t grpo_conditions = 600;
  GrpoConfig grpo;
  RewardComposition reward;
  double condition_positive_rate = 0.5;
  double malform_prob = 0.0;

  int effective_budget() const {
    if (scorer_update_budget >= 0) return scorer_update_budget;
    return static_cast<int>(adaptation.steps / adaptation.refresh_interval);
  }
};

struct ClientState {
  uint32_t client_id = 0;
  std::string task_id;
  Schema schema;
  DatasetSplit splits;
  FeatureEncoder learner_enc;
  FeatureEncoder scorer_enc;
  GeneratorPolicy policy;
  std::optional<std::vector<double>> persisted_delta;
  double persisted_bias_delta = 0.0;
};

inline ClientState make_client(uint32_t client_id, Schema schema, DatasetSplit splits,
                               GeneratorPolicy policy) {
  ClientState c;
  c.client_id = client_id;
  c.task_id = schema.task.task_id;
  c.learner_enc = FeatureEncoder::fit(schema, splits.train, /*include_label=*/false);
  c.scorer_enc = FeatureEncoder::fit(schema, splits.train, /*include_label=*/true);
  c.schema = std::move(schema);
  c.splits = std::move(splits);
  c.policy = std::move(policy);
  return c;
}

struct ServerState {
  struct Backbone {
    std::vector<double> weights;
    double bias = 0.0;
  };
  std::map<std::string, Backbone> backbones;
  int round = 0;
  std::map<std::string, ScorerPool> pools;               // rebuilt each round
  std::map<int, std::vector<uint32_t>> participation;    // round -> client ids
};

struct RewardSummary {
  double mean_pooled = 0.0;
  double mean_fmt = 0.0;
  double adv_mean = 0.0;
  double adv_std = 0.0;
  std::vector<uint64_t> adv_histogram = std::vector<uint64_t>(10, 0);
};

struct ClientRoundReport {
  uint32_t client_id = 0;
  std::string task_id;
  bool failed = false;
  std::string error;
  ValidationSignal validation;
  double test_mcc = 0.0;
  double loss_first = 0.0;
  double loss_last = 0.0;
  double loss_mean = 0.0;
  size_t scorer_refreshes = 0;
  size_t refreshes_skipped = 0;
  size_t refine_pool_size = 0;
  RewardSummary reward;
};

struct PayloadLedger {
  struct Entry {
    FrameTag tag;
    uint32_t sender = 0;
    uint32_t receiver = 0;
    uint64_t bytes = 0;
  };
  std::vector<Entry> entries;  // sorted (tag, sender, receiver)
  std::map<uint32_t, uint64_t> uplink_per_client;
  uint64_t total_uplink = 0;
  uint64_t downlink_backbone = 0;
  uint64_t downlink_pool = 0;
  uint64_t total_downlink = 0;
  uint64_t total_bytes = 0;
};

inline PayloadLedger ledger_from_frames(const std::vector<Frame>& frames) {
  PayloadLedger ledger;
  for (const Frame& f : frames) {
    ledger.entries.push_back({f.tag, f.sender, f.receiver, f.wire_size()});
    if (f.server_bound()) {
      ledger.uplink_per_client[f.sender] += f.wire_size();
      ledger.total_uplink += f.wire_size();
    } else {
      if (f.tag == FrameTag::Backbone) ledger.downlink_backbone += f.wire_size();
      if (f.tag == FrameTag::PoolDown) ledger.downlink_pool += f.wire_size();
      ledger.total_downlink += f.wire_size();
    }
  }
  ledger.total_bytes = ledger.total_uplink + ledger.total_downlink;
  std::sort(ledger.entries.begin(), ledger.entries.end(), [](const auto& a, const auto& b) {
    return std::tuple(static_cast<int>(a.tag), a.sender, a.receiver) <
           std::tuple(static_cast<int>(b.tag), b.sender, b.receiver);
  });
  return ledger;
}

struct RoundReport {
  int round = 0;
  uint64_t seed = 0;
  std::string mode;
  std::vector<uint32_t> participants;
  std::vector<ClientRoundReport> clients;  // sorted by client id
  PayloadLedger payload;
};

struct RoundResult {
  RoundReport report;
  std::vector<Frame> frames;
  std::map<uint32_t, std::vector<RefineStepTrace>> refine_traces;
};

// within-task pools from this round's uploads; no cross-task mixing
inline std::map<std::string, ScorerPool> pool_scorers(
    const std::map<uint32_t, ScorerState>& uploads,
    const std::map<uint32_t, std::string>& task_of) {
  std::map<std::string, ScorerPool> pools;
  for (const auto& [client_id, scorer] : uploads) {
    const std::string& task = task_of.at(client_id);
    ScorerPool& pool = pools[task];
    pool.task_id = task;
    pool.members.push_back({client_id, scorer});
  }
  return pools;  // members already ascend by client id (map order)
}

// uniform average of same-task learner deltas
inline std::vector<double> aggregate_lora(const std::vector<std::vector<double>>& deltas) {
  if (deltas.empty()) throw std::invalid_argument("aggregate_lora: no deltas");
  const size_t dim = deltas.front().size();
  std::vector<double> mean(dim, 0.0);
  for (const auto& d : deltas) {
    if (d.size() != dim) throw std::invalid_argument("aggregate_lora: dimension mismatch");
    for (size_t i = 0; i < dim; ++i) mean[i] += d[i];
  }
  for (double& v : mean) v /= static_cast<double>(deltas.size());
  return mean;
}

namespace detail {

inline std::vector<std::string> labels_in(const Schema& schema,
                                          const std::vector<Record>& records) {
  bool has_pos = false, has_neg = false;
  for (const auto& r : records) {
    auto it = r.find(schema.label_field);
    if (it == r.end() || it->second.kind != Value::Kind::Category) continue;
    if (it->second.category == schema.task.positive_label) has_pos = true;
    if (it->second.category == schema.task.negative_label) has_neg = true;
  }
  std::vector<std::string> labels;
  if (has_neg) labels.push_back(schema.task.negative_label);
  if (has_pos) labels.push_back(schema.task.positive_label);
  return labels;
}

}  // namespace detail

// conditions replayed in order by refine_round; target labels are drawn from
// the labels actually present in the client's train split
inline std::vector<SynthesisCondition> build_conditions(const ClientState& client, size_t count,
                                                        double positive_rate, Rng& rng) {
  const std::vector<std::string> available = detail::labels_in(client.schema, client.splits.train);
  if (available.empty())
    throw std::runtime_error("build_conditions: train split has no labeled records");
  std::vector<SynthesisCondition> conditions;
  conditions.reserve(count);
  for (size_t i = 0; i < count; ++i) {
    std::string target = rng.next_bernoulli(positive_rate) ? client.schema.task.positive_label
                                                           : client.schema.task.negative_label;
    if (std::find(available.begin(), available.end(), target) == available.end())
      target = available.front();
    conditions.push_back(make_condition(client.schema, client.splits.train, target,
                                        "c" + std::to_string(i), rng));
  }
  return conditions;
}

inline RoundResult run_round(ServerState& server, std::vector<ClientState>& clients,
                             const SimConfig& cfg, uint64_t seed) {
  const int round = server.round;
  RoundResult result;
  RoundReport& report = result.report;
  report.round = round;
  report.seed = seed;
  report.mode = cfg.mode == Mode::ScorerOnly ? "scorer_only" : "lora_aggregation";

  std::map<uint32_t, ClientState*> by_id;
  for (auto& c : clients) by_id[c.client_id] = &c;

  // (1) participant sampling, full participation by default
  std::vector<uint32_t> participants;
  {
    Rng rng = derive_rng(seed, {static_cast<uint64_t>(round),
                                static_cast<uint64_t>(Stream::Participation)});
    for (const auto& [id, client] : by_id) {
      (void)client;
      if (cfg.participation >= 1.0 || rng.next_bernoulli(cfg.participation))
        participants.push_back(id);
    }
  }
  report.participants = participants;
  server.participation[round] = participants;

  std::vector<uint32_t> order = participants;
  if (cfg.reverse_client_order) std::reverse(order.begin(), order.end());

  std::map<uint32_t, ClientRoundReport> entries;
  std::map<uint32_t, ScorerState> uploads;
  std::map<uint32_t, LearnerState> adapted;

  // (2)+(3)+(4) broadcast, local adaptation, upload
  for (uint32_t id : order) {
    ClientState& client = *by_id.at(id);
    ClientRoundReport entry;
    entry.client_id = id;
    entry.task_id = client.task_id;
    try {
      auto backbone_it = server.backbones.find(client.task_id);
      if (backbone_it == server.backbones.end()) {
        ServerState::Backbone fresh;
        fresh.weights.assign(client.learner_enc.dim(), 0.0);
        backbone_it = server.backbones.emplace(client.task_id, std::move(fresh)).first;
      }
      const ServerState::Backbone& backbone = backbone_it->second;
      if (backbone.weights.size() != client.learner_enc.dim())
        throw std::runtime_error("backbone dimension mismatch for task " + client.task_id);

      result.frames.push_back({FrameTag::Backbone, kServerId, id,
                               encode_backbone_payload(
                                   {client.task_id, backbone.weights, backbone.bias})});

      LearnerState learner =
          LearnerState::init(backbone.weights, backbone.bias, cfg.learner_lr);
      learner.clip_norm = cfg.clip_norm;
      if (cfg.persist_delta && client.persisted_delta &&
          client.persisted_delta->size() == learner.delta_weights.size()) {
        learner.delta_weights = *client.persisted_delta;
        learner.bias_delta = client.persisted_bias_delta;
      }
      ScorerState scorer =
          ScorerState::init(client.task_id, client.scorer_enc.dim(), cfg.scorer_lr, cfg.w_min,
                            cfg.w_max, cfg.effective_budget());

      Rng rng = derive_rng(seed, {static_cast<uint64_t>(round), id,
                                  static_cast<uint64_t>(Stream::Adaptation)});
      AdaptationResult adapted_result =
          local_adaptation_loop(std::move(learner), client.policy, std::move(scorer),
                                client.splits.validation, client.schema, client.learner_enc,
                                client.scorer_enc, cfg.adaptation, rng);

      entry.validation = validation_loss(
          [&](const Record& r) {
            return predict_score(adapted_result.learner, client.learner_enc, r);
          },
          client.schema, client.splits.validation);
      {
        std::vector<double> scores;
        std::vector<int> labels;
        for (const auto& r : client.splits.test) {
          scores.push_back(predict_score(adapted_result.learner, client.learner_enc, r));
          labels.push_back(client.schema.label_value(r));
        }
        entry.test_mcc = mcc(confusion_at(scores, labels, entry.validation.threshold));
      }
      const auto& losses = adapted_result.trace.losses;
      entry.loss_first = losses.front();
      entry.loss_last = losses.back();
      double sum = 0.0;
      for (double l : losses) sum += l;
      entry.loss_mean = sum / static_cast<double>(losses.size());
      entry.scorer_refreshes = adapted_result.trace.refreshes_applied;
      entry.refreshes_skipped = adapted_result.trace.refreshes_skipped;

      result.frames.push_back({FrameTag::ScorerUp, id, kServerId,
                               encode_scorer_payload(adapted_result.scorer)});
      uploads.emplace(id, adapted_result.scorer);
      if (cfg.mode == Mode::LoraAggregation) {
        result.frames.push_back(
            {FrameTag::DeltaUp, id, kServerId,
             encode_delta_payload({client.task_id, adapted_result.learner.delta_weights,
                                   adapted_result.learner.bias_delta})});
      }
      if (cfg.persist_delta) {
        client.persisted_delta = adapted_result.learner.delta_weights;
        client.persisted_bias_delta = adapted_result.learner.bias_delta;
      }
      adapted.emplace(id, std::move(adapted_result.learner));
    } catch (const std::exception& e) {
      entry.failed = true;
      entry.error = e.what();
    }
    entries.emplace(id, std::move(entry));
  }

  // (5) within-task pools from this round's successful uploads
  std::map<uint32_t, std::string> task_of;
  for (const auto& [id, up] : uploads) {
    (void)up;
    task_of[id] = by_id.at(id)->task_id;
  }
  server.pools = pool_scorers(uploads, task_of);

  // (6) redistribute and refine on-premise
  for (uint32_t id : order) {
    ClientRoundReport& entry = entries.at(id);
    if (entry.failed) continue;
    ClientState& client = *by_id.at(id);
    try {
      const ScorerPool& pool = server.pools.at(client.task_id);
      std::vector<ScorerPool::Member> others;
      for (const auto& m : pool.members)
        if (m.client_id != id) others.push_back(m);
      result.frames.push_back(
          {FrameTag::PoolDown, kServerId, id, encode_pool_payload(others)});

      if (cfg.refine_enabled) {
        const std::vector<ScorerPool::Member> received =
            decode_pool_payload(result.frames.back().payload);
        std::vector<const ScorerState*> scorers;
        std::vector<ScorerState> storage;
        storage.reserve(received.size() + 1);
        for (const auto& m : received) storage.push_back(m.scorer);
        storage.push_back(uploads.at(id));  // own scorer joins the pool
        for (const auto& s : storage) scorers.push_back(&s);
        entry.refine_pool_size = scorers.size();

        Rng cond_rng = derive_rng(seed, {static_cast<uint64_t>(round), id,
                                         static_cast<uint64_t>(Stream::Conditions)});
        const std::vector<SynthesisCondition> conditions = build_conditions(
            client, cfg.grpo_conditions, cfg.condition_positive_rate, cond_rng);

        Rng refine_rng = derive_rng(seed, {static_cast<uint64_t>(round), id,
                                           static_cast<uint64_t>(Stream::Refinement)});
        RefineResult refined = refine_round(
            std::move(client.policy), scorers, client.scorer_enc, client.schema, conditions,
            cfg.grpo_steps, cfg.grpo_batch_conditions, cfg.group_size, cfg.grpo, cfg.reward,
            refine_rng, cfg.malform_prob);
        client.policy = std::move(refined.policy);

        RewardSummary summary;
        double sq = 0.0;
        for (const auto& t : refined.trace) {
          summary.mean_pooled += t.mean_pooled;
          summary.mean_fmt += t.mean_fmt;
          summary.adv_mean += t.adv_mean;
          sq += t.adv_std * t.adv_std + t.adv_mean * t.adv_mean;
        }
        if (!refined.trace.empty()) {
          const double inv = 1.0 / static_cast<double>(refined.trace.size());
          summary.mean_pooled *= inv;
          summary.mean_fmt *= inv;
          summary.adv_mean *= inv;
          summary.adv_std =
              std::sqrt(std::max(0.0, sq * inv - summary.adv_mean * summary.adv_mean));
        }
        summary.adv_histogram = refined.advantage_histogram;
        entry.reward = summary;
        result.refine_traces[id] = std::move(refined.trace);
      } else {
        entry.refine_pool_size = pool.members.size();
      }
    } catch (const std::exception& e) {
      entry.failed = true;
      entry.error = std::string("refinement: ") + e.what();
    }
  }

  // (7) optional uniform LoRA-delta aggregation within task
  if (cfg.mode == Mode::LoraAggregation) {
    std::map<std::string, std::vector<std::vector<double>>> deltas;
    std::map<std::string, std::vector<double>> bias_deltas;
    for (const auto& [id, learner] : adapted) {
      if (entries.at(id).failed) continue;
      deltas[task_of.at(id)].push_back(learner.delta_weights);
      bias_deltas[task_of.at(id)].push_back(learner.bias_delta);
    }
    for (auto& [task, task_deltas] : deltas) {
      const std::vector<double> mean = aggregate_lora(task_deltas);
      ServerState::Backbone& backbone = server.backbones.at(task);
      for (size_t i = 0; i < mean.size(); ++i) backbone.weights[i] += mean[i];
      double bias_mean = 0.0;
      for (double b : bias_deltas.at(task)) bias_mean += b;
      backbone.bias += bias_mean / static_cast<double>(bias_deltas.at(task).size());
    }
  }

  for (auto& [id, entry] : entries) {
    (void)id;
    report.clients.push_back(std::move(entry));
  }
  report.payload = ledger_from_frames(result.frames);
  ++server.round;
  return result;
}

struct AggregateRow {
  uint32_t client_id = 0;
  std::string task_id;
  int round = 0;
  double mean_val_mcc = 0.0;
  double std_val_mcc = 0.0;
  double mean_test_mcc = 0.0;
  double std_test_mcc = 0.0;
};

struct ExperimentResult {
  std::vector<uint64_t> seeds;
  // [seed index][round]
  std::vector<std::vector<RoundResult>> runs;
  std::vector<AggregateRow> aggregate;  // client x round, mean/std over seeds
};

inline ExperimentResult run_experiment(const std::vector<ClientState>& prototype,
                                       const SimConfig& cfg) {
  if (cfg.rounds < 1) throw std::invalid_argument("run_experiment: rounds must be >= 1");
  if (cfg.seeds.empty()) throw std::invalid_argument("run_experiment: no seeds");

  ExperimentResult result;
  result.seeds = cfg.seeds;
  for (uint64_t seed : cfg.seeds) {
    std::vector<ClientState> clients = prototype;  // fresh states per seed
    ServerState server;
    std::vector<RoundResult> rounds;
    for (int r = 0; r < cfg.rounds; ++r)
      rounds.push_back(run_round(server, clients, cfg, seed));
    result.runs.push_back(std::move(rounds));
  }

  // aggregate over seeds, population std
  for (const auto& proto : prototype) {
    for (int r = 0; r < cfg.rounds; ++r) {
      AggregateRow row;
      row.client_id = proto.client_id;
      row.task_id = proto.task_id;
      row.round = r;
      std::vector<double> val, test;
      for (size_t s = 0; s < cfg.seeds.size(); ++s) {
        const RoundReport& rep = result.runs[s][r].report;
        for (const auto& entry : rep.clients) {
          if (entry.client_id != proto.client_id || entry.failed) continue;
          val.push_back(entry.validation.mcc);
          test.push_back(entry.test_mcc);
        }
      }
      auto mean_std = [](const std::vector<double>& xs, double& mean, double& sd) {
        mean = 0.0;
        sd = 0.0;
        if (xs.empty()) return;
        for (double x : xs) mean += x;
        mean /= static_cast<double>(xs.size());
        double var = 0.0;
        for (double x : xs) var += (x - mean) * (x - mean);
        sd = std::sqrt(var / static_cast<double>(xs.size()));
      };
      mean_std(val, row.mean_val_mcc, row.std_val_mcc);
      mean_std(test, row.mean_test_mcc, row.std_test_mcc);
      result.aggregate.push_back(std::move(row));
    }
  }
  return result;
}

}  // namespace fedtab
