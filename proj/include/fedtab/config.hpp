#pragma once

// Experiment configuration: JSON file -> validated SimConfig plus client
// data sources. Validation happens before any run starts and reports the
// offending field path.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "fedtab/federation.hpp"

namespace fedtab {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& path, const std::string& message)
      : std::runtime_error("config: " + path + ": " + message), field_path(path) {}
  std::string field_path;
};

struct ClientSource {
  uint32_t client_id = 0;
  std::string schema_path;
  std::string data_path;  // single CSV with a split column
  std::string train_path, val_path, test_path;  // or three CSVs

  bool single_file() const { return !data_path.empty(); }
};

enum class GeneratorInit { Uniform, FitTrain };

struct ExperimentConfig {
  SimConfig sim;
  std::vector<ClientSource> clients;
  std::string output_dir = "out";

  GeneratorInit generator_init = GeneratorInit::FitTrain;
  double generator_smoothing = 1.0;
  double temperature = 1.0;
  double top_p = 0.95;
  bool allow_missing = true;

  uint64_t config_hash = 0;  // FNV-1a over the source text
};

inline uint64_t fnv1a(std::string_view bytes) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace detail {

template <typename T>
T get_or(const nlohmann::json& j, const std::string& path, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.empty() ? key : path + "." + key, e.what());
  }
}

inline void require(bool ok, const std::string& path, const std::string& message) {
  if (!ok) throw ConfigError(path, message);
}

}  // namespace detail

inline ExperimentConfig config_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("<root>", std::string("invalid json: ") + e.what());
  }

  ExperimentConfig cfg;
  cfg.config_hash = fnv1a(text);
  SimConfig& sim = cfg.sim;

  const std::string mode = detail::get_or<std::string>(j, "", "mode", "scorer_only");
  if (mode == "scorer_only")
    sim.mode = Mode::ScorerOnly;
  else if (mode == "lora_aggregation")
    sim.mode = Mode::LoraAggregation;
  else
    throw ConfigError("mode", "must be scorer_only or lora_aggregation");

  sim.rounds = detail::get_or<int>(j, "", "rounds", 2);
  detail::require(sim.rounds >= 1, "rounds", "must be >= 1");
  sim.seeds = detail::get_or<std::vector<uint64_t>>(j, "", "seeds", {0, 1, 2});
  detail::require(!sim.seeds.empty(), "seeds", "must be non-empty");
  sim.participation = detail::get_or<double>(j, "", "participation", 1.0);
  detail::require(sim.participation > 0.0 && sim.participation <= 1.0, "participation",
                  "must be in (0, 1]");
  cfg.output_dir = detail::get_or<std::string>(j, "", "output_dir", "out");

  if (j.contains("local")) {
    const auto& l = j.at("local");
    sim.adaptation.steps = detail::get_or<size_t>(l, "local", "steps", 1500);
    sim.adaptation.refresh_interval = detail::get_or<size_t>(l, "local", "refresh_interval", 15);
    sim.adaptation.batch_size = detail::get_or<size_t>(l, "local", "batch_size", 4);
    sim.adaptation.synthetic_positive_rate =
        detail::get_or<double>(l, "local", "synthetic_positive_rate", 0.5);
    sim.learner_lr = detail::get_or<double>(l, "local", "learning_rate", 5e-5);
    sim.clip_norm = detail::get_or<double>(l, "local", "clip_norm", 1.0);
    sim.persist_delta = detail::get_or<bool>(l, "local", "persist_delta", false);
    const std::string opt = detail::get_or<std::string>(l, "local", "optimizer", "sgd");
    if (opt == "sgd")
      sim.adaptation.optimizer = OptimizerKind::Sgd;
    else if (opt == "adamw")
      sim.adaptation.optimizer = OptimizerKind::AdamW;
    else
      throw ConfigError("local.optimizer", "must be sgd or adamw");
  }
  detail::require(sim.adaptation.steps >= 1, "local.steps", "must be >= 1");
  detail::require(sim.adaptation.refresh_interval >= 1, "local.refresh_interval", "must be >= 1");
  detail::require(sim.adaptation.batch_size >= 1, "local.batch_size", "must be >= 1");
  detail::require(sim.learner_lr > 0.0, "local.learning_rate", "must be positive");
  detail::require(sim.clip_norm > 0.0, "local.clip_norm", "must be positive");
  detail::require(
      sim.adaptation.synthetic_positive_rate >= 0.0 && sim.adaptation.synthetic_positive_rate <= 1.0,
      "local.synthetic_positive_rate", "must be in [0, 1]");

  if (j.contains("scorer")) {
    const auto& s = j.at("scorer");
    sim.scorer_lr = detail::get_or<double>(s, "scorer", "learning_rate", 5e-5);
    sim.w_min = detail::get_or<double>(s, "scorer", "w_min", 0.05);
    sim.w_max = detail::get_or<double>(s, "scorer", "w_max", 0.95);
    sim.scorer_update_budget = detail::get_or<int>(s, "scorer", "update_budget", -1);
  }
  detail::require(sim.scorer_lr > 0.0, "scorer.learning_rate", "must be positive");
  detail::require(sim.w_min > 0.0 && sim.w_min < sim.w_max && sim.w_max < 1.0,
                  "scorer.clip_bounds", "must satisfy 0 < w_min < w_max < 1");

  if (j.contains("generator")) {
    const auto& g = j.at("generator");
    const std::string init = detail::get_or<std::string>(g, "generator", "init", "fit_train");
    if (init == "fit_train")
      cfg.generator_init = GeneratorInit::FitTrain;
    else if (init == "uniform")
      cfg.generator_init = GeneratorInit::Uniform;
    else
      throw ConfigError("generator.init", "must be fit_train or uniform");
    cfg.generator_smoothing = detail::get_or<double>(g, "generator", "smoothing", 1.0);
    cfg.temperature = detail::get_or<double>(g, "generator", "temperature", 1.0);
    cfg.top_p = detail::get_or<double>(g, "generator", "top_p", 0.95);
    cfg.allow_missing = detail::get_or<bool>(g, "generator", "allow_missing", true);
    sim.malform_prob = detail::get_or<double>(g, "generator", "malform_prob", 0.0);
  }
  detail::require(cfg.generator_smoothing > 0.0, "generator.smoothing", "must be positive");
  detail::require(cfg.temperature > 0.0, "generator.temperature", "must be positive");
  detail::require(cfg.top_p > 0.0 && cfg.top_p <= 1.0, "generator.top_p", "must be in (0, 1]");
  detail::require(sim.malform_prob >= 0.0 && sim.malform_prob <= 1.0, "generator.malform_prob",
                  "must be in [0, 1]");

  if (j.contains("grpo")) {
    const auto& g = j.at("grpo");
    sim.refine_enabled = detail::get_or<bool>(g, "grpo", "enabled", true);
    sim.group_size = detail::get_or<size_t>(g, "grpo", "group_size", 8);
    sim.grpo_steps = detail::get_or<size_t>(g, "grpo", "steps", 300);
    sim.grpo_batch_conditions = detail::get_or<size_t>(g, "grpo", "batch_conditions", 2);
    sim.grpo_conditions = detail::get_or<size_t>(g, "grpo", "conditions", 600);
    sim.grpo.learning_rate = detail::get_or<double>(g, "grpo", "learning_rate", 1e-2);
    sim.grpo.clip_range = detail::get_or<double>(g, "grpo", "clip_range", 0.2);
    sim.grpo.kl_coeff = detail::get_or<double>(g, "grpo", "kl_coeff", 0.01);
    sim.grpo.advantage_clip = detail::get_or<double>(g, "grpo", "advantage_clip", 5.0);
    sim.reward.beta = detail::get_or<double>(g, "grpo", "beta", 1.0);
    sim.reward.lambda_fmt = detail::get_or<double>(g, "grpo", "lambda_fmt", 0.5);
    sim.condition_positive_rate =
        detail::get_or<double>(g, "grpo", "condition_positive_rate", 0.5);
    const std::string form = detail::get_or<std::string>(g, "grpo", "reward_form", "linear");
    if (form == "linear")
      sim.reward.form = RewardForm::Linear;
    else if (form == "tanh")
      sim.reward.form = RewardForm::TanhPooled;
    else
      throw ConfigError("grpo.reward_form", "must be linear or tanh");
    const std::string agg = detail::get_or<std::string>(g, "grpo", "aggregation", "mean");
    if (agg == "mean")
      sim.reward.aggregation = AggKind::Mean;
    else if (agg == "median")
      sim.reward.aggregation = AggKind::Median;
    else
      throw ConfigError("grpo.aggregation", "must be mean or median");
  }
  detail::require(sim.group_size >= 2, "grpo.group_size", "must be >= 2");
  detail::require(sim.grpo.learning_rate > 0.0, "grpo.learning_rate", "must be positive");
  detail::require(sim.grpo.clip_range > 0.0 && sim.grpo.clip_range < 1.0, "grpo.clip_range",
                  "must be in (0, 1)");
  detail::require(sim.grpo.kl_coeff >= 0.0, "grpo.kl_coeff", "must be >= 0");
  detail::require(sim.grpo.advantage_clip > 0.0, "grpo.advantage_clip", "must be positive");
  detail::require(sim.reward.beta > 0.0, "grpo.beta", "must be positive");
  detail::require(sim.reward.lambda_fmt >= 0.0, "grpo.lambda_fmt", "must be >= 0");
  detail::require(
      sim.condition_positive_rate >= 0.0 && sim.condition_positive_rate <= 1.0,
      "grpo.condition_positive_rate", "must be in [0, 1]");
  if (sim.refine_enabled) {
    detail::require(sim.grpo_steps >= 1, "grpo.steps", "must be >= 1");
    detail::require(sim.grpo_batch_conditions >= 1, "grpo.batch_conditions", "must be >= 1");
    detail::require(sim.grpo_steps * sim.grpo_batch_conditions <= sim.grpo_conditions,
                    "grpo.conditions", "must cover steps * batch_conditions");
  }

  detail::require(j.contains("clients"), "clients", "required");
  std::set<uint32_t> seen_ids;
  for (size_t i = 0; i < j.at("clients").size(); ++i) {
    const auto& cj = j.at("clients").at(i);
    const std::string path = "clients[" + std::to_string(i) + "]";
    ClientSource c;
    c.client_id = detail::get_or<uint32_t>(cj, path, "client_id", static_cast<uint32_t>(i));
    detail::require(seen_ids.insert(c.client_id).second, path + ".client_id", "duplicate id");
    detail::require(cj.contains("schema"), path + ".schema", "required");
    c.schema_path = cj.at("schema").get<std::string>();
    if (cj.contains("data")) {
      c.data_path = cj.at("data").get<std::string>();
    } else {
      detail::require(cj.contains("train") && cj.contains("val") && cj.contains("test"),
                      path + ".data", "need either data or train/val/test");
      c.train_path = cj.at("train").get<std::string>();
      c.val_path = cj.at("val").get<std::string>();
      c.test_path = cj.at("test").get<std::string>();
    }
    cfg.clients.push_back(std::move(c));
  }
  detail::require(!cfg.clients.empty(), "clients", "must be non-empty");

  return cfg;
}

}  // namespace fedtab
