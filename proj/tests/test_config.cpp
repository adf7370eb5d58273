#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "helpers.hpp"

using namespace fedtab;

namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("fedtab_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  static int& counter() {
    static int c = 0;
    return c;
  }
  void write(const std::string& name, const std::string& content) const {
    std::ofstream out(path / name, std::ios::binary);
    out << content;
  }
};

std::string toy_schema_json() {
  return R"({
    "task": {"task_id": "toy", "positive_label": "yes", "negative_label": "no"},
    "label_field": "label",
    "fields": [
      {"name": "A", "kind": "categorical", "vocabulary": ["a0", "a1"]},
      {"name": "B", "kind": "numeric", "bins": [0, 1, 2, 3]},
      {"name": "label", "kind": "categorical", "vocabulary": ["no", "yes"]}
    ]
  })";
}

std::string toy_csv() {
  std::string csv = "split,A,B,label\n";
  Rng rng(77);
  auto emit = [&](const char* split, int n) {
    for (int i = 0; i < n; ++i) {
      const bool pos = rng.next_bernoulli(0.3);
      csv += std::string(split) + "," + (pos ? "a1" : (rng.next_bernoulli(0.5) ? "a0" : "a1")) +
             "," + std::to_string(pos ? 2.5 : rng.next_in(0.0, 1.5)) + "," + (pos ? "yes" : "no") +
             "\n";
    }
  };
  emit("train", 40);
  emit("val", 20);
  emit("test", 20);
  return csv;
}

std::string toy_config_json(const std::string& output_dir = "out") {
  return R"({
    "mode": "scorer_only",
    "rounds": 2,
    "seeds": [0],
    "output_dir": ")" + output_dir + R"(",
    "clients": [{"client_id": 0, "schema": "schema.json", "data": "data.csv"}],
    "local": {"steps": 20, "refresh_interval": 5, "learning_rate": 0.1},
    "scorer": {"learning_rate": 0.5},
    "grpo": {"steps": 3, "batch_conditions": 2, "conditions": 6, "learning_rate": 0.1,
             "group_size": 4}
  })";
}

std::string slurp(const fs::path& p) { return read_file(p); }

}  // namespace

TEST_CASE("config defaults carry the documented hyperparameters") {
  const ExperimentConfig cfg = config_from_json(R"({"clients": [{"schema": "s", "data": "d"}]})");
  CHECK(cfg.sim.adaptation.steps == 1500);
  CHECK(cfg.sim.adaptation.refresh_interval == 15);
  CHECK(cfg.sim.adaptation.batch_size == 4);
  CHECK(cfg.sim.learner_lr == 5e-5);
  CHECK(cfg.sim.scorer_lr == 5e-5);
  CHECK(cfg.sim.w_min == 0.05);
  CHECK(cfg.sim.w_max == 0.95);
  CHECK(cfg.sim.group_size == 8);
  CHECK(cfg.sim.grpo_steps == 300);
  CHECK(cfg.sim.grpo_batch_conditions == 2);
  CHECK(cfg.sim.grpo_conditions == 600);
  CHECK(cfg.sim.grpo.clip_range == 0.2);
  CHECK(cfg.sim.grpo.kl_coeff == 0.01);
  CHECK(cfg.sim.grpo.advantage_clip == 5.0);
  CHECK(cfg.temperature == 1.0);
  CHECK(cfg.top_p == 0.95);
  CHECK(cfg.sim.rounds == 2);
  CHECK(cfg.sim.seeds == std::vector<uint64_t>{0, 1, 2});
  CHECK(cfg.sim.effective_budget() == 100);  // T/m
}

TEST_CASE("config validation names the offending field") {
  auto with = [](const std::string& extra) {
    return R"({"clients": [{"schema": "s", "data": "d"}], )" + extra + "}";
  };
  auto field_of = [](const std::string& text) {
    try {
      config_from_json(text);
      return std::string("<none>");
    } catch (const ConfigError& e) {
      return e.field_path;
    }
  };
  CHECK(field_of(with(R"("scorer": {"w_min": 0.9, "w_max": 0.1})")) == "scorer.clip_bounds");
  CHECK(field_of(with(R"("rounds": 0)")) == "rounds");
  CHECK(field_of(with(R"("seeds": [])")) == "seeds");
  CHECK(field_of(with(R"("local": {"steps": 0})")) == "local.steps");
  CHECK(field_of(with(R"("grpo": {"clip_range": 1.5})")) == "grpo.clip_range");
  CHECK(field_of(with(R"("grpo": {"group_size": 1})")) == "grpo.group_size");
  CHECK(field_of(with(R"("grpo": {"steps": 10, "batch_conditions": 2, "conditions": 5})")) ==
        "grpo.conditions");
  CHECK(field_of(with(R"("participation": 0.0)")) == "participation");
  CHECK(field_of(with(R"("generator": {"top_p": 0.0})")) == "generator.top_p");
  CHECK(field_of(with(R"("mode": "broadcast")")) == "mode");
  CHECK(field_of(R"({"clients": []})") == "clients");
  CHECK(field_of(R"({})") == "clients");
  CHECK(field_of("not json") == "<root>");
  // wrong types carry the field path too
  CHECK(field_of(with(R"("seeds": "zero")")) == "seeds");
  CHECK(field_of(with(R"("local": {"steps": "many"})")) == "local.steps");
}

TEST_CASE("run_from_config writes the full artifact set") {
  TempDir dir;
  dir.write("schema.json", toy_schema_json());
  dir.write("data.csv", toy_csv());
  dir.write("config.json", toy_config_json());

  const ExperimentConfig cfg = config_from_json(slurp(dir.path / "config.json"));
  const RunArtifacts artifacts = run_from_config(cfg, dir.path);

  CHECK(fs::exists(artifacts.aggregate_csv));
  CHECK(fs::exists(artifacts.payload_csv));
  CHECK(fs::exists(artifacts.reward_trace_csv));
  CHECK(artifacts.round_reports.size() == 2);  // 1 seed x 2 rounds
  for (const auto& p : artifacts.round_reports) CHECK(fs::exists(p));

  const std::string csv = slurp(artifacts.aggregate_csv);
  SUBCASE("aggregate has one row per client per round and a stamp") {
    CHECK(csv.find("# config_hash=") == 0);
    size_t rows = 0;
    for (char c : csv)
      if (c == '\n') ++rows;
    CHECK(rows == 2 + 2);  // stamp + header + 1 client x 2 rounds
  }
  SUBCASE("reward trace carries one line per grpo step") {
    const std::string trace = slurp(artifacts.reward_trace_csv);
    size_t rows = 0;
    for (char c : trace)
      if (c == '\n') ++rows;
    CHECK(rows == 2 + 2 * 3);  // stamp + header + 2 rounds x 3 steps
  }
  SUBCASE("no temp files left behind") {
    for (const auto& e : fs::recursive_directory_iterator(dir.path))
      CHECK(e.path().extension() != ".tmp");
  }
}

TEST_CASE("rerunning the same config and seed is byte-identical") {
  TempDir dir;
  dir.write("schema.json", toy_schema_json());
  dir.write("data.csv", toy_csv());
  dir.write("config.json", toy_config_json());
  const ExperimentConfig cfg = config_from_json(slurp(dir.path / "config.json"));

  const RunArtifacts a = run_from_config(cfg, dir.path, (dir.path / "out_a").string());
  const RunArtifacts b = run_from_config(cfg, dir.path, (dir.path / "out_b").string());
  CHECK(slurp(a.aggregate_csv) == slurp(b.aggregate_csv));
  CHECK(slurp(a.payload_csv) == slurp(b.payload_csv));
  CHECK(slurp(a.reward_trace_csv) == slurp(b.reward_trace_csv));
  REQUIRE(a.round_reports.size() == b.round_reports.size());
  for (size_t i = 0; i < a.round_reports.size(); ++i)
    CHECK(slurp(a.round_reports[i]) == slurp(b.round_reports[i]));
}

TEST_CASE("csv column set is stable for a config shape") {
  TempDir dir;
  dir.write("schema.json", toy_schema_json());
  dir.write("data.csv", toy_csv());
  const ExperimentConfig cfg = config_from_json(toy_config_json());
  const RunArtifacts artifacts = run_from_config(cfg, dir.path, (dir.path / "out").string());
  const std::string csv = slurp(artifacts.aggregate_csv);
  const size_t header_start = csv.find('\n') + 1;
  const size_t header_end = csv.find('\n', header_start);
  CHECK(csv.substr(header_start, header_end - header_start) ==
        "client_id,task_id,round,mean_val_mcc,std_val_mcc,mean_test_mcc,std_test_mcc");
}

TEST_CASE("config hash distinguishes different source bytes") {
  const uint64_t a = fnv1a("config-a");
  const uint64_t b = fnv1a("config-b");
  CHECK(a != b);
  CHECK(fnv1a("config-a") == a);
}

TEST_CASE("aggregation mode runs end to end from a config") {
  TempDir dir;
  dir.write("schema.json", toy_schema_json());
  dir.write("data.csv", toy_csv());
  std::string cfg_json = toy_config_json();
  cfg_json.replace(cfg_json.find("scorer_only"), 11, "lora_aggregation");
  const ExperimentConfig cfg = config_from_json(cfg_json);
  REQUIRE(cfg.sim.mode == Mode::LoraAggregation);

  const RunArtifacts artifacts = run_from_config(cfg, dir.path, (dir.path / "out").string());
  // delta uplink frames show up in the ledger alongside the scorer frames
  const RoundReport& report = artifacts.result.runs[0][0].report;
  size_t deltas = 0, scorers = 0;
  for (const auto& e : report.payload.entries) {
    if (e.tag == FrameTag::DeltaUp) ++deltas;
    if (e.tag == FrameTag::ScorerUp) ++scorers;
  }
  CHECK(deltas == 1);
  CHECK(scorers == 1);
  CHECK(report.mode == "lora_aggregation");
}
