// fedtab command line: run federated experiments from a config file, audit
// communication payloads, validate configs.

#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <string>

#include "CLI11.hpp"

#include "fedtab/fedtab.hpp"

namespace {

int cmd_run(const std::string& config_path, std::string output_override) {
  if (output_override.empty())
    if (const char* env = std::getenv("FEDTAB_OUTPUT_DIR")) output_override = env;
  const std::filesystem::path path(config_path);
  fedtab::ExperimentConfig cfg = fedtab::config_from_json(fedtab::read_file(path));
  const std::filesystem::path base_dir = path.has_parent_path() ? path.parent_path() : ".";
  fedtab::RunArtifacts artifacts = fedtab::run_from_config(cfg, base_dir, output_override);

  std::printf("run complete: %zu seed(s) x %d round(s), %zu client(s)\n", cfg.sim.seeds.size(),
              cfg.sim.rounds, cfg.clients.size());
  for (const auto& row : artifacts.result.aggregate)
    std::printf("  client %u (%s) round %d: val MCC %.4f +- %.4f, test MCC %.4f +- %.4f\n",
                row.client_id, row.task_id.c_str(), row.round, row.mean_val_mcc, row.std_val_mcc,
                row.mean_test_mcc, row.std_test_mcc);
  std::printf("artifacts:\n  %s\n  %s\n  %s\n", artifacts.aggregate_csv.string().c_str(),
              artifacts.payload_csv.string().c_str(),
              artifacts.reward_trace_csv.string().c_str());
  std::printf("  %zu round report(s) in %s\n", artifacts.round_reports.size(),
              artifacts.aggregate_csv.parent_path().string().c_str());
  return 0;
}

int cmd_validate(const std::string& config_path) {
  fedtab::ExperimentConfig cfg =
      fedtab::config_from_json(fedtab::read_file(std::filesystem::path(config_path)));
  std::printf("config ok: %zu client(s), %d round(s), %zu seed(s), mode %s\n",
              cfg.clients.size(), cfg.sim.rounds, cfg.sim.seeds.size(),
              cfg.sim.mode == fedtab::Mode::ScorerOnly ? "scorer_only" : "lora_aggregation");
  return 0;
}

int cmd_audit(uint64_t layers, uint64_t hidden, uint64_t lora_params, uint64_t scorer_rank,
              uint64_t cohort) {
  const fedtab::PayloadAudit p =
      fedtab::payload_audit(layers, hidden, lora_params, scorer_rank, cohort);
  std::fputs(fedtab::format_payload_audit(p).c_str(), stdout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fedtab: deterministic federated synthetic-table simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output_override;
  auto* run = app.add_subcommand("run", "run an experiment from a config file");
  run->add_option("config", config_path, "config json path")->required();
  run->add_option("-o,--output", output_override, "override the output directory");

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "validate a config file");
  validate->add_option("config", validate_path, "config json path")->required();

  uint64_t layers = 36, hidden = 2560, lora_params = 33030144, scorer_rank = 8, cohort = 3;
  auto* audit = app.add_subcommand("audit", "print communication payload accounting");
  audit->add_option("--layers", layers, "transformer layers L");
  audit->add_option("--hidden", hidden, "hidden size d");
  audit->add_option("--lora-params", lora_params, "downstream LoRA parameter count");
  audit->add_option("--scorer-rank", scorer_rank, "scorer LoRA rank r_s");
  audit->add_option("--cohort", cohort, "participating clients per round");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, output_override);
    if (validate->parsed()) return cmd_validate(validate_path);
    if (audit->parsed()) return cmd_audit(layers, hidden, lora_params, scorer_rank, cohort);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
