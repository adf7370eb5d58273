#pragma once

// Glue between a validated config and the federation loop: loads schema and
// CSV files, builds client prototypes, runs the experiment, and writes the
// artifact set.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fedtab/config.hpp"
#include "fedtab/dataset.hpp"
#include "fedtab/federation.hpp"
#include "fedtab/generator.hpp"
#include "fedtab/report.hpp"

namespace fedtab {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::vector<ClientState> build_clients(const ExperimentConfig& cfg,
                                              const std::filesystem::path& base_dir = {}) {
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path fp(p);
    return fp.is_absolute() || base_dir.empty() ? fp : base_dir / fp;
  };
  std::vector<ClientState> clients;
  for (const ClientSource& src : cfg.clients) {
    Schema schema = schema_from_json(read_file(resolve(src.schema_path)));
    DatasetSplit splits =
        src.single_file()
            ? load_dataset(read_file(resolve(src.data_path)), schema)
            : load_dataset_files(read_file(resolve(src.train_path)),
                                 read_file(resolve(src.val_path)),
                                 read_file(resolve(src.test_path)), schema);
    GeneratorPolicy policy =
        cfg.generator_init == GeneratorInit::FitTrain
            ? fit_policy(schema, splits.train, cfg.generator_smoothing, cfg.allow_missing,
                         cfg.temperature, cfg.top_p)
            : make_policy(schema, cfg.allow_missing, cfg.temperature, cfg.top_p);
    clients.push_back(
        make_client(src.client_id, std::move(schema), std::move(splits), std::move(policy)));
  }
  return clients;
}

struct RunArtifacts {
  std::filesystem::path aggregate_csv;
  std::filesystem::path payload_csv;
  std::filesystem::path reward_trace_csv;
  std::vector<std::filesystem::path> round_reports;
  ExperimentResult result;
};

inline RunArtifacts run_from_config(const ExperimentConfig& cfg,
                                    const std::filesystem::path& base_dir = {},
                                    const std::string& output_override = {}) {
  const std::vector<ClientState> prototype = build_clients(cfg, base_dir);
  ExperimentResult result = run_experiment(prototype, cfg.sim);

  const std::filesystem::path out_dir =
      output_override.empty()
          ? (std::filesystem::path(cfg.output_dir).is_absolute() || base_dir.empty()
                 ? std::filesystem::path(cfg.output_dir)
                 : base_dir / cfg.output_dir)
          : std::filesystem::path(output_override);
  std::filesystem::create_directories(out_dir);

  RunArtifacts artifacts;
  for (size_t s = 0; s < result.runs.size(); ++s) {
    for (const auto& round : result.runs[s]) {
      const std::filesystem::path path =
          out_dir / ("report_seed" + std::to_string(result.seeds[s]) + "_round" +
                     std::to_string(round.report.round) + ".json");
      write_atomic(path, round_report_json(round.report, cfg.config_hash).dump(2) + "\n");
      artifacts.round_reports.push_back(path);
    }
  }
  artifacts.aggregate_csv = out_dir / "aggregate_mcc.csv";
  write_atomic(artifacts.aggregate_csv, aggregate_csv(result, cfg.config_hash));
  artifacts.payload_csv = out_dir / "payload.csv";
  write_atomic(artifacts.payload_csv, payload_csv(result, cfg.config_hash));
  artifacts.reward_trace_csv = out_dir / "reward_trace.csv";
  write_atomic(artifacts.reward_trace_csv, reward_trace_csv(result, cfg.config_hash));
  artifacts.result = std::move(result);
  return artifacts;
}

}  // namespace fedtab
