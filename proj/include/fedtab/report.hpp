#pragma once

// Artifact emission: structured-text round reports, the aggregate MCC table,
// payload accounting, and the per-step reward trace. Every file is written
// atomically (temp + rename) and stamped with the config hash and seeds.
// Numeric leaves are rendered with %.17g so files are lossless and diffable.

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "fedtab/config.hpp"
#include "fedtab/federation.hpp"

namespace fedtab {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string hash_string(uint64_t h) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
  return buf;
}

inline nlohmann::ordered_json round_report_json(const RoundReport& report, uint64_t config_hash) {
  nlohmann::ordered_json j;
  j["round"] = report.round;
  j["seed"] = report.seed;
  j["mode"] = report.mode;
  j["config_hash"] = hash_string(config_hash);
  j["participants"] = report.participants;

  nlohmann::ordered_json clients = nlohmann::ordered_json::array();
  for (const auto& c : report.clients) {
    nlohmann::ordered_json cj;
    cj["client_id"] = c.client_id;
    cj["task_id"] = c.task_id;
    cj["failed"] = c.failed;
    if (c.failed) cj["error"] = c.error;
    cj["val_mcc"] = fmt_double(c.validation.mcc);
    cj["val_q"] = fmt_double(c.validation.q);
    cj["val_threshold"] = fmt_double(c.validation.threshold);
    cj["test_mcc"] = fmt_double(c.test_mcc);
    cj["loss_first"] = fmt_double(c.loss_first);
    cj["loss_last"] = fmt_double(c.loss_last);
    cj["loss_mean"] = fmt_double(c.loss_mean);
    cj["scorer_refreshes"] = c.scorer_refreshes;
    cj["refreshes_skipped"] = c.refreshes_skipped;
    cj["refine_pool_size"] = c.refine_pool_size;
    cj["reward"] = {{"mean_pooled", fmt_double(c.reward.mean_pooled)},
                    {"mean_fmt", fmt_double(c.reward.mean_fmt)},
                    {"adv_mean", fmt_double(c.reward.adv_mean)},
                    {"adv_std", fmt_double(c.reward.adv_std)},
                    {"adv_histogram", c.reward.adv_histogram}};
    clients.push_back(std::move(cj));
  }
  j["clients"] = std::move(clients);

  nlohmann::ordered_json payload;
  payload["total_uplink"] = report.payload.total_uplink;
  payload["downlink_backbone"] = report.payload.downlink_backbone;
  payload["downlink_pool"] = report.payload.downlink_pool;
  payload["total_downlink"] = report.payload.total_downlink;
  payload["total_bytes"] = report.payload.total_bytes;
  nlohmann::ordered_json uplinks;
  for (const auto& [id, bytes] : report.payload.uplink_per_client)
    uplinks[std::to_string(id)] = bytes;
  payload["uplink_per_client"] = std::move(uplinks);
  nlohmann::ordered_json messages = nlohmann::ordered_json::array();
  for (const auto& e : report.payload.entries)
    messages.push_back({{"tag", frame_tag_name(e.tag)},
                        {"sender", e.sender},
                        {"receiver", e.receiver},
                        {"bytes", e.bytes}});
  payload["messages"] = std::move(messages);
  j["payload"] = std::move(payload);
  return j;
}

inline std::string stamp_line(uint64_t config_hash, const std::vector<uint64_t>& seeds) {
  std::string line = "# config_hash=" + hash_string(config_hash) + " seeds=";
  for (size_t i = 0; i < seeds.size(); ++i) {
    if (i) line += ";";
    line += std::to_string(seeds[i]);
  }
  line += "\n";
  return line;
}

inline std::string aggregate_csv(const ExperimentResult& result, uint64_t config_hash) {
  std::string out = stamp_line(config_hash, result.seeds);
  out += "client_id,task_id,round,mean_val_mcc,std_val_mcc,mean_test_mcc,std_test_mcc\n";
  for (const auto& row : result.aggregate) {
    out += std::to_string(row.client_id) + "," + row.task_id + "," + std::to_string(row.round) +
           "," + fmt_double(row.mean_val_mcc) + "," + fmt_double(row.std_val_mcc) + "," +
           fmt_double(row.mean_test_mcc) + "," + fmt_double(row.std_test_mcc) + "\n";
  }
  return out;
}

inline std::string payload_csv(const ExperimentResult& result, uint64_t config_hash) {
  std::string out = stamp_line(config_hash, result.seeds);
  out += "seed,round,messages,total_uplink,downlink_backbone,downlink_pool,total_downlink,"
         "total_bytes\n";
  for (size_t s = 0; s < result.runs.size(); ++s) {
    for (const auto& round : result.runs[s]) {
      const PayloadLedger& p = round.report.payload;
      out += std::to_string(result.seeds[s]) + "," + std::to_string(round.report.round) + "," +
             std::to_string(p.entries.size()) + "," + std::to_string(p.total_uplink) + "," +
             std::to_string(p.downlink_backbone) + "," + std::to_string(p.downlink_pool) + "," +
             std::to_string(p.total_downlink) + "," + std::to_string(p.total_bytes) + "\n";
    }
  }
  return out;
}

inline std::string reward_trace_csv(const ExperimentResult& result, uint64_t config_hash) {
  std::string out = stamp_line(config_hash, result.seeds);
  out += "seed,round,client_id,step,mean_pooled,mean_fmt,adv_mean,adv_std,adv_min,adv_max\n";
  for (size_t s = 0; s < result.runs.size(); ++s) {
    for (const auto& round : result.runs[s]) {
      for (const auto& [client_id, trace] : round.refine_traces) {
        for (size_t step = 0; step < trace.size(); ++step) {
          const RefineStepTrace& t = trace[step];
          out += std::to_string(result.seeds[s]) + "," + std::to_string(round.report.round) +
                 "," + std::to_string(client_id) + "," + std::to_string(step) + "," +
                 fmt_double(t.mean_pooled) + "," + fmt_double(t.mean_fmt) + "," +
                 fmt_double(t.adv_mean) + "," + fmt_double(t.adv_std) + "," +
                 fmt_double(t.adv_min) + "," + fmt_double(t.adv_max) + "\n";
        }
      }
    }
  }
  return out;
}

inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace fedtab
