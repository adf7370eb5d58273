#pragma once

// Communication payload arithmetic for the LLM-scale deployment: scorer LoRA
// adapter plus scalar head at 2 bytes per parameter (bf16), per-client and
// cohort uplink, backbone and pool downlink. MB means 10^6 bytes and MiB
// means 2^20 bytes; both are reported.

#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace fedtab {

constexpr uint64_t kBytesPerParam = 2;

struct PayloadAudit {
  uint64_t layers = 0;
  uint64_t hidden = 0;
  uint64_t lora_params = 0;   // P_lora, given
  uint64_t scorer_rank = 0;   // r_s
  uint64_t cohort = 0;

  uint64_t p_s = 0;           // 4 * L * r_s * d
  uint64_t p_head = 0;        // d + 1
  uint64_t uplink_client = 0;       // 2 * (P_lora + P_s + P_head)
  uint64_t uplink_cohort = 0;
  uint64_t downlink_backbone = 0;   // 2 * P_lora
  uint64_t downlink_pool = 0;       // 2 * (cohort - 1) * (P_s + P_head)
};

inline PayloadAudit payload_audit(uint64_t layers, uint64_t hidden,
                                               uint64_t lora_params, uint64_t scorer_rank,
                                               uint64_t cohort) {
  if (layers == 0 || hidden == 0 || lora_params == 0 || scorer_rank == 0 || cohort == 0)
    throw std::invalid_argument("payload audit: all inputs must be positive");
  PayloadAudit p;
  p.layers = layers;
  p.hidden = hidden;
  p.lora_params = lora_params;
  p.scorer_rank = scorer_rank;
  p.cohort = cohort;
  p.p_s = 4 * layers * scorer_rank * hidden;
  p.p_head = hidden + 1;
  p.uplink_client = kBytesPerParam * (lora_params + p.p_s + p.p_head);
  p.uplink_cohort = cohort * p.uplink_client;
  p.downlink_backbone = kBytesPerParam * lora_params;
  p.downlink_pool = kBytesPerParam * (cohort - 1) * (p.p_s + p.p_head);
  return p;
}

inline std::string mb_string(uint64_t bytes) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", static_cast<double>(bytes) / 1e6);
  return buf;
}

inline std::string mib_string(uint64_t bytes) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", static_cast<double>(bytes) / 1048576.0);
  return buf;
}

inline std::string format_payload_audit(const PayloadAudit& p) {
  auto line = [](const char* name, uint64_t bytes) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-22s %14llu bytes  %10s MB  %10s MiB\n", name,
                  static_cast<unsigned long long>(bytes), mb_string(bytes).c_str(),
                  mib_string(bytes).c_str());
    return std::string(buf);
  };
  std::string out;
  char head[256];
  std::snprintf(head, sizeof(head),
                "payload audit: L=%llu d=%llu P_lora=%llu r_s=%llu cohort=%llu\n"
                "P_s    = %llu params\nP_head = %llu params\n",
                static_cast<unsigned long long>(p.layers),
                static_cast<unsigned long long>(p.hidden),
                static_cast<unsigned long long>(p.lora_params),
                static_cast<unsigned long long>(p.scorer_rank),
                static_cast<unsigned long long>(p.cohort),
                static_cast<unsigned long long>(p.p_s),
                static_cast<unsigned long long>(p.p_head));
  out += head;
  out += line("uplink per client", p.uplink_client);
  out += line("uplink cohort", p.uplink_cohort);
  out += line("downlink backbone", p.downlink_backbone);
  out += line("downlink pool/client", p.downlink_pool);
  return out;
}

}  // namespace fedtab
