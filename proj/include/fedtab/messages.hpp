#pragma once

// Simulated transport frames. Every byte that crosses the client/server
// boundary is one tagged, length-prefixed frame; the accounting in round
// reports measures exactly these frames, and the isolation tests scan them.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedtab/scorer.hpp"

namespace fedtab {

enum class FrameTag : uint8_t {
  Backbone = 1,  // server -> client: task backbone weights
  ScorerUp = 2,  // client -> server: scorer payload (the only default uplink)
  PoolDown = 3,  // server -> client: other participants' scorers
  DeltaUp = 4,   // client -> server: learner delta (aggregation mode only)
};

inline const char* frame_tag_name(FrameTag t) {
  switch (t) {
    case FrameTag::Backbone: return "BACKBONE";
    case FrameTag::ScorerUp: return "SCORER_UP";
    case FrameTag::PoolDown: return "POOL_DOWN";
    case FrameTag::DeltaUp: return "DELTA_UP";
  }
  return "?";
}

constexpr uint32_t kServerId = 0xffffffffu;

struct Frame {
  FrameTag tag;
  uint32_t sender = 0;
  uint32_t receiver = 0;
  std::vector<uint8_t> payload;

  // tag + sender + receiver + u64 length prefix + payload
  uint64_t wire_size() const { return 1 + 4 + 4 + 8 + payload.size(); }
  bool server_bound() const { return receiver == kServerId; }
};

// --- payload bodies --------------------------------------------------------

struct BackbonePayload {
  std::string task_id;
  std::vector<double> weights;
  double bias = 0.0;
};

inline std::vector<uint8_t> encode_backbone_payload(const BackbonePayload& b) {
  std::vector<uint8_t> out;
  detail::put_u32(out, static_cast<uint32_t>(b.task_id.size()));
  out.insert(out.end(), b.task_id.begin(), b.task_id.end());
  detail::put_u32(out, static_cast<uint32_t>(b.weights.size()));
  for (double w : b.weights) detail::put_f64(out, w);
  detail::put_f64(out, b.bias);
  return out;
}

inline BackbonePayload decode_backbone_payload(std::span<const uint8_t> payload) {
  detail::ByteReader r{payload};
  BackbonePayload b;
  uint32_t task_len = 0, dim = 0;
  if (!r.u32(task_len) || !r.bytes(b.task_id, task_len) || !r.u32(dim) ||
      payload.size() - r.pos < static_cast<size_t>(dim) * 8 + 8)
    throw std::runtime_error("backbone payload: truncated header");
  b.weights.resize(dim);
  for (uint32_t i = 0; i < dim; ++i)
    if (!r.f64(b.weights[i])) throw std::runtime_error("backbone payload: truncated weights");
  if (!r.f64(b.bias) || !r.done()) throw std::runtime_error("backbone payload: truncated bias");
  return b;
}

struct DeltaPayload {
  std::string task_id;
  std::vector<double> delta;
  double bias_delta = 0.0;
};

inline std::vector<uint8_t> encode_delta_payload(const DeltaPayload& d) {
  std::vector<uint8_t> out;
  detail::put_u32(out, static_cast<uint32_t>(d.task_id.size()));
  out.insert(out.end(), d.task_id.begin(), d.task_id.end());
  detail::put_u32(out, static_cast<uint32_t>(d.delta.size()));
  for (double w : d.delta) detail::put_f64(out, w);
  detail::put_f64(out, d.bias_delta);
  return out;
}

inline DeltaPayload decode_delta_payload(std::span<const uint8_t> payload) {
  detail::ByteReader r{payload};
  DeltaPayload d;
  uint32_t task_len = 0, dim = 0;
  if (!r.u32(task_len) || !r.bytes(d.task_id, task_len) || !r.u32(dim) ||
      payload.size() - r.pos < static_cast<size_t>(dim) * 8 + 8)
    throw std::runtime_error("delta payload: truncated header");
  d.delta.resize(dim);
  for (uint32_t i = 0; i < dim; ++i)
    if (!r.f64(d.delta[i])) throw std::runtime_error("delta payload: truncated delta");
  if (!r.f64(d.bias_delta) || !r.done()) throw std::runtime_error("delta payload: truncated bias");
  return d;
}

// pool: u32 member count, then per member u32 client id, u32 payload length,
// scorer payload bytes
inline std::vector<uint8_t> encode_pool_payload(const std::vector<ScorerPool::Member>& members) {
  std::vector<uint8_t> out;
  detail::put_u32(out, static_cast<uint32_t>(members.size()));
  for (const auto& m : members) {
    detail::put_u32(out, m.client_id);
    const std::vector<uint8_t> body = encode_scorer_payload(m.scorer);
    detail::put_u32(out, static_cast<uint32_t>(body.size()));
    out.insert(out.end(), body.begin(), body.end());
  }
  return out;
}

inline std::vector<ScorerPool::Member> decode_pool_payload(std::span<const uint8_t> payload) {
  detail::ByteReader r{payload};
  uint32_t count = 0;
  if (!r.u32(count)) throw std::runtime_error("pool payload: truncated count");
  std::vector<ScorerPool::Member> members;
  for (uint32_t i = 0; i < count; ++i) {
    ScorerPool::Member m;
    uint32_t len = 0;
    std::string body;
    if (!r.u32(m.client_id) || !r.u32(len) || !r.bytes(body, len))
      throw std::runtime_error("pool payload: truncated member");
    m.scorer = decode_scorer_payload(
        std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(body.data()), body.size()));
    members.push_back(std::move(m));
  }
  if (!r.done()) throw std::runtime_error("pool payload: trailing bytes");
  return members;
}

}  // namespace fedtab
