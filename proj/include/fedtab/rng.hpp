#pragma once

// Deterministic random streams. splitmix64 is used directly as the
// generator so that sequences are identical across platforms and
// standard-library versions (std::uniform_* distributions are not
// portable). Streams are derived by folding integer tags into the seed,
// which keeps per-client / per-round / per-phase sampling independent of
// the order in which concurrently running clients are processed.

#include <cstdint>
#include <initializer_list>
#include <vector>

namespace fedtab {

inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() { return splitmix64(state_); }

  // uniform in [0, 1), 53-bit resolution
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // uniform in {0, ..., n-1}; Lemire multiply-shift, no modulo bias in practice
  size_t next_below(size_t n) {
    return static_cast<size_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  bool next_bernoulli(double p) { return next_double() < p; }

  double next_in(double lo, double hi) { return lo + (hi - lo) * next_double(); }

 private:
  uint64_t state_;
};

// phase tags for derived streams
enum class Stream : uint64_t {
  DataGen = 1,
  Participation = 2,
  Adaptation = 3,
  Conditions = 4,
  Refinement = 5,
  Malformation = 6,
};

inline uint64_t fold_seed(uint64_t seed, std::initializer_list<uint64_t> parts) {
  uint64_t s = seed;
  (void)splitmix64(s);
  for (uint64_t p : parts) {
    s ^= p + 0x9e3779b97f4a7c15ULL + (s << 6) + (s >> 2);
    (void)splitmix64(s);
  }
  return s;
}

inline Rng derive_rng(uint64_t seed, std::initializer_list<uint64_t> parts) {
  return Rng(fold_seed(seed, parts));
}

}  // namespace fedtab
