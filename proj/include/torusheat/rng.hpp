#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace torusheat {

// Deterministic stream splitting. Every independent consumer of randomness
// (replica, coordinate, time step, mode block) gets its own stream key
// derived from the master seed plus integer salts. Streams are cheap to
// construct, so per-step/per-block generators can be rebuilt on the fly;
// this is what makes parallel ensembles reproducible regardless of the
// thread count or iteration order.

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_stream(std::uint64_t key,
                                   std::initializer_list<std::uint64_t> salts) {
  std::uint64_t s = key;
  for (std::uint64_t v : salts) {
    s = mix64(s + 0x9e3779b97f4a7c15ULL * (v + 1));
  }
  // Final avalanche so consecutive salts do not give consecutive states.
  return mix64(s + 0x9e3779b97f4a7c15ULL);
}

// splitmix64: one 64-bit word of state, full-period, strong avalanche.
// Construction cost is a single store, so fresh per-(step, block) engines
// are essentially free (unlike mt19937_64 with its 2.5 KB table fill).
class SplitMix64 {
 public:
  using result_type = std::uint64_t;
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~0ULL; }
  result_type operator()() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }

 private:
  std::uint64_t state_;
};

// Standard-normal source over a stream key. std::normal_distribution is
// stateful (caches a spare deviate), so one object per stream.
class NormalStream {
 public:
  explicit NormalStream(std::uint64_t stream_key) : engine_(stream_key) {}
  double operator()() { return dist_(engine_); }
  double uniform01() {
    return std::generate_canonical<double, 53>(engine_);
  }

 private:
  SplitMix64 engine_;
  std::normal_distribution<double> dist_{0.0, 1.0};
};

}  // namespace torusheat
