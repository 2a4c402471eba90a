#pragma once

#include <cstdint>
#include <random>

namespace slfv {

using Rng = std::mt19937_64;

// Module tags keep the streams used for different purposes apart even when
// seed and replicate coincide.
enum class StreamTag : std::uint32_t {
  events = 1,
  marking = 2,
  dual = 3,
  forward = 4,
  pair = 5,
  backward = 6,
  limit = 7,
  metric = 8,
  diagnostics = 9,
  misc = 10,
};

// Every replicate gets its own generator keyed by (seed, replicate, tag),
// so results never depend on scheduling or worker count.
inline Rng make_stream(std::uint64_t seed, std::uint64_t replicate, StreamTag tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(replicate),
                    static_cast<std::uint32_t>(replicate >> 32),
                    static_cast<std::uint32_t>(tag)};
  return Rng(seq);
}

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

inline double uniform(Rng& rng, double a, double b) {
  return std::uniform_real_distribution<double>(a, b)(rng);
}

// Uniform on the open interval (a, b).
inline double uniform_open(Rng& rng, double a, double b) {
  std::uniform_real_distribution<double> d(a, b);
  for (;;) {
    double x = d(rng);
    if (x > a && x < b) return x;
  }
}

inline bool bernoulli(Rng& rng, double p) {
  if (p <= 0.0) return false;
  if (p >= 1.0) return true;
  return uniform01(rng) < p;
}

inline double exponential(Rng& rng, double rate) {
  return std::exponential_distribution<double>(rate)(rng);
}

inline double normal(Rng& rng, double sd = 1.0) {
  return std::normal_distribution<double>(0.0, sd)(rng);
}

}  // namespace slfv
