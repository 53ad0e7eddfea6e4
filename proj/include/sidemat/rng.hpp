#pragma once

// Counter-based random streams.
//
// Draw k of a stream is splitmix64(key + k * golden) where key is derived
// from (seed, stream id). Streams therefore never share state, and the draws
// of one stream do not depend on how many draws another stream consumed.
//
//   uniform: top 53 bits of a draw scaled by 2^-53, in [0, 1)
//   normal:  Marsaglia polar method on uniform(-1, 1) pairs; the second
//            variate of each accepted pair is returned by the next call

#include <cmath>
#include <cstdint>

namespace sidemat {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t combine_seed(std::uint64_t a, std::uint64_t b) {
  return mix64(a * kGolden + mix64(b + 0x632BE59BD9B4E019ULL));
}

/// Per-replication seed, so any (config, rep) cell can be re-run on its own.
inline constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t config_index,
                                           std::uint64_t rep_index) {
  return combine_seed(combine_seed(base, config_index), rep_index);
}

enum class Stream : std::uint64_t {
  covariates = 1,
  coefficients = 2,
  factors = 3,
  noise = 4,
  mask = 5,
};

class StreamRng {
 public:
  StreamRng(std::uint64_t seed, Stream stream)
      : key_(combine_seed(seed, static_cast<std::uint64_t>(stream))) {}

  std::uint64_t next() { return mix64(key_ + (counter_++) * kGolden); }

  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  std::uint64_t draws() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace sidemat
