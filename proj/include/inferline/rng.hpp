#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "inferline/errors.hpp"

namespace inferline::rng {

// splitmix64; used to derive independent sub-stream seeds from one master seed.
inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline uint64_t derive_seed(uint64_t master, uint64_t stream_id) {
  uint64_t s = master ^ (0xD1B54A32D192ED03ULL * (stream_id + 1));
  splitmix64(s);
  return splitmix64(s);
}

// Deterministic random stream. The engine (mt19937_64) is fully specified by
// the standard; the distributions are hand-rolled because std:: distribution
// output is implementation-defined and would break cross-platform
// reproducibility of traces.
class Stream {
 public:
  Stream(uint64_t master_seed, uint64_t stream_id)
      : eng_(derive_seed(master_seed, stream_id)) {}

  // Uniform in [0, 1) with 53 bits of precision.
  double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  // Uniform in (0, 1]; safe to pass to log().
  double uniform01_open() { return 1.0 - uniform01(); }

  double normal() {
    // Box-Muller, consuming exactly two uniforms per call.
    double u1 = uniform01_open();
    double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  // Marsaglia-Tsang gamma sampler; shape > 0, scale > 0.
  double gamma(double shape, double scale) {
    if (!(shape > 0.0) || !(scale > 0.0))
      throw ValidationError("gamma: shape and scale must be positive");
    if (shape < 1.0) {
      double u = uniform01_open();
      return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = normal();
      double t = 1.0 + c * x;
      if (t <= 0.0) continue;
      double v = t * t * t;
      double u = uniform01_open();
      double x2 = x * x;
      if (u < 1.0 - 0.0331 * x2 * x2) return d * v * scale;
      if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v * scale;
    }
  }

 private:
  std::mt19937_64 eng_;
};

// Stream ids per purpose so arrivals and path choices are independent.
inline constexpr uint64_t kArrivalStream = 1;
inline constexpr uint64_t kPathChoiceStream = 2;

}  // namespace inferline::rng
