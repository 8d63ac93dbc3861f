#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string_view>

namespace d2dcache {

// splitmix64 finalizer; the mixing core for all stream keys.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Deterministic pseudo-random stream. Streams are derived from a (seed, name,
// indices) key, so adding a new draw site never perturbs existing ones and the
// consumer order inside a stream is the only thing that matters. All
// distributions are implemented here rather than with <random>, whose
// distributions are implementation-defined and would break cross-build
// reproducibility of golden files.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t key) : state_(mix64(key ^ 0x8f5c28f5c28f5c29ULL)) {}

  static RandomStream keyed(std::uint64_t seed, std::string_view family,
                            std::uint64_t a = 0, std::uint64_t b = 0) {
    std::uint64_t h = mix64(seed);
    for (char c : family) h = mix64(h ^ static_cast<std::uint64_t>(static_cast<unsigned char>(c)));
    h = mix64(h ^ a);
    h = mix64(h ^ b);
    return RandomStream(h);
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t x = state_;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Inclusive on both ends.
  int uniform_int(int lo, int hi) {
    if (hi < lo) throw std::invalid_argument("uniform_int: empty range");
    auto span = static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo) + 1;
    return lo + static_cast<int>(next_u64() % span);
  }

  // Box-Muller; the sine companion value is discarded to keep the stream
  // layout independent of call parity.
  double normal() {
    double u1 = next_double();
    double u2 = next_double();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  // Marsaglia-Tsang squeeze method.
  double gamma(double shape, double scale) {
    if (!(shape > 0.0) || !(scale > 0.0)) throw std::invalid_argument("gamma: shape and scale must be positive");
    if (shape < 1.0) {
      double u = next_double();
      if (u < 1e-300) u = 1e-300;
      return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = normal();
      double v = 1.0 + c * x;
      if (v <= 0.0) continue;
      v = v * v * v;
      double u = next_double();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v * scale;
      if (u < 1e-300) u = 1e-300;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v * scale;
    }
  }

  // Sequential search below 30, Hormann's PTRS transformed rejection above.
  long poisson(double mean) {
    if (mean < 0.0 || !std::isfinite(mean)) throw std::invalid_argument("poisson: mean must be finite and >= 0");
    if (mean == 0.0) return 0;
    if (mean < 30.0) {
      double p = std::exp(-mean);
      double cum = p;
      double u = next_double();
      long k = 0;
      while (u > cum && k < 1000000) {
        ++k;
        p *= mean / static_cast<double>(k);
        cum += p;
      }
      return k;
    }
    const double b = 0.931 + 2.53 * std::sqrt(mean);
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double v_r = 0.9277 - 3.6224 / (b - 2.0);
    const double log_mean = std::log(mean);
    for (;;) {
      double u = next_double() - 0.5;
      double v = next_double();
      double us = 0.5 - std::fabs(u);
      double kf = std::floor((2.0 * a / us + b) * u + mean + 0.43);
      if (us >= 0.07 && v <= v_r) return static_cast<long>(kf);
      if (kf < 0.0 || (us < 0.013 && v > us)) continue;
      double k = kf;
      if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
          k * log_mean - mean - std::lgamma(k + 1.0)) {
        return static_cast<long>(kf);
      }
    }
  }

 private:
  std::uint64_t state_;
};

}  // namespace d2dcache
