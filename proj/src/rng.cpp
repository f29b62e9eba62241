#include "corrdiff/rng.hpp"

#include <cmath>

#include "corrdiff/errors.hpp"

namespace corrdiff {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t splitmix64_step(std::uint64_t& state) {
  std::uint64_t z = (state += kGolden);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t s = seed ^ (kGolden * (index + 1));
  std::uint64_t a = splitmix64_step(s);
  std::uint64_t b = splitmix64_step(s);
  return a ^ (b >> 1);
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : state_(mix_seed(seed, stream_id)), origin_(state_) {}

RngStream RngStream::split(std::uint64_t stream_id) const {
  return RngStream(origin_, stream_id + 1);
}

std::uint64_t RngStream::next_u64() { return splitmix64_step(state_); }

double RngStream::uniform() {
  // 53 random bits into [0, 1).
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

double RngStream::normal() {
  if (has_cached_normal_) {
    has_cached_normal_ = false;
    return cached_normal_;
  }
  // Box-Muller; u1 shifted away from 0 so log() stays finite.
  double u1 = (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double angle = 2.0 * M_PI * u2;
  cached_normal_ = r * std::sin(angle);
  has_cached_normal_ = true;
  return r * std::cos(angle);
}

double RngStream::gamma(double shape) {
  if (!(shape > 0.0)) fail(ErrorCode::InvalidArgument, "gamma shape must be > 0");
  if (shape < 1.0) {
    // Boost to shape+1 and scale back.
    double u = uniform();
    while (u <= 0.0) u = uniform();
    return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  // Marsaglia-Tsang squeeze method.
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = normal();
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    double u = uniform();
    double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
    if (u > 0.0 && std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double RngStream::chi_square(double dof) { return 2.0 * gamma(0.5 * dof); }

}  // namespace corrdiff
