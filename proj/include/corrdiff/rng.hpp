#pragma once

#include <cstdint>

namespace corrdiff {

/// Deterministic splittable random stream.
///
/// The core generator is SplitMix64; Gaussian draws use the Box-Muller
/// transform and gamma draws Marsaglia-Tsang, both written out explicitly so
/// that a given (seed, stream_id) pair yields the same sequence on every
/// platform, independent of the standard library's distributions.
class RngStream {
 public:
  static constexpr const char* kAlgorithm = "splitmix64/box-muller";

  explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0);

  /// Derives an independent child stream. Identical (parent, id) pairs give
  /// identical children, so replicate/fold/subject streams can be created in
  /// any order (or in parallel) without coupling.
  RngStream split(std::uint64_t stream_id) const;

  std::uint64_t next_u64();
  double uniform();                       // [0, 1)
  double uniform(double lo, double hi);   // [lo, hi)
  double normal();                        // standard Gaussian
  double gamma(double shape);             // unit scale, shape > 0
  double chi_square(double dof);          // dof > 0

 private:
  std::uint64_t state_;
  std::uint64_t origin_;  // identity of this stream, used by split()
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

/// Stable 64-bit mix of (seed, index), used for stream derivation.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace corrdiff
