#pragma once

#include <cstdint>

namespace pfsplat {

/// Counter-based uniform in [0, 1): a pure function of its keys.
[[nodiscard]] double keyed_uniform(std::uint64_t seed, std::uint64_t counter, std::uint64_t stream = 0);

/// Sequential draws from keyed_uniform. Platform-independent, unlike the
/// standard distributions, so generated scenes are bitwise reproducible.
class KeyedRng {
 public:
  KeyedRng(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

  double uniform() { return keyed_uniform(seed_, counter_++, stream_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal by Box-Muller.
  double normal();

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
};

}  // namespace pfsplat
