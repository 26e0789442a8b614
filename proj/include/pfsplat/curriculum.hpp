#pragma once

#include "pfsplat/random.hpp"

#include <cstdint>
#include <string_view>

namespace pfsplat {

enum class ForcingMode { Teacher, Self, Mix };
enum class PoseSource { GroundTruth, Predicted };

[[nodiscard]] std::string_view to_string(ForcingMode m);
[[nodiscard]] std::string_view to_string(PoseSource s);
/// teacher | self | mix
[[nodiscard]] ForcingMode parse_forcing(std::string_view name);

/// Which poses aggregate the local Gaussians at each training step.
/// Defaults are the published schedule: t_start = 80k, t_end = 100k, r = 0.1.
struct ForcingSchedule {
  std::int64_t t_start = 80'000;
  std::int64_t t_end = 100'000;
  double ratio_r = 0.1;
  ForcingMode mode = ForcingMode::Mix;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

/// Teacher: 0. Self: 1. Mix: 0 before t_start, r at or after t_end, linear in between.
[[nodiscard]] double predicted_pose_probability(const ForcingSchedule& s, std::int64_t step);

/// One Bernoulli draw per (seed, step), shared by every view of the scene.
[[nodiscard]] PoseSource choose_pose_source(const ForcingSchedule& s, std::int64_t step);

}  // namespace pfsplat
