#include "pfsplat/curriculum.hpp"

#include "pfsplat/errors.hpp"

#include <string>

namespace pfsplat {

std::string_view to_string(ForcingMode m) {
  switch (m) {
    case ForcingMode::Teacher: return "teacher";
    case ForcingMode::Self: return "self";
    case ForcingMode::Mix: return "mix";
  }
  return "mix";
}

std::string_view to_string(PoseSource s) { return s == PoseSource::Predicted ? "predicted" : "ground_truth"; }

ForcingMode parse_forcing(std::string_view name) {
  if (name == "teacher") return ForcingMode::Teacher;
  if (name == "self") return ForcingMode::Self;
  if (name == "mix") return ForcingMode::Mix;
  throw ConfigError("unknown forcing mode '" + std::string(name) + "'");
}

void ForcingSchedule::validate() const {
  if (t_start < 0 || t_end < t_start) throw InvalidArgument("forcing schedule: need 0 <= t_start <= t_end");
  if (!(ratio_r >= 0.0 && ratio_r <= 1.0)) throw InvalidArgument("forcing schedule: ratio_r must lie in [0, 1]");
}

double predicted_pose_probability(const ForcingSchedule& s, std::int64_t step) {
  if (step < 0) throw InvalidArgument("predicted_pose_probability: negative step");
  switch (s.mode) {
    case ForcingMode::Teacher: return 0.0;
    case ForcingMode::Self: return 1.0;
    case ForcingMode::Mix: break;
  }
  if (step >= s.t_end) return s.ratio_r;
  if (step < s.t_start) return 0.0;
  return s.ratio_r * static_cast<double>(step - s.t_start) / static_cast<double>(s.t_end - s.t_start);
}

PoseSource choose_pose_source(const ForcingSchedule& s, std::int64_t step) {
  const double p = predicted_pose_probability(s, step);
  if (p <= 0.0) return PoseSource::GroundTruth;
  if (p >= 1.0) return PoseSource::Predicted;
  return keyed_uniform(s.rng_seed, static_cast<std::uint64_t>(step)) < p ? PoseSource::Predicted
                                                                        : PoseSource::GroundTruth;
}

}  // namespace pfsplat
