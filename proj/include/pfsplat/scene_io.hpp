#pragma once

#include "pfsplat/synthetic.hpp"
#include "pfsplat/trainer.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace pfsplat {

// Every JSON document written here carries "schema_version"; readers reject
// any other value and any key they do not know. Malformed documents raise
// ConfigError, unreadable files IoError.

inline constexpr int kSchemaVersion = 1;

enum class ViewRole { Context, Target, Eval };

[[nodiscard]] std::string_view to_string(ViewRole r);
[[nodiscard]] ViewRole parse_view_role(std::string_view name);

/// Scene directory layout: scene.json, gaussians.ply and images/<id>.png.
/// Images pass through 8-bit PNG, so loaded images are quantized renders.
void save_scene(const SyntheticScene& scene, const std::filesystem::path& dir);
/// Accepts the directory or the scene.json path itself. A missing gaussians_path
/// yields an empty gt scene.
[[nodiscard]] SyntheticScene load_scene(const std::filesystem::path& path);

struct CameraFile {
  CameraIntrinsics intrinsics;
  CameraPose pose;
};

void save_camera(const CameraFile& camera, const std::filesystem::path& path);
[[nodiscard]] CameraFile load_camera(const std::filesystem::path& path);

struct PoseEntry {
  int id = 0;
  CameraPose pose;
};

/// {schema_version, intrinsics?, poses: [{id, rotation, translation}]}
void save_poses(std::span<const PoseEntry> poses, const std::filesystem::path& path);
[[nodiscard]] std::vector<PoseEntry> load_poses(const std::filesystem::path& path);

/// Parses a scene spec object; absent keys keep their defaults.
[[nodiscard]] SceneSpec load_scene_spec(const std::filesystem::path& path);
[[nodiscard]] SceneSpec parse_scene_spec(const std::string& json_text);

/// Training overrides: steps, targets_per_step, forcing, norm, seed, schedule{},
/// weights{}, lr{}, render{}, grid, depth_prior and the noise/solver knobs.
[[nodiscard]] TrainConfig parse_train_config(const std::string& json_text, TrainConfig base = {});

/// Ablation grid over a fixed suite of generated scenes.
struct SuiteConfig {
  int num_scenes = 10;
  std::uint64_t base_seed = 0;
  SceneSpec scene;
  TrainConfig train;
  std::vector<ForcingMode> forcing_modes{ForcingMode::Teacher, ForcingMode::Self, ForcingMode::Mix};
  std::vector<NormalizationStrategy> normalizations{NormalizationStrategy::MaxPairwise,
                                                    NormalizationStrategy::MeanPairwise,
                                                    NormalizationStrategy::MaxTranslation, NormalizationStrategy::None};
  double min_global_scale = 0.1;  // normalization runs draw uniform scales in this range
  double max_global_scale = 10.0;
  double max_origin_offset = 3.0;  // per-axis, in units of camera_radius * global_scale
  int workers = 1;

  void validate() const;
};

[[nodiscard]] SuiteConfig parse_suite_config(const std::string& json_text);

/// Steps as JSON lines plus a summary document.
void write_report(const TrainReport& report, const std::filesystem::path& steps_jsonl,
                  const std::filesystem::path& summary_json);
[[nodiscard]] std::string summary_json(const TrainReport& report);
[[nodiscard]] EvalMetrics parse_summary_metrics(const std::string& json_text);

[[nodiscard]] std::string read_text(const std::filesystem::path& path);
void write_text(const std::string& text, const std::filesystem::path& path);

}  // namespace pfsplat
