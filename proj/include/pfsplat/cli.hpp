#pragma once

#include "pfsplat/ablation.hpp"
#include "pfsplat/scene_io.hpp"
#include "pfsplat/trainer.hpp"

#include <exception>
#include <filesystem>
#include <string>
#include <vector>

namespace pfsplat::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kSuccess = 0, kFailure = 1, kConfigError = 2, kIoError = 3, kDivergence = 4 };

/// Maps the library exception hierarchy onto the exit-code contract.
[[nodiscard]] int exit_code_for(const std::exception& e);

/// Scene directory from a scene spec file: scene.json, gaussians.ply, images/.
void cmd_synth(const fs::path& spec_json, const fs::path& out_dir);

struct TrainCommand {
  fs::path scene_dir;
  fs::path out_dir;
  ForcingMode forcing = ForcingMode::Mix;
  NormalizationStrategy norm = NormalizationStrategy::MaxPairwise;
  std::int64_t steps = TrainConfig{}.steps;
  std::uint64_t seed = 0;
};

/// Writes steps.jsonl, summary.json, gaussians.ply and poses.json (both in the
/// scene's own frame) and pred/, a scene directory of pose-dependent renders whose
/// context views carry the predicted poses.
TrainResult cmd_train(const TrainCommand& cmd);

void cmd_render(const fs::path& ply, const fs::path& camera_json, const fs::path& out_png);

struct EvalTable {
  struct Row {
    int id = 0;
    double psnr = 0.0;
    double ssim = 0.0;
  };
  std::vector<Row> rows;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
  std::vector<double> pose_auc;  // at kAucThresholds; empty with fewer than two shared context views

  [[nodiscard]] std::string text() const;
  [[nodiscard]] std::string json() const;
};

/// Views are matched by id; writes eval.json into pred_dir.
EvalTable cmd_eval(const fs::path& pred_dir, const fs::path& gt_dir);

struct PruneSummary {
  size_t before = 0;
  size_t after = 0;
  [[nodiscard]] double removed_fraction() const {
    return before == 0 ? 0.0 : static_cast<double>(before - after) / static_cast<double>(before);
  }
};

PruneSummary cmd_prune(const fs::path& ply_in, double threshold, const fs::path& ply_out);

/// Initial poses come from poses_json, images and intrinsics from the scene
/// directory targets_dir, matched by view id.
PostOptResult cmd_postopt(const fs::path& ply, const fs::path& poses_json, const fs::path& targets_dir,
                          const fs::path& out_dir);

/// Writes ablation.json, ablation.txt and runs/.
AblationSummary cmd_ablate(const fs::path& suite_json, const fs::path& out_dir);

/// Full command line, including argument parsing. Returns an ExitCode value.
int run(int argc, const char* const* argv);

}  // namespace pfsplat::cli
