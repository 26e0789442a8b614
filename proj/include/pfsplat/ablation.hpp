#pragma once

#include "pfsplat/scene_io.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace pfsplat {

enum class AblationKind { Forcing, Normalization };

struct AblationJob {
  AblationKind kind = AblationKind::Forcing;
  int scene_index = 0;
  ForcingMode mode = ForcingMode::Mix;
  NormalizationStrategy normalization = NormalizationStrategy::MaxPairwise;
};

struct AblationRun {
  AblationJob job;
  double global_scale = 1.0;
  EvalMetrics metrics;
  bool diverged = false;
};

/// Scene `index` of the suite. Normalization scenes additionally draw a
/// uniform global scale and a uniform origin offset, keyed by the index.
[[nodiscard]] SceneSpec suite_scene_spec(const SuiteConfig& suite, AblationKind kind, int index);

/// Forcing jobs (every mode on every scene, normalization from the train config)
/// followed by normalization jobs (every strategy on every scene, train-config forcing mode).
[[nodiscard]] std::vector<AblationJob> ablation_jobs(const SuiteConfig& suite);

[[nodiscard]] AblationRun run_ablation_job(const SuiteConfig& suite, const AblationJob& job);

/// Suite-mean metrics per forcing mode and per normalization strategy.
struct AblationSummary {
  struct ModeRow {
    ForcingMode mode = ForcingMode::Mix;
    double pose_free_psnr = 0.0;
    double pose_dependent_psnr = 0.0;
    double pose_free_ssim = 0.0;
    double pose_auc10 = 0.0;
    int runs = 0;
  };
  struct NormRow {
    NormalizationStrategy strategy = NormalizationStrategy::MaxPairwise;
    double psnr = 0.0;  // pose-dependent, the comparison metric of the normalization grid
    double ssim = 0.0;
    int runs = 0;
  };
  std::vector<ModeRow> modes;
  std::vector<NormRow> norms;
  std::vector<AblationRun> runs;

  [[nodiscard]] const ModeRow* mode(ForcingMode m) const;
  [[nodiscard]] const NormRow* norm(NormalizationStrategy s) const;
};

[[nodiscard]] AblationSummary summarize(std::vector<AblationRun> runs);

/// Runs every job, in `suite.workers` forked processes when > 1. Per-run JSON
/// goes to out_dir/runs when out_dir is given.
[[nodiscard]] AblationSummary run_ablation(const SuiteConfig& suite,
                                           const std::optional<std::filesystem::path>& out_dir = std::nullopt);

/// Regression margins (dB) on the suite means: each ordering must hold with at
/// least this much slack. Negative values tolerate a small reversal.
struct AblationMargins {
  double mix_over_teacher_pose_free = 0.0;
  double mix_over_self_pose_free = 0.0;
  double teacher_over_self_pose_dependent = 0.0;
  double max_over_mean_pair = 0.0;
  double mean_pair_over_rest = 0.0;
};

/// Roughly half the gaps seen on the first validated run of the default suite.
/// The two pose-free Mix orderings did not hold on that run and stay at zero.
inline constexpr AblationMargins kFrozenMargins{0.0, 0.0, 0.5, 1.0, 3.5};

struct OrderingCheck {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;
  bool available = false;  // false when the suite lacks one of the rows
  [[nodiscard]] bool passed() const { return available && lhs - rhs >= margin; }
};

[[nodiscard]] std::vector<OrderingCheck> check_orderings(const AblationSummary& summary,
                                                         const AblationMargins& margins = {});

[[nodiscard]] std::string summary_table(const AblationSummary& summary);
[[nodiscard]] std::string summary_to_json(const AblationSummary& summary);

}  // namespace pfsplat
