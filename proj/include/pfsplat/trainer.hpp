#pragma once

#include "pfsplat/curriculum.hpp"
#include "pfsplat/errors.hpp"
#include "pfsplat/gaussians.hpp"
#include "pfsplat/losses.hpp"
#include "pfsplat/optim.hpp"
#include "pfsplat/rasterizer.hpp"
#include "pfsplat/synthetic.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace pfsplat {

// The harness replaces the feedforward network with free parameters per
// context view: a grid of local Gaussians, a 9D rotation seed, a translation
// and a focal estimate. Everything else (aggregation, curriculum, losses,
// normalization, evaluation) is the real pipeline.

struct LearningRates {
  double mean = 0.01;
  double color = 0.05;        // on color logits
  double opacity = 0.05;      // on opacity logits
  double log_scale = 0.01;
  double rotation = 0.01;     // on the 9D seed
  double translation = 0.01;
  double focal = 0.5;         // pixels
  double final_fraction = 0.1;  // exponential decay reaches lr * final_fraction at the last step
};

/// Right-perturbation noise on predicted poses: per-axis normal rotation
/// (degrees) and translation (normalized scene units).
struct PoseNoise {
  double rotation_deg = 0.0;
  double translation = 0.0;
};

struct TrainConfig {
  std::int64_t steps = 1500;
  int targets_per_step = 4;
  ForcingSchedule schedule{800, 1000, 0.1, ForcingMode::Mix, 0};
  LossWeights weights;
  NormalizationStrategy normalization = NormalizationStrategy::MaxPairwise;
  LearningRates lr;
  RenderConfig render = synthetic_render_config();

  int grid = 8;                 // local Gaussians per view = grid * grid
  double depth_prior = 1.0;     // z-depth of the unprojected initial Gaussians
  double init_opacity = 0.5;
  double init_rotation_error_deg = 20.0;   // initial predicted-pose error
  double init_translation_error = 0.3;
  double init_focal_error = 0.1;           // relative
  PoseNoise train_noise{0.3, 0.003};       // added on predicted-pose aggregation steps
  PoseNoise eval_noise{0.3, 0.003};        // fixed draw for pose-free evaluation

  int solve_iterations = 100;
  double solve_lr_rotation = 0.02;
  double solve_lr_translation = 0.02;

  bool evaluate = true;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Ground-truth cameras of a scene in the training frame: scaled by the
/// normalization statistic of the raw context centers, then expressed
/// relative to context view 0.
struct TrainingFrame {
  double scale = 1.0;
  CameraPose from_raw;  // normalized-and-anchored = from_raw * (R, t / scale)
  std::vector<CameraPose> context;
  std::vector<CameraPose> targets;
  std::vector<CameraPose> eval;

  [[nodiscard]] CameraPose to_frame(const CameraPose& raw) const;
  [[nodiscard]] GlobalScene to_frame(const GlobalScene& raw) const;
  [[nodiscard]] CameraPose to_raw(const CameraPose& framed) const;
  [[nodiscard]] GlobalScene to_raw(const GlobalScene& framed) const;
};

[[nodiscard]] TrainingFrame make_frame(const SyntheticScene& scene, NormalizationStrategy strategy);

/// Pre-activation parameters of every view plus their optimizer moments.
/// Local Gaussians are isotropic, so their rotation stays identity.
struct TrainableState {
  int num_views = 0;
  int per_view = 0;
  std::vector<Vec3> means;           // camera frame, view-major
  std::vector<Vec3> color_logits;
  std::vector<double> opacity_logits;
  std::vector<double> log_scales;
  std::vector<Rotation9D> rotation_seeds;  // view 0 stays the identity anchor
  std::vector<Vec3> translations;
  std::vector<FocalPair> focals;

  struct Optimizers {
    Adam mean, color, opacity, log_scale, rotation, translation, focal;
  } optim;

  [[nodiscard]] CameraPose predicted_pose(int view) const;
  [[nodiscard]] std::vector<CameraPose> predicted_poses() const;
  [[nodiscard]] LocalScene local_scene(int view) const;
  [[nodiscard]] std::vector<LocalScene> local_scenes() const;
  /// Throws InvalidArgument on inconsistent sizes, DivergenceError on non-finite values.
  void validate() const;
};

[[nodiscard]] TrainableState init_state(const SyntheticScene& scene, const TrainingFrame& frame,
                                        const TrainConfig& cfg);

struct StepRecord {
  std::int64_t step = 0;
  LossParts parts;
  double total = 0.0;
  PoseSource source = PoseSource::GroundTruth;
  int gt_pose_reads = 0;         // aggregation reads of ground-truth poses
  int predicted_pose_reads = 0;  // aggregation reads of predicted poses
};

struct EvalMetrics {
  double pose_free_psnr = 0.0;
  double pose_free_ssim = 0.0;
  double pose_dependent_psnr = 0.0;
  double pose_dependent_ssim = 0.0;
  std::vector<double> pose_auc;  // at kAucThresholds
  double mean_rotation_error_deg = 0.0;
  int solve_failures = 0;
};

inline constexpr double kAucThresholds[] = {5.0, 10.0, 20.0};

struct TrainReport {
  std::vector<StepRecord> steps;
  EvalMetrics final_metrics;
  bool evaluated = false;
  double normalization_scale = 1.0;
  double wall_clock_seconds = 0.0;
};

struct TrainResult {
  TrainableState state;
  TrainReport report;
};

/// Raised when a loss becomes non-finite; carries the report up to that step.
class TrainingDiverged : public DivergenceError {
 public:
  TrainingDiverged(const std::string& what, TrainReport report) : DivergenceError(what), report_(std::move(report)) {}
  [[nodiscard]] const TrainReport& report() const { return report_; }

 private:
  TrainReport report_;
};

[[nodiscard]] TrainResult train(const SyntheticScene& scene, const TrainConfig& cfg);

/// Pose-dependent, pose-free and pose-AUC evaluation on the held-out views.
[[nodiscard]] EvalMetrics evaluate(const SyntheticScene& scene, const TrainableState& state, const TrainConfig& cfg);

/// Fixed, seeded noise applied to predicted poses before pose-free evaluation.
[[nodiscard]] std::vector<CameraPose> noisy_predicted_poses(const TrainableState& state, const TrainConfig& cfg);

struct SolveOptions {
  int iterations = 100;
  double lr_rotation = 0.02;
  double lr_translation = 0.02;
  RenderConfig render = synthetic_render_config();
};

struct SolveResult {
  CameraPose pose;
  bool failed = false;
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

/// Photometric refinement of the rendering camera only, starting at `init`.
/// Keeps the best iterate; on a non-finite loss returns `init` with failed set.
/// Throws InvalidArgument for an empty scene.
[[nodiscard]] SolveResult solve_target_pose(const GlobalScene& scene, const ImageBuffer& target,
                                            const CameraIntrinsics& k, const CameraPose& init,
                                            const SolveOptions& opt = {});

struct PostOptOptions {
  int iterations = 200;
  double lr_pose = 0.005;
  double lr_mean = 0.0016;
  double lr_color = 0.0025;
  RenderConfig render = synthetic_render_config();
};

struct PostOptResult {
  GlobalScene scene;
  std::vector<CameraPose> poses;
  double initial_psnr = 0.0;  // mean over views
  double final_psnr = 0.0;
  std::vector<double> losses;
};

/// Refines the camera of every view together with Gaussian means and colors
/// against the view images. Opacity, scale and rotation are copied untouched.
/// Throws DivergenceError on a non-finite loss.
[[nodiscard]] PostOptResult post_optimize(const GlobalScene& scene, std::span<const View> views,
                                          const CameraIntrinsics& k, const PostOptOptions& opt = {});

}  // namespace pfsplat
