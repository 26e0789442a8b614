#include <doctest.h>

#include "oracles.hpp"
#include "pfsplat/errors.hpp"
#include "pfsplat/metrics.hpp"
#include "pfsplat/trainer.hpp"

#include <cmath>
#include <numbers>

using namespace pfsplat;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

SyntheticScene small_scene(std::uint64_t seed, double global_scale = 1.0, int views = 3) {
  SceneSpec spec;
  spec.seed = seed;
  spec.num_views = views;
  spec.num_gaussians = 12;
  spec.image_size = 24;
  spec.num_candidates = 8;
  spec.num_eval = 2;
  spec.global_scale = global_scale;
  return generate_scene(spec);
}

TrainConfig quick_config(ForcingMode mode, std::int64_t steps) {
  TrainConfig cfg;
  cfg.steps = steps;
  cfg.schedule = {steps / 3, 2 * steps / 3, 0.5, mode, 7};
  cfg.grid = 4;
  cfg.evaluate = false;
  return cfg;
}

bool same_state(const TrainableState& a, const TrainableState& b) {
  auto eq = [](const auto& x, const auto& y) {
    if (x.size() != y.size()) return false;
    for (size_t i = 0; i < x.size(); ++i) {
      if (!(x[i] == y[i])) return false;
    }
    return true;
  };
  bool seeds = a.rotation_seeds.size() == b.rotation_seeds.size();
  for (size_t i = 0; seeds && i < a.rotation_seeds.size(); ++i) seeds = a.rotation_seeds[i].values == b.rotation_seeds[i].values;
  bool focals = a.focals.size() == b.focals.size();
  for (size_t i = 0; focals && i < a.focals.size(); ++i) {
    focals = a.focals[i].fx == b.focals[i].fx && a.focals[i].fy == b.focals[i].fy;
  }
  return eq(a.means, b.means) && eq(a.color_logits, b.color_logits) && eq(a.opacity_logits, b.opacity_logits) &&
         eq(a.log_scales, b.log_scales) && eq(a.translations, b.translations) && seeds && focals;
}

}  // namespace

TEST_CASE("generate_scene basics") {
  const SyntheticScene a = small_scene(4), b = small_scene(4);
  REQUIRE(a.context_views.size() == 3);
  for (size_t v = 0; v < a.context_views.size(); ++v) {
    CHECK(a.context_views[v].image.rgb == b.context_views[v].image.rgb);
    CHECK(a.context_views[v].pose.rotation == b.context_views[v].pose.rotation);
  }
  CHECK(psnr(a.context_views[0].image, render(a.gt_gaussians, a.context_views[0].pose, a.gt_intrinsics,
                                              synthetic_render_config())) == kPsnrCap);

  const SyntheticScene two = small_scene(5, 1.0, 2);
  REQUIRE(two.context_views.size() == 2);
  const NormalizedPoses n = normalize_scene(two.gt_poses(), NormalizationStrategy::MaxPairwise);
  CHECK(std::abs((n.poses[0].center() - n.poses[1].center()).norm() - 1.0) < 1e-12);

  SceneSpec bad;
  bad.num_views = 1;
  CHECK_THROWS_AS((void)generate_scene(bad), InvalidArgument);
  bad = {};
  bad.num_gaussians = 0;
  CHECK_THROWS_AS((void)generate_scene(bad), InvalidArgument);
}

TEST_CASE("farthest_point_sampling") {
  const std::vector<Vec3> pts{{0, 0, 0}, {1, 0, 0}, {5, 0, 0}, {2, 0, 0}};
  CHECK(farthest_point_sampling(pts, 3) == std::vector<size_t>{0, 2, 3});
  CHECK(farthest_point_sampling(pts, 0).empty());
  CHECK_THROWS_AS((void)farthest_point_sampling(pts, 5), InvalidArgument);
}

TEST_CASE("training frame") {
  SceneSpec spec;
  spec.seed = 2;
  spec.global_scale = 3.0;
  spec.origin_offset = Vec3(4, -2, 7);
  const SyntheticScene scene = generate_scene(spec);
  const TrainingFrame f = make_frame(scene, NormalizationStrategy::MaxPairwise);
  CHECK(f.context[0].rotation == Mat3::Identity());
  CHECK(f.context[0].translation == Vec3::Zero());
  double max_d = 0;
  for (const auto& a : f.context) {
    for (const auto& b : f.context) max_d = std::max(max_d, (a.center() - b.center()).norm());
  }
  CHECK(std::abs(max_d - 1.0) < 1e-12);

  for (const auto& v : scene.eval_views) {
    const CameraPose back = f.to_raw(f.to_frame(v.pose));
    CHECK((back.rotation - v.pose.rotation).norm() < 1e-12);
    CHECK((back.translation - v.pose.translation).norm() < 1e-9);
  }
  // Rendering is invariant to moving cameras and Gaussians into the frame together.
  const ImageBuffer raw = scene.eval_views[0].image;
  const ImageBuffer framed = render(f.to_frame(scene.gt_gaussians), f.eval[0], scene.gt_intrinsics,
                                    synthetic_render_config());
  CHECK(psnr(raw, framed) > 80.0);
}

TEST_CASE("normalization scale invariance of the pose targets") {
  const LossWeights w;
  const SyntheticScene base = small_scene(9);
  const TrainableState state = init_state(base, make_frame(base, NormalizationStrategy::MaxPairwise), quick_config(ForcingMode::Mix, 1));
  const std::vector<CameraPose> pred = state.predicted_poses();
  const TrainingFrame f1 = make_frame(base, NormalizationStrategy::MaxPairwise);
  const double l1 = pose_loss(pred, f1.context, w).value;

  // A power-of-two rescale is exact in floating point, so the loss matches bitwise.
  const TrainingFrame f16 = make_frame(small_scene(9, 16.0), NormalizationStrategy::MaxPairwise);
  for (size_t v = 0; v < f1.context.size(); ++v) {
    CHECK(f16.context[v].translation == f1.context[v].translation);
    CHECK(f16.context[v].rotation == f1.context[v].rotation);
  }
  CHECK(pose_loss(pred, f16.context, w).value == l1);

  const TrainingFrame f10 = make_frame(small_scene(9, 10.0), NormalizationStrategy::MaxPairwise);
  CHECK(std::abs(pose_loss(pred, f10.context, w).value - l1) < 1e-12);

  const TrainingFrame n10 = make_frame(small_scene(9, 10.0), NormalizationStrategy::None);
  CHECK(std::abs(pose_loss(pred, n10.context, w).value - l1) > 1e-3);
}

TEST_CASE("config validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.steps = -1;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  cfg = {};
  cfg.init_opacity = 1.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  cfg = {};
  cfg.lr.final_fraction = 0.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  cfg = {};
  cfg.schedule.ratio_r = 2.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
}

TEST_CASE("init_state") {
  const SyntheticScene scene = small_scene(1);
  const TrainConfig cfg = quick_config(ForcingMode::Mix, 10);
  const TrainingFrame f = make_frame(scene, cfg.normalization);
  const TrainableState s = init_state(scene, f, cfg);
  CHECK_NOTHROW(s.validate());
  CHECK(s.num_views == 3);
  CHECK(s.means.size() == 3u * 16u);
  CHECK(s.predicted_pose(0).rotation.isApprox(Mat3::Identity(), 1e-15));
  CHECK(s.predicted_pose(0).translation == Vec3::Zero());
  for (int v = 1; v < s.num_views; ++v) {
    const double err = rotation_angle_between(s.predicted_pose(v).rotation, f.context[static_cast<size_t>(v)].rotation);
    CHECK(err == doctest::Approx(cfg.init_rotation_error_deg * kDeg).epsilon(1e-9));
  }
  for (int i = 0; i < s.per_view; ++i) CHECK(std::abs(s.means[static_cast<size_t>(i)].z() - cfg.depth_prior) < 1e-15);
}

TEST_CASE("zero steps returns the initial state") {
  const SyntheticScene scene = small_scene(3);
  TrainConfig cfg = quick_config(ForcingMode::Mix, 0);
  const TrainResult r = train(scene, cfg);
  CHECK(r.report.steps.empty());
  CHECK(same_state(r.state, init_state(scene, make_frame(scene, cfg.normalization), cfg)));
}

TEST_CASE("pose-source instrumentation") {
  const SyntheticScene scene = small_scene(6);
  const TrainResult teacher = train(scene, quick_config(ForcingMode::Teacher, 30));
  const TrainResult self = train(scene, quick_config(ForcingMode::Self, 30));
  const TrainResult mix = train(scene, quick_config(ForcingMode::Mix, 30));
  REQUIRE(teacher.report.steps.size() == 30);
  int teacher_pred = 0, self_gt = 0, mix_pred = 0;
  for (const auto& s : teacher.report.steps) teacher_pred += s.predicted_pose_reads;
  for (const auto& s : self.report.steps) self_gt += s.gt_pose_reads;
  for (const auto& s : mix.report.steps) {
    mix_pred += s.predicted_pose_reads;
    if (s.step < 10) CHECK(s.source == PoseSource::GroundTruth);
  }
  CHECK(teacher_pred == 0);
  CHECK(self_gt == 0);
  CHECK(mix_pred > 0);
}

TEST_CASE("training is deterministic and reduces the loss") {
  const SyntheticScene scene = small_scene(8);
  const TrainConfig cfg = quick_config(ForcingMode::Mix, 60);
  const TrainResult a = train(scene, cfg);
  const TrainResult b = train(scene, cfg);
  REQUIRE(a.report.steps.size() == 60);
  for (size_t i = 0; i < a.report.steps.size(); ++i) CHECK(a.report.steps[i].total == b.report.steps[i].total);
  CHECK(same_state(a.state, b.state));
  CHECK(a.report.steps.back().parts.image < a.report.steps.front().parts.image);
  CHECK(a.report.steps.back().parts.pose < a.report.steps.front().parts.pose);
}

TEST_CASE("divergence aborts with the partial report") {
  const SyntheticScene scene = small_scene(2);
  TrainConfig cfg = quick_config(ForcingMode::Teacher, 20);
  cfg.lr.focal = 1e200;
  try {
    (void)train(scene, cfg);
    FAIL("expected divergence");
  } catch (const TrainingDiverged& e) {
    REQUIRE(!e.report().steps.empty());
    CHECK(e.report().steps.size() <= 20);
    CHECK(!std::isfinite(e.report().steps.back().total));
  }
}

TEST_CASE("teacher forcing on a 2-view, 5-Gaussian scene") {
  SceneSpec spec;
  spec.num_views = 2;
  spec.num_gaussians = 5;
  spec.seed = 3;
  const SyntheticScene scene = generate_scene(spec);
  TrainConfig cfg;
  cfg.steps = 500;
  cfg.schedule.mode = ForcingMode::Teacher;
  const TrainResult r = train(scene, cfg);
  REQUIRE(r.report.evaluated);
  CHECK(r.report.final_metrics.pose_dependent_psnr > 30.0);
  CHECK(r.report.final_metrics.pose_auc.size() == 3);
}

TEST_CASE("solve_target_pose") {
  SceneSpec spec;
  spec.seed = 1;
  const SyntheticScene scene = generate_scene(spec);
  const View& v = scene.eval_views[0];
  const SolveResult fixed = solve_target_pose(scene.gt_gaussians, v.image, scene.gt_intrinsics, v.pose);
  CHECK(!fixed.failed);
  CHECK(rotation_angle_between(fixed.pose.rotation, v.pose.rotation) < 1e-6);
  CHECK((fixed.pose.translation - v.pose.translation).norm() < 1e-6);

  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    spec.seed = seed;
    const SyntheticScene s = generate_scene(spec);
    for (const auto& e : s.eval_views) {
      const Vec3 axis = Vec3(std::sin(1.3 * seed + e.id), std::cos(0.7 * e.id), 0.4 * seed - 1.0).normalized();
      CameraPose init = e.pose;
      init.rotation = e.pose.rotation * so3_exp(2.0 * kDeg * axis);
      const SolveResult r = solve_target_pose(s.gt_gaussians, e.image, s.gt_intrinsics, init);
      CHECK(r.final_loss < r.initial_loss);
      worst = std::max(worst, rotation_angle_between(r.pose.rotation, e.pose.rotation) / kDeg);
    }
  }
  CHECK(worst < 0.2);
  CHECK_THROWS_AS((void)solve_target_pose(GlobalScene{}, v.image, scene.gt_intrinsics, v.pose), InvalidArgument);
}

TEST_CASE("post_optimize") {
  SceneSpec spec;
  spec.seed = 2;
  const SyntheticScene scene = generate_scene(spec);

  PostOptOptions quick;
  quick.iterations = 20;
  const PostOptResult fixed = post_optimize(scene.gt_gaussians, scene.context_views, scene.gt_intrinsics, quick);
  for (double l : fixed.losses) CHECK(l == 0.0);
  for (size_t i = 0; i < scene.gt_gaussians.size(); ++i) {
    CHECK((fixed.scene.gaussians[i].mean - scene.gt_gaussians.gaussians[i].mean).norm() < 1e-6);
  }

  std::vector<View> views = scene.context_views;
  for (auto& v : views) v.pose.rotation = v.pose.rotation * so3_exp(1.0 * kDeg * Vec3(0.6, -0.5, 0.62).normalized());
  const PostOptResult r = post_optimize(scene.gt_gaussians, views, scene.gt_intrinsics);
  CHECK(r.losses.size() == 200);
  CHECK(r.final_psnr > r.initial_psnr);
  for (size_t i = 0; i < scene.gt_gaussians.size(); ++i) {
    const Gaussian& a = r.scene.gaussians[i];
    const Gaussian& b = scene.gt_gaussians.gaussians[i];
    CHECK(a.opacity == b.opacity);
    CHECK(a.log_scale == b.log_scale);
    CHECK(a.rotation.coeffs() == b.rotation.coeffs());
  }
  CHECK(r.scene.provenance == scene.gt_gaussians.provenance);
  CHECK_THROWS_AS((void)post_optimize(GlobalScene{}, views, scene.gt_intrinsics), InvalidArgument);
  CHECK_THROWS_AS((void)post_optimize(scene.gt_gaussians, std::span<const View>{}, scene.gt_intrinsics),
                  InvalidArgument);
}

TEST_CASE("noisy predicted poses are a fixed draw") {
  const SyntheticScene scene = small_scene(4);
  const TrainConfig cfg = quick_config(ForcingMode::Mix, 1);
  const TrainableState s = init_state(scene, make_frame(scene, cfg.normalization), cfg);
  const auto a = noisy_predicted_poses(s, cfg), b = noisy_predicted_poses(s, cfg);
  const auto clean = s.predicted_poses();
  for (size_t v = 0; v < a.size(); ++v) {
    CHECK(a[v].rotation == b[v].rotation);
    const double angle = rotation_angle_between(a[v].rotation, clean[v].rotation) / kDeg;
    CHECK(angle > 0.0);
    CHECK(angle < 6.0 * cfg.eval_noise.rotation_deg);
  }
}
