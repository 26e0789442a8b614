#include "pfsplat/trainer.hpp"

#include "pfsplat/metrics.hpp"
#include "pfsplat/random.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <limits>
#include <numeric>
#include <string>

namespace pfsplat {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kSolveFinalFraction = 0.02;

// Keyed RNG streams.
enum Stream : std::uint64_t {
  kInitPose = 11,
  kInitFocal = 12,
  kTrainNoise = 13,
  kEvalNoise = 14,
  kTargetSampling = 15,
};

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

template <class T>
std::span<double> flat(std::vector<T>& v) {
  return {reinterpret_cast<double*>(v.data()), v.size() * sizeof(T) / sizeof(double)};
}
template <class T>
std::span<const double> flat(const std::vector<T>& v) {
  return {reinterpret_cast<const double*>(v.data()), v.size() * sizeof(T) / sizeof(double)};
}

Vec3 random_direction(KeyedRng& rng) {
  for (;;) {
    const Vec3 v(rng.normal(), rng.normal(), rng.normal());
    if (v.norm() > 1e-9) return v.normalized();
  }
}

CameraPose right_perturb(const CameraPose& p, const Vec3& w, const Vec3& dt) {
  CameraPose out;
  out.rotation = p.rotation * so3_exp(w);
  out.translation = p.translation + dt;
  return out;
}

struct Perturbation {
  Vec3 rotation = Vec3::Zero();
  Vec3 translation = Vec3::Zero();
};

Perturbation draw_noise(const PoseNoise& noise, KeyedRng& rng) {
  Perturbation p;
  for (int a = 0; a < 3; ++a) p.rotation(a) = noise.rotation_deg * kDegToRad * rng.normal();
  for (int a = 0; a < 3; ++a) p.translation(a) = noise.translation * rng.normal();
  return p;
}

double lr_scale(const TrainConfig& cfg, std::int64_t step) {
  if (cfg.steps <= 1) return 1.0;
  return std::pow(cfg.lr.final_fraction, static_cast<double>(step) / static_cast<double>(cfg.steps - 1));
}

std::vector<size_t> sample_targets(std::uint64_t seed, std::int64_t step, size_t pool, size_t count) {
  std::vector<size_t> idx(pool);
  std::iota(idx.begin(), idx.end(), size_t{0});
  count = std::min(count, pool);
  for (size_t j = 0; j < count; ++j) {
    const double u = keyed_uniform(seed, static_cast<std::uint64_t>(step), kTargetSampling * 1000 + j);
    const size_t pick = j + std::min(pool - j - 1, static_cast<size_t>(u * static_cast<double>(pool - j)));
    std::swap(idx[j], idx[pick]);
  }
  idx.resize(count);
  return idx;
}

// Median camera-space depth of the Gaussians in front of the camera.
double pivot_depth(const GlobalScene& scene, const CameraPose& pose, const RenderConfig& cfg) {
  const CameraPose w2c = pose.inverse();
  std::vector<double> z;
  for (const auto& g : scene.gaussians) {
    const double d = w2c.apply(g.mean).z();
    if (d > cfg.near_plane) z.push_back(d);
  }
  if (z.empty()) return 1.0;
  std::nth_element(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(z.size() / 2), z.end());
  return z[z.size() / 2];
}

size_t nearest_context(const TrainingFrame& frame, const CameraPose& target) {
  size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (size_t v = 0; v < frame.context.size(); ++v) {
    const double d = (frame.context[v].center() - target.center()).norm();
    if (d < best_d) {
      best_d = d;
      best = v;
    }
  }
  return best;
}

}  // namespace

void TrainConfig::validate() const {
  if (steps < 0) throw InvalidArgument("train config: steps must be non-negative");
  if (targets_per_step < 1) throw InvalidArgument("train config: targets_per_step must be at least 1");
  if (grid < 1) throw InvalidArgument("train config: grid must be at least 1");
  if (!(depth_prior > 0.0)) throw InvalidArgument("train config: depth_prior must be positive");
  if (!(init_opacity > 0.0 && init_opacity < 1.0)) throw InvalidArgument("train config: init_opacity must lie in (0, 1)");
  if (solve_iterations < 0) throw InvalidArgument("train config: solve_iterations must be non-negative");
  for (double v : {lr.mean, lr.color, lr.opacity, lr.log_scale, lr.rotation, lr.translation, lr.focal,
                   init_rotation_error_deg, init_translation_error, init_focal_error, train_noise.rotation_deg,
                   train_noise.translation, eval_noise.rotation_deg, eval_noise.translation, solve_lr_rotation,
                   solve_lr_translation}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidArgument("train config: rates and noise levels must be >= 0");
  }
  if (!(lr.final_fraction > 0.0 && lr.final_fraction <= 1.0)) {
    throw InvalidArgument("train config: lr.final_fraction must lie in (0, 1]");
  }
  schedule.validate();
  weights.validate();
  render.validate();
}

CameraPose TrainingFrame::to_frame(const CameraPose& raw) const {
  CameraPose scaled = raw;
  scaled.translation /= scale;
  return from_raw * scaled;
}

GlobalScene TrainingFrame::to_frame(const GlobalScene& raw) const {
  GlobalScene out = raw;
  for (auto& g : out.gaussians) {
    g.mean /= scale;
    g.log_scale.array() -= std::log(scale);
  }
  out.gaussians = to_world(out.gaussians, from_raw);
  return out;
}

CameraPose TrainingFrame::to_raw(const CameraPose& framed) const {
  CameraPose p = from_raw.inverse() * framed;
  p.translation *= scale;
  return p;
}

GlobalScene TrainingFrame::to_raw(const GlobalScene& framed) const {
  GlobalScene out = framed;
  out.gaussians = to_world(framed.gaussians, from_raw.inverse());
  for (auto& g : out.gaussians) {
    g.mean *= scale;
    g.log_scale.array() += std::log(scale);
  }
  return out;
}

TrainingFrame make_frame(const SyntheticScene& scene, NormalizationStrategy strategy) {
  if (scene.context_views.empty()) throw InvalidArgument("make_frame: scene has no context views");
  const std::vector<CameraPose> raw = scene.gt_poses();
  TrainingFrame frame;
  frame.scale = normalize_scene(raw, strategy).scale;
  CameraPose anchor = raw.front();
  anchor.translation /= frame.scale;
  frame.from_raw = anchor.inverse();
  for (const auto& v : scene.context_views) frame.context.push_back(frame.to_frame(v.pose));
  frame.context.front() = CameraPose::identity();
  for (const auto& v : scene.target_views) frame.targets.push_back(frame.to_frame(v.pose));
  for (const auto& v : scene.eval_views) frame.eval.push_back(frame.to_frame(v.pose));
  return frame;
}

CameraPose TrainableState::predicted_pose(int view) const {
  CameraPose p;
  p.rotation = orthogonalize_9d(rotation_seeds.at(static_cast<size_t>(view)));
  p.translation = translations.at(static_cast<size_t>(view));
  return p;
}

std::vector<CameraPose> TrainableState::predicted_poses() const {
  std::vector<CameraPose> out;
  for (int v = 0; v < num_views; ++v) out.push_back(predicted_pose(v));
  return out;
}

LocalScene TrainableState::local_scene(int view) const {
  LocalScene local;
  local.view_id = view;
  local.gaussians.resize(static_cast<size_t>(per_view));
  for (int i = 0; i < per_view; ++i) {
    const size_t j = static_cast<size_t>(view * per_view + i);
    Gaussian& g = local.gaussians[static_cast<size_t>(i)];
    g.mean = means[j];
    g.color = color_logits[j].unaryExpr([](double x) { return sigmoid(x); });
    g.opacity = sigmoid(opacity_logits[j]);
    g.log_scale = Vec3::Constant(log_scales[j]);
  }
  return local;
}

std::vector<LocalScene> TrainableState::local_scenes() const {
  std::vector<LocalScene> out;
  for (int v = 0; v < num_views; ++v) out.push_back(local_scene(v));
  return out;
}

void TrainableState::validate() const {
  const size_t m = static_cast<size_t>(num_views) * static_cast<size_t>(per_view);
  const size_t v = static_cast<size_t>(num_views);
  if (means.size() != m || color_logits.size() != m || opacity_logits.size() != m || log_scales.size() != m ||
      rotation_seeds.size() != v || translations.size() != v || focals.size() != v) {
    throw InvalidArgument("trainable state: parameter counts do not match the view count");
  }
  auto finite = [](std::span<const double> s) {
    return std::all_of(s.begin(), s.end(), [](double x) { return std::isfinite(x); });
  };
  if (!finite(flat(means)) || !finite(flat(color_logits)) || !finite(opacity_logits) || !finite(log_scales) ||
      !finite(flat(rotation_seeds)) || !finite(flat(translations)) || !finite(flat(focals))) {
    throw DivergenceError("trainable state: non-finite parameters");
  }
}

TrainableState init_state(const SyntheticScene& scene, const TrainingFrame& frame, const TrainConfig& cfg) {
  cfg.validate();
  const CameraIntrinsics& k = scene.gt_intrinsics;
  k.validate();
  TrainableState s;
  s.num_views = static_cast<int>(scene.context_views.size());
  s.per_view = cfg.grid * cfg.grid;

  const double spacing_px = static_cast<double>(std::min(k.width, k.height)) / cfg.grid;
  const double sigma = 0.6 * cfg.depth_prior * spacing_px / std::max(k.fx, k.fy);
  for (int v = 0; v < s.num_views; ++v) {
    const ImageBuffer& img = scene.context_views[static_cast<size_t>(v)].image;
    for (int gy = 0; gy < cfg.grid; ++gy) {
      for (int gx = 0; gx < cfg.grid; ++gx) {
        const double u = (gx + 0.5) * k.width / cfg.grid;
        const double w = (gy + 0.5) * k.height / cfg.grid;
        s.means.emplace_back((u - k.cx) / k.fx * cfg.depth_prior, (w - k.cy) / k.fy * cfg.depth_prior,
                             cfg.depth_prior);
        const int px = std::clamp(static_cast<int>(u), 0, img.width - 1);
        const int py = std::clamp(static_cast<int>(w), 0, img.height - 1);
        Vec3 c;
        for (int ch = 0; ch < 3; ++ch) c(ch) = logit(std::clamp(img.at(px, py, ch), 0.02, 0.98));
        s.color_logits.push_back(c);
        s.opacity_logits.push_back(logit(cfg.init_opacity));
        s.log_scales.push_back(std::log(sigma));
      }
    }
  }

  KeyedRng pose_rng(cfg.seed ^ scene.seed, kInitPose);
  KeyedRng focal_rng(cfg.seed ^ scene.seed, kInitFocal);
  for (int v = 0; v < s.num_views; ++v) {
    CameraPose p = frame.context[static_cast<size_t>(v)];
    const Vec3 axis = random_direction(pose_rng);
    const Vec3 dir = random_direction(pose_rng);
    if (v == 0) {
      p = CameraPose::identity();
    } else {
      p = right_perturb(p, cfg.init_rotation_error_deg * kDegToRad * axis, cfg.init_translation_error * dir);
    }
    s.rotation_seeds.push_back(Rotation9D::from_matrix(p.rotation));
    s.translations.push_back(p.translation);
    const double e = cfg.init_focal_error * focal_rng.uniform(-1.0, 1.0);
    s.focals.push_back({k.fx * (1.0 + e), k.fy * (1.0 + e)});
  }

  const size_t m = s.means.size();
  const size_t nv = static_cast<size_t>(s.num_views);
  s.optim.mean = Adam(3 * m, {cfg.lr.mean});
  s.optim.color = Adam(3 * m, {cfg.lr.color});
  s.optim.opacity = Adam(m, {cfg.lr.opacity});
  s.optim.log_scale = Adam(m, {cfg.lr.log_scale});
  s.optim.rotation = Adam(9 * nv, {cfg.lr.rotation});
  s.optim.translation = Adam(3 * nv, {cfg.lr.translation});
  s.optim.focal = Adam(2 * nv, {cfg.lr.focal});
  return s;
}

namespace {

struct StepGradients {
  std::vector<Vec3> means, colors;
  std::vector<double> opacity, log_scale;
  std::vector<Rotation9D> seeds;
  std::vector<Vec3> rotation_tangent, translations;
  std::vector<FocalPair> focals;

  explicit StepGradients(const TrainableState& s)
      : means(s.means.size(), Vec3::Zero()),
        colors(s.means.size(), Vec3::Zero()),
        opacity(s.means.size(), 0.0),
        log_scale(s.means.size(), 0.0),
        seeds(s.rotation_seeds.size()),
        rotation_tangent(s.rotation_seeds.size(), Vec3::Zero()),
        translations(s.rotation_seeds.size(), Vec3::Zero()),
        focals(s.rotation_seeds.size()) {
    for (auto& r : seeds) r.values.fill(0.0);
  }
};

StepRecord train_step(const SyntheticScene& scene, const TrainingFrame& frame, const TrainConfig& cfg,
                      TrainableState& s, std::int64_t step) {
  const CameraIntrinsics& k = scene.gt_intrinsics;
  const LossWeights& w = cfg.weights;
  StepRecord rec;
  rec.step = step;
  rec.source = choose_pose_source(cfg.schedule, step);

  const std::vector<CameraPose> predicted = s.predicted_poses();
  std::vector<CameraPose> agg(static_cast<size_t>(s.num_views));
  std::vector<Perturbation> noise(agg.size());
  for (size_t v = 0; v < agg.size(); ++v) {
    if (rec.source == PoseSource::GroundTruth) {
      agg[v] = frame.context[v];
      ++rec.gt_pose_reads;
    } else {
      // Every view is perturbed, the anchor included: an exact anchor would let
      // free per-view parameters route the whole scene through it.
      KeyedRng rng(cfg.seed ^ scene.seed, kTrainNoise * 1'000'003ull + static_cast<std::uint64_t>(step) * 64 + v);
      noise[v] = draw_noise(cfg.train_noise, rng);
      agg[v] = right_perturb(predicted[v], noise[v].rotation, noise[v].translation);
      ++rec.predicted_pose_reads;
    }
  }

  const std::vector<LocalScene> locals = s.local_scenes();
  const GlobalScene world = aggregate(locals, agg);
  const size_t m = world.size();

  // Rendering loss over sampled targets drawn from the context and target views.
  const size_t n_context = scene.context_views.size();
  const size_t pool = n_context + scene.target_views.size();
  const std::vector<size_t> picks =
      sample_targets(cfg.seed ^ scene.seed, step, pool, static_cast<size_t>(cfg.targets_per_step));
  std::vector<Vec3> d_mean(m, Vec3::Zero()), d_color(m, Vec3::Zero());
  std::vector<double> d_opacity(m, 0.0);
  std::vector<Mat3> d_cov(m, Mat3::Zero());
  const double inv_t = 1.0 / static_cast<double>(picks.size());
  for (const size_t p : picks) {
    const bool ctx = p < n_context;
    const CameraPose& pose = ctx ? frame.context[p] : frame.targets[p - n_context];
    const ImageBuffer& target = ctx ? scene.context_views[p].image : scene.target_views[p - n_context].image;
    const RenderPass pass(world, pose, k, cfg.render);
    ImageLoss il = image_loss(pass.image(), target, w);
    rec.parts.image += inv_t * il.value;
    for (auto& g : il.d_rendered.rgb) g *= inv_t;
    const RenderGradients rg = pass.backward(il.d_rendered);
    for (size_t i = 0; i < m; ++i) {
      d_mean[i] += rg.d_mean[i];
      d_color[i] += rg.d_color[i];
      d_opacity[i] += rg.d_opacity[i];
      d_cov[i] += rg.d_cov[i];
    }
  }

  StepGradients g(s);
  const size_t pv = static_cast<size_t>(s.per_view);
  for (size_t v = 0; v < agg.size(); ++v) {
    const size_t off = v * pv;
    const ToWorldGradient tw = to_world_backward(locals[v].gaussians, agg[v], std::span(d_mean).subspan(off, pv),
                                                 std::span(d_cov).subspan(off, pv));
    for (size_t i = 0; i < pv; ++i) g.means[off + i] = tw.d_local_mean[i];
    if (rec.source == PoseSource::Predicted) {
      // agg = P exp(xi): a right tangent of P maps to exp(xi) times the tangent at agg.
      g.rotation_tangent[v] += so3_exp(noise[v].rotation) * tw.d_rotation;
      g.translations[v] += tw.d_translation;
    }
  }

  // Pose loss on the predicted poses against the normalized ground truth.
  const PoseLossResult pl = pose_loss(predicted, frame.context, w);
  rec.parts.pose = pl.value;
  for (size_t v = 1; v < agg.size(); ++v) {
    g.rotation_tangent[v] += w.lambda_pose * pl.d_rotation[v];
    g.translations[v] += w.lambda_pose * pl.d_translation[v];
  }

  // Intrinsic loss, averaged over views.
  const double inv_v = 1.0 / static_cast<double>(agg.size());
  const FocalPair gt_f{k.fx, k.fy};
  for (size_t v = 0; v < agg.size(); ++v) {
    rec.parts.intrinsic += inv_v * intrinsic_loss(s.focals[v], gt_f, k.width);
    const FocalPair fg = intrinsic_loss_gradient(s.focals[v], gt_f, k.width);
    g.focals[v] = {w.lambda_intrin * inv_v * fg.fx, w.lambda_intrin * inv_v * fg.fy};
  }

  // Opacity sparsity.
  std::vector<double> opacities(m);
  for (size_t i = 0; i < m; ++i) opacities[i] = world.gaussians[i].opacity;
  rec.parts.opacity = opacity_loss(opacities);
  const std::vector<double> og = opacity_loss_gradient(opacities);

  rec.total = total_loss(rec.parts, w);
  if (!std::isfinite(rec.total)) return rec;

  for (size_t i = 0; i < m; ++i) {
    const Vec3 c = world.gaussians[i].color;
    g.colors[i] = d_color[i].cwiseProduct(c.cwiseProduct(Vec3::Ones() - c));
    const double o = opacities[i];
    g.opacity[i] = (d_opacity[i] + w.lambda_opacity * og[i]) * o * (1.0 - o);
    const double var = std::exp(2.0 * s.log_scales[i]);
    g.log_scale[i] = 2.0 * var * d_cov[i].trace();
  }
  for (size_t v = 1; v < agg.size(); ++v) {
    g.seeds[v].values = orthogonalize_9d_backward(s.rotation_seeds[v], g.rotation_tangent[v]);
  }
  g.translations[0] = Vec3::Zero();

  const double scale = lr_scale(cfg, step);
  s.optim.mean.step(flat(s.means), flat(g.means), scale);
  s.optim.color.step(flat(s.color_logits), flat(g.colors), scale);
  s.optim.opacity.step(s.opacity_logits, g.opacity, scale);
  s.optim.log_scale.step(s.log_scales, g.log_scale, scale);
  s.optim.rotation.step(flat(s.rotation_seeds), flat(g.seeds), scale);
  s.optim.translation.step(flat(s.translations), flat(g.translations), scale);
  s.optim.focal.step(flat(s.focals), flat(g.focals), scale);
  return rec;
}

}  // namespace

TrainResult train(const SyntheticScene& scene, const TrainConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const TrainingFrame frame = make_frame(scene, cfg.normalization);
  TrainResult result{init_state(scene, frame, cfg), {}};
  result.report.normalization_scale = frame.scale;
  result.report.steps.reserve(static_cast<size_t>(cfg.steps));
  for (std::int64_t step = 0; step < cfg.steps; ++step) {
    StepRecord rec = train_step(scene, frame, cfg, result.state, step);
    const bool finite = std::isfinite(rec.total);
    result.report.steps.push_back(rec);
    if (!finite) {
      result.report.wall_clock_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      throw TrainingDiverged("training diverged at step " + std::to_string(step) + " (non-finite loss)",
                             std::move(result.report));
    }
  }
  if (cfg.evaluate) {
    result.report.final_metrics = evaluate(scene, result.state, cfg);
    result.report.evaluated = true;
  }
  result.report.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

std::vector<CameraPose> noisy_predicted_poses(const TrainableState& state, const TrainConfig& cfg) {
  std::vector<CameraPose> poses = state.predicted_poses();
  for (size_t v = 0; v < poses.size(); ++v) {
    KeyedRng rng(cfg.seed, kEvalNoise * 1'000'003ull + v);
    const Perturbation p = draw_noise(cfg.eval_noise, rng);
    poses[v] = right_perturb(poses[v], p.rotation, p.translation);
  }
  return poses;
}

EvalMetrics evaluate(const SyntheticScene& scene, const TrainableState& state, const TrainConfig& cfg) {
  const TrainingFrame frame = make_frame(scene, cfg.normalization);
  const CameraIntrinsics& k = scene.gt_intrinsics;
  const std::vector<LocalScene> locals = state.local_scenes();
  EvalMetrics out;

  const std::vector<CameraPose> predicted = noisy_predicted_poses(state, cfg);
  const std::vector<PoseErrorPair> errs = pose_errors(predicted, frame.context);
  out.pose_auc = pose_auc(errs, kAucThresholds);
  for (const auto& e : errs) out.mean_rotation_error_deg += e.rotation_error / static_cast<double>(errs.size());

  if (scene.eval_views.empty()) return out;
  const GlobalScene with_gt = aggregate(locals, frame.context);
  const GlobalScene with_pred = aggregate(locals, predicted);
  SolveOptions solve;
  solve.iterations = cfg.solve_iterations;
  solve.lr_rotation = cfg.solve_lr_rotation;
  solve.lr_translation = cfg.solve_lr_translation;
  solve.render = cfg.render;
  const double inv = 1.0 / static_cast<double>(scene.eval_views.size());
  for (size_t e = 0; e < scene.eval_views.size(); ++e) {
    const ImageBuffer& target = scene.eval_views[e].image;
    const ImageBuffer dep = render(with_gt, frame.eval[e], k, cfg.render);
    out.pose_dependent_psnr += inv * psnr(dep, target);
    out.pose_dependent_ssim += inv * ssim(dep, target);

    // Target camera: the predicted pose of the nearest context view composed with
    // the known relative offset, then refined photometrically.
    const size_t a = nearest_context(frame, frame.eval[e]);
    const CameraPose init = predicted[a] * relative_pose(frame.context[a], frame.eval[e]);
    const SolveResult sr = solve_target_pose(with_pred, target, k, init, solve);
    out.solve_failures += sr.failed ? 1 : 0;
    const ImageBuffer free = render(with_pred, sr.pose, k, cfg.render);
    out.pose_free_psnr += inv * psnr(free, target);
    out.pose_free_ssim += inv * ssim(free, target);
  }
  return out;
}

SolveResult solve_target_pose(const GlobalScene& scene, const ImageBuffer& target, const CameraIntrinsics& k,
                              const CameraPose& init, const SolveOptions& opt) {
  if (scene.empty()) throw InvalidArgument("solve_target_pose: empty scene");
  if (opt.iterations < 0) throw InvalidArgument("solve_target_pose: negative iteration count");
  const LossWeights mse_only{};
  SolveResult out;
  out.pose = init;
  CameraPose pose = init;
  Adam rot(3, {opt.lr_rotation});
  Adam trans(3, {opt.lr_translation});
  const Vec3 pivot(0.0, 0.0, pivot_depth(scene, init, opt.render));
  double best = std::numeric_limits<double>::infinity();
  for (int it = 0; it <= opt.iterations; ++it) {
    const RenderPass pass(scene, pose, k, opt.render);
    const ImageLoss il = image_loss(pass.image(), target, mse_only);
    if (!std::isfinite(il.value)) {
      return {init, true, out.initial_loss, out.initial_loss};
    }
    if (it == 0) out.initial_loss = il.value;
    if (il.value < best) {
      best = il.value;
      out.pose = pose;
    }
    if (it == opt.iterations) break;
    const Vec6 g = pass.backward(il.d_rendered).d_pose;
    // Rotations pivot about a point at scene depth, which decouples orbiting
    // from panning; about the camera center the two are nearly degenerate.
    const Vec3 g_orbit = g.head<3>() - hat(pivot) * pose.rotation.transpose() * g.tail<3>();
    std::array<double, 3> dw{0, 0, 0}, dt{0, 0, 0};
    const std::array<double, 3> gw{g_orbit(0), g_orbit(1), g_orbit(2)}, gt{g(3), g(4), g(5)};
    const double decay = std::pow(kSolveFinalFraction, static_cast<double>(it) / std::max(1, opt.iterations - 1));
    rot.step(dw, gw, decay);
    trans.step(dt, gt, decay);
    const Mat3 r_new = pose.rotation * so3_exp(Vec3(dw[0], dw[1], dw[2]));
    pose.translation += pose.rotation * pivot - r_new * pivot + Vec3(dt[0], dt[1], dt[2]);
    pose.rotation = r_new;
  }
  out.final_loss = best;
  return out;
}

PostOptResult post_optimize(const GlobalScene& scene, std::span<const View> views, const CameraIntrinsics& k,
                            const PostOptOptions& opt) {
  if (scene.empty()) throw InvalidArgument("post_optimize: empty scene");
  if (views.empty()) throw InvalidArgument("post_optimize: no views");
  if (opt.iterations < 0) throw InvalidArgument("post_optimize: negative iteration count");
  scene.validate();
  PostOptResult out;
  out.scene = scene;
  for (const auto& v : views) out.poses.push_back(v.pose);
  const size_t m = scene.size();
  const size_t nv = views.size();
  const LossWeights mse_only{};

  std::vector<Vec3> means(m), colors(m);
  for (size_t i = 0; i < m; ++i) {
    means[i] = scene.gaussians[i].mean;
    colors[i] = scene.gaussians[i].color;
  }
  Adam mean_opt(3 * m, {opt.lr_mean});
  Adam color_opt(3 * m, {opt.lr_color});
  std::vector<Adam> rot_opt(nv, Adam(3, {opt.lr_pose}));
  std::vector<Adam> trans_opt(nv, Adam(3, {opt.lr_pose}));

  auto mean_psnr = [&]() {
    double p = 0.0;
    for (size_t v = 0; v < nv; ++v) {
      p += psnr(render(out.scene, out.poses[v], k, opt.render), views[v].image) / static_cast<double>(nv);
    }
    return p;
  };
  out.initial_psnr = mean_psnr();

  for (int it = 0; it < opt.iterations; ++it) {
    for (size_t i = 0; i < m; ++i) {
      out.scene.gaussians[i].mean = means[i];
      out.scene.gaussians[i].color = colors[i];
    }
    std::vector<Vec3> gm(m, Vec3::Zero()), gc(m, Vec3::Zero());
    double loss = 0.0;
    for (size_t v = 0; v < nv; ++v) {
      const RenderPass pass(out.scene, out.poses[v], k, opt.render);
      ImageLoss il = image_loss(pass.image(), views[v].image, mse_only);
      loss += il.value / static_cast<double>(nv);
      for (auto& x : il.d_rendered.rgb) x /= static_cast<double>(nv);
      const RenderGradients rg = pass.backward(il.d_rendered);
      for (size_t i = 0; i < m; ++i) {
        gm[i] += rg.d_mean[i];
        gc[i] += rg.d_color[i];
      }
      std::array<double, 3> dw{0, 0, 0}, dt{0, 0, 0};
      const std::array<double, 3> gw{rg.d_pose(0), rg.d_pose(1), rg.d_pose(2)};
      const std::array<double, 3> gt{rg.d_pose(3), rg.d_pose(4), rg.d_pose(5)};
      rot_opt[v].step(dw, gw);
      trans_opt[v].step(dt, gt);
      out.poses[v] = right_perturb(out.poses[v], Vec3(dw[0], dw[1], dw[2]), Vec3(dt[0], dt[1], dt[2]));
    }
    if (!std::isfinite(loss)) {
      throw DivergenceError("post_optimize: non-finite loss at iteration " + std::to_string(it));
    }
    out.losses.push_back(loss);
    mean_opt.step(flat(means), flat(gm));
    color_opt.step(flat(colors), flat(gc));
    for (auto& c : colors) c = c.cwiseMax(0.0).cwiseMin(1.0);
  }
  for (size_t i = 0; i < m; ++i) {
    out.scene.gaussians[i].mean = means[i];
    out.scene.gaussians[i].color = colors[i];
  }
  out.final_psnr = mean_psnr();
  return out;
}

}  // namespace pfsplat
