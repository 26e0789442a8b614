#include "pfsplat/synthetic.hpp"

#include "pfsplat/errors.hpp"
#include "pfsplat/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace pfsplat {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

// RNG streams, one per generated quantity so adding a field never reshuffles another.
enum Stream : std::uint64_t { kGaussians = 1, kCameras = 2, kEval = 3 };

CameraPose look_at(const Vec3& eye, const Vec3& target) {
  const Vec3 z = (target - eye).normalized();
  Vec3 x = Vec3(0, -1, 0).cross(z);
  if (x.norm() < 1e-9) x = Vec3(1, 0, 0).cross(z);
  x.normalize();
  CameraPose p;
  p.rotation.col(0) = x;
  p.rotation.col(1) = z.cross(x);
  p.rotation.col(2) = z;
  p.translation = eye;
  return p;
}

Eigen::Quaterniond random_quaternion(KeyedRng& rng) {
  Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  if (q.norm() < 1e-12) return Eigen::Quaterniond::Identity();
  return q.normalized();
}

CameraPose arc_camera(const SceneSpec& spec, double azimuth, KeyedRng& rng) {
  const double elevation = (15.0 + 40.0 * spec.jitter * (rng.uniform() - 0.5)) * kDegToRad;
  const double radius = spec.camera_radius * (1.0 + spec.jitter * (2.0 * rng.uniform() - 1.0));
  const Vec3 eye(radius * std::sin(azimuth) * std::cos(elevation), -radius * std::sin(elevation),
                 -radius * std::cos(azimuth) * std::cos(elevation));
  const Vec3 look = 0.05 * spec.camera_radius * spec.jitter * Vec3(rng.normal(), rng.normal(), rng.normal());
  return look_at(eye, look);
}

}  // namespace

void SceneSpec::validate() const {
  if (num_views < 2) throw InvalidArgument("scene spec: num_views must be at least 2");
  if (num_gaussians < 1) throw InvalidArgument("scene spec: num_gaussians must be at least 1");
  if (num_candidates < num_views) throw InvalidArgument("scene spec: num_candidates must be >= num_views");
  if (num_eval < 0) throw InvalidArgument("scene spec: num_eval must be non-negative");
  if (!(camera_radius > 0.0)) throw InvalidArgument("scene spec: camera_radius must be positive");
  if (image_size < 4) throw InvalidArgument("scene spec: image_size must be at least 4");
  if (!(fov_degrees > 0.0 && fov_degrees < 180.0)) throw InvalidArgument("scene spec: fov must lie in (0, 180)");
  if (!(arc_degrees > 0.0 && arc_degrees < 360.0)) throw InvalidArgument("scene spec: arc must lie in (0, 360)");
  if (!(jitter >= 0.0 && jitter < 0.5)) throw InvalidArgument("scene spec: jitter must lie in [0, 0.5)");
  if (!(global_scale > 0.0) || !std::isfinite(global_scale)) {
    throw InvalidArgument("scene spec: global_scale must be positive");
  }
  if (!origin_offset.allFinite()) throw InvalidArgument("scene spec: origin_offset must be finite");
}

std::vector<CameraPose> SyntheticScene::gt_poses() const {
  std::vector<CameraPose> out;
  out.reserve(context_views.size());
  for (const auto& v : context_views) out.push_back(v.pose);
  return out;
}

std::vector<size_t> farthest_point_sampling(std::span<const Vec3> points, size_t k) {
  if (k > points.size()) throw InvalidArgument("farthest_point_sampling: k exceeds the number of points");
  std::vector<size_t> chosen;
  if (k == 0) return chosen;
  std::vector<double> dist(points.size(), std::numeric_limits<double>::infinity());
  size_t next = 0;
  for (size_t n = 0; n < k; ++n) {
    chosen.push_back(next);
    for (size_t i = 0; i < points.size(); ++i) dist[i] = std::min(dist[i], (points[i] - points[next]).norm());
    next = static_cast<size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
  }
  return chosen;
}

RenderConfig synthetic_render_config() {
  RenderConfig cfg;
  cfg.background = Vec3::Zero();
  return cfg;
}

SyntheticScene generate_scene(const SceneSpec& spec) {
  spec.validate();
  SyntheticScene scene;
  scene.seed = spec.seed;

  KeyedRng grng(spec.seed, kGaussians);
  for (int i = 0; i < spec.num_gaussians; ++i) {
    Gaussian g;
    g.mean = Vec3(grng.uniform(-0.5, 0.5), grng.uniform(-0.5, 0.5), grng.uniform(-0.5, 0.5));
    g.opacity = grng.uniform(0.6, 0.95);
    g.rotation = random_quaternion(grng);
    for (int a = 0; a < 3; ++a) g.log_scale(a) = std::log(grng.uniform(0.05, 0.15));
    g.color = Vec3(grng.uniform(0.1, 0.95), grng.uniform(0.1, 0.95), grng.uniform(0.1, 0.95));
    scene.gt_gaussians.gaussians.push_back(g);
    scene.gt_gaussians.provenance.push_back(0);
  }

  CameraIntrinsics& k = scene.gt_intrinsics;
  k.width = k.height = spec.image_size;
  k.fx = k.fy = focal_from_fov(spec.fov_degrees * kDegToRad, spec.image_size);
  k.cx = k.cy = 0.5 * spec.image_size;

  const double arc = spec.arc_degrees * kDegToRad;
  const double spacing = spec.num_candidates > 1 ? arc / (spec.num_candidates - 1) : 0.0;
  KeyedRng crng(spec.seed, kCameras);
  std::vector<CameraPose> candidates;
  for (int i = 0; i < spec.num_candidates; ++i) {
    const double t = spec.num_candidates > 1 ? static_cast<double>(i) / (spec.num_candidates - 1) : 0.5;
    const double azimuth = arc * (t - 0.5) + spec.jitter * spacing * (2.0 * crng.uniform() - 1.0);
    candidates.push_back(arc_camera(spec, azimuth, crng));
  }
  KeyedRng erng(spec.seed, kEval);
  std::vector<CameraPose> eval;
  for (int i = 0; i < spec.num_eval; ++i) eval.push_back(arc_camera(spec, arc * (erng.uniform() - 0.5), erng));

  // Move everything into the requested world frame.
  auto to_frame = [&](CameraPose p) {
    p.translation = spec.global_scale * p.translation + spec.origin_offset;
    return p;
  };
  for (auto& g : scene.gt_gaussians.gaussians) {
    g.mean = spec.global_scale * g.mean + spec.origin_offset;
    g.log_scale.array() += std::log(spec.global_scale);
  }
  for (auto& p : candidates) p = to_frame(p);
  for (auto& p : eval) p = to_frame(p);

  std::vector<Vec3> centers;
  for (const auto& p : candidates) centers.push_back(p.center());
  std::vector<size_t> context = farthest_point_sampling(centers, static_cast<size_t>(spec.num_views));
  std::sort(context.begin(), context.end());

  const RenderConfig cfg = synthetic_render_config();
  auto make_view = [&](int id, const CameraPose& p) { return View{id, p, render(scene.gt_gaussians, p, k, cfg)}; };
  for (int i = 0; i < spec.num_candidates; ++i) {
    const bool is_context = std::binary_search(context.begin(), context.end(), static_cast<size_t>(i));
    (is_context ? scene.context_views : scene.target_views).push_back(make_view(i, candidates[static_cast<size_t>(i)]));
  }
  for (int i = 0; i < spec.num_eval; ++i) {
    scene.eval_views.push_back(make_view(spec.num_candidates + i, eval[static_cast<size_t>(i)]));
  }
  return scene;
}

}  // namespace pfsplat
