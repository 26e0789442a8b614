// Independent reference implementations used only by tests.
#pragma once

#include "pfsplat/gaussians.hpp"
#include "pfsplat/image.hpp"
#include "pfsplat/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

namespace pfsplat::testing {

inline Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  return q.normalized().toRotationMatrix();
}

inline Mat3 small_rotation(std::mt19937_64& rng, double max_angle) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, max_angle);
  Vec3 axis(n(rng), n(rng), n(rng));
  return Eigen::AngleAxisd(u(rng), axis.normalized()).toRotationMatrix();
}

inline CameraPose random_pose(std::mt19937_64& rng, double trans_scale = 2.0) {
  std::uniform_real_distribution<double> u(-trans_scale, trans_scale);
  CameraPose p;
  p.rotation = random_rotation(rng);
  p.translation = Vec3(u(rng), u(rng), u(rng));
  return p;
}

inline double axis_angle_oracle(const Mat3& a, const Mat3& b) {
  // Angle of the relative rotation through its quaternion: 2 atan2(|v|, |w|).
  const Eigen::Quaterniond q(Mat3(a.transpose() * b));
  return 2.0 * std::atan2(q.vec().norm(), std::abs(q.w()));
}

/// Camera looking at the origin from `eye`, +z forward.
inline CameraPose look_at(const Vec3& eye, const Vec3& target, const Vec3& up_hint = Vec3(0, -1, 0)) {
  const Vec3 z = (target - eye).normalized();
  Vec3 x = up_hint.cross(z);
  if (x.norm() < 1e-9) x = Vec3(1, 0, 0).cross(z);
  x.normalize();
  const Vec3 y = z.cross(x);
  CameraPose p;
  p.rotation.col(0) = x;
  p.rotation.col(1) = y;
  p.rotation.col(2) = z;
  p.translation = eye;
  return p;
}

/// Random Gaussians in front of `pose`, well inside the frustum.
inline GlobalScene random_scene_in_view(std::mt19937_64& rng, const CameraPose& pose, const CameraIntrinsics& k,
                                        int count, double min_depth = 2.0, double max_depth = 5.0,
                                        double min_log_scale = -2.3, double max_log_scale = -1.4) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_real_distribution<double> depth(min_depth, max_depth);
  std::uniform_real_distribution<double> ls(min_log_scale, max_log_scale);
  std::uniform_real_distribution<double> op(0.2, 0.9);
  std::uniform_real_distribution<double> col(0.05, 0.95);
  std::normal_distribution<double> n(0.0, 1.0);
  GlobalScene scene;
  for (int i = 0; i < count; ++i) {
    const double z = depth(rng);
    const double px = (0.15 + 0.7 * u01(rng)) * k.width;
    const double py = (0.15 + 0.7 * u01(rng)) * k.height;
    const Vec3 cam((px - k.cx) / k.fx * z, (py - k.cy) / k.fy * z, z);
    Gaussian g;
    g.mean = pose.apply(cam);
    g.opacity = op(rng);
    g.rotation = Eigen::Quaterniond(n(rng), n(rng), n(rng), n(rng)).normalized();
    g.log_scale = Vec3(ls(rng), ls(rng), ls(rng));
    g.color = Vec3(col(rng), col(rng), col(rng));
    scene.gaussians.push_back(g);
    scene.provenance.push_back(0);
  }
  return scene;
}

/// Tiling-free renderer: every Gaussian is evaluated at every pixel in global depth order.
inline ImageBuffer reference_render(const GlobalScene& scene, const CameraPose& pose, const CameraIntrinsics& k,
                                    const RenderConfig& cfg) {
  Eigen::Matrix4d cam_to_world = Eigen::Matrix4d::Identity();
  cam_to_world.topLeftCorner<3, 3>() = pose.rotation;
  cam_to_world.topRightCorner<3, 1>() = pose.translation;
  const Eigen::Matrix4d world_to_cam = cam_to_world.inverse();
  const Mat3 w = world_to_cam.topLeftCorner<3, 3>();

  struct Item {
    double depth;
    size_t index;
    double u, v, qa, qb, qc, opacity;
    Vec3 color;
  };
  std::vector<Item> items;
  for (size_t i = 0; i < scene.gaussians.size(); ++i) {
    const Gaussian& g = scene.gaussians[i];
    const Eigen::Vector4d ph = world_to_cam * Eigen::Vector4d(g.mean.x(), g.mean.y(), g.mean.z(), 1.0);
    const double x = ph.x(), y = ph.y(), z = ph.z();
    if (!(z > cfg.near_plane) || !(z < cfg.far_plane)) continue;
    Eigen::Matrix<double, 2, 3> j;
    j << k.fx / z, 0, -k.fx * x / (z * z), 0, k.fy / z, -k.fy * y / (z * z);
    const Mat3 r = g.rotation.normalized().toRotationMatrix();
    Mat3 s = Mat3::Zero();
    for (int a = 0; a < 3; ++a) s(a, a) = std::exp(g.log_scale(a));
    const Mat3 cov3 = w * (r * s) * (r * s).transpose() * w.transpose();
    Eigen::Matrix2d cov2 = j * cov3 * j.transpose();
    const double c00 = cov2(0, 0) + kCovarianceFloor;
    const double c11 = cov2(1, 1) + kCovarianceFloor;
    const double c01 = 0.5 * (cov2(0, 1) + cov2(1, 0));
    const double det = c00 * c11 - c01 * c01;
    items.push_back({z, i, k.fx * x / z + k.cx, k.fy * y / z + k.cy, c11 / det, -c01 / det, c00 / det, g.opacity,
                     g.color});
  }
  std::sort(items.begin(), items.end(), [](const Item& l, const Item& r) {
    return l.depth < r.depth || (l.depth == r.depth && l.index < r.index);
  });
  ImageBuffer img(k.width, k.height);
  for (int py = 0; py < k.height; ++py) {
    for (int px = 0; px < k.width; ++px) {
      double t = 1.0;
      Vec3 c = Vec3::Zero();
      for (const Item& it : items) {
        const double dx = px + 0.5 - it.u;
        const double dy = py + 0.5 - it.v;
        const double alpha =
            std::min(0.99, it.opacity * std::exp(-0.5 * (it.qa * dx * dx + 2.0 * it.qb * dx * dy + it.qc * dy * dy)));
        if (alpha < cfg.alpha_floor) continue;
        if (t * (1.0 - alpha) < cfg.transmittance_stop) break;
        c += it.color * alpha * t;
        t *= 1.0 - alpha;
      }
      c += cfg.background * t;
      for (int ch = 0; ch < 3; ++ch) img.at(px, py, ch) = std::clamp(c(ch), 0.0, 1.0);
    }
  }
  return img;
}

inline double dot(const ImageBuffer& a, const ImageBuffer& b) {
  return std::inner_product(a.rgb.begin(), a.rgb.end(), b.rgb.begin(), 0.0);
}

inline ImageBuffer random_image(std::mt19937_64& rng, int w, int h, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  ImageBuffer img(w, h);
  for (auto& v : img.rgb) v = u(rng);
  return img;
}

/// Central difference of f at perturbation size h.
inline double central_difference(const std::function<double(double)>& f, double h = 1e-4) {
  return (f(h) - f(-h)) / (2.0 * h);
}

/// |a - b| relative to the larger magnitude, with an absolute floor on the denominator.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Render config without the non-smooth skip/stop rules, for finite-difference checks.
inline RenderConfig smooth_config() {
  RenderConfig c;
  c.alpha_floor = 0.0;
  c.transmittance_stop = 1e-12;
  return c;
}

/// Worst relative error over every gradient block of one render, comparing the
/// analytic backward pass against central differences of <d_image, render>.
struct GradientCheck {
  double mean = 0, color = 0, opacity = 0, pose = 0;
  [[nodiscard]] double worst() const { return std::max({mean, color, opacity, pose}); }
};

inline GradientCheck check_render_gradients(const GlobalScene& scene, const CameraPose& pose,
                                            const CameraIntrinsics& k, const RenderConfig& cfg,
                                            const ImageBuffer& d_image, double h = 1e-4) {
  const RenderGradients g = render_backward(scene, pose, k, cfg, d_image);
  auto loss = [&](const GlobalScene& s, const CameraPose& p) { return dot(d_image, render(s, p, k, cfg)); };
  GradientCheck out;
  for (size_t i = 0; i < scene.size(); ++i) {
    for (int a = 0; a < 3; ++a) {
      const double fd = central_difference([&](double e) {
        GlobalScene s = scene;
        s.gaussians[i].mean(a) += e;
        return loss(s, pose);
      }, h);
      out.mean = std::max(out.mean, relative_error(g.d_mean[i](a), fd));
      const double fdc = central_difference([&](double e) {
        GlobalScene s = scene;
        s.gaussians[i].color(a) += e;
        return loss(s, pose);
      }, h);
      out.color = std::max(out.color, relative_error(g.d_color[i](a), fdc));
    }
    const double fdo = central_difference([&](double e) {
      GlobalScene s = scene;
      s.gaussians[i].opacity += e;
      return loss(s, pose);
    }, h);
    out.opacity = std::max(out.opacity, relative_error(g.d_opacity[i], fdo));
  }
  for (int a = 0; a < 3; ++a) {
    const double fdr = central_difference([&](double e) {
      CameraPose p = pose;
      p.rotation = pose.rotation * so3_exp(e * Vec3::Unit(a));
      return loss(scene, p);
    }, h);
    out.pose = std::max(out.pose, relative_error(g.d_pose(a), fdr));
    const double fdt = central_difference([&](double e) {
      CameraPose p = pose;
      p.translation(a) += e;
      return loss(scene, p);
    }, h);
    out.pose = std::max(out.pose, relative_error(g.d_pose(3 + a), fdt));
  }
  return out;
}

}  // namespace pfsplat::testing
