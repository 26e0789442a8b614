#include "pfsplat/rasterizer.hpp"

#include "pfsplat/errors.hpp"
#include "pfsplat/parallel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

namespace pfsplat {

void RenderConfig::validate() const {
  if (tile_size <= 0) throw InvalidArgument("render config: tile_size must be positive");
  if (!(near_plane > 0.0 && near_plane < far_plane)) throw InvalidArgument("render config: need 0 < near < far");
  if (!(transmittance_stop > 0.0 && transmittance_stop < 1.0)) {
    throw InvalidArgument("render config: transmittance_stop must lie in (0, 1)");
  }
  if (!(alpha_floor >= 0.0 && alpha_floor < kAlphaCap)) {
    throw InvalidArgument("render config: alpha_floor must lie in [0, 0.99)");
  }
}

namespace {

using Mat23 = Eigen::Matrix<double, 2, 3>;

Mat23 projection_jacobian(const Vec3& p, const CameraIntrinsics& k) {
  const double iz = 1.0 / p.z();
  Mat23 j;
  j << k.fx * iz, 0.0, -k.fx * p.x() * iz * iz,
       0.0, k.fy * iz, -k.fy * p.y() * iz * iz;
  return j;
}

struct Splat {
  int index = 0;        // into scene.gaussians
  Vec2 mean;
  double a = 0, b = 0, c = 0;  // conic: power = -0.5 a dx^2 - b dx dy - 0.5 c dy^2
  double depth = 0;
  double opacity = 0;
  Vec3 color;
  Vec3 p_cam;
  Mat3 cov_cam;         // W Sigma W^T
  Mat23 jac;
  Mat2 conic;
  int x0 = 0, x1 = -1, y0 = 0, y1 = -1;  // inclusive pixel bounds
};

struct Sample {
  double alpha;
  double gauss;
  double dx;
  double dy;
  bool capped;
};

inline Sample evaluate(const Splat& s, int px, int py) {
  const double dx = (px + 0.5) - s.mean.x();
  const double dy = (py + 0.5) - s.mean.y();
  const double power = -0.5 * (s.a * dx * dx + s.c * dy * dy) - s.b * dx * dy;
  const double g = std::exp(power);
  const double raw = s.opacity * g;
  return {std::min(kAlphaCap, raw), g, dx, dy, raw >= kAlphaCap};
}

}  // namespace

std::optional<Projection> project(const Gaussian& g, const CameraPose& pose, const CameraIntrinsics& k,
                                  double near_plane, double far_plane) {
  const Mat3 w = pose.rotation.transpose();
  const Vec3 p = w * (g.mean - pose.translation);
  if (!(p.z() > near_plane) || !(p.z() < far_plane)) {
    return std::nullopt;
  }
  const Mat23 j = projection_jacobian(p, k);
  Projection out;
  out.camera_point = p;
  out.depth = p.z();
  out.mean = {k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy};
  out.covariance = j * (w * g.covariance() * w.transpose()) * j.transpose();
  out.covariance.diagonal().array() += kCovarianceFloor;
  return out;
}

struct RenderPass::State {
  RenderConfig cfg;
  CameraPose pose;
  CameraIntrinsics k;
  size_t num_gaussians = 0;
  std::vector<Splat> splats;                 // visible, depth sorted
  int tiles_x = 0, tiles_y = 0;
  std::vector<std::vector<int>> tile_lists;  // indices into splats, front to back
  std::vector<double> final_t;
  std::vector<int> n_contrib;                // tile-list prefix length that was composited
  std::vector<unsigned char> clamped;        // per channel: output hit the [0, 1] clamp
  ImageBuffer image;

  [[nodiscard]] size_t pixel(int x, int y) const { return static_cast<size_t>(y) * k.width + x; }
};

RenderPass::RenderPass(const GlobalScene& scene, const CameraPose& pose, const CameraIntrinsics& k,
                       const RenderConfig& cfg)
    : state_(std::make_unique<State>()) {
  cfg.validate();
  k.validate();
  State& st = *state_;
  st.cfg = cfg;
  st.pose = pose;
  st.k = k;
  st.num_gaussians = scene.gaussians.size();

  const Mat3 w = pose.rotation.transpose();
  for (size_t i = 0; i < scene.gaussians.size(); ++i) {
    const Gaussian& g = scene.gaussians[i];
    if (cfg.alpha_floor > 0.0 && g.opacity < cfg.alpha_floor) continue;
    const Vec3 p = w * (g.mean - pose.translation);
    if (!(p.z() > cfg.near_plane) || !(p.z() < cfg.far_plane)) continue;
    Splat s;
    s.index = static_cast<int>(i);
    s.p_cam = p;
    s.depth = p.z();
    s.mean = {k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy};
    s.jac = projection_jacobian(p, k);
    s.cov_cam = w * g.covariance() * w.transpose();
    Mat2 cov2 = s.jac * s.cov_cam * s.jac.transpose();
    cov2(0, 1) = cov2(1, 0) = 0.5 * (cov2(0, 1) + cov2(1, 0));
    cov2.diagonal().array() += kCovarianceFloor;
    const double det = cov2.determinant();
    if (!(det > 0.0)) continue;
    s.conic = cov2.inverse();
    s.a = s.conic(0, 0);
    s.b = s.conic(0, 1);
    s.c = s.conic(1, 1);
    s.opacity = g.opacity;
    s.color = g.color;

    if (cfg.alpha_floor > 0.0) {
      const double q = 2.0 * std::log(g.opacity / cfg.alpha_floor);
      const double hx = std::sqrt(std::max(0.0, q * cov2(0, 0)));
      const double hy = std::sqrt(std::max(0.0, q * cov2(1, 1)));
      s.x0 = std::max(0, static_cast<int>(std::ceil(s.mean.x() - hx - 0.5)) - 1);
      s.x1 = std::min(k.width - 1, static_cast<int>(std::floor(s.mean.x() + hx - 0.5)) + 1);
      s.y0 = std::max(0, static_cast<int>(std::ceil(s.mean.y() - hy - 0.5)) - 1);
      s.y1 = std::min(k.height - 1, static_cast<int>(std::floor(s.mean.y() + hy - 0.5)) + 1);
    } else {
      s.x0 = 0;
      s.x1 = k.width - 1;
      s.y0 = 0;
      s.y1 = k.height - 1;
    }
    if (s.x0 > s.x1 || s.y0 > s.y1) continue;
    st.splats.push_back(s);
  }
  std::stable_sort(st.splats.begin(), st.splats.end(),
                   [](const Splat& l, const Splat& r) { return l.depth < r.depth; });

  const int ts = cfg.tile_size;
  st.tiles_x = (k.width + ts - 1) / ts;
  st.tiles_y = (k.height + ts - 1) / ts;
  st.tile_lists.assign(static_cast<size_t>(st.tiles_x) * st.tiles_y, {});
  for (size_t si = 0; si < st.splats.size(); ++si) {
    const Splat& s = st.splats[si];
    for (int ty = s.y0 / ts; ty <= s.y1 / ts; ++ty) {
      for (int tx = s.x0 / ts; tx <= s.x1 / ts; ++tx) {
        st.tile_lists[static_cast<size_t>(ty) * st.tiles_x + tx].push_back(static_cast<int>(si));
      }
    }
  }

  const size_t npix = static_cast<size_t>(k.width) * k.height;
  st.final_t.assign(npix, 1.0);
  st.n_contrib.assign(npix, 0);
  st.clamped.assign(npix * 3, 0);
  st.image = ImageBuffer(k.width, k.height);

  parallel::for_each_index(st.tile_lists.size(), [&st, ts](size_t tile) {
    const int tx = static_cast<int>(tile) % st.tiles_x;
    const int ty = static_cast<int>(tile) / st.tiles_x;
    const auto& list = st.tile_lists[tile];
    const int xe = std::min(st.k.width, (tx + 1) * ts);
    const int ye = std::min(st.k.height, (ty + 1) * ts);
    for (int py = ty * ts; py < ye; ++py) {
      for (int px = tx * ts; px < xe; ++px) {
        double t = 1.0;
        Vec3 color = Vec3::Zero();
        int contrib = 0;
        for (size_t e = 0; e < list.size(); ++e) {
          const Splat& s = st.splats[static_cast<size_t>(list[e])];
          if (px < s.x0 || px > s.x1 || py < s.y0 || py > s.y1) continue;
          const Sample smp = evaluate(s, px, py);
          if (smp.alpha < st.cfg.alpha_floor) continue;
          const double next_t = t * (1.0 - smp.alpha);
          if (next_t < st.cfg.transmittance_stop) break;
          color += s.color * (smp.alpha * t);
          t = next_t;
          contrib = static_cast<int>(e) + 1;
        }
        color += st.cfg.background * t;
        const size_t pix = st.pixel(px, py);
        st.final_t[pix] = t;
        st.n_contrib[pix] = contrib;
        for (int ch = 0; ch < 3; ++ch) {
          const double v = color(ch);
          st.clamped[pix * 3 + ch] = (v < 0.0 || v > 1.0) ? 1 : 0;
          st.image.at(px, py, ch) = std::clamp(v, 0.0, 1.0);
        }
      }
    }
  });
}

RenderPass::~RenderPass() = default;
RenderPass::RenderPass(RenderPass&&) noexcept = default;
RenderPass& RenderPass::operator=(RenderPass&&) noexcept = default;

const ImageBuffer& RenderPass::image() const { return state_->image; }

RenderGradients RenderPass::backward(const ImageBuffer& d_image) const {
  const State& st = *state_;
  if (d_image.width != st.k.width || d_image.height != st.k.height || d_image.size() != st.image.size()) {
    throw InvalidArgument("render_backward: upstream gradient has the wrong shape");
  }
  const size_t n = st.num_gaussians;
  RenderGradients out;
  out.d_mean.assign(n, Vec3::Zero());
  out.d_color.assign(n, Vec3::Zero());
  out.d_opacity.assign(n, 0.0);
  out.d_cov.assign(n, Mat3::Zero());

  // Per tile-list entry: d_mean2d (2), d_conic (3), d_color (3), d_opacity (1).
  constexpr int kAcc = 9;
  std::vector<std::vector<double>> tile_acc(st.tile_lists.size());
  const int ts = st.cfg.tile_size;

  parallel::for_each_index(st.tile_lists.size(), [&](size_t tile) {
    const auto& list = st.tile_lists[tile];
    auto& acc = tile_acc[tile];
    acc.assign(list.size() * kAcc, 0.0);
    const int tx = static_cast<int>(tile) % st.tiles_x;
    const int ty = static_cast<int>(tile) / st.tiles_x;
    const int xe = std::min(st.k.width, (tx + 1) * ts);
    const int ye = std::min(st.k.height, (ty + 1) * ts);
    for (int py = ty * ts; py < ye; ++py) {
      for (int px = tx * ts; px < xe; ++px) {
        const size_t pix = st.pixel(px, py);
        Vec3 g;
        for (int ch = 0; ch < 3; ++ch) {
          g(ch) = st.clamped[pix * 3 + ch] ? 0.0 : d_image.at(px, py, ch);
        }
        if (g.isZero(0.0)) continue;
        double t = st.final_t[pix];
        Vec3 behind = st.cfg.background * t;
        for (int e = st.n_contrib[pix] - 1; e >= 0; --e) {
          const Splat& s = st.splats[static_cast<size_t>(list[static_cast<size_t>(e)])];
          if (px < s.x0 || px > s.x1 || py < s.y0 || py > s.y1) continue;
          const Sample smp = evaluate(s, px, py);
          if (smp.alpha < st.cfg.alpha_floor) continue;
          const double one_minus = 1.0 - smp.alpha;
          t /= one_minus;
          double* a = acc.data() + static_cast<size_t>(e) * kAcc;
          const double w = smp.alpha * t;
          a[5] += g(0) * w;
          a[6] += g(1) * w;
          a[7] += g(2) * w;
          const double d_alpha = g.dot(s.color * t - behind / one_minus);
          behind += s.color * w;
          if (smp.capped) continue;
          a[8] += d_alpha * smp.gauss;
          const double d_power = d_alpha * smp.alpha;
          a[0] += d_power * (s.a * smp.dx + s.b * smp.dy);
          a[1] += d_power * (s.b * smp.dx + s.c * smp.dy);
          a[2] += d_power * (-0.5 * smp.dx * smp.dx);
          a[3] += d_power * (-smp.dx * smp.dy);
          a[4] += d_power * (-0.5 * smp.dy * smp.dy);
        }
      }
    }
  });

  // Fixed-order reduction keeps results independent of the worker count.
  std::vector<std::array<double, kAcc>> splat_acc(st.splats.size());
  for (auto& a : splat_acc) a.fill(0.0);
  for (size_t tile = 0; tile < st.tile_lists.size(); ++tile) {
    const auto& list = st.tile_lists[tile];
    for (size_t e = 0; e < list.size(); ++e) {
      auto& dst = splat_acc[static_cast<size_t>(list[e])];
      for (int q = 0; q < kAcc; ++q) dst[static_cast<size_t>(q)] += tile_acc[tile][e * kAcc + q];
    }
  }

  const Mat3& r = st.pose.rotation;
  const CameraIntrinsics& k = st.k;
  Vec3 d_rot = Vec3::Zero();
  Vec3 d_trans = Vec3::Zero();
  for (size_t si = 0; si < st.splats.size(); ++si) {
    const Splat& s = st.splats[si];
    const auto& a = splat_acc[si];
    const size_t gi = static_cast<size_t>(s.index);
    out.d_color[gi] = Vec3(a[5], a[6], a[7]);
    out.d_opacity[gi] = a[8];

    Mat2 g_conic;
    g_conic << a[2], 0.5 * a[3], 0.5 * a[3], a[4];
    const Mat2 g_cov2 = -s.conic * g_conic * s.conic;
    const Mat3 g_cov_cam = s.jac.transpose() * g_cov2 * s.jac;
    const Mat23 g_jac = 2.0 * g_cov2 * s.jac * s.cov_cam;

    const Vec3& p = s.p_cam;
    const double iz = 1.0 / p.z();
    const double iz2 = iz * iz;
    const double iz3 = iz2 * iz;
    Vec3 g_p(a[0] * k.fx * iz, a[1] * k.fy * iz, -(a[0] * k.fx * p.x() + a[1] * k.fy * p.y()) * iz2);
    g_p.x() += g_jac(0, 2) * (-k.fx * iz2);
    g_p.y() += g_jac(1, 2) * (-k.fy * iz2);
    g_p.z() += g_jac(0, 0) * (-k.fx * iz2) + g_jac(0, 2) * (2.0 * k.fx * p.x() * iz3) +
               g_jac(1, 1) * (-k.fy * iz2) + g_jac(1, 2) * (2.0 * k.fy * p.y() * iz3);

    out.d_mean[gi] = r * g_p;
    Mat3 g_cov_world = r * g_cov_cam * r.transpose();
    out.d_cov[gi] = 0.5 * (g_cov_world + g_cov_world.transpose());

    d_trans -= r * g_p;
    d_rot += g_p.cross(p);
    for (int q = 0; q < 3; ++q) {
      const Mat3 e = hat(Vec3::Unit(q));
      d_rot(q) += g_cov_cam.cwiseProduct(s.cov_cam * e - e * s.cov_cam).sum();
    }
  }
  out.d_pose << d_rot, d_trans;
  return out;
}

ImageBuffer render(const GlobalScene& scene, const CameraPose& pose, const CameraIntrinsics& k,
                   const RenderConfig& cfg) {
  return RenderPass(scene, pose, k, cfg).image();
}

RenderGradients render_backward(const GlobalScene& scene, const CameraPose& pose, const CameraIntrinsics& k,
                                const RenderConfig& cfg, const ImageBuffer& d_image) {
  return RenderPass(scene, pose, k, cfg).backward(d_image);
}

}  // namespace pfsplat
