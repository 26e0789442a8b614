#include <doctest.h>

#include "oracles.hpp"
#include "pfsplat/errors.hpp"
#include "pfsplat/parallel.hpp"
#include "pfsplat/rasterizer.hpp"

#include <cmath>
#include <random>

using namespace pfsplat;
using namespace pfsplat::testing;

namespace {

const CameraIntrinsics kSmall{30.0, 32.0, 12.3, 9.8, 24, 20};

double max_abs_diff(const ImageBuffer& a, const ImageBuffer& b) {
  double m = 0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.rgb[i] - b.rgb[i]));
  return m;
}

}  // namespace

TEST_CASE("project fixtures") {
  const CameraIntrinsics k{100, 100, 50, 50, 100, 100};
  Gaussian g;
  g.mean = Vec3(0, 0, 1);
  g.log_scale = Vec3::Constant(std::log(0.1));
  const auto p = project(g, CameraPose::identity(), k);
  REQUIRE(p.has_value());
  CHECK((p->mean - Vec2(50, 50)).norm() < 1e-12);
  CHECK(p->depth == doctest::Approx(1.0));
  CHECK(p->covariance(0, 0) == doctest::Approx(100.0 + kCovarianceFloor));
  CHECK(p->covariance(1, 1) == doctest::Approx(100.0 + kCovarianceFloor));
  CHECK(std::abs(p->covariance(0, 1)) < 1e-12);
  g.mean = Vec3(0, 0, 0.005);
  CHECK_FALSE(project(g, CameraPose::identity(), k).has_value());
  g.mean = Vec3(0, 0, -1);
  CHECK_FALSE(project(g, CameraPose::identity(), k).has_value());
}

TEST_CASE("empty scene renders background") {
  RenderConfig cfg;
  cfg.background = Vec3(0.2, 0.4, 0.6);
  const ImageBuffer img = render(GlobalScene{}, CameraPose::identity(), kSmall, cfg);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) CHECK(img.at(x, y, c) == cfg.background(c));
}

TEST_CASE("single opaque splat closed form") {
  const CameraIntrinsics k{100, 100, 50, 50, 100, 100};
  GlobalScene s;
  Gaussian g;
  g.mean = Vec3(0.005, 0.005, 1.0);  // projects onto the center of pixel (50, 50)
  g.opacity = 0.99;
  g.log_scale = Vec3::Constant(std::log(0.02));
  g.color = Vec3(0.8, 0.3, 0.1);
  s.gaussians.push_back(g);
  s.provenance.push_back(0);
  RenderConfig cfg;
  cfg.background = Vec3(0.5, 0.5, 0.5);
  const ImageBuffer img = render(s, CameraPose::identity(), k, cfg);
  for (int c = 0; c < 3; ++c) CHECK(img.at(50, 50, c) == doctest::Approx(0.99 * g.color(c) + 0.01 * 0.5));
}

TEST_CASE("tiled renderer equals the untiled reference") {
  std::mt19937_64 rng(100);
  for (int trial = 0; trial < 10; ++trial) {
    const CameraPose pose = random_pose(rng);
    const GlobalScene s = random_scene_in_view(rng, pose, kSmall, 40, 1.0, 6.0, -2.5, -1.0);
    RenderConfig cfg;
    cfg.tile_size = 8;
    cfg.background = Vec3(0.1, 0.2, 0.3);
    CHECK(max_abs_diff(render(s, pose, kSmall, cfg), reference_render(s, pose, kSmall, cfg)) < 1e-6);
  }
}

TEST_CASE("weights and final transmittance sum to one") {
  std::mt19937_64 rng(101);
  const CameraPose pose = random_pose(rng);
  GlobalScene s = random_scene_in_view(rng, pose, kSmall, 30);
  RenderConfig cfg;
  for (auto& g : s.gaussians) g.color = Vec3::Ones();
  const ImageBuffer weight = render(s, pose, kSmall, cfg);
  for (auto& g : s.gaussians) g.color = Vec3::Zero();
  cfg.background = Vec3::Ones();
  const ImageBuffer trans = render(s, pose, kSmall, cfg);
  for (size_t i = 0; i < weight.size(); ++i) CHECK(std::abs(weight.rgb[i] + trans.rgb[i] - 1.0) < 1e-6);
}

TEST_CASE("rigid equivariance") {
  std::mt19937_64 rng(102);
  for (int trial = 0; trial < 5; ++trial) {
    const CameraPose pose = random_pose(rng);
    const GlobalScene s = random_scene_in_view(rng, pose, kSmall, 25);
    const CameraPose G = random_pose(rng);
    GlobalScene moved = s;
    moved.gaussians = to_world(s.gaussians, G);
    CHECK(max_abs_diff(render(s, pose, kSmall), render(moved, G * pose, kSmall)) < 1e-5);
  }
}

TEST_CASE("render is bitwise deterministic across thread counts") {
  std::mt19937_64 rng(103);
  const CameraPose pose = random_pose(rng);
  const GlobalScene s = random_scene_in_view(rng, pose, kSmall, 60);
  const ImageBuffer d = random_image(rng, kSmall.width, kSmall.height);
  RenderConfig cfg;
  cfg.tile_size = 4;
  ImageBuffer a, b;
  RenderGradients ga, gb;
  {
    parallel::ScopedThreadCount one(1);
    a = render(s, pose, kSmall, cfg);
    ga = render_backward(s, pose, kSmall, cfg, d);
  }
  {
    parallel::ScopedThreadCount four(4);
    b = render(s, pose, kSmall, cfg);
    gb = render_backward(s, pose, kSmall, cfg, d);
  }
  CHECK(a.rgb == b.rgb);
  for (size_t i = 0; i < s.size(); ++i) {
    CHECK(ga.d_mean[i] == gb.d_mean[i]);
    CHECK(ga.d_opacity[i] == gb.d_opacity[i]);
  }
  CHECK(ga.d_pose == gb.d_pose);
}

TEST_CASE("zero upstream gradient gives zero gradients") {
  std::mt19937_64 rng(104);
  const CameraPose pose = random_pose(rng);
  const GlobalScene s = random_scene_in_view(rng, pose, kSmall, 10);
  const RenderGradients g = render_backward(s, pose, kSmall, {}, ImageBuffer(kSmall.width, kSmall.height));
  for (size_t i = 0; i < s.size(); ++i) {
    CHECK(g.d_mean[i].isZero());
    CHECK(g.d_color[i].isZero());
    CHECK(g.d_opacity[i] == 0.0);
  }
  CHECK(g.d_pose.isZero());
}

TEST_CASE("single-splat color gradient is the summed alpha-weight") {
  std::mt19937_64 rng(105);
  const CameraPose pose = random_pose(rng);
  GlobalScene s = random_scene_in_view(rng, pose, kSmall, 1);
  s.gaussians[0].color = Vec3(0.3, 0.3, 0.3);
  const RenderConfig cfg = smooth_config();
  const ImageBuffer d = random_image(rng, kSmall.width, kSmall.height);
  const RenderGradients g = render_backward(s, pose, kSmall, cfg, d);
  GlobalScene white = s;
  white.gaussians[0].color = Vec3::Ones();
  const ImageBuffer weight = render(white, pose, kSmall, cfg);
  for (int c = 0; c < 3; ++c) {
    double expected = 0;
    for (int y = 0; y < kSmall.height; ++y)
      for (int x = 0; x < kSmall.width; ++x) expected += weight.at(x, y, c) * d.at(x, y, c);
    CHECK(g.d_color[0](c) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("culled Gaussians receive zero gradients") {
  std::mt19937_64 rng(106);
  const CameraPose pose = random_pose(rng);
  GlobalScene s = random_scene_in_view(rng, pose, kSmall, 3);
  s.gaussians[1].mean = pose.apply(Vec3(0, 0, -2));
  const RenderGradients g = render_backward(s, pose, kSmall, {}, random_image(rng, kSmall.width, kSmall.height));
  CHECK(g.d_mean[1].isZero());
  CHECK(g.d_color[1].isZero());
  CHECK(g.d_opacity[1] == 0.0);
}

TEST_CASE("render_backward matches finite differences") {
  std::mt19937_64 rng(107);
  for (int trial = 0; trial < 10; ++trial) {
    const CameraPose pose = random_pose(rng);
    const GlobalScene s = random_scene_in_view(rng, pose, kSmall, 5);
    const ImageBuffer d = random_image(rng, kSmall.width, kSmall.height);
    const GradientCheck c = check_render_gradients(s, pose, kSmall, smooth_config(), d);
    CHECK(c.mean < 1e-4);
    CHECK(c.color < 1e-4);
    CHECK(c.opacity < 1e-4);
    CHECK(c.pose < 1e-4);
  }
}

TEST_CASE("world covariance gradient matches finite differences") {
  std::mt19937_64 rng(108);
  const CameraPose pose = random_pose(rng);
  const GlobalScene s = random_scene_in_view(rng, pose, kSmall, 4);
  const ImageBuffer d = random_image(rng, kSmall.width, kSmall.height);
  const RenderConfig cfg = smooth_config();
  const RenderGradients g = render_backward(s, pose, kSmall, cfg, d);
  // Perturb the covariance through a rigid rotation of a single Gaussian about its mean.
  for (size_t i = 0; i < s.size(); ++i) {
    for (int k = 0; k < 3; ++k) {
      auto loss = [&](double e) {
        GlobalScene t = s;
        t.gaussians[i].rotation = Eigen::Quaterniond(so3_exp(e * Vec3::Unit(k))) * s.gaussians[i].rotation;
        return dot(d, render(t, pose, kSmall, cfg));
      };
      const Mat3 cov = s.gaussians[i].covariance();
      const Mat3 e = hat(Vec3::Unit(k));
      const double analytic = (g.d_cov[i].cwiseProduct(e * cov - cov * e)).sum();
      CHECK(relative_error(analytic, central_difference(loss)) < 1e-4);
    }
  }
}

TEST_CASE("render config validation") {
  RenderConfig c;
  CHECK_NOTHROW(c.validate());
  c.near_plane = 2000;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = RenderConfig{};
  c.transmittance_stop = 0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = RenderConfig{};
  c.tile_size = 0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
}
