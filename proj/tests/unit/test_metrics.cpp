#include <doctest.h>

#include "oracles.hpp"
#include "pfsplat/errors.hpp"
#include "pfsplat/metrics.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace pfsplat;

namespace {

// Straightforward windowed SSIM: for each window build a weighted sample and
// evaluate the formula with long double accumulators.
double ssim_oracle(const ImageBuffer& a, const ImageBuffer& b) {
  const int n = 11;
  const double sigma = 1.5;
  std::vector<long double> g(n);
  long double gs = 0;
  for (int i = 0; i < n; ++i) gs += g[i] = std::exp(-(i - 5.0) * (i - 5.0) / (2 * sigma * sigma));
  const long double c1 = 0.0001L, c2 = 0.0009L;
  long double total = 0;
  int count = 0;
  for (int c = 0; c < 3; ++c) {
    for (int oy = 0; oy + n <= a.height; ++oy) {
      for (int ox = 0; ox + n <= a.width; ++ox) {
        long double ma = 0, mb = 0;
        for (int y = 0; y < n; ++y)
          for (int x = 0; x < n; ++x) {
            const long double w = g[y] * g[x] / (gs * gs);
            ma += w * a.at(ox + x, oy + y, c);
            mb += w * b.at(ox + x, oy + y, c);
          }
        long double va = 0, vb = 0, cov = 0;
        for (int y = 0; y < n; ++y)
          for (int x = 0; x < n; ++x) {
            const long double w = g[y] * g[x] / (gs * gs);
            const long double da = a.at(ox + x, oy + y, c) - ma, db = b.at(ox + x, oy + y, c) - mb;
            va += w * da * da;
            vb += w * db * db;
            cov += w * da * db;
          }
        total += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        ++count;
      }
    }
  }
  return static_cast<double>(total / count);
}

CameraPose rot_about(const Vec3& axis, double deg) {
  CameraPose p;
  p.rotation = Eigen::AngleAxisd(deg * std::numbers::pi / 180, axis.normalized()).toRotationMatrix();
  return p;
}

}  // namespace

TEST_CASE("psnr fixtures") {
  ImageBuffer a(8, 8, 0.3), b(8, 8, 0.4);
  CHECK(psnr(a, a) == kPsnrCap);
  CHECK(std::abs(psnr(a, b) - 20.0) < 1e-12);
  CHECK(psnr(a, b) == psnr(b, a));
  std::mt19937_64 rng(1);
  const ImageBuffer x = testing::random_image(rng, 9, 7, 0, 1), y = testing::random_image(rng, 9, 7, 0, 1);
  long double s = 0;
  for (size_t i = 0; i < x.size(); ++i) s += (long double)(x.rgb[i] - y.rgb[i]) * (x.rgb[i] - y.rgb[i]);
  const double expected = static_cast<double>(10.0L * std::log10(1.0L / (s / x.size())));
  CHECK(std::abs(psnr(x, y) - expected) < 1e-10);
  CHECK_THROWS_AS((void)psnr(a, ImageBuffer(8, 7)), InvalidArgument);
}

TEST_CASE("ssim fixtures") {
  std::mt19937_64 rng(2);
  const ImageBuffer a = testing::random_image(rng, 16, 14, 0, 1);
  CHECK(std::abs(ssim(a, a) - 1.0) < 1e-12);
  const ImageBuffer b = testing::random_image(rng, 16, 14, 0, 1);
  CHECK(std::abs(ssim(a, b) - ssim(b, a)) < 1e-12);
  CHECK(std::abs(ssim(a, b) - ssim_oracle(a, b)) < 1e-10);

  ImageBuffer bin(16, 16), inv(16, 16);
  for (size_t i = 0; i < bin.size(); ++i) {
    bin.rgb[i] = (rng() & 1) ? 1.0 : 0.0;
    inv.rgb[i] = 1.0 - bin.rgb[i];
  }
  const double s = ssim(bin, inv);
  CHECK(s < 0.0);
  CHECK(std::abs(s - ssim_oracle(bin, inv)) < 1e-10);

  // Constant patches: variances vanish, only the luminance term and the constants remain.
  const ImageBuffer c0(12, 12, 0.4), c1(12, 12, 0.5);
  const double lum = (2 * 0.4 * 0.5 + 1e-4) / (0.16 + 0.25 + 1e-4);
  CHECK(std::abs(ssim(c0, c1) - lum) < 1e-12);

  CHECK_THROWS_AS((void)ssim(ImageBuffer(10, 20), ImageBuffer(10, 20)), InvalidArgument);
  CHECK_THROWS_AS((void)ssim(ImageBuffer(12, 12), ImageBuffer(13, 12)), InvalidArgument);
}

TEST_CASE("ssim gradient matches finite differences") {
  std::mt19937_64 rng(3);
  const ImageBuffer a = testing::random_image(rng, 13, 12, 0, 1), b = testing::random_image(rng, 13, 12, 0, 1);
  const SsimWithGradient g = ssim_with_gradient(a, b);
  CHECK(g.value == ssim(a, b));
  for (size_t i = 0; i < a.size(); i += 7) {
    ImageBuffer p = a, m = a;
    p.rgb[i] += 1e-5;
    m.rgb[i] -= 1e-5;
    const double fd = (ssim(p, b) - ssim(m, b)) / 2e-5;
    CHECK(testing::relative_error(g.d_a.rgb[i], fd, 1e-6) < 1e-5);
  }
}

TEST_CASE("pose_errors fixtures and invariances") {
  std::vector<CameraPose> gt(3);
  gt[1].translation = Vec3(1, 0, 0);
  gt[2].translation = Vec3(0, 0, 1);
  gt[2].rotation = rot_about(Vec3(0, 1, 0), 30).rotation;
  for (const auto& e : pose_errors(gt, gt)) {
    CHECK(e.rotation_error < 1e-6);
    CHECK(e.translation_angle_error < 1e-6);
  }
  std::vector<CameraPose> pred = gt;
  pred[1].rotation = rot_about(Vec3(0, 0, 1), 10).rotation;
  const auto errs = pose_errors(pred, gt);
  CHECK(errs[0].rotation_error == doctest::Approx(10.0).epsilon(1e-9));

  std::vector<CameraPose> two_gt(2), two_pred(2);
  two_gt[1].translation = Vec3(1, 0, 0);
  two_pred[1].translation = Vec3(0, 1, 0);
  CHECK(pose_errors(two_pred, two_gt)[0].translation_angle_error == doctest::Approx(90.0));
  two_gt[1].translation = Vec3::Zero();
  CHECK(pose_errors(two_pred, two_gt)[0].translation_angle_error == 180.0);
  two_pred[1].translation = Vec3::Zero();
  CHECK(pose_errors(two_pred, two_gt)[0].translation_angle_error == 0.0);

  std::mt19937_64 rng(4);
  std::vector<CameraPose> a, b;
  for (int i = 0; i < 4; ++i) {
    a.push_back(testing::random_pose(rng));
    b.push_back(testing::random_pose(rng));
  }
  const auto base = pose_errors(a, b);
  const CameraPose G = testing::random_pose(rng);
  std::vector<CameraPose> moved;
  for (auto p : a) {
    p.translation *= 7.5;
    moved.push_back(G * p);
  }
  const auto after = pose_errors(moved, b);
  for (size_t i = 0; i < base.size(); ++i) {
    CHECK(std::abs(after[i].rotation_error - base[i].rotation_error) < 1e-6);
    CHECK(std::abs(after[i].translation_angle_error - base[i].translation_angle_error) < 1e-6);
    CHECK(base[i].rotation_error >= 0);
    CHECK(base[i].rotation_error <= 180);
  }
  CHECK_THROWS_AS((void)pose_errors(std::span(a).first(1), std::span(b).first(1)), InvalidArgument);
}

TEST_CASE("pose_auc fixtures") {
  const std::vector<double> t = {5, 10, 20};
  const std::vector<PoseErrorPair> zero(4);
  for (double v : pose_auc(zero, t)) CHECK(std::abs(v - 1.0) < 1e-12);
  const std::vector<PoseErrorPair> ten = {{10.0, 3.0}};
  CHECK(std::abs(pose_auc(ten, std::vector<double>{20})[0] - 0.5) < 1e-12);
  const std::vector<PoseErrorPair> big = {{25.0, 0.0}, {20.0, 0.0}};
  for (double v : pose_auc(big, t)) CHECK(std::abs(v) < 1e-12);
  // Aggregation: translation dominates under max, ignored for rotation-only.
  const std::vector<PoseErrorPair> mixed = {{0.0, 10.0}};
  CHECK(std::abs(pose_auc(mixed, std::vector<double>{20})[0] - 0.5) < 1e-12);
  CHECK(std::abs(pose_auc(mixed, std::vector<double>{20}, PoseErrorAggregation::RotationOnly)[0] - 1.0) < 1e-12);

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 30);
  std::vector<PoseErrorPair> r(50);
  for (auto& e : r) e = {u(rng), u(rng)};
  std::vector<double> th;
  for (double x = 1; x <= 40; x += 1) th.push_back(x);
  const auto curve = pose_auc(r, th);
  for (size_t i = 1; i < curve.size(); ++i) CHECK(curve[i] >= curve[i - 1] - 1e-15);
  auto worse = r;
  worse[7].rotation_error += 5;
  const auto curve2 = pose_auc(worse, th);
  for (size_t i = 0; i < curve.size(); ++i) CHECK(curve2[i] <= curve[i] + 1e-15);
  CHECK_THROWS_AS((void)pose_auc(std::vector<PoseErrorPair>{}, t), InvalidArgument);
}
