#include "pfsplat/metrics.hpp"

#include "pfsplat/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace pfsplat {

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

void require_same_shape(const ImageBuffer& a, const ImageBuffer& b, const char* what) {
  if (!a.same_shape(b) || a.size() != b.size()) {
    throw InvalidArgument(std::string(what) + ": image dimensions differ");
  }
}

std::vector<double> gaussian_window(const SsimOptions& opt) {
  const int n = opt.window;
  std::vector<double> w1(static_cast<size_t>(n));
  const double mid = 0.5 * (n - 1);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = i - mid;
    w1[static_cast<size_t>(i)] = std::exp(-d * d / (2.0 * opt.sigma * opt.sigma));
    sum += w1[static_cast<size_t>(i)];
  }
  std::vector<double> w2(static_cast<size_t>(n * n));
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      w2[static_cast<size_t>(y * n + x)] = w1[static_cast<size_t>(y)] * w1[static_cast<size_t>(x)] / (sum * sum);
    }
  }
  return w2;
}

double ssim_impl(const ImageBuffer& a, const ImageBuffer& b, const SsimOptions& opt, ImageBuffer* grad) {
  require_same_shape(a, b, "ssim");
  const int win = opt.window;
  if (win <= 0 || a.width < win || a.height < win) {
    throw InvalidArgument("ssim: image is smaller than the window");
  }
  const std::vector<double> w = gaussian_window(opt);
  const double c1 = (opt.k1 * 1.0) * (opt.k1 * 1.0);
  const double c2 = (opt.k2 * 1.0) * (opt.k2 * 1.0);
  const int nx = a.width - win + 1;
  const int ny = a.height - win + 1;
  const double norm = 1.0 / (3.0 * nx * ny);
  if (grad) *grad = ImageBuffer(a.width, a.height);

  double total = 0.0;
  for (int ch = 0; ch < 3; ++ch) {
    for (int oy = 0; oy < ny; ++oy) {
      for (int ox = 0; ox < nx; ++ox) {
        double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
        for (int y = 0; y < win; ++y) {
          for (int x = 0; x < win; ++x) {
            const double wt = w[static_cast<size_t>(y * win + x)];
            const double va = a.at(ox + x, oy + y, ch);
            const double vb = b.at(ox + x, oy + y, ch);
            mx += wt * va;
            my += wt * vb;
            sxx += wt * va * va;
            syy += wt * vb * vb;
            sxy += wt * va * vb;
          }
        }
        sxx -= mx * mx;
        syy -= my * my;
        sxy -= mx * my;
        const double a1 = 2.0 * mx * my + c1;
        const double a2 = 2.0 * sxy + c2;
        const double b1 = mx * mx + my * my + c1;
        const double b2 = sxx + syy + c2;
        const double s = (a1 * a2) / (b1 * b2);
        total += s;
        if (grad) {
          // Partials holding the other moments fixed.
          const double ds_dmx = 2.0 * my * a2 / (b1 * b2) - s * 2.0 * mx / b1;
          const double ds_dsxx = -s / b2;
          const double ds_dsxy = 2.0 * a1 / (b1 * b2);
          for (int y = 0; y < win; ++y) {
            for (int x = 0; x < win; ++x) {
              const double wt = w[static_cast<size_t>(y * win + x)];
              const double va = a.at(ox + x, oy + y, ch);
              const double vb = b.at(ox + x, oy + y, ch);
              grad->at(ox + x, oy + y, ch) +=
                  norm * wt * (ds_dmx + ds_dsxx * 2.0 * (va - mx) + ds_dsxy * (vb - my));
            }
          }
        }
      }
    }
  }
  return total * norm;
}

double direction_angle_deg(const Vec3& a, const Vec3& b) {
  constexpr double kZero = 1e-12;
  const bool a_zero = a.norm() < kZero;
  const bool b_zero = b.norm() < kZero;
  if (a_zero && b_zero) return 0.0;
  if (a_zero || b_zero) return 180.0;
  return std::atan2(a.cross(b).norm(), a.dot(b)) * kRadToDeg;
}

}  // namespace

double psnr(const ImageBuffer& a, const ImageBuffer& b) {
  require_same_shape(a, b, "psnr");
  if (a.size() == 0) throw InvalidArgument("psnr: empty images");
  double sum = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = a.rgb[i] - b.rgb[i];
    sum += d * d;
  }
  const double mse = sum / static_cast<double>(a.size());
  if (mse < 1e-10) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim(const ImageBuffer& a, const ImageBuffer& b, const SsimOptions& opt) {
  return ssim_impl(a, b, opt, nullptr);
}

SsimWithGradient ssim_with_gradient(const ImageBuffer& a, const ImageBuffer& b, const SsimOptions& opt) {
  SsimWithGradient out;
  out.value = ssim_impl(a, b, opt, &out.d_a);
  return out;
}

std::vector<PoseErrorPair> pose_errors(std::span<const CameraPose> pred, std::span<const CameraPose> gt) {
  if (pred.size() != gt.size()) throw InvalidArgument("pose_errors: list lengths differ");
  if (pred.size() < 2) throw InvalidArgument("pose_errors: need at least two poses");
  std::vector<PoseErrorPair> out;
  out.reserve(pred.size() * (pred.size() - 1));
  for (size_t i = 0; i < pred.size(); ++i) {
    for (size_t j = 0; j < pred.size(); ++j) {
      if (i == j) continue;
      const CameraPose rp = relative_pose(pred[i], pred[j]);
      const CameraPose rg = relative_pose(gt[i], gt[j]);
      PoseErrorPair e;
      e.rotation_error = rotation_angle_between(rg.rotation, rp.rotation) * kRadToDeg;
      e.translation_angle_error = direction_angle_deg(rp.translation, rg.translation);
      out.push_back(e);
    }
  }
  return out;
}

std::vector<double> pose_auc(std::span<const PoseErrorPair> errors, std::span<const double> thresholds_deg,
                             PoseErrorAggregation aggregation) {
  if (errors.empty()) throw InvalidArgument("pose_auc: no samples");
  std::vector<double> out;
  out.reserve(thresholds_deg.size());
  for (const double t : thresholds_deg) {
    if (!(t > 0.0)) throw InvalidArgument("pose_auc: thresholds must be positive");
    double acc = 0.0;
    for (const auto& e : errors) {
      const double err = aggregation == PoseErrorAggregation::Max
                             ? std::max(e.rotation_error, e.translation_angle_error)
                             : e.rotation_error;
      acc += std::max(0.0, t - err);
    }
    out.push_back(acc / (t * static_cast<double>(errors.size())));
  }
  return out;
}

}  // namespace pfsplat
