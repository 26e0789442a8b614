#include "pfsplat/losses.hpp"

#include "pfsplat/errors.hpp"
#include "pfsplat/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace pfsplat {

void LossWeights::validate() const {
  for (const double v : {lambda_intrin, lambda_pose, lambda_opacity, lambda_t, lambda_ssim}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidArgument("loss weights must be finite and non-negative");
  }
  if (!(huber_delta > 0.0)) throw InvalidArgument("huber_delta must be positive");
}

ImageLoss image_loss(const ImageBuffer& rendered, const ImageBuffer& target, const LossWeights& w) {
  if (!rendered.same_shape(target) || rendered.size() != target.size()) {
    throw InvalidArgument("image_loss: image dimensions differ");
  }
  if (rendered.size() == 0) throw InvalidArgument("image_loss: empty images");
  ImageLoss out;
  out.d_rendered = ImageBuffer(rendered.width, rendered.height);
  const double inv_n = 1.0 / static_cast<double>(rendered.size());
  double sum = 0.0;
  for (size_t i = 0; i < rendered.size(); ++i) {
    const double d = rendered.rgb[i] - target.rgb[i];
    sum += d * d;
    out.d_rendered.rgb[i] = 2.0 * d * inv_n;
  }
  out.value = sum * inv_n;
  if (w.lambda_ssim > 0.0) {
    const SsimWithGradient s = ssim_with_gradient(rendered, target);
    out.value += w.lambda_ssim * (1.0 - s.value);
    for (size_t i = 0; i < rendered.size(); ++i) {
      out.d_rendered.rgb[i] -= w.lambda_ssim * s.d_a.rgb[i];
    }
  }
  return out;
}

double rotation_loss(const Mat3& r_pred, const Mat3& r_gt) {
  return rotation_angle_between(r_gt, r_pred);
}

Vec3 rotation_loss_gradient(const Mat3& r_pred, const Mat3& r_gt) {
  const Mat3 q = r_gt.transpose() * r_pred;
  const double c = (q.trace() - 1.0) * 0.5;
  if (c >= 1.0) return Vec3::Zero();
  const Eigen::AngleAxisd aa(q);
  if (aa.angle() == 0.0) return Vec3::Zero();
  return aa.axis();
}

double translation_loss(const Vec3& t_pred, const Vec3& t_gt, double delta) {
  double sum = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double x = std::abs(t_pred(i) - t_gt(i));
    sum += x <= delta ? 0.5 * x * x : delta * (x - 0.5 * delta);
  }
  return sum;
}

Vec3 translation_loss_gradient(const Vec3& t_pred, const Vec3& t_gt, double delta) {
  Vec3 g;
  for (int i = 0; i < 3; ++i) {
    const double x = t_pred(i) - t_gt(i);
    g(i) = std::abs(x) <= delta ? x : delta * (x > 0.0 ? 1.0 : -1.0);
  }
  return g;
}

PoseLossResult pose_loss(std::span<const CameraPose> pred, std::span<const CameraPose> gt, const LossWeights& w) {
  if (pred.size() != gt.size()) throw InvalidArgument("pose_loss: list lengths differ");
  const size_t n = pred.size();
  if (n < 2) throw InvalidArgument("pose_loss: need at least two views");
  PoseLossResult out;
  out.d_rotation.assign(n, Vec3::Zero());
  out.d_translation.assign(n, Vec3::Zero());
  const double inv_pairs = 1.0 / static_cast<double>(n * (n - 1));
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const CameraPose rp = relative_pose(pred[i], pred[j]);
      const CameraPose rg = relative_pose(gt[i], gt[j]);
      out.value += inv_pairs * (rotation_loss(rp.rotation, rg.rotation) +
                                w.lambda_t * translation_loss(rp.translation, rg.translation, w.huber_delta));
      const Vec3 g_rot = inv_pairs * rotation_loss_gradient(rp.rotation, rg.rotation);
      const Vec3 g_t = inv_pairs * w.lambda_t * translation_loss_gradient(rp.translation, rg.translation, w.huber_delta);
      const RelativePoseGradient g = relative_pose_backward(pred[i], pred[j], g_rot, g_t);
      out.d_rotation[i] += g.rot_i;
      out.d_translation[i] += g.trans_i;
      out.d_rotation[j] += g.rot_j;
      out.d_translation[j] += g.trans_j;
    }
  }
  return out;
}

double intrinsic_loss(FocalPair pred, FocalPair gt, double image_width) {
  if (!(image_width > 0.0)) throw InvalidArgument("intrinsic_loss: image width must be positive");
  const double dx = (pred.fx - gt.fx) / image_width;
  const double dy = (pred.fy - gt.fy) / image_width;
  return dx * dx + dy * dy;
}

FocalPair intrinsic_loss_gradient(FocalPair pred, FocalPair gt, double image_width) {
  if (!(image_width > 0.0)) throw InvalidArgument("intrinsic_loss: image width must be positive");
  const double w2 = image_width * image_width;
  return {2.0 * (pred.fx - gt.fx) / w2, 2.0 * (pred.fy - gt.fy) / w2};
}

double opacity_loss(std::span<const double> opacities) {
  if (opacities.empty()) throw InvalidArgument("opacity_loss: no Gaussians");
  double sum = 0.0;
  for (const double o : opacities) sum += std::abs(o);
  return sum / static_cast<double>(opacities.size());
}

std::vector<double> opacity_loss_gradient(std::span<const double> opacities) {
  if (opacities.empty()) throw InvalidArgument("opacity_loss: no Gaussians");
  const double inv = 1.0 / static_cast<double>(opacities.size());
  std::vector<double> g(opacities.size());
  for (size_t i = 0; i < g.size(); ++i) {
    g[i] = opacities[i] > 0.0 ? inv : (opacities[i] < 0.0 ? -inv : 0.0);
  }
  return g;
}

double total_loss(const LossParts& p, const LossWeights& w) {
  return p.image + w.lambda_intrin * p.intrinsic + w.lambda_pose * p.pose + w.lambda_opacity * p.opacity;
}

}  // namespace pfsplat
