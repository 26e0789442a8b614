#pragma once

#include "pfsplat/geometry.hpp"
#include "pfsplat/image.hpp"

#include <span>
#include <vector>

namespace pfsplat {

/// Weights of the multi-task objective. The first three defaults are the
/// published training weights; huber_delta and lambda_t are not published.
/// LPIPS is not available here, so lambda_ssim weights an optional (1 - SSIM) term.
struct LossWeights {
  double lambda_intrin = 0.5;
  double lambda_pose = 0.1;
  double lambda_opacity = 0.01;
  double lambda_t = 1.0;
  double huber_delta = 1.0;
  double lambda_ssim = 0.0;

  void validate() const;
};

struct ImageLoss {
  double value = 0.0;
  ImageBuffer d_rendered;
};

/// MSE over all pixels and channels plus lambda_ssim * (1 - SSIM).
[[nodiscard]] ImageLoss image_loss(const ImageBuffer& rendered, const ImageBuffer& target, const LossWeights& w);

/// Geodesic angle of R_gt^T R_pred, radians.
[[nodiscard]] double rotation_loss(const Mat3& r_pred, const Mat3& r_gt);

/// d rotation_loss / dw for R_pred <- R_pred exp(hat(w)): the unit rotation axis
/// of R_gt^T R_pred. Zero at the clamp boundary (angle 0).
[[nodiscard]] Vec3 rotation_loss_gradient(const Mat3& r_pred, const Mat3& r_gt);

/// Elementwise Huber on (t_pred - t_gt), summed over components.
[[nodiscard]] double translation_loss(const Vec3& t_pred, const Vec3& t_gt, double delta);
[[nodiscard]] Vec3 translation_loss_gradient(const Vec3& t_pred, const Vec3& t_gt, double delta);

/// Gradient of pose_loss w.r.t. each predicted pose (rotation tangent, translation).
struct PoseLossResult {
  double value = 0.0;
  std::vector<Vec3> d_rotation;
  std::vector<Vec3> d_translation;
};

/// Mean over ordered pairs i != j of rotation_loss + lambda_t * translation_loss
/// between predicted and ground-truth relative poses. Throws InvalidArgument for N < 2.
[[nodiscard]] PoseLossResult pose_loss(std::span<const CameraPose> pred, std::span<const CameraPose> gt,
                                       const LossWeights& w);

struct FocalPair {
  double fx = 0.0;
  double fy = 0.0;
};

/// Squared l2 distance between focal lengths, each divided by the image width.
[[nodiscard]] double intrinsic_loss(FocalPair pred, FocalPair gt, double image_width);
[[nodiscard]] FocalPair intrinsic_loss_gradient(FocalPair pred, FocalPair gt, double image_width);

/// Mean absolute opacity. Throws InvalidArgument on an empty list.
[[nodiscard]] double opacity_loss(std::span<const double> opacities);
/// d opacity_loss / d o_i = sign(o_i) / M.
[[nodiscard]] std::vector<double> opacity_loss_gradient(std::span<const double> opacities);

struct LossParts {
  double image = 0.0;
  double intrinsic = 0.0;
  double pose = 0.0;
  double opacity = 0.0;
};

/// image + lambda_intrin * intrinsic + lambda_pose * pose + lambda_opacity * opacity.
[[nodiscard]] double total_loss(const LossParts& parts, const LossWeights& w);

}  // namespace pfsplat
