#pragma once

#include "pfsplat/geometry.hpp"

#include <filesystem>
#include <span>
#include <vector>

namespace pfsplat {

/// One splat with post-activation parameters.
struct Gaussian {
  Vec3 mean = Vec3::Zero();
  double opacity = 1.0;
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();  // (w, x, y, z), unit norm
  Vec3 log_scale = Vec3::Zero();                                  // log of per-axis std-dev
  Vec3 color = Vec3::Constant(0.5);                               // RGB in [0, 1]

  /// R diag(exp(2 log_scale)) R^T.
  [[nodiscard]] Mat3 covariance() const;

  /// Throws InvalidArgument if any invariant is broken.
  void validate() const;
};

/// Gaussians of a single view, expressed in that view's camera frame.
struct LocalScene {
  std::vector<Gaussian> gaussians;
  CameraPose pose;
  CameraIntrinsics intrinsics;
  int view_id = 0;
};

/// World-frame Gaussians with the view each one came from.
struct GlobalScene {
  std::vector<Gaussian> gaussians;
  std::vector<int> provenance;

  [[nodiscard]] size_t size() const { return gaussians.size(); }
  [[nodiscard]] bool empty() const { return gaussians.empty(); }
  /// Throws InvalidArgument when provenance and gaussians disagree in length.
  void validate() const;
};

/// mean -> R mean + t, rotation -> q(R) * rotation. Opacity, scale, color copied.
[[nodiscard]] std::vector<Gaussian> to_world(const LocalScene& local, const CameraPose& pose);
[[nodiscard]] std::vector<Gaussian> to_world(std::span<const Gaussian> local, const CameraPose& pose);

/// Gradients through to_world given dL/d(world mean) and dL/d(world covariance).
struct ToWorldGradient {
  std::vector<Vec3> d_local_mean;
  Vec3 d_rotation = Vec3::Zero();     // right-multiplied tangent of the pose rotation
  Vec3 d_translation = Vec3::Zero();
};

[[nodiscard]] ToWorldGradient to_world_backward(std::span<const Gaussian> local, const CameraPose& pose,
                                                std::span<const Vec3> d_world_mean,
                                                std::span<const Mat3> d_world_cov);

/// Union of every view transformed by its pose, ordered by view then by index.
/// Throws InvalidArgument when the pose count differs from the view count.
[[nodiscard]] GlobalScene aggregate(std::span<const LocalScene> locals, std::span<const CameraPose> poses);

/// Drops every Gaussian with opacity strictly below `threshold`, preserving order.
[[nodiscard]] GlobalScene prune_by_opacity(const GlobalScene& scene, double threshold);

}  // namespace pfsplat
