#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <span>
#include <string_view>
#include <vector>

namespace pfsplat {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;

/// Pinhole camera, all quantities in pixels.
struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  /// Throws InvalidArgument unless fx, fy > 0 and the principal point lies inside the image.
  void validate() const;
};

/// Rigid camera-to-world transform. The camera looks down +z in its own frame,
/// so `translation` is also the camera center in world coordinates.
struct CameraPose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static CameraPose identity() { return {}; }

  [[nodiscard]] Vec3 center() const { return translation; }
  [[nodiscard]] CameraPose inverse() const;
  [[nodiscard]] Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

  /// Throws InvalidArgument unless the rotation is orthonormal with det +1 (tol 1e-6).
  void validate() const;
};

/// `a * b` applies b first, then a.
[[nodiscard]] CameraPose operator*(const CameraPose& a, const CameraPose& b);

/// Unconstrained 3x3 rotation seed, row-major.
struct Rotation9D {
  std::array<double, 9> values{1, 0, 0, 0, 1, 0, 0, 0, 1};

  [[nodiscard]] Mat3 matrix() const;
  static Rotation9D from_matrix(const Mat3& m);
};

/// Per-pixel rays, row-major over (v, u).
struct RayMap {
  int width = 0;
  int height = 0;
  std::vector<Vec3> origins;
  std::vector<Vec3> directions;

  [[nodiscard]] const Vec3& direction(int u, int v) const { return directions[static_cast<size_t>(v) * width + u]; }
  [[nodiscard]] const Vec3& origin(int u, int v) const { return origins[static_cast<size_t>(v) * width + u]; }
};

enum class NormalizationStrategy { MaxPairwise, MeanPairwise, MaxTranslation, None };

[[nodiscard]] std::string_view to_string(NormalizationStrategy s);
/// Accepts the CLI spellings: max-pair, mean-pair, max-trans, none.
[[nodiscard]] NormalizationStrategy parse_normalization(std::string_view name);

struct NormalizedPoses {
  std::vector<CameraPose> poses;
  double scale = 1.0;
};

// ---------------------------------------------------------------------------
// SO(3) helpers. Tangent vectors are right-multiplied: R(w) = R * exp(hat(w)).

[[nodiscard]] Mat3 hat(const Vec3& w);
[[nodiscard]] Vec3 vee(const Mat3& m);
[[nodiscard]] Mat3 so3_exp(const Vec3& w);
[[nodiscard]] Vec3 so3_log(const Mat3& r);

// ---------------------------------------------------------------------------

/// Nearest rotation (Frobenius) to the seed with determinant +1:
/// U diag(1, 1, det(U V^T)) V^T. Throws DegenerateRotation for rank < 2 or non-finite seeds.
[[nodiscard]] Mat3 orthogonalize_9d(const Rotation9D& seed);

/// Chain rule through orthogonalize_9d. `grad_tangent` is dL/dw for the
/// right-multiplied tangent at the output rotation; returns dL/dseed (row-major).
[[nodiscard]] std::array<double, 9> orthogonalize_9d_backward(const Rotation9D& seed, const Vec3& grad_tangent);

/// p_i^{-1} * p_j.
[[nodiscard]] CameraPose relative_pose(const CameraPose& p_i, const CameraPose& p_j);

/// Gradient of a loss w.r.t. the two input poses of relative_pose, given the
/// gradient w.r.t. the relative pose (rotation tangent and translation).
/// Input poses are perturbed as R <- R exp(hat(w)), t <- t + dt.
struct RelativePoseGradient {
  Vec3 rot_i = Vec3::Zero();
  Vec3 trans_i = Vec3::Zero();
  Vec3 rot_j = Vec3::Zero();
  Vec3 trans_j = Vec3::Zero();
};

[[nodiscard]] RelativePoseGradient relative_pose_backward(const CameraPose& p_i, const CameraPose& p_j,
                                                          const Vec3& grad_rel_rotation,
                                                          const Vec3& grad_rel_translation);

/// Scale statistic of the camera centers without applying it.
[[nodiscard]] double normalization_scale(std::span<const CameraPose> poses, NormalizationStrategy strategy);

/// Divides every camera center by the strategy's scale statistic. Rotations are untouched.
/// Throws DegenerateScene when the scale is below 1e-12.
[[nodiscard]] NormalizedPoses normalize_scene(std::span<const CameraPose> poses, NormalizationStrategy strategy);

/// Rays through pixel centers (u + 0.5, v + 0.5), unit directions, origins at the camera center.
[[nodiscard]] RayMap intrinsics_to_rays(const CameraIntrinsics& k, const CameraPose& pose);

[[nodiscard]] double focal_from_fov(double fov_radians, double size_pixels);
[[nodiscard]] double fov_from_focal(double focal_pixels, double size_pixels);

/// Geodesic angle between two rotations, radians.
[[nodiscard]] double rotation_angle_between(const Mat3& a, const Mat3& b);

}  // namespace pfsplat
