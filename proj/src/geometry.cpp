#include "pfsplat/geometry.hpp"

#include "pfsplat/errors.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace pfsplat {

namespace {

constexpr double kOrthoTol = 1e-6;
constexpr double kDegenerateScale = 1e-12;

}  // namespace

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw InvalidArgument("intrinsics: focal lengths must be positive");
  }
  if (width <= 0 || height <= 0) {
    throw InvalidArgument("intrinsics: image size must be positive");
  }
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
    throw InvalidArgument("intrinsics: principal point outside the image");
  }
}

CameraPose CameraPose::inverse() const {
  CameraPose inv;
  inv.rotation = rotation.transpose();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

void CameraPose::validate() const {
  if (!rotation.allFinite() || !translation.allFinite()) {
    throw InvalidArgument("pose: non-finite entries");
  }
  const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (ortho > kOrthoTol || std::abs(rotation.determinant() - 1.0) > kOrthoTol) {
    throw InvalidArgument("pose: rotation is not in SO(3)");
  }
}

CameraPose operator*(const CameraPose& a, const CameraPose& b) {
  CameraPose out;
  out.rotation = a.rotation * b.rotation;
  out.translation = a.rotation * b.translation + a.translation;
  return out;
}

Mat3 Rotation9D::matrix() const {
  Mat3 m;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      m(r, c) = values[static_cast<size_t>(3 * r + c)];
    }
  }
  return m;
}

Rotation9D Rotation9D::from_matrix(const Mat3& m) {
  Rotation9D seed;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      seed.values[static_cast<size_t>(3 * r + c)] = m(r, c);
    }
  }
  return seed;
}

std::string_view to_string(NormalizationStrategy s) {
  switch (s) {
    case NormalizationStrategy::MaxPairwise: return "max-pair";
    case NormalizationStrategy::MeanPairwise: return "mean-pair";
    case NormalizationStrategy::MaxTranslation: return "max-trans";
    case NormalizationStrategy::None: return "none";
  }
  return "none";
}

NormalizationStrategy parse_normalization(std::string_view name) {
  if (name == "max-pair") return NormalizationStrategy::MaxPairwise;
  if (name == "mean-pair") return NormalizationStrategy::MeanPairwise;
  if (name == "max-trans") return NormalizationStrategy::MaxTranslation;
  if (name == "none") return NormalizationStrategy::None;
  throw ConfigError("unknown normalization strategy '" + std::string(name) + "'");
}

Mat3 hat(const Vec3& w) {
  Mat3 m;
  m << 0.0, -w.z(), w.y(),
       w.z(), 0.0, -w.x(),
       -w.y(), w.x(), 0.0;
  return m;
}

Vec3 vee(const Mat3& m) { return {m(2, 1), m(0, 2), m(1, 0)}; }

Mat3 so3_exp(const Vec3& w) {
  const double theta = w.norm();
  if (theta < 1e-12) {
    return Mat3::Identity() + hat(w);
  }
  return Eigen::AngleAxisd(theta, w / theta).toRotationMatrix();
}

Vec3 so3_log(const Mat3& r) {
  const Eigen::AngleAxisd aa(r);
  return aa.angle() * aa.axis();
}

Mat3 orthogonalize_9d(const Rotation9D& seed) {
  const Mat3 m = seed.matrix();
  if (!m.allFinite()) {
    throw DegenerateRotation("orthogonalize_9d: seed has non-finite entries");
  }
  const Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sigma = svd.singularValues();
  if (!(sigma(0) > 0.0) || sigma(1) <= 1e-12 * sigma(0)) {
    throw DegenerateRotation("orthogonalize_9d: seed has rank < 2");
  }
  const Mat3& u = svd.matrixU();
  const Mat3& v = svd.matrixV();
  Mat3 d = Mat3::Identity();
  d(2, 2) = (u * v.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  return u * d * v.transpose();
}

std::array<double, 9> orthogonalize_9d_backward(const Rotation9D& seed, const Vec3& grad_tangent) {
  // With M = R S (S symmetric), a right tangent X of R satisfies S X + X S = R^T dM - dM^T R.
  // Solving that in the eigenbasis of S and taking the adjoint gives dL/dM = 2 R V H V^T.
  const Mat3 m = seed.matrix();
  const Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sigma = svd.singularValues();
  if (!m.allFinite() || !(sigma(0) > 0.0) || sigma(1) <= 1e-12 * sigma(0)) {
    throw DegenerateRotation("orthogonalize_9d_backward: seed has rank < 2");
  }
  const Mat3& u = svd.matrixU();
  const Mat3& v = svd.matrixV();
  Mat3 d = Mat3::Identity();
  d(2, 2) = (u * v.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  const Mat3 r = u * d * v.transpose();
  const Vec3 s(sigma(0), sigma(1), d(2, 2) * sigma(2));

  const Mat3 g_tilde = v.transpose() * (0.5 * hat(grad_tangent)) * v;
  Mat3 h = Mat3::Zero();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const double denom = s(i) + s(j);
      if (i != j && std::abs(denom) > 1e-12 * sigma(0)) {
        h(i, j) = g_tilde(i, j) / denom;
      }
    }
  }
  const Mat3 grad = 2.0 * r * v * h * v.transpose();
  return Rotation9D::from_matrix(grad).values;
}

CameraPose relative_pose(const CameraPose& p_i, const CameraPose& p_j) {
  CameraPose rel;
  rel.rotation = p_i.rotation.transpose() * p_j.rotation;
  rel.translation = p_i.rotation.transpose() * (p_j.translation - p_i.translation);
  return rel;
}

RelativePoseGradient relative_pose_backward(const CameraPose& p_i, const CameraPose& p_j,
                                            const Vec3& grad_rel_rotation,
                                            const Vec3& grad_rel_translation) {
  const CameraPose rel = relative_pose(p_i, p_j);
  RelativePoseGradient g;
  // R_rel = R_i^T R_j: right tangent w_j passes through, w_i enters as -R_rel^T w_i.
  g.rot_j = grad_rel_rotation;
  g.rot_i = -(rel.rotation * grad_rel_rotation);
  // t_rel = R_i^T (t_j - t_i)
  g.trans_j = p_i.rotation * grad_rel_translation;
  g.trans_i = -g.trans_j;
  g.rot_i += grad_rel_translation.cross(rel.translation);
  return g;
}

double normalization_scale(std::span<const CameraPose> poses, NormalizationStrategy strategy) {
  const size_t n = poses.size();
  switch (strategy) {
    case NormalizationStrategy::None:
      return 1.0;
    case NormalizationStrategy::MaxPairwise:
    case NormalizationStrategy::MeanPairwise: {
      if (n < 2) {
        throw InvalidArgument("normalize_scene: pairwise strategies need at least two poses");
      }
      double max_d = 0.0;
      double sum_d = 0.0;
      for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < n; ++j) {
          if (i == j) continue;
          const double d = (poses[i].center() - poses[j].center()).norm();
          max_d = std::max(max_d, d);
          sum_d += d;
        }
      }
      return strategy == NormalizationStrategy::MaxPairwise ? max_d
                                                            : sum_d / static_cast<double>(n * (n - 1));
    }
    case NormalizationStrategy::MaxTranslation: {
      if (n < 1) {
        throw InvalidArgument("normalize_scene: no poses");
      }
      double max_c = 0.0;
      for (const auto& p : poses) {
        max_c = std::max(max_c, p.center().norm());
      }
      return max_c;
    }
  }
  return 1.0;
}

NormalizedPoses normalize_scene(std::span<const CameraPose> poses, NormalizationStrategy strategy) {
  const double s = normalization_scale(poses, strategy);
  if (!(s >= kDegenerateScale) || !std::isfinite(s)) {
    throw DegenerateScene("normalize_scene: camera centers coincide (scale " + std::to_string(s) + ")");
  }
  NormalizedPoses out;
  out.scale = s;
  out.poses.reserve(poses.size());
  for (const auto& p : poses) {
    CameraPose q = p;
    q.translation /= s;
    out.poses.push_back(q);
  }
  return out;
}

RayMap intrinsics_to_rays(const CameraIntrinsics& k, const CameraPose& pose) {
  k.validate();
  RayMap rays;
  rays.width = k.width;
  rays.height = k.height;
  const size_t n = static_cast<size_t>(k.width) * static_cast<size_t>(k.height);
  rays.origins.assign(n, pose.center());
  rays.directions.resize(n);
  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      const Vec3 d_cam((u + 0.5 - k.cx) / k.fx, (v + 0.5 - k.cy) / k.fy, 1.0);
      rays.directions[static_cast<size_t>(v) * k.width + u] = pose.rotation * d_cam.normalized();
    }
  }
  return rays;
}

double focal_from_fov(double fov_radians, double size_pixels) {
  if (!(fov_radians > 0.0 && fov_radians < std::numbers::pi)) {
    throw InvalidArgument("focal_from_fov: field of view must lie in (0, pi)");
  }
  if (!(size_pixels > 0.0)) {
    throw InvalidArgument("focal_from_fov: image size must be positive");
  }
  return 0.5 * size_pixels / std::tan(0.5 * fov_radians);
}

double fov_from_focal(double focal_pixels, double size_pixels) {
  if (!(focal_pixels > 0.0) || !(size_pixels > 0.0)) {
    throw InvalidArgument("fov_from_focal: focal length and size must be positive");
  }
  return 2.0 * std::atan(0.5 * size_pixels / focal_pixels);
}

// atan2 of the antisymmetric and trace parts stays accurate near 0 and pi,
// where the arccos form loses half the significant digits.
double rotation_angle_between(const Mat3& a, const Mat3& b) {
  const Mat3 q = a.transpose() * b;
  return std::atan2(0.5 * vee(q - q.transpose()).norm(), 0.5 * (q.trace() - 1.0));
}

}  // namespace pfsplat
