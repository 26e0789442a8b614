#include "pfsplat/gaussians.hpp"

#include "pfsplat/errors.hpp"

#include <cmath>
#include <string>

namespace pfsplat {

Mat3 Gaussian::covariance() const {
  const Mat3 r = rotation.normalized().toRotationMatrix();
  const Vec3 var = (2.0 * log_scale).array().exp();
  return r * var.asDiagonal() * r.transpose();
}

void Gaussian::validate() const {
  if (!mean.allFinite()) {
    throw InvalidArgument("gaussian: non-finite mean");
  }
  if (!(opacity >= 0.0 && opacity <= 1.0)) {
    throw InvalidArgument("gaussian: opacity outside [0, 1]");
  }
  if (std::abs(rotation.norm() - 1.0) > 1e-6) {
    throw InvalidArgument("gaussian: rotation quaternion is not unit norm");
  }
  const Vec3 s = log_scale.array().exp();
  if (!s.allFinite() || (s.array() <= 0.0).any()) {
    throw InvalidArgument("gaussian: scale must be finite and positive");
  }
  if (!color.allFinite()) {
    throw InvalidArgument("gaussian: non-finite color");
  }
}

void GlobalScene::validate() const {
  if (provenance.size() != gaussians.size()) {
    throw InvalidArgument("global scene: provenance length " + std::to_string(provenance.size()) +
                          " != gaussian count " + std::to_string(gaussians.size()));
  }
  for (const auto& g : gaussians) {
    g.validate();
  }
}

std::vector<Gaussian> to_world(std::span<const Gaussian> local, const CameraPose& pose) {
  const Eigen::Quaterniond q_pose(pose.rotation);
  std::vector<Gaussian> out;
  out.reserve(local.size());
  for (const auto& g : local) {
    Gaussian w = g;
    w.mean = pose.rotation * g.mean + pose.translation;
    w.rotation = (q_pose * g.rotation).normalized();
    out.push_back(w);
  }
  return out;
}

std::vector<Gaussian> to_world(const LocalScene& local, const CameraPose& pose) {
  return to_world(std::span<const Gaussian>(local.gaussians), pose);
}

ToWorldGradient to_world_backward(std::span<const Gaussian> local, const CameraPose& pose,
                                  std::span<const Vec3> d_world_mean, std::span<const Mat3> d_world_cov) {
  if (d_world_mean.size() != local.size() || (!d_world_cov.empty() && d_world_cov.size() != local.size())) {
    throw InvalidArgument("to_world_backward: gradient count mismatch");
  }
  const Mat3& r = pose.rotation;
  ToWorldGradient out;
  out.d_local_mean.resize(local.size());
  for (size_t i = 0; i < local.size(); ++i) {
    const Vec3 g_local = r.transpose() * d_world_mean[i];
    out.d_local_mean[i] = g_local;
    out.d_translation += d_world_mean[i];
    // mean' = R exp(w) mu + t  =>  dL/dw = mu x (R^T g)
    out.d_rotation += local[i].mean.cross(g_local);
    if (!d_world_cov.empty()) {
      // cov' = R E cov E^T R^T, dcov' = R (hat(w) cov - cov hat(w)) R^T
      const Mat3 cov = local[i].covariance();
      const Mat3 h = r.transpose() * d_world_cov[i] * r;
      for (int k = 0; k < 3; ++k) {
        const Mat3 e = hat(Vec3::Unit(k));
        out.d_rotation(k) += (h.cwiseProduct(e * cov - cov * e)).sum();
      }
    }
  }
  return out;
}

GlobalScene aggregate(std::span<const LocalScene> locals, std::span<const CameraPose> poses) {
  if (locals.size() != poses.size()) {
    throw InvalidArgument("aggregate: " + std::to_string(locals.size()) + " views but " +
                          std::to_string(poses.size()) + " poses");
  }
  GlobalScene scene;
  size_t total = 0;
  for (const auto& l : locals) total += l.gaussians.size();
  scene.gaussians.reserve(total);
  scene.provenance.reserve(total);
  for (size_t v = 0; v < locals.size(); ++v) {
    for (auto& g : to_world(locals[v], poses[v])) {
      scene.gaussians.push_back(g);
      scene.provenance.push_back(locals[v].view_id);
    }
  }
  return scene;
}

GlobalScene prune_by_opacity(const GlobalScene& scene, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw InvalidArgument("prune_by_opacity: threshold must lie in [0, 1]");
  }
  GlobalScene out;
  for (size_t i = 0; i < scene.gaussians.size(); ++i) {
    if (scene.gaussians[i].opacity < threshold) continue;
    out.gaussians.push_back(scene.gaussians[i]);
    out.provenance.push_back(i < scene.provenance.size() ? scene.provenance[i] : 0);
  }
  return out;
}

}  // namespace pfsplat
