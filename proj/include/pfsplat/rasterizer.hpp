#pragma once

#include "pfsplat/gaussians.hpp"
#include "pfsplat/image.hpp"

#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace pfsplat {

struct RenderConfig {
  int tile_size = 16;
  double near_plane = 0.01;
  double far_plane = 1000.0;
  double alpha_floor = 1.0 / 255.0;   // splats contributing less than this are skipped
  double transmittance_stop = 1e-4;   // a pixel stops once T would fall below this
  Vec3 background = Vec3::Zero();

  void validate() const;
};

/// Low-pass floor added to each diagonal entry of the image-space covariance, px^2.
inline constexpr double kCovarianceFloor = 0.3;
/// Per-splat opacity cap.
inline constexpr double kAlphaCap = 0.99;

/// A Gaussian after the view transform and perspective projection.
struct Projection {
  Vec2 mean;        // pixels
  Mat2 covariance;  // J W Sigma W^T J^T + floor, pixels^2
  double depth = 0.0;
  Vec3 camera_point;
};

/// Projects a world-space Gaussian; nullopt when its mean is outside (near, far).
[[nodiscard]] std::optional<Projection> project(const Gaussian& g, const CameraPose& pose, const CameraIntrinsics& k,
                                                double near_plane = 0.01, double far_plane = 1000.0);

/// Tile-based front-to-back alpha compositing, sorted by mean depth (stable by index).
[[nodiscard]] ImageBuffer render(const GlobalScene& scene, const CameraPose& pose, const CameraIntrinsics& k,
                                 const RenderConfig& cfg = {});

struct RenderGradients {
  std::vector<Vec3> d_mean;     // world means
  std::vector<Vec3> d_color;
  std::vector<double> d_opacity;
  std::vector<Mat3> d_cov;      // world covariance (symmetric); feeds the to_world chain
  Vec6 d_pose = Vec6::Zero();   // rendering camera: (rotation tangent, translation)
};

/// Analytic gradient of <d_image, render(...)> with respect to world means, colors,
/// opacities, world covariances and the rendering camera. The camera is perturbed as
/// R <- R exp(hat(w)), t <- t + dt. Culled Gaussians get zero gradients.
[[nodiscard]] RenderGradients render_backward(const GlobalScene& scene, const CameraPose& pose,
                                              const CameraIntrinsics& k, const RenderConfig& cfg,
                                              const ImageBuffer& d_image);

/// One forward pass whose intermediate state is kept for a later backward pass.
/// render() and render_backward() are thin wrappers around it.
class RenderPass {
 public:
  RenderPass(const GlobalScene& scene, const CameraPose& pose, const CameraIntrinsics& k, const RenderConfig& cfg);
  ~RenderPass();
  RenderPass(RenderPass&&) noexcept;
  RenderPass& operator=(RenderPass&&) noexcept;

  [[nodiscard]] const ImageBuffer& image() const;
  [[nodiscard]] RenderGradients backward(const ImageBuffer& d_image) const;

 private:
  struct State;
  std::unique_ptr<State> state_;
};

}  // namespace pfsplat
