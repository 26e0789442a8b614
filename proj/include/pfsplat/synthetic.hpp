#pragma once

#include "pfsplat/gaussians.hpp"
#include "pfsplat/image.hpp"
#include "pfsplat/rasterizer.hpp"

#include <cstdint>
#include <vector>

namespace pfsplat {

/// Parameters of a procedurally generated scene. The first five fields are the
/// core knobs; the rest control the camera rig and the world frame.
struct SceneSpec {
  int num_views = 3;          // context views, chosen by farthest-point sampling
  int num_gaussians = 24;
  double camera_radius = 2.0;
  int image_size = 32;
  std::uint64_t seed = 0;

  int num_candidates = 12;    // cameras on the arc before context selection
  int num_eval = 4;           // held-out evaluation cameras
  double arc_degrees = 45.0;
  double fov_degrees = 50.0;
  double jitter = 0.05;       // relative radius jitter; also scales angular jitter
  double global_scale = 1.0;  // applied to the whole world after generation
  Vec3 origin_offset = Vec3::Zero();

  void validate() const;
};

struct View {
  int id = 0;
  CameraPose pose;
  ImageBuffer image;
};

struct SyntheticScene {
  GlobalScene gt_gaussians;
  CameraIntrinsics gt_intrinsics;
  std::vector<View> context_views;
  std::vector<View> target_views;  // training supervision besides the context views
  std::vector<View> eval_views;    // held out
  std::uint64_t seed = 0;

  [[nodiscard]] std::vector<CameraPose> gt_poses() const;
};

/// Indices of `k` points chosen greedily to maximize the minimum distance to the
/// already chosen set, starting from index 0.
[[nodiscard]] std::vector<size_t> farthest_point_sampling(std::span<const Vec3> points, size_t k);

/// Colored Gaussians in a unit box, cameras on a jittered arc looking at the
/// centroid, context views picked by farthest-point sampling over camera centers.
/// Deterministic in spec.seed.
[[nodiscard]] SyntheticScene generate_scene(const SceneSpec& spec);

/// Render settings used for every synthetic image: defaults with a black background.
[[nodiscard]] RenderConfig synthetic_render_config();

}  // namespace pfsplat
