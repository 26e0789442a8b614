#pragma once

#include "pfsplat/geometry.hpp"
#include "pfsplat/image.hpp"

#include <span>
#include <vector>

namespace pfsplat {

/// PSNR for values in [0, 1]; 99 dB when the MSE is below 1e-10.
inline constexpr double kPsnrCap = 99.0;

[[nodiscard]] double psnr(const ImageBuffer& a, const ImageBuffer& b);

struct SsimOptions {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
};

/// Mean SSIM over every fully contained Gaussian-weighted window, per channel,
/// averaged over channels. Throws InvalidArgument when the image is smaller than
/// the window or the shapes differ.
[[nodiscard]] double ssim(const ImageBuffer& a, const ImageBuffer& b, const SsimOptions& opt = {});

/// SSIM together with its gradient with respect to `a`.
struct SsimWithGradient {
  double value = 0.0;
  ImageBuffer d_a;
};

[[nodiscard]] SsimWithGradient ssim_with_gradient(const ImageBuffer& a, const ImageBuffer& b,
                                                  const SsimOptions& opt = {});

/// Rotation and translation-direction errors of one view pair, degrees.
struct PoseErrorPair {
  double rotation_error = 0.0;
  double translation_angle_error = 0.0;
};

/// For every ordered pair i != j compares the predicted relative pose against the
/// ground-truth one. The translation error is the angle between directions, so
/// it ignores scale. Throws InvalidArgument for mismatched or < 2 poses.
[[nodiscard]] std::vector<PoseErrorPair> pose_errors(std::span<const CameraPose> pred,
                                                     std::span<const CameraPose> gt);

enum class PoseErrorAggregation { Max, RotationOnly };

/// Normalized area under the recall-vs-threshold step curve on [0, T] for each
/// threshold T (degrees): mean over samples of max(0, T - e) / T.
[[nodiscard]] std::vector<double> pose_auc(std::span<const PoseErrorPair> errors,
                                           std::span<const double> thresholds_deg,
                                           PoseErrorAggregation aggregation = PoseErrorAggregation::Max);

}  // namespace pfsplat
