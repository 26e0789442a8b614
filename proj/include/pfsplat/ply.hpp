#pragma once

#include "pfsplat/gaussians.hpp"

#include <filesystem>

namespace pfsplat {

/// Zeroth-order spherical-harmonic basis constant used by the splat PLY layout.
inline constexpr double kShC0 = 0.28209479177387814;

/// Writes the common binary little-endian splat layout with 14 float properties:
/// x y z f_dc_0..2 opacity scale_0..2 rot_0..3. Colors are stored as SH DC
/// coefficients, opacity as a logit, and scales as logs.
void export_ply(const GlobalScene& scene, const std::filesystem::path& path);

/// Inverse of export_ply. Properties may appear in any order but no others are
/// accepted. Provenance is not stored in the file; imported scenes have view 0.
/// Throws PlyHeaderError, PlyTruncatedError or PlyPropertyError.
[[nodiscard]] GlobalScene import_ply(const std::filesystem::path& path);

}  // namespace pfsplat
