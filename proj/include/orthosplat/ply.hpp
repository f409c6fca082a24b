#pragma once

#include <filesystem>

#include "orthosplat/core.hpp"

namespace orthosplat::io {

/// Binary little-endian splat PLY: x, y, z; f_dc_0..2; f_rest_* (0, 9, 24 or 45);
/// opacity as a logit; scale_0, scale_1 as logs; rot_0..3 as (w, x, y, z).
core::SplatScene read_splat_ply(const std::filesystem::path &path);
void write_splat_ply(const core::SplatScene &scene, const std::filesystem::path &path);

double logit(double p);
double sigmoid(double x);

} // namespace orthosplat::io
