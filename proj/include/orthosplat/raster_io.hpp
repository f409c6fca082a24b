#pragma once

#include <filesystem>

#include "orthosplat/image.hpp"

namespace orthosplat::io {

/// 8-bit PNG with 1 (gray), 3 (RGB) or 4 (RGBA) channels.
void write_png(const std::filesystem::path &path, const ImageU8 &image);
/// 16-bit PNG, samples stored losslessly.
void write_png16(const std::filesystem::path &path, const ImageU16 &image);
ImageU8 read_png(const std::filesystem::path &path);
ImageU16 read_png16(const std::filesystem::path &path);

/// PFM with 1 ("Pf") or 3 ("PF") channels, little-endian (negative scale). Rows are stored
/// bottom-to-top on disk as the format requires; in memory row 0 is the top.
void write_pfm(const std::filesystem::path &path, const Image<float> &image);
/// Accepts either byte order.
Image<float> read_pfm(const std::filesystem::path &path);

} // namespace orthosplat::io
