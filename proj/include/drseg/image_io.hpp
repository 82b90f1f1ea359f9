#pragma once

#include <filesystem>

#include "drseg/image.hpp"

namespace drseg {

/// Reads an 8-bit PNG or JPEG (by file extension) into a byte-range image.
/// Gray files come back single-channel; everything else as RGB.
RasterImage read_image(const std::filesystem::path& path);

/// Writes an 8-bit PNG or JPEG chosen by extension (.png/.jpg/.jpeg).
/// Unit-range images are quantized to bytes on the way out.
void write_image(const std::filesystem::path& path, const RasterImage& img);

/// Masks are stored as single-channel PNGs with values {0, 255} on disk
/// and {0, 1} in memory. Samples above 127 read as foreground.
BinaryMask read_mask(const std::filesystem::path& path);
void write_mask(const std::filesystem::path& path, const BinaryMask& mask);

}  // namespace drseg
