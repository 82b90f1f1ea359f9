#pragma once

#include "drseg/image.hpp"

namespace drseg {

/// sRGB -> CIELAB under the D65 illuminant (standard sRGB companding,
/// 2-degree observer). This is the one canonical conversion used across
/// the project so stored artifacts stay stable.
///
/// Throws ContractError for non-RGB input.
LabImage rgb_to_lab(const RasterImage& img);

/// Inverse conversion. Output samples are clamped to the byte range;
/// the round trip reproduces inputs within quantization error.
RasterImage lab_to_rgb(const LabImage& lab, PixelKind kind = PixelKind::kByte);

}  // namespace drseg
