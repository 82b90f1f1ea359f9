#pragma once

#include <optional>
#include <utility>

#include "drseg/image.hpp"

namespace drseg {

/// Square-stretch resize of an image, with its mask kept in lockstep.
/// Images are resampled bilinearly (half-pixel centers); masks use
/// nearest-neighbor so they stay strictly binary. Aspect ratio is not
/// preserved: both outputs are side x side.
///
/// Throws ContractError if the mask is present with different dimensions.
std::pair<RasterImage, std::optional<RasterImage>> resize_pair(
    const RasterImage& img, const std::optional<RasterImage>& mask, int side);

/// Bilinear resize to an arbitrary target (used by resize_pair).
RasterImage resize_bilinear(const RasterImage& img, int out_height, int out_width);

/// Nearest-neighbor resize (value-set preserving).
RasterImage resize_nearest(const RasterImage& img, int out_height, int out_width);

/// Rotation about the image center by `angle_deg` (counterclockwise
/// positive). Samples bilinearly for images, nearest-neighbor when
/// `nearest` is set; out-of-frame samples fill with 0.
RasterImage rotate(const RasterImage& img, double angle_deg, bool nearest);

/// Mirror around the vertical axis.
RasterImage flip_horizontal(const RasterImage& img);

}  // namespace drseg
