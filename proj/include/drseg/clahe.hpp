#pragma once

#include "drseg/image.hpp"

namespace drseg {

struct TileGrid {
  int rows = 8;
  int cols = 8;
};

/// Contrast-limited adaptive histogram equalization of one channel.
///
/// The channel is quantized into 256 bins over [0, range_max]. Per tile,
/// the histogram is clipped at clip_limit x (mean bin height) and the
/// clipped excess is spread uniformly over all bins. Each tile's
/// equalization map sends bin q to the mass midpoint
///     (cdf(q-1) + hist(q)/2) * range_max / tile_pixels,
/// which keeps constant tiles (quasi) fixed. Output pixels blend the maps
/// of the four surrounding tile centers bilinearly; positions outside the
/// center lattice clamp to the nearest tile.
///
/// Output has the same dimensions and nominal range as the input.
/// Throws ConfigError if the tile grid does not fit the channel.
std::vector<float> clahe_channel(const std::vector<float>& channel, int height, int width,
                                 double clip_limit, TileGrid tiles, float range_max = 255.0f);

/// CLAHE on the lightness channel only: RGB -> LAB, equalize L, merge the
/// untouched A/B chroma planes back, convert to RGB.
RasterImage enhance_contrast_lab(const RasterImage& img, double clip_limit, TileGrid tiles);

}  // namespace drseg
