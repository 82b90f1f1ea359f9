#pragma once

// Independent reference implementations used as test oracles. These are
// deliberately written as straightforward, unoptimized transcriptions of
// the published definitions, sharing no code with the library versions
// they check.

#include <cstdint>
#include <span>
#include <vector>

#include "drseg/image.hpp"

namespace drseg::testing {

/// Straightforward CLAHE: per-tile histograms, clip at clip_limit x mean
/// bin height, uniform excess redistribution, midpoint equalization map
/// evaluated by direct cdf summation per pixel, clamped bilinear blend of
/// the four nearest tile centers.
std::vector<float> reference_clahe(const std::vector<float>& channel, int height, int width,
                                   double clip_limit, int tile_rows, int tile_cols,
                                   float range_max = 255.0f);

/// Brute-force foreground bounding box: scans every pixel.
struct BoundingBox {
  int top = 0, left = 0, height = 0, width = 0;
  bool found = false;
};
BoundingBox reference_foreground_box(const RasterImage& img, float threshold);

/// Table-style ratio metrics computed by direct pixel enumeration of the
/// two masks (no shared counting code with the library).
struct ReferenceRatios {
  double accuracy, specificity, sensitivity, precision, f1, iou;
};
ReferenceRatios reference_ratios(const BinaryMask& pred, const BinaryMask& truth);

/// AUC as the tie-adjusted pairwise concordance probability.
double reference_auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

/// Reference sRGB -> L (lightness) for a single pixel, transcribed from
/// the standard formulas (D65).
double reference_lightness(double r8, double g8, double b8);

}  // namespace drseg::testing
