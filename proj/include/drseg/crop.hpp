#pragma once

#include "drseg/image.hpp"

namespace drseg {

struct CropResult {
  RasterImage image;
  CropRect rect;
  /// False when no pixel exceeded the threshold; the identity crop is
  /// returned in that case instead of an empty one.
  bool found_foreground = true;
};

/// Tight axis-aligned bounding box of all pixels whose grayscale intensity
/// exceeds `background_threshold`, expanded by `margin` pixels and clamped
/// to the image bounds. Intended to strip the dark surround (and its faint
/// color noise) from fundus photographs while keeping the circular eye
/// region intact.
CropResult crop_fundus(const RasterImage& img, float background_threshold, int margin = 0);

}  // namespace drseg
