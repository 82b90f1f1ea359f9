#pragma once

#include <cstdint>
#include <vector>

#include "drseg/common.hpp"

namespace drseg {

enum class ColorSpace { kRgb, kGray };

/// Nominal intensity range of the stored samples.
///   kByte: values in [0, 255] (the on-disk 8-bit convention)
///   kUnit: values in [0, 1] (normalized model-input convention)
enum class PixelKind { kByte, kUnit };

/// Dense H x W x C pixel grid, interleaved row-major, float samples.
/// Channel count is 1 (gray) or 3 (RGB).
class RasterImage {
 public:
  RasterImage() = default;
  RasterImage(int height, int width, int channels, ColorSpace cs,
              PixelKind kind = PixelKind::kByte);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  ColorSpace color_space() const { return color_space_; }
  PixelKind kind() const { return kind_; }
  bool empty() const { return data_.empty(); }

  float& at(int y, int x, int c = 0) { return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c]; }
  float at(int y, int x, int c = 0) const { return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c]; }

  std::vector<float>& data() { return data_; }
  const std::vector<float>& data() const { return data_; }

  float range_max() const { return kind_ == PixelKind::kByte ? 255.0f : 1.0f; }

  /// Throws ContractError if sizes disagree or any sample is outside the
  /// declared range (with a small quantization slack).
  void validate() const;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  ColorSpace color_space_ = ColorSpace::kRgb;
  PixelKind kind_ = PixelKind::kByte;
  std::vector<float> data_;
};

/// CIELAB planes. L is lightness in [0, 100]; A and B are the chroma axes.
struct LabImage {
  int height = 0;
  int width = 0;
  std::vector<float> L;
  std::vector<float> A;
  std::vector<float> B;

  std::size_t pixel_count() const { return static_cast<std::size_t>(height) * width; }
};

/// Axis-aligned crop window, inclusive of `top/left`, `height x width` pixels.
struct CropRect {
  int top = 0;
  int left = 0;
  int height = 0;
  int width = 0;

  bool operator==(const CropRect&) const = default;
};

/// Strictly two-valued pixel mask: 1 = lesion, 0 = background.
struct BinaryMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> values;

  BinaryMask() = default;
  BinaryMask(int h, int w) : height(h), width(w), values(static_cast<std::size_t>(h) * w, 0) {}

  std::uint8_t& at(int y, int x) { return values[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
  std::size_t pixel_count() const { return values.size(); }

  /// Throws ContractError if any value is not 0 or 1.
  void validate() const;
};

/// Rec. 601 luma of one pixel, in the image's own range.
float gray_intensity(const RasterImage& img, int y, int x);

/// RasterImage (single channel, values {0,1}) <-> BinaryMask.
BinaryMask mask_from_raster(const RasterImage& img);
RasterImage raster_from_mask(const BinaryMask& mask);

/// Extracts the sub-image under `rect` (must lie fully inside `img`).
RasterImage crop_to(const RasterImage& img, const CropRect& rect);

}  // namespace drseg
