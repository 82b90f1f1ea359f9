#include "drseg/image.hpp"

#include <cmath>
#include <string>

namespace drseg {

RasterImage::RasterImage(int height, int width, int channels, ColorSpace cs, PixelKind kind)
    : height_(height), width_(width), channels_(channels), color_space_(cs), kind_(kind) {
  if (height < 0 || width < 0) throw ContractError("image dimensions must be non-negative");
  if (channels != 1 && channels != 3) throw ContractError("channel count must be 1 or 3");
  if (cs == ColorSpace::kRgb && channels != 3) throw ContractError("RGB images need 3 channels");
  if (cs == ColorSpace::kGray && channels != 1) throw ContractError("gray images need 1 channel");
  data_.assign(static_cast<std::size_t>(height) * width * channels, 0.0f);
}

void RasterImage::validate() const {
  const std::size_t expect = static_cast<std::size_t>(height_) * width_ * channels_;
  if (data_.size() != expect) {
    throw ContractError("image buffer size " + std::to_string(data_.size()) +
                        " does not match dimensions");
  }
  const float hi = range_max();
  for (float v : data_) {
    if (!(v >= -1e-4f && v <= hi + 1e-4f)) {
      throw ContractError("pixel value " + std::to_string(v) + " outside [0, " +
                          std::to_string(hi) + "]");
    }
  }
}

void BinaryMask::validate() const {
  const std::size_t expect = static_cast<std::size_t>(height) * width;
  if (values.size() != expect) throw ContractError("mask buffer size does not match dimensions");
  for (std::uint8_t v : values) {
    if (v > 1) throw ContractError("mask contains value " + std::to_string(int(v)) + ", expected {0,1}");
  }
}

float gray_intensity(const RasterImage& img, int y, int x) {
  if (img.channels() == 1) return img.at(y, x, 0);
  return 0.299f * img.at(y, x, 0) + 0.587f * img.at(y, x, 1) + 0.114f * img.at(y, x, 2);
}

BinaryMask mask_from_raster(const RasterImage& img) {
  if (img.channels() != 1) throw ContractError("masks must be single-channel");
  BinaryMask m(img.height(), img.width());
  for (std::size_t i = 0; i < img.data().size(); ++i) {
    float v = img.data()[i];
    if (v != 0.0f && v != 1.0f) {
      throw ContractError("mask raster contains non-binary value " + std::to_string(v));
    }
    m.values[i] = static_cast<std::uint8_t>(v);
  }
  return m;
}

RasterImage raster_from_mask(const BinaryMask& mask) {
  RasterImage img(mask.height, mask.width, 1, ColorSpace::kGray, PixelKind::kByte);
  for (std::size_t i = 0; i < mask.values.size(); ++i) img.data()[i] = mask.values[i];
  return img;
}

RasterImage crop_to(const RasterImage& img, const CropRect& rect) {
  if (rect.height < 1 || rect.width < 1) throw ContractError("crop rect must be at least 1x1");
  if (rect.top < 0 || rect.left < 0 || rect.top + rect.height > img.height() ||
      rect.left + rect.width > img.width()) {
    throw ContractError("crop rect extends outside the image");
  }
  RasterImage out(rect.height, rect.width, img.channels(), img.color_space(), img.kind());
  for (int y = 0; y < rect.height; ++y) {
    for (int x = 0; x < rect.width; ++x) {
      for (int c = 0; c < img.channels(); ++c) {
        out.at(y, x, c) = img.at(rect.top + y, rect.left + x, c);
      }
    }
  }
  return out;
}

}  // namespace drseg
