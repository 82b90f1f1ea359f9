#include "drseg/crop.hpp"

#include <algorithm>

namespace drseg {

CropResult crop_fundus(const RasterImage& img, float background_threshold, int margin) {
  if (img.empty()) throw ContractError("crop_fundus: empty image");
  if (margin < 0) throw ConfigError("crop_fundus: margin must be non-negative");

  int min_y = img.height(), max_y = -1, min_x = img.width(), max_x = -1;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      if (gray_intensity(img, y, x) > background_threshold) {
        min_y = std::min(min_y, y);
        max_y = std::max(max_y, y);
        min_x = std::min(min_x, x);
        max_x = std::max(max_x, x);
      }
    }
  }

  CropResult result;
  if (max_y < 0) {
    result.rect = CropRect{0, 0, img.height(), img.width()};
    result.image = img;
    result.found_foreground = false;
    return result;
  }

  min_y = std::max(0, min_y - margin);
  min_x = std::max(0, min_x - margin);
  max_y = std::min(img.height() - 1, max_y + margin);
  max_x = std::min(img.width() - 1, max_x + margin);

  result.rect = CropRect{min_y, min_x, max_y - min_y + 1, max_x - min_x + 1};
  result.image = crop_to(img, result.rect);
  result.found_foreground = true;
  return result;
}

}  // namespace drseg
