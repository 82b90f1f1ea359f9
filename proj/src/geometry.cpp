#include "drseg/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace drseg {
namespace {

float sample_bilinear(const RasterImage& img, double sy, double sx, int c) {
  // Clamp-to-edge; callers that need zero fill handle out-of-frame first.
  const int y0 = std::clamp(static_cast<int>(std::floor(sy)), 0, img.height() - 1);
  const int x0 = std::clamp(static_cast<int>(std::floor(sx)), 0, img.width() - 1);
  const int y1 = std::min(y0 + 1, img.height() - 1);
  const int x1 = std::min(x0 + 1, img.width() - 1);
  const double fy = std::clamp(sy - y0, 0.0, 1.0);
  const double fx = std::clamp(sx - x0, 0.0, 1.0);
  const double top = img.at(y0, x0, c) * (1 - fx) + img.at(y0, x1, c) * fx;
  const double bot = img.at(y1, x0, c) * (1 - fx) + img.at(y1, x1, c) * fx;
  return static_cast<float>(top * (1 - fy) + bot * fy);
}

}  // namespace

RasterImage resize_bilinear(const RasterImage& img, int out_height, int out_width) {
  if (out_height < 1 || out_width < 1) throw ContractError("resize target must be >= 1x1");
  if (out_height == img.height() && out_width == img.width()) return img;
  RasterImage out(out_height, out_width, img.channels(), img.color_space(), img.kind());
  const double sy_scale = double(img.height()) / out_height;
  const double sx_scale = double(img.width()) / out_width;
  for (int y = 0; y < out_height; ++y) {
    const double sy = (y + 0.5) * sy_scale - 0.5;
    for (int x = 0; x < out_width; ++x) {
      const double sx = (x + 0.5) * sx_scale - 0.5;
      for (int c = 0; c < img.channels(); ++c) {
        out.at(y, x, c) = sample_bilinear(img, sy, sx, c);
      }
    }
  }
  return out;
}

RasterImage resize_nearest(const RasterImage& img, int out_height, int out_width) {
  if (out_height < 1 || out_width < 1) throw ContractError("resize target must be >= 1x1");
  if (out_height == img.height() && out_width == img.width()) return img;
  RasterImage out(out_height, out_width, img.channels(), img.color_space(), img.kind());
  const double sy_scale = double(img.height()) / out_height;
  const double sx_scale = double(img.width()) / out_width;
  for (int y = 0; y < out_height; ++y) {
    const int sy = std::clamp(static_cast<int>(std::floor((y + 0.5) * sy_scale)), 0, img.height() - 1);
    for (int x = 0; x < out_width; ++x) {
      const int sx = std::clamp(static_cast<int>(std::floor((x + 0.5) * sx_scale)), 0, img.width() - 1);
      for (int c = 0; c < img.channels(); ++c) out.at(y, x, c) = img.at(sy, sx, c);
    }
  }
  return out;
}

std::pair<RasterImage, std::optional<RasterImage>> resize_pair(
    const RasterImage& img, const std::optional<RasterImage>& mask, int side) {
  if (side < 1) throw ContractError("resize_pair: side must be >= 1");
  if (mask && (mask->height() != img.height() || mask->width() != img.width())) {
    throw ContractError("resize_pair: image and mask dimensions differ");
  }
  std::optional<RasterImage> out_mask;
  if (mask) out_mask = resize_nearest(*mask, side, side);
  return {resize_bilinear(img, side, side), std::move(out_mask)};
}

RasterImage rotate(const RasterImage& img, double angle_deg, bool nearest) {
  RasterImage out(img.height(), img.width(), img.channels(), img.color_space(), img.kind());
  const double theta = angle_deg * M_PI / 180.0;
  const double c = std::cos(theta), s = std::sin(theta);
  const double cy = (img.height() - 1) / 2.0;
  const double cx = (img.width() - 1) / 2.0;
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      // Inverse map: rotate the destination point back by -theta.
      const double dx = x - cx, dy = y - cy;
      const double sx = c * dx + s * dy + cx;
      const double sy = -s * dx + c * dy + cy;
      if (nearest) {
        const int iy = static_cast<int>(std::lround(sy));
        const int ix = static_cast<int>(std::lround(sx));
        if (iy < 0 || iy >= img.height() || ix < 0 || ix >= img.width()) continue;  // fill 0
        for (int ch = 0; ch < img.channels(); ++ch) out.at(y, x, ch) = img.at(iy, ix, ch);
      } else {
        if (sy < -1.0 || sy > img.height() || sx < -1.0 || sx > img.width()) continue;
        // Blend with the zero border when the 2x2 support leaves the frame.
        const int y0 = static_cast<int>(std::floor(sy)), x0 = static_cast<int>(std::floor(sx));
        const double fy = sy - y0, fx = sx - x0;
        for (int ch = 0; ch < img.channels(); ++ch) {
          double acc = 0.0;
          for (int oy = 0; oy <= 1; ++oy) {
            for (int ox = 0; ox <= 1; ++ox) {
              const int yy = y0 + oy, xx = x0 + ox;
              if (yy < 0 || yy >= img.height() || xx < 0 || xx >= img.width()) continue;
              const double w = (oy ? fy : 1 - fy) * (ox ? fx : 1 - fx);
              acc += w * img.at(yy, xx, ch);
            }
          }
          out.at(y, x, ch) = static_cast<float>(acc);
        }
      }
    }
  }
  return out;
}

RasterImage flip_horizontal(const RasterImage& img) {
  RasterImage out(img.height(), img.width(), img.channels(), img.color_space(), img.kind());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < img.channels(); ++c) {
        out.at(y, x, c) = img.at(y, img.width() - 1 - x, c);
      }
    }
  }
  return out;
}

}  // namespace drseg
