#include "drseg/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "drseg/image_io.hpp"

namespace drseg {

CompositeMask fuse(const std::map<LesionClass, BinaryMask>& masks) {
  if (masks.empty() || masks.size() > 4) throw ContractError("fuse: expected 1 to 4 masks");
  const BinaryMask& first = masks.begin()->second;
  for (const auto& [lesion, mask] : masks) {
    if (mask.height != first.height || mask.width != first.width) {
      throw ContractError("fuse: mask dimensions differ for " + to_string(lesion));
    }
    mask.validate();
  }
  CompositeMask comp(first.height, first.width);
  for (const auto& [lesion, mask] : masks) {
    const std::uint8_t bit = lesion_bit(lesion);
    for (std::size_t i = 0; i < mask.values.size(); ++i) {
      if (mask.values[i]) comp.bits[i] |= bit;
    }
  }
  return comp;
}

BinaryMask extract_class(const CompositeMask& comp, LesionClass lesion) {
  BinaryMask mask(comp.height, comp.width);
  const std::uint8_t bit = lesion_bit(lesion);
  for (std::size_t i = 0; i < comp.bits.size(); ++i) mask.values[i] = (comp.bits[i] & bit) ? 1 : 0;
  return mask;
}

void ColorMap::validate() const {
  if (color.size() != 4) throw ConfigError("ColorMap: need a color for each of the 4 classes");
  std::set<std::uint32_t> distinct;
  for (const auto& [lesion, rgb] : color) {
    distinct.insert((std::uint32_t(rgb.r) << 16) | (std::uint32_t(rgb.g) << 8) | rgb.b);
  }
  if (distinct.size() != 4) throw ConfigError("ColorMap: colors must be distinct");
  std::set<LesionClass> perm(draw_priority.begin(), draw_priority.end());
  if (perm.size() != 4) throw ConfigError("ColorMap: draw_priority must be a permutation");
}

RasterImage render_overlay(const RasterImage& base, const CompositeMask& comp,
                           const ColorMap& cmap, double alpha) {
  if (base.height() != comp.height || base.width() != comp.width) {
    throw ContractError("render_overlay: base and composite dimensions differ");
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ContractError("render_overlay: alpha outside [0, 1]");
  cmap.validate();

  RasterImage out(base.height(), base.width(), 3, ColorSpace::kRgb, PixelKind::kByte);
  const float scale = base.kind() == PixelKind::kUnit ? 255.0f : 1.0f;
  for (int y = 0; y < base.height(); ++y) {
    for (int x = 0; x < base.width(); ++x) {
      float r, g, b;
      if (base.channels() == 3) {
        r = base.at(y, x, 0) * scale;
        g = base.at(y, x, 1) * scale;
        b = base.at(y, x, 2) * scale;
      } else {
        r = g = b = base.at(y, x, 0) * scale;
      }
      if (std::uint8_t set = comp.at(y, x); set != 0) {
        // Last matching priority entry wins (drawn on top).
        Rgb top{};
        for (LesionClass lesion : cmap.draw_priority) {
          if (set & lesion_bit(lesion)) top = cmap.color.at(lesion);
        }
        r = static_cast<float>((1.0 - alpha) * r + alpha * top.r);
        g = static_cast<float>((1.0 - alpha) * g + alpha * top.g);
        b = static_cast<float>((1.0 - alpha) * b + alpha * top.b);
      }
      out.at(y, x, 0) = std::round(r);
      out.at(y, x, 1) = std::round(g);
      out.at(y, x, 2) = std::round(b);
    }
  }
  return out;
}

void write_composite(const std::filesystem::path& path, const CompositeMask& comp) {
  RasterImage img(comp.height, comp.width, 1, ColorSpace::kGray, PixelKind::kByte);
  for (std::size_t i = 0; i < comp.bits.size(); ++i) {
    if (comp.bits[i] > 15) throw ContractError("composite contains bits outside the 4 classes");
    img.data()[i] = comp.bits[i];
  }
  write_image(path, img);
}

CompositeMask read_composite(const std::filesystem::path& path) {
  RasterImage img = read_image(path);
  if (img.channels() != 1) throw IoError("composite file must be single-channel: " + path.string());
  CompositeMask comp(img.height(), img.width());
  for (std::size_t i = 0; i < comp.bits.size(); ++i) {
    const float v = img.data()[i];
    if (v < 0 || v > 15 || v != std::floor(v)) {
      throw IoError("composite file contains non-bitmask value " + std::to_string(v));
    }
    comp.bits[i] = static_cast<std::uint8_t>(v);
  }
  return comp;
}

}  // namespace drseg
