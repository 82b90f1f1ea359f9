#pragma once

#include <array>
#include <filesystem>
#include <map>

#include "drseg/dataset.hpp"
#include "drseg/image.hpp"

namespace drseg {

/// Bit assigned to each lesion inside a composite pixel.
inline constexpr std::uint8_t lesion_bit(LesionClass lesion) {
  switch (lesion) {
    case LesionClass::EX: return 1u << 0;
    case LesionClass::HE: return 1u << 1;
    case LesionClass::MA: return 1u << 2;
    case LesionClass::SE: return 1u << 3;
  }
  return 0;
}

/// Per-pixel set of detected lesion classes, encoded as a 4-bit mask
/// (bit0=EX, bit1=HE, bit2=MA, bit3=SE). The union is lossless: every
/// class keeps its full binary mask.
struct CompositeMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> bits;

  CompositeMask() = default;
  CompositeMask(int h, int w) : height(h), width(w), bits(static_cast<std::size_t>(h) * w, 0) {}

  std::uint8_t at(int y, int x) const { return bits[static_cast<std::size_t>(y) * width + x]; }
  bool contains(int y, int x, LesionClass lesion) const { return at(y, x) & lesion_bit(lesion); }
};

/// Multi-label union of 1..4 per-class masks (all same dimensions).
CompositeMask fuse(const std::map<LesionClass, BinaryMask>& masks);

/// Recovers one class's binary mask from the composite.
BinaryMask extract_class(const CompositeMask& comp, LesionClass lesion);

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
};

/// Rendering palette plus the order in which overlapping classes win.
/// The default draws the smallest lesions last so they stay visible.
struct ColorMap {
  std::map<LesionClass, Rgb> color = {
      {LesionClass::EX, Rgb{255, 215, 0}},   // hard exudates: gold
      {LesionClass::HE, Rgb{220, 20, 60}},   // hemorrhages: crimson
      {LesionClass::MA, Rgb{0, 191, 255}},   // microaneurysms: sky blue
      {LesionClass::SE, Rgb{50, 205, 50}},   // soft exudates: lime
  };
  /// Drawn back-to-front; the last entry ends up on top.
  std::array<LesionClass, 4> draw_priority = {LesionClass::EX, LesionClass::HE, LesionClass::SE,
                                              LesionClass::MA};

  void validate() const;  // four distinct colors, priority a permutation
};

/// Alpha-blends the top-priority class color over the base image at every
/// composite pixel; empty pixels pass the base through untouched.
RasterImage render_overlay(const RasterImage& base, const CompositeMask& comp,
                           const ColorMap& cmap = {}, double alpha = 0.5);

/// Composite persistence: single-channel PNG whose sample values are the
/// 4-bit class sets (0..15), bit-exact as documented above.
void write_composite(const std::filesystem::path& path, const CompositeMask& comp);
CompositeMask read_composite(const std::filesystem::path& path);

}  // namespace drseg
