#include "drseg/color.hpp"

#include <algorithm>
#include <cmath>

namespace drseg {
namespace {

// D65 reference white.
constexpr double kXn = 0.95047;
constexpr double kYn = 1.0;
constexpr double kZn = 1.08883;

constexpr double kDelta = 6.0 / 29.0;

double srgb_to_linear(double c) {
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

double linear_to_srgb(double c) {
  return c <= 0.0031308 ? 12.92 * c : 1.055 * std::pow(c, 1.0 / 2.4) - 0.055;
}

double lab_f(double t) {
  return t > kDelta * kDelta * kDelta ? std::cbrt(t) : t / (3.0 * kDelta * kDelta) + 4.0 / 29.0;
}

double lab_f_inv(double t) {
  return t > kDelta ? t * t * t : 3.0 * kDelta * kDelta * (t - 4.0 / 29.0);
}

}  // namespace

LabImage rgb_to_lab(const RasterImage& img) {
  if (img.color_space() != ColorSpace::kRgb || img.channels() != 3) {
    throw ContractError("rgb_to_lab requires a 3-channel RGB image");
  }
  LabImage lab;
  lab.height = img.height();
  lab.width = img.width();
  lab.L.resize(lab.pixel_count());
  lab.A.resize(lab.pixel_count());
  lab.B.resize(lab.pixel_count());

  const double scale = 1.0 / img.range_max();
  std::size_t i = 0;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x, ++i) {
      double r = srgb_to_linear(img.at(y, x, 0) * scale);
      double g = srgb_to_linear(img.at(y, x, 1) * scale);
      double b = srgb_to_linear(img.at(y, x, 2) * scale);

      double X = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
      double Y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
      double Z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;

      double fx = lab_f(X / kXn);
      double fy = lab_f(Y / kYn);
      double fz = lab_f(Z / kZn);

      lab.L[i] = static_cast<float>(116.0 * fy - 16.0);
      lab.A[i] = static_cast<float>(500.0 * (fx - fy));
      lab.B[i] = static_cast<float>(200.0 * (fy - fz));
    }
  }
  return lab;
}

RasterImage lab_to_rgb(const LabImage& lab, PixelKind kind) {
  if (lab.L.size() != lab.pixel_count() || lab.A.size() != lab.pixel_count() ||
      lab.B.size() != lab.pixel_count()) {
    throw ContractError("LAB planes must all be height x width");
  }
  RasterImage img(lab.height, lab.width, 3, ColorSpace::kRgb, kind);
  const double out_max = img.range_max();

  std::size_t i = 0;
  for (int y = 0; y < lab.height; ++y) {
    for (int x = 0; x < lab.width; ++x, ++i) {
      double fy = (lab.L[i] + 16.0) / 116.0;
      double fx = fy + lab.A[i] / 500.0;
      double fz = fy - lab.B[i] / 200.0;

      double X = kXn * lab_f_inv(fx);
      double Y = kYn * lab_f_inv(fy);
      double Z = kZn * lab_f_inv(fz);

      double r = 3.2404542 * X - 1.5371385 * Y - 0.4985314 * Z;
      double g = -0.9692660 * X + 1.8760108 * Y + 0.0415560 * Z;
      double b = 0.0556434 * X - 0.2040259 * Y + 1.0572252 * Z;

      auto encode = [&](double c) {
        double v = linear_to_srgb(std::clamp(c, 0.0, 1.0)) * out_max;
        if (kind == PixelKind::kByte) v = std::round(v);
        return static_cast<float>(std::clamp(v, 0.0, out_max));
      };
      img.at(y, x, 0) = encode(r);
      img.at(y, x, 1) = encode(g);
      img.at(y, x, 2) = encode(b);
    }
  }
  return img;
}

}  // namespace drseg
