#include "drseg/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "drseg/dataset.hpp"
#include "drseg/image.hpp"
#include "drseg/image_io.hpp"

namespace drseg {
namespace {

struct Blob {
  double cy, cx, radius;
};

bool inside(const Blob& b, int y, int x) {
  const double dy = y - b.cy, dx = x - b.cx;
  return dy * dy + dx * dx <= b.radius * b.radius;
}

}  // namespace

void generate_synthetic_dataset(const std::filesystem::path& root, const SyntheticOptions& opts) {
  if (opts.image_count < 1 || opts.size < 32) {
    throw ConfigError("synthetic dataset needs image_count >= 1 and size >= 32");
  }
  namespace fs = std::filesystem;
  fs::create_directories(root / "images");
  for (LesionClass lesion : kAllLesions) fs::create_directories(root / "masks" / to_string(lesion));

  const int s = opts.size;
  for (int index = 0; index < opts.image_count; ++index) {
    Rng rng(derive_seed(opts.seed, "image" + std::to_string(index)));

    const double eye_cy = s / 2.0 + rng.uniform(-s * 0.03, s * 0.03);
    const double eye_cx = s / 2.0 + rng.uniform(-s * 0.03, s * 0.03);
    const double eye_r = s * rng.uniform(0.40, 0.46);

    RasterImage img(s, s, 3, ColorSpace::kRgb, PixelKind::kByte);
    for (int y = 0; y < s; ++y) {
      for (int x = 0; x < s; ++x) {
        const double dy = y - eye_cy, dx = x - eye_cx;
        const double d = std::sqrt(dy * dy + dx * dx);
        if (d <= eye_r) {
          // Reddish fundus with a radial vignette.
          const double fall = 1.0 - 0.45 * (d / eye_r) * (d / eye_r);
          img.at(y, x, 0) = static_cast<float>(std::clamp(
              (165.0 + rng.uniform(-8, 8)) * fall, 0.0, 255.0));
          img.at(y, x, 1) = static_cast<float>(std::clamp(
              (82.0 + rng.uniform(-6, 6)) * fall, 0.0, 255.0));
          img.at(y, x, 2) = static_cast<float>(std::clamp(
              (36.0 + rng.uniform(-5, 5)) * fall, 0.0, 255.0));
        } else {
          // Near-black surround with subtle color noise.
          img.at(y, x, 0) = static_cast<float>(rng.uniform(0, 7));
          img.at(y, x, 1) = static_cast<float>(rng.uniform(0, 7));
          img.at(y, x, 2) = static_cast<float>(rng.uniform(0, 7));
        }
      }
    }

    const std::string stem = "SYN_" + std::string(index < 9 ? "0" : "") + std::to_string(index + 1);
    for (LesionClass lesion : kAllLesions) {
      const int blob_count = 1 + static_cast<int>(rng.next_below(3));
      std::vector<Blob> blobs;
      for (int b = 0; b < blob_count; ++b) {
        const double angle = rng.uniform(0.0, 2.0 * M_PI);
        const double dist = rng.uniform(0.0, eye_r * 0.6);
        Blob blob;
        blob.cy = eye_cy + dist * std::sin(angle);
        blob.cx = eye_cx + dist * std::cos(angle);
        blob.radius = lesion == LesionClass::MA ? rng.uniform(1.0, 2.0)
                                                : rng.uniform(s * 0.03, s * 0.07);
        blobs.push_back(blob);
      }

      BinaryMask mask(s, s);
      for (int y = 0; y < s; ++y) {
        for (int x = 0; x < s; ++x) {
          for (const Blob& blob : blobs) {
            if (inside(blob, y, x)) {
              mask.at(y, x) = 1;
              // Tint the photograph so lesions are learnable.
              switch (lesion) {
                case LesionClass::EX:
                  img.at(y, x, 0) = 235;
                  img.at(y, x, 1) = 220;
                  img.at(y, x, 2) = 90;
                  break;
                case LesionClass::HE:
                  img.at(y, x, 0) = 110;
                  img.at(y, x, 1) = 18;
                  img.at(y, x, 2) = 14;
                  break;
                case LesionClass::MA:
                  img.at(y, x, 0) = 140;
                  img.at(y, x, 1) = 30;
                  img.at(y, x, 2) = 26;
                  break;
                case LesionClass::SE:
                  img.at(y, x, 0) = 215;
                  img.at(y, x, 1) = 205;
                  img.at(y, x, 2) = 160;
                  break;
              }
              break;
            }
          }
        }
      }
      write_mask(root / "masks" / to_string(lesion) / (stem + ".png"), mask);
    }
    write_image(root / "images" / (stem + ".png"), img);
  }
}

}  // namespace drseg
