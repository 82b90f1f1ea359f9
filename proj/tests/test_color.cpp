#include <doctest.h>

#include <cmath>

#include "drseg/color.hpp"
#include "support/helpers.hpp"
#include "support/oracles.hpp"

using namespace drseg;

namespace {

RasterImage solid_rgb(float r, float g, float b) {
  RasterImage img(3, 3, 3, ColorSpace::kRgb, PixelKind::kByte);
  for (int y = 0; y < 3; ++y) {
    for (int x = 0; x < 3; ++x) {
      img.at(y, x, 0) = r;
      img.at(y, x, 1) = g;
      img.at(y, x, 2) = b;
    }
  }
  return img;
}

}  // namespace

TEST_CASE("lightness of pure black and pure white") {
  CHECK(rgb_to_lab(solid_rgb(0, 0, 0)).L[0] == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(rgb_to_lab(solid_rgb(255, 255, 255)).L[0] == doctest::Approx(100.0).epsilon(1e-6));
}

TEST_CASE("mid gray lightness matches the reference formulas") {
  const LabImage lab = rgb_to_lab(solid_rgb(128, 128, 128));
  CHECK(std::abs(lab.L[0] - 53.6) < 0.5);
  CHECK(lab.L[0] == doctest::Approx(testing::reference_lightness(128, 128, 128)).epsilon(1e-9));
  // Grays carry no chroma.
  CHECK(std::abs(lab.A[0]) < 1e-3);
  CHECK(std::abs(lab.B[0]) < 1e-3);
}

TEST_CASE("conversion rejects non-RGB input") {
  RasterImage gray(4, 4, 1, ColorSpace::kGray, PixelKind::kByte);
  CHECK_THROWS_AS(rgb_to_lab(gray), ContractError);
}

TEST_CASE("rgb -> lab -> rgb round trip within one intensity step") {
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    const RasterImage img = testing::random_rgb(13, 17, seed);
    const RasterImage back = lab_to_rgb(rgb_to_lab(img));
    for (std::size_t i = 0; i < img.data().size(); ++i) {
      CHECK(std::abs(img.data()[i] - back.data()[i]) <= 1.0f);
    }
  }
}

TEST_CASE("lab plane sizes are validated") {
  LabImage lab;
  lab.height = 2;
  lab.width = 2;
  lab.L.assign(4, 50.0f);
  lab.A.assign(3, 0.0f);  // wrong
  lab.B.assign(4, 0.0f);
  CHECK_THROWS_AS(lab_to_rgb(lab), ContractError);
}
