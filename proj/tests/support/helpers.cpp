#include "support/helpers.hpp"

#include <unistd.h>

#include <atomic>

#include "drseg/common.hpp"

namespace drseg::testing {

namespace {
std::atomic<int> g_tmp_counter{0};
}

TempDir::TempDir(const std::string& tag) {
  path_ = std::filesystem::temp_directory_path() /
          ("drseg_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
           std::to_string(g_tmp_counter++));
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

RasterImage disk_image(int size, double cy, double cx, double radius, float inside, float outside) {
  RasterImage img(size, size, 1, ColorSpace::kGray, PixelKind::kByte);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double dy = y - cy, dx = x - cx;
      img.at(y, x) = dy * dy + dx * dx <= radius * radius ? inside : outside;
    }
  }
  return img;
}

BinaryMask disk_mask(int size, double cy, double cx, double radius) {
  BinaryMask mask(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double dy = y - cy, dx = x - cx;
      mask.at(y, x) = dy * dy + dx * dx <= radius * radius ? 1 : 0;
    }
  }
  return mask;
}

RasterImage random_rgb(int height, int width, std::uint64_t seed) {
  Rng rng(seed);
  RasterImage img(height, width, 3, ColorSpace::kRgb, PixelKind::kByte);
  for (float& v : img.data()) v = static_cast<float>(rng.next_below(256));
  return img;
}

std::vector<float> random_channel(int height, int width, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> out(static_cast<std::size_t>(height) * width);
  for (float& v : out) v = static_cast<float>(rng.next_below(256));
  return out;
}

BinaryMask random_mask(int height, int width, double density, std::uint64_t seed) {
  Rng rng(seed);
  BinaryMask mask(height, width);
  for (auto& v : mask.values) v = rng.bernoulli(density) ? 1 : 0;
  return mask;
}

ModelConfig tiny_model_config(int side, std::uint64_t seed) {
  ModelConfig cfg;
  cfg.input_side = side;
  cfg.backbone = "micro";
  cfg.output_stride = 16;
  cfg.aspp_rates = {6, 12, 18};
  cfg.aspp_channels = 24;
  cfg.decoder_low_level_channels = 8;
  cfg.decoder_channels = 24;
  cfg.init_seed = seed;
  return cfg;
}

}  // namespace drseg::testing
