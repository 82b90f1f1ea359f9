#pragma once

#include <filesystem>
#include <string>

#include "drseg/deeplab.hpp"
#include "drseg/image.hpp"

namespace drseg::testing {

/// Unique scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Filled disk on a dark background.
RasterImage disk_image(int size, double cy, double cx, double radius, float inside = 200.0f,
                       float outside = 0.0f);
BinaryMask disk_mask(int size, double cy, double cx, double radius);

/// Uniform random RGB image.
RasterImage random_rgb(int height, int width, std::uint64_t seed);
/// Uniform random single-channel grid in [0, 255].
std::vector<float> random_channel(int height, int width, std::uint64_t seed);
/// Random binary mask with roughly `density` foreground.
BinaryMask random_mask(int height, int width, double density, std::uint64_t seed);

/// CPU-sized model configuration (micro backbone, thin heads).
ModelConfig tiny_model_config(int side = 64, std::uint64_t seed = 3);

}  // namespace drseg::testing
