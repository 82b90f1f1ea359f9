#pragma once

#include <filesystem>

#include "drseg/common.hpp"

namespace drseg {

/// Knobs for the bundled synthetic fundus fixture. The generated tree is
/// layout-compatible with the real dataset root (images/ plus
/// masks/<LESION>/ with shared stems), so the whole pipeline runs on it.
struct SyntheticOptions {
  int image_count = 4;
  int size = 64;
  std::uint64_t seed = 7;
};

/// Writes `image_count` synthetic fundus photographs (dark noisy surround,
/// bright circular eye region, small per-class lesion blobs) plus one
/// binary mask per lesion class under `root`.
void generate_synthetic_dataset(const std::filesystem::path& root, const SyntheticOptions& opts);

}  // namespace drseg
