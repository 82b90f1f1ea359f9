#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "drseg/image.hpp"

namespace drseg {

/// The four lesion categories segmented by this pipeline.
enum class LesionClass { EX, HE, MA, SE };

constexpr std::array<LesionClass, 4> kAllLesions = {LesionClass::EX, LesionClass::HE,
                                                    LesionClass::MA, LesionClass::SE};

std::string to_string(LesionClass lesion);
LesionClass lesion_from_string(const std::string& name);

/// Geometric transform applied to an augmented sample: rotation about the
/// center followed by an optional horizontal flip. Serialized with full
/// double precision so replaying it reproduces the augmented mask exactly.
struct AugmentTransform {
  double angle_deg = 0.0;
  bool flip = false;
};

struct Provenance {
  enum Kind { kOriginal, kAugmented };
  Kind kind = kOriginal;
  std::string parent_stem;          // augmented only
  std::uint64_t seed = 0;           // augmented only
  AugmentTransform transform;       // augmented only
};

struct SampleRecord {
  std::filesystem::path image_path;
  std::filesystem::path mask_path;
  LesionClass lesion = LesionClass::EX;
  Provenance provenance;

  std::string stem() const { return image_path.stem().string(); }
};

enum class Split { kTrain, kValidation, kTest };

struct SplitManifest {
  LesionClass lesion = LesionClass::EX;
  std::uint64_t seed = 0;
  std::vector<SampleRecord> train;
  std::vector<SampleRecord> validation;
  std::vector<SampleRecord> test;
};

struct SkippedFile {
  std::filesystem::path path;
  std::string reason;
};

struct LoadResult {
  std::vector<SampleRecord> records;
  std::vector<SkippedFile> skipped;
};

/// Scans `root/images` and `root/masks/<LESION>` for stem-matched pairs.
/// Records come back in lexicographic stem order. Images with no mask for
/// the requested lesion land in `skipped` rather than failing the load.
/// Throws IoError when the layout directories are missing.
LoadResult load_manifest(const std::filesystem::path& root, LesionClass lesion);

struct SplitRatios {
  double train = 0.7;
  double validation = 0.2;
  double test = 0.1;
};

/// Expected per-split sizes under the project rounding rule: half-up
/// rounding for train and validation, remainder to test, then a rebalance
/// that keeps every split non-empty for n >= 3.
struct SplitSizes {
  int train = 0;
  int validation = 0;
  int test = 0;
};
SplitSizes split_sizes(int n, const SplitRatios& ratios = {});

/// Seed-driven shuffle + partition of the original records, performed
/// before any augmentation. Same (records, seed) in -> same manifest out.
/// Throws ConfigError when fewer than 3 records are given or the ratios
/// are invalid (each positive, sum 1 within 1e-9).
SplitManifest split(const std::vector<SampleRecord>& records, LesionClass lesion,
                    std::uint64_t seed, const SplitRatios& ratios = {});

/// One random augmentation: rotation with angle uniform in [-10, +10]
/// degrees (bilinear for the image, nearest-neighbor for the mask, both
/// zero-filled at the border), then a horizontal flip with probability
/// one half. Image and mask receive the identical transform and the draw
/// is fully determined by `rng_seed`.
struct AugmentedPair {
  RasterImage image;
  RasterImage mask;
  AugmentTransform transform;
};
AugmentedPair augment_pair(const RasterImage& img, const RasterImage& mask, std::uint64_t rng_seed);

/// Replays a recorded transform (used to verify augmented artifacts).
RasterImage apply_transform(const RasterImage& img, const AugmentTransform& t, bool nearest);

/// Materializes `per_image` augmented samples for every train record into
/// `aug_dir` and returns the manifest with the augmented records appended
/// to train. Validation and test are untouched. Per-sample seeds derive
/// from the manifest seed, so rebuilding is reproducible.
SplitManifest build_training_set(const SplitManifest& manifest,
                                 const std::filesystem::path& aug_dir, int per_image = 9);

/// Line-oriented manifest persistence (tab-separated records, documented
/// in the README). Round-trips all fields including transform parameters.
void save_manifest(const SplitManifest& manifest, const std::filesystem::path& path);
SplitManifest load_split_manifest(const std::filesystem::path& path);

/// Structural checks: split disjointness by stem, augmented records only
/// in train, every augmented parent present in train. Throws ContractError.
void validate_manifest(const SplitManifest& manifest);

}  // namespace drseg
