#include "drseg/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "drseg/geometry.hpp"
#include "drseg/image_io.hpp"

namespace drseg {

std::string to_string(LesionClass lesion) {
  switch (lesion) {
    case LesionClass::EX: return "EX";
    case LesionClass::HE: return "HE";
    case LesionClass::MA: return "MA";
    case LesionClass::SE: return "SE";
  }
  throw ContractError("invalid LesionClass value");
}

LesionClass lesion_from_string(const std::string& name) {
  for (LesionClass l : kAllLesions) {
    if (to_string(l) == name) return l;
  }
  throw ConfigError("unknown lesion class '" + name + "' (expected EX, HE, MA or SE)");
}

LoadResult load_manifest(const std::filesystem::path& root, LesionClass lesion) {
  namespace fs = std::filesystem;
  const fs::path image_dir = root / "images";
  const fs::path mask_dir = root / "masks" / to_string(lesion);
  if (!fs::is_directory(image_dir)) throw IoError("missing image directory " + image_dir.string());
  if (!fs::is_directory(mask_dir)) throw IoError("missing mask directory " + mask_dir.string());

  std::map<std::string, fs::path> masks_by_stem;
  for (const auto& entry : fs::directory_iterator(mask_dir)) {
    if (entry.is_regular_file()) masks_by_stem[entry.path().stem().string()] = entry.path();
  }

  std::vector<fs::path> images;
  for (const auto& entry : fs::directory_iterator(image_dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string ext = entry.path().extension().string();
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".PNG" || ext == ".JPG") {
      images.push_back(entry.path());
    }
  }
  std::sort(images.begin(), images.end(),
            [](const fs::path& a, const fs::path& b) { return a.stem().string() < b.stem().string(); });

  LoadResult result;
  for (const fs::path& img : images) {
    auto it = masks_by_stem.find(img.stem().string());
    if (it == masks_by_stem.end()) {
      result.skipped.push_back({img, "no " + to_string(lesion) + " mask with matching stem"});
      continue;
    }
    SampleRecord rec;
    rec.image_path = img;
    rec.mask_path = it->second;
    rec.lesion = lesion;
    rec.provenance.kind = Provenance::kOriginal;
    result.records.push_back(std::move(rec));
  }
  return result;
}

SplitSizes split_sizes(int n, const SplitRatios& ratios) {
  if (ratios.train <= 0 || ratios.validation <= 0 || ratios.test <= 0 ||
      std::abs(ratios.train + ratios.validation + ratios.test - 1.0) > 1e-9) {
    throw ConfigError("split ratios must be positive and sum to 1");
  }
  if (n < 3) throw ConfigError("cannot produce three non-empty splits from " + std::to_string(n) + " records");

  // Half-up rounding for train and validation; test takes the remainder.
  SplitSizes s;
  s.train = static_cast<int>(std::floor(ratios.train * n + 0.5));
  s.validation = static_cast<int>(std::floor(ratios.validation * n + 0.5));
  s.validation = std::min(s.validation, n - s.train);
  s.test = n - s.train - s.validation;

  // Degenerate small n: shift one sample out of the largest split so all
  // three stay non-empty (the Table-sized inputs are unaffected).
  auto largest = [&]() -> int* {
    int* p = &s.train;
    if (s.validation > *p) p = &s.validation;
    if (s.test > *p) p = &s.test;
    return p;
  };
  while (s.train < 1 || s.validation < 1 || s.test < 1) {
    int* small = s.train < 1 ? &s.train : (s.validation < 1 ? &s.validation : &s.test);
    int* big = largest();
    if (big == small || *big <= 1) throw ConfigError("cannot rebalance splits for n=" + std::to_string(n));
    --*big;
    ++*small;
  }
  return s;
}

SplitManifest split(const std::vector<SampleRecord>& records, LesionClass lesion,
                    std::uint64_t seed, const SplitRatios& ratios) {
  if (records.empty()) throw ConfigError("split: no records");
  const SplitSizes sizes = split_sizes(static_cast<int>(records.size()), ratios);

  // Seeded Fisher-Yates, pinned to the project Rng so the same seed gives
  // the same membership on any platform.
  std::vector<SampleRecord> pool = records;
  Rng rng(derive_seed(seed, "split"));
  for (std::size_t i = pool.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.next_below(i));
    std::swap(pool[i - 1], pool[j]);
  }

  SplitManifest manifest;
  manifest.lesion = lesion;
  manifest.seed = seed;
  manifest.train.assign(pool.begin(), pool.begin() + sizes.train);
  manifest.validation.assign(pool.begin() + sizes.train, pool.begin() + sizes.train + sizes.validation);
  manifest.test.assign(pool.begin() + sizes.train + sizes.validation, pool.end());
  return manifest;
}

AugmentedPair augment_pair(const RasterImage& img, const RasterImage& mask, std::uint64_t rng_seed) {
  if (img.height() != mask.height() || img.width() != mask.width()) {
    throw ContractError("augment_pair: image and mask dimensions differ");
  }
  Rng rng(rng_seed);
  AugmentTransform t;
  t.angle_deg = rng.uniform(-10.0, 10.0);
  t.flip = rng.bernoulli(0.5);

  AugmentedPair out;
  out.transform = t;
  out.image = apply_transform(img, t, /*nearest=*/false);
  out.mask = apply_transform(mask, t, /*nearest=*/true);
  return out;
}

RasterImage apply_transform(const RasterImage& img, const AugmentTransform& t, bool nearest) {
  RasterImage result = rotate(img, t.angle_deg, nearest);
  if (t.flip) result = flip_horizontal(result);
  return result;
}

SplitManifest build_training_set(const SplitManifest& manifest,
                                 const std::filesystem::path& aug_dir, int per_image) {
  if (manifest.train.empty()) throw ConfigError("build_training_set: empty train split");
  if (per_image < 0) throw ConfigError("build_training_set: per_image must be >= 0");
  std::filesystem::create_directories(aug_dir / "images");
  std::filesystem::create_directories(aug_dir / "masks");

  SplitManifest out = manifest;
  for (const SampleRecord& rec : manifest.train) {
    if (rec.provenance.kind != Provenance::kOriginal) {
      throw ContractError("build_training_set: train split already contains augmented records");
    }
    const RasterImage img = read_image(rec.image_path);
    const RasterImage mask = raster_from_mask(read_mask(rec.mask_path));
    for (int k = 0; k < per_image; ++k) {
      const std::uint64_t seed = derive_seed(manifest.seed, rec.stem() + "#aug" + std::to_string(k));
      AugmentedPair pair = augment_pair(img, mask, seed);

      SampleRecord aug;
      const std::string name = rec.stem() + "_aug" + std::to_string(k);
      aug.image_path = aug_dir / "images" / (name + ".png");
      aug.mask_path = aug_dir / "masks" / (name + ".png");
      aug.lesion = rec.lesion;
      aug.provenance.kind = Provenance::kAugmented;
      aug.provenance.parent_stem = rec.stem();
      aug.provenance.seed = seed;
      aug.provenance.transform = pair.transform;

      write_image(aug.image_path, pair.image);
      write_mask(aug.mask_path, mask_from_raster(pair.mask));
      out.train.push_back(std::move(aug));
    }
  }
  return out;
}

namespace {

const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kValidation: return "validation";
    case Split::kTest: return "test";
  }
  return "?";
}

std::string format_provenance(const Provenance& p) {
  if (p.kind == Provenance::kOriginal) return "original";
  char buf[160];
  std::snprintf(buf, sizeof(buf), "augmented(parent=%s,angle=%.17g,flip=%d)",
                p.parent_stem.c_str(), p.transform.angle_deg, p.transform.flip ? 1 : 0);
  return buf;
}

Provenance parse_provenance(const std::string& text) {
  Provenance p;
  if (text == "original") return p;
  char parent[96] = {0};
  double angle = 0.0;
  int flip = 0;
  if (std::sscanf(text.c_str(), "augmented(parent=%95[^,],angle=%lg,flip=%d)", parent, &angle, &flip) != 3) {
    throw ContractError("malformed provenance field: " + text);
  }
  p.kind = Provenance::kAugmented;
  p.parent_stem = parent;
  p.transform.angle_deg = angle;
  p.transform.flip = flip != 0;
  return p;
}

void write_records(std::ofstream& out, Split split, const std::vector<SampleRecord>& records) {
  for (const SampleRecord& r : records) {
    out << split_name(split) << '\t' << r.image_path.string() << '\t' << r.mask_path.string()
        << '\t' << to_string(r.lesion) << '\t' << format_provenance(r.provenance) << '\t'
        << r.provenance.seed << '\n';
  }
}

}  // namespace

void save_manifest(const SplitManifest& manifest, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest " + path.string());
  out << "# drseg split manifest v1\n";
  out << "# lesion\t" << to_string(manifest.lesion) << "\tseed\t" << manifest.seed << '\n';
  out << "# columns: split\timage\tmask\tlesion\tprovenance\tseed\n";
  write_records(out, Split::kTrain, manifest.train);
  write_records(out, Split::kValidation, manifest.validation);
  write_records(out, Split::kTest, manifest.test);
  if (!out) throw IoError("write failure on " + path.string());
}

SplitManifest load_split_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read manifest " + path.string());
  SplitManifest manifest;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream hs(line);
      std::string hash, key;
      hs >> hash >> key;
      if (key == "lesion") {
        std::string lesion_name, seed_key;
        std::uint64_t seed = 0;
        hs >> lesion_name >> seed_key >> seed;
        manifest.lesion = lesion_from_string(lesion_name);
        manifest.seed = seed;
        header_seen = true;
      }
      continue;
    }
    std::istringstream ls(line);
    std::string split_field, image, mask, lesion, provenance, seed_field;
    if (!std::getline(ls, split_field, '\t') || !std::getline(ls, image, '\t') ||
        !std::getline(ls, mask, '\t') || !std::getline(ls, lesion, '\t') ||
        !std::getline(ls, provenance, '\t') || !std::getline(ls, seed_field, '\t')) {
      throw ContractError("malformed manifest line: " + line);
    }
    SampleRecord rec;
    rec.image_path = image;
    rec.mask_path = mask;
    rec.lesion = lesion_from_string(lesion);
    rec.provenance = parse_provenance(provenance);
    rec.provenance.seed = std::stoull(seed_field);

    if (split_field == "train") {
      manifest.train.push_back(std::move(rec));
    } else if (split_field == "validation") {
      manifest.validation.push_back(std::move(rec));
    } else if (split_field == "test") {
      manifest.test.push_back(std::move(rec));
    } else {
      throw ContractError("unknown split '" + split_field + "' in manifest");
    }
  }
  if (!header_seen) throw ContractError("manifest missing header: " + path.string());
  return manifest;
}

void validate_manifest(const SplitManifest& manifest) {
  auto stems_of = [](const std::vector<SampleRecord>& records) {
    std::set<std::string> stems;
    for (const SampleRecord& r : records) {
      stems.insert(r.provenance.kind == Provenance::kOriginal ? r.stem() : r.provenance.parent_stem);
    }
    return stems;
  };
  const std::set<std::string> train = stems_of(manifest.train);
  const std::set<std::string> val = stems_of(manifest.validation);
  const std::set<std::string> test = stems_of(manifest.test);

  for (const std::string& s : val) {
    if (train.count(s)) throw ContractError("image '" + s + "' appears in both train and validation");
    if (test.count(s)) throw ContractError("image '" + s + "' appears in both validation and test");
  }
  for (const std::string& s : test) {
    if (train.count(s)) throw ContractError("image '" + s + "' appears in both train and test");
  }
  for (const SampleRecord& r : manifest.validation) {
    if (r.provenance.kind != Provenance::kOriginal) throw ContractError("augmented record in validation split");
  }
  for (const SampleRecord& r : manifest.test) {
    if (r.provenance.kind != Provenance::kOriginal) throw ContractError("augmented record in test split");
  }
  std::set<std::string> train_originals;
  for (const SampleRecord& r : manifest.train) {
    if (r.provenance.kind == Provenance::kOriginal) train_originals.insert(r.stem());
  }
  for (const SampleRecord& r : manifest.train) {
    if (r.provenance.kind == Provenance::kAugmented && !train_originals.count(r.provenance.parent_stem)) {
      throw ContractError("augmented record '" + r.stem() + "' has no parent in train");
    }
  }
}

}  // namespace drseg
