#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "drseg/dataset.hpp"
#include "drseg/deeplab.hpp"
#include "drseg/metrics.hpp"
#include "drseg/training.hpp"

namespace drseg {

/// Everything one pipeline invocation needs. Assembled from CLI flags and
/// an optional key=value config file; see parse_config_file.
struct RunConfig {
  std::filesystem::path dataset_root;
  std::filesystem::path output_dir;
  std::vector<LesionClass> lesions = {LesionClass::EX, LesionClass::HE, LesionClass::MA,
                                      LesionClass::SE};
  PreprocessSettings preprocess;
  TrainConfig train;
  ModelConfig model;
  std::uint64_t seed = 0;
  bool overwrite = false;

  void validate(bool needs_dataset_root) const;
};

/// Flat key=value configuration file (# comments, blank lines ignored).
/// Unknown keys are rejected so typos fail loudly.
void apply_config_file(RunConfig& cfg, const std::filesystem::path& path);
/// Applies one "key=value" assignment (also used for --set flags).
void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value);

/// Stage drivers. Each writes only its own artifact directory beneath
/// cfg.output_dir, plus a JSON stage manifest for reproducibility. When
/// the stage directory already has outputs and cfg.overwrite is false the
/// stage is skipped (clean no-op); with overwrite it is rebuilt from
/// scratch, never partially mixed.

struct StageStatus {
  bool skipped = false;
  std::string message;
};

StageStatus run_preprocess(const RunConfig& cfg, LesionClass lesion);
StageStatus run_split(const RunConfig& cfg, LesionClass lesion);
StageStatus run_augment(const RunConfig& cfg, LesionClass lesion);
StageStatus run_train(const RunConfig& cfg, LesionClass lesion);

struct EvaluateOptions {
  /// Replaces the model with a predictor that replays the ground truth —
  /// a pipeline self-test; the resulting report must be perfect.
  bool oracle = false;
};
StageStatus run_evaluate(const RunConfig& cfg, LesionClass lesion, const EvaluateOptions& = {});

struct InferOptions {
  /// Explicit inputs; when empty the lesion's test split is used.
  std::vector<std::filesystem::path> inputs;
};
StageStatus run_infer(const RunConfig& cfg, LesionClass lesion, const InferOptions& = {});

StageStatus run_fuse(const RunConfig& cfg);
StageStatus run_report(const RunConfig& cfg);

/// Artifact locations (all relative to cfg.output_dir).
std::filesystem::path preprocessed_dir(const RunConfig& cfg, LesionClass lesion);
std::filesystem::path split_manifest_path(const RunConfig& cfg, LesionClass lesion);
std::filesystem::path train_manifest_path(const RunConfig& cfg, LesionClass lesion);
std::filesystem::path model_dir(const RunConfig& cfg, LesionClass lesion);
std::filesystem::path checkpoint_path(const RunConfig& cfg, LesionClass lesion);
std::filesystem::path eval_dir(const RunConfig& cfg, LesionClass lesion);
std::filesystem::path infer_dir(const RunConfig& cfg, LesionClass lesion);
std::filesystem::path fused_dir(const RunConfig& cfg);
std::filesystem::path report_path(const RunConfig& cfg);

}  // namespace drseg
