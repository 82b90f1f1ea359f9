#pragma once

#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include "drseg/dataset.hpp"
#include "drseg/deeplab.hpp"
#include "drseg/loss.hpp"

namespace drseg {

/// Training hyperparameters. Defaults are the pipeline's standard recipe;
/// every field can be overridden from the run configuration.
struct TrainConfig {
  int image_size = 512;
  int batch_size = 4;
  int max_epochs = 30;
  std::string loss_function = "BinaryCrossentropy";
  std::string optimizer = "Adam";
  double learning_rate = 1e-4;
  std::string early_stop_monitor = "val_loss";
  int early_stop_patience = 5;
  double early_stop_min_delta = 0.0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 0;
  /// 0 = synchronous sample loading (fully deterministic, the default);
  /// 1 = one order-preserving prefetch thread.
  int loader_threads = 0;

  void validate() const;
};

struct EpochLog {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double wall_time_sec = 0.0;
};

struct EarlyStopState {
  double best_val_loss = std::numeric_limits<double>::infinity();
  int best_epoch = 0;  // 1-based; 0 = no improvement seen yet
  int epochs_since_improvement = 0;
  int patience = 5;
  double min_delta = 0.0;
  int epochs_seen = 0;
};

enum class StopDecision { kContinue, kStop };

/// Feeds one validation loss into the monitor. Improvement means strictly
/// below best - min_delta; it resets the counter and records the epoch.
/// The decision flips to kStop once the counter reaches the patience.
std::pair<EarlyStopState, StopDecision> early_stopping_step(EarlyStopState state, double val_loss);

/// Maps a manifest record to a ([0,1] image tensor (3,S,S), {0,1} target
/// tensor (1,S,S)) pair.
using SampleLoader = std::function<std::pair<Tensor, Tensor>(const SampleRecord&)>;

struct TrainCallbacks {
  std::function<void(const EpochLog&)> on_epoch;
  /// Fired whenever the monitored loss improves (checkpoint hook).
  std::function<void(SegmentationModel&, int epoch, double val_loss)> on_improvement;
};

struct TrainResult {
  std::vector<EpochLog> epochs;
  int best_epoch = 0;
  double best_val_loss = std::numeric_limits<double>::infinity();
  bool stopped_early = false;
};

/// The per-lesion training loop: epoch shuffling seeded by cfg.seed +
/// epoch, mini-batches with the final partial batch kept, per-epoch
/// validation, early stopping on val_loss, best-epoch weights restored on
/// return. Throws on an empty train/validation split and aborts with the
/// offending batch stems if the loss turns non-finite.
TrainResult train(SegmentationModel& model, const SplitManifest& split, const TrainConfig& cfg,
                  const SampleLoader& loader, const TrainCallbacks& callbacks = {});

/// Standard disk loader: reads the sample files, applies CLAHE to the
/// image, resizes both to settings.image_size.
SampleLoader make_disk_loader(const PreprocessSettings& settings);

/// Tensor conversions shared by training, evaluation and the bindings.
Tensor image_to_tensor(const RasterImage& img);  // (3,H,W) or (1,H,W), [0,1]
Tensor mask_to_tensor(const BinaryMask& mask);   // (1,H,W), {0,1}

}  // namespace drseg
