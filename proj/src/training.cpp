#include "drseg/training.hpp"

#include <chrono>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "drseg/clahe.hpp"
#include "drseg/geometry.hpp"
#include "drseg/image_io.hpp"
#include "drseg/optim.hpp"

namespace drseg {

void TrainConfig::validate() const {
  if (image_size < 1) throw ConfigError("image_size must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (max_epochs < 0) throw ConfigError("max_epochs must be non-negative");
  if (learning_rate < 0.0) throw ConfigError("learning_rate must be non-negative");
  if (early_stop_patience < 1) throw ConfigError("early_stop_patience must be positive");
  if (early_stop_min_delta < 0.0) throw ConfigError("early_stop_min_delta must be non-negative");
  if (loss_function != "BinaryCrossentropy") {
    throw ConfigError("unsupported loss_function '" + loss_function + "'");
  }
  if (optimizer != "Adam") throw ConfigError("unsupported optimizer '" + optimizer + "'");
  if (early_stop_monitor != "val_loss") {
    throw ConfigError("unsupported early_stop_monitor '" + early_stop_monitor + "'");
  }
  if (loader_threads < 0 || loader_threads > 1) {
    throw ConfigError("loader_threads must be 0 (sync) or 1 (prefetch)");
  }
}

std::pair<EarlyStopState, StopDecision> early_stopping_step(EarlyStopState state, double val_loss) {
  if (!std::isfinite(val_loss)) throw ContractError("early_stopping_step: non-finite loss");
  ++state.epochs_seen;
  if (val_loss < state.best_val_loss - state.min_delta) {
    state.best_val_loss = val_loss;
    state.best_epoch = state.epochs_seen;
    state.epochs_since_improvement = 0;
    return {state, StopDecision::kContinue};
  }
  ++state.epochs_since_improvement;
  return {state, state.epochs_since_improvement >= state.patience ? StopDecision::kStop
                                                                  : StopDecision::kContinue};
}

Tensor image_to_tensor(const RasterImage& img) {
  Tensor t({1, img.channels(), img.height(), img.width()});
  const double scale = 1.0 / img.range_max();
  const std::size_t plane = static_cast<std::size_t>(img.height()) * img.width();
  for (int c = 0; c < img.channels(); ++c) {
    double* dst = t.data() + c * plane;
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) {
        *dst++ = std::clamp(img.at(y, x, c) * scale, 0.0, 1.0);
      }
    }
  }
  return t;
}

Tensor mask_to_tensor(const BinaryMask& mask) {
  Tensor t({1, 1, mask.height, mask.width});
  for (std::size_t i = 0; i < mask.values.size(); ++i) t[static_cast<std::int64_t>(i)] = mask.values[i];
  return t;
}

SampleLoader make_disk_loader(const PreprocessSettings& settings) {
  return [settings](const SampleRecord& rec) {
    RasterImage img = read_image(rec.image_path);
    if (img.color_space() == ColorSpace::kRgb) {
      img = enhance_contrast_lab(img, settings.clahe_clip_limit,
                                 TileGrid{settings.clahe_tile_rows, settings.clahe_tile_cols});
    }
    BinaryMask mask = read_mask(rec.mask_path);
    auto [rimg, rmask] = resize_pair(img, raster_from_mask(mask), settings.image_size);
    Tensor x = image_to_tensor(rimg);
    Tensor y = mask_to_tensor(mask_from_raster(*rmask));
    return std::make_pair(std::move(x), std::move(y));
  };
}

namespace {

struct LoadedSample {
  Tensor image;
  Tensor target;
};

/// Assembles per-sample (1,C,H,W) tensors into one batch.
Tensor stack_batch(const std::vector<const Tensor*>& samples) {
  const Tensor& first = *samples.front();
  Tensor out({static_cast<int>(samples.size()), first.dim(1), first.dim(2), first.dim(3)});
  const std::size_t block = static_cast<std::size_t>(first.dim(1)) * first.dim(2) * first.dim(3);
  for (std::size_t n = 0; n < samples.size(); ++n) {
    if (samples[n]->numel() != static_cast<std::int64_t>(block)) {
      throw ContractError("stack_batch: samples disagree on shape");
    }
    std::copy(samples[n]->data(), samples[n]->data() + block, out.data() + n * block);
  }
  return out;
}

/// Order-preserving single-thread prefetch of loaded samples.
class PrefetchQueue {
 public:
  PrefetchQueue(const std::vector<const SampleRecord*>& order, const SampleLoader& loader,
                std::size_t capacity)
      : capacity_(capacity) {
    worker_ = std::thread([this, &order, &loader] {
      try {
        for (const SampleRecord* rec : order) {
          auto [img, target] = loader(*rec);
          push(LoadedSample{std::move(img), std::move(target)});
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu_);
        error_ = std::current_exception();
        cv_.notify_all();
      }
    });
  }

  ~PrefetchQueue() {
    {
      std::lock_guard<std::mutex> lock(mu_);
      cancelled_ = true;
      cv_.notify_all();
    }
    if (worker_.joinable()) worker_.join();
  }

  LoadedSample pop() {
    std::unique_lock<std::mutex> lock(mu_);
    cv_.wait(lock, [this] { return !queue_.empty() || error_; });
    if (error_ && queue_.empty()) std::rethrow_exception(error_);
    LoadedSample s = std::move(queue_.front());
    queue_.pop_front();
    cv_.notify_all();
    return s;
  }

 private:
  void push(LoadedSample s) {
    std::unique_lock<std::mutex> lock(mu_);
    cv_.wait(lock, [this] { return queue_.size() < capacity_ || cancelled_; });
    if (cancelled_) throw IoError("prefetch cancelled");
    queue_.push_back(std::move(s));
    cv_.notify_all();
  }

  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<LoadedSample> queue_;
  std::size_t capacity_;
  bool cancelled_ = false;
  std::exception_ptr error_;
  std::thread worker_;
};

double mean_split_loss(SegmentationModel& model, const std::vector<SampleRecord>& records,
                       const SampleLoader& loader, int batch_size) {
  model.set_mode(nn::Mode::kInference);
  double loss_sum = 0.0;
  std::size_t sample_count = 0;
  for (std::size_t start = 0; start < records.size(); start += batch_size) {
    const std::size_t end = std::min(records.size(), start + batch_size);
    std::vector<LoadedSample> samples;
    std::vector<const Tensor*> imgs, targets;
    for (std::size_t i = start; i < end; ++i) {
      auto [img, target] = loader(records[i]);
      samples.push_back({std::move(img), std::move(target)});
    }
    for (const LoadedSample& s : samples) {
      imgs.push_back(&s.image);
      targets.push_back(&s.target);
    }
    const Tensor logits = model.forward_logits(stack_batch(imgs));
    loss_sum += bce_with_logits(logits, stack_batch(targets)) * double(end - start);
    sample_count += end - start;
  }
  return loss_sum / double(sample_count);
}

}  // namespace

TrainResult train(SegmentationModel& model, const SplitManifest& split, const TrainConfig& cfg,
                  const SampleLoader& loader, const TrainCallbacks& callbacks) {
  cfg.validate();
  if (cfg.max_epochs > 0) {
    if (split.train.empty()) throw ConfigError("train: empty train split");
    if (split.validation.empty()) throw ConfigError("train: empty validation split");
  }

  TrainResult result;
  AdamOptimizer optimizer(model.trainable_parameters(), cfg.learning_rate, cfg.adam_beta1,
                          cfg.adam_beta2, cfg.adam_epsilon);
  EarlyStopState stopper;
  stopper.patience = cfg.early_stop_patience;
  stopper.min_delta = cfg.early_stop_min_delta;

  std::vector<Tensor> best_state;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto epoch_start = std::chrono::steady_clock::now();

    // Deterministic per-epoch shuffle.
    std::vector<const SampleRecord*> order;
    order.reserve(split.train.size());
    for (const SampleRecord& r : split.train) order.push_back(&r);
    Rng shuffle_rng(cfg.seed + static_cast<std::uint64_t>(epoch));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng.next_below(i)]);
    }

    std::unique_ptr<PrefetchQueue> prefetch;
    if (cfg.loader_threads == 1) {
      prefetch = std::make_unique<PrefetchQueue>(order, loader, 2 * cfg.batch_size);
    }

    model.set_mode(nn::Mode::kTrain);
    double train_loss_sum = 0.0;
    std::size_t train_samples = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<LoadedSample> samples;
      for (std::size_t i = start; i < end; ++i) {
        if (prefetch) {
          samples.push_back(prefetch->pop());
        } else {
          auto [img, target] = loader(*order[i]);
          samples.push_back({std::move(img), std::move(target)});
        }
      }
      std::vector<const Tensor*> imgs, targets;
      for (const LoadedSample& s : samples) {
        imgs.push_back(&s.image);
        targets.push_back(&s.target);
      }

      Tensor grad_logits;
      const Tensor logits = model.forward_logits(stack_batch(imgs));
      const double loss = bce_with_logits(logits, stack_batch(targets), &grad_logits);
      if (!std::isfinite(loss)) {
        std::ostringstream os;
        os << "non-finite training loss at epoch " << epoch << ", batch of:";
        for (std::size_t i = start; i < end; ++i) os << ' ' << order[i]->stem();
        throw Error(os.str());
      }
      model.zero_grad();
      model.backward(grad_logits);
      optimizer.step();

      train_loss_sum += loss * double(end - start);
      train_samples += end - start;
    }

    const double val_loss = mean_split_loss(model, split.validation, loader, cfg.batch_size);
    if (!std::isfinite(val_loss)) {
      throw Error("non-finite validation loss at epoch " + std::to_string(epoch));
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = train_loss_sum / double(std::max<std::size_t>(train_samples, 1));
    log.val_loss = val_loss;
    log.wall_time_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_start).count();
    result.epochs.push_back(log);
    if (callbacks.on_epoch) callbacks.on_epoch(log);

    auto [next, decision] = early_stopping_step(stopper, val_loss);
    const bool improved = next.epochs_since_improvement == 0;
    stopper = next;
    if (improved) {
      best_state = model.state_snapshot();
      if (callbacks.on_improvement) callbacks.on_improvement(model, epoch, val_loss);
    }
    if (decision == StopDecision::kStop) {
      result.stopped_early = true;
      break;
    }
  }

  if (!best_state.empty()) model.load_state(best_state);
  model.set_mode(nn::Mode::kInference);
  result.best_epoch = stopper.best_epoch;
  result.best_val_loss = stopper.best_val_loss;
  return result;
}

}  // namespace drseg
