#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "drseg/efficientnet.hpp"
#include "drseg/image.hpp"
#include "drseg/nn.hpp"

namespace drseg {

/// Photometric + geometric settings a trained model depends on. They ride
/// along in every checkpoint; evaluation refuses to run when they differ
/// from what the caller asks for.
struct PreprocessSettings {
  float crop_threshold = 15.0f;
  int crop_margin = 0;
  double clahe_clip_limit = 2.0;
  int clahe_tile_rows = 8;
  int clahe_tile_cols = 8;
  int image_size = 512;

  bool operator==(const PreprocessSettings&) const = default;
};

struct ModelConfig {
  int input_side = 512;
  std::string backbone = "efficientnet-b0";
  int output_stride = 16;
  std::vector<int> aspp_rates = {6, 12, 18};
  int aspp_channels = 256;
  int decoder_low_level_channels = 48;
  int decoder_channels = 256;
  int num_output_channels = 1;
  /// Path to a backbone checkpoint; empty means random initialization.
  std::string pretrained_backbone;
  bool freeze_backbone = false;
  std::uint64_t init_seed = 0;

  void validate() const;  // throws ConfigError
  bool operator==(const ModelConfig&) const = default;
};

namespace nn {

/// Spatial pyramid: a 1x1 branch, one atrous separable 3x3 branch per
/// configured rate, and a pooled image-level branch, fused by a 1x1
/// projection.
class Aspp {
 public:
  Aspp(int in_channels, const std::vector<int>& rates, int out_channels, Rng& rng);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& g);
  void set_mode(Mode mode);
  void collect_parameters(std::vector<Parameter*>& out);
  void collect_buffers(std::vector<Parameter*>& out);

  /// Branch descriptors in graph order, e.g. "conv1x1",
  /// "atrous_separable3x3_rate6", "image_pool".
  std::vector<std::string> branch_names() const { return branch_names_; }

 private:
  std::vector<std::unique_ptr<Sequential>> branches_;  // 1x1 + atrous branches
  GlobalAvgPool pool_;
  Sequential pool_conv_;
  Sequential project_;
  std::vector<std::string> branch_names_;
  int out_channels_;
  int cached_h_ = 0, cached_w_ = 0;
};

/// Upsamples the pyramid output, concatenates the projected low-level
/// backbone feature, refines with separable convolutions and emits
/// full-resolution 1-channel logits.
class DeeplabDecoder {
 public:
  DeeplabDecoder(int aspp_channels, int low_level_in, int low_level_proj, int refined_channels,
                 int num_outputs, int output_stride, Rng& rng);

  Tensor forward(const Tensor& aspp_out, const Tensor& low_level);
  /// Returns (grad wrt aspp_out, grad wrt low_level).
  std::pair<Tensor, Tensor> backward(const Tensor& grad_logits);
  void set_mode(Mode mode);
  void collect_parameters(std::vector<Parameter*>& out);
  void collect_buffers(std::vector<Parameter*>& out);

  int low_level_projected_channels() const { return low_proj_channels_; }

 private:
  Sequential low_project_;
  UpsampleBilinear up_to_skip_;
  Sequential refine_;
  Sequential head_;
  UpsampleBilinear up_to_input_;
  int aspp_channels_;
  int low_proj_channels_;
};

}  // namespace nn

/// Structure summary used by tests and the CLI to confirm the graph has
/// the advertised pieces.
struct ModelIntrospection {
  std::string backbone;
  int backbone_blocks = 0;
  int low_level_channels = 0;
  int high_level_channels = 0;
  std::vector<std::string> aspp_branches;
  bool decoder_uses_low_level_skip = false;
  int head_output_channels = 0;
  bool sigmoid_output = false;
  std::int64_t parameter_count = 0;
};

/// DeepLabv3+ binary segmentation network. forward() takes NCHW batches
/// with values in [0, 1] (standardization happens inside) and returns
/// per-pixel foreground probabilities in (0, 1).
class SegmentationModel {
 public:
  explicit SegmentationModel(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }

  Tensor forward(const Tensor& batch);         // probabilities, no caching
  Tensor forward_logits(const Tensor& batch);  // honors current mode
  Tensor backward(const Tensor& grad_logits);

  void set_mode(nn::Mode mode);
  std::vector<nn::Parameter*> parameters();
  std::vector<nn::Parameter*> buffers();
  std::vector<nn::Parameter*> trainable_parameters();
  std::int64_t parameter_count();
  void zero_grad();

  ModelIntrospection introspect();

  /// Copies of every parameter+buffer tensor, and the inverse (used by
  /// restore-best and by tests).
  std::vector<Tensor> state_snapshot();
  void load_state(const std::vector<Tensor>& state);

 private:
  void check_input(const Tensor& batch) const;

  ModelConfig cfg_;
  nn::Normalize normalize_;
  nn::EfficientNetBackbone backbone_;
  nn::Aspp aspp_;
  nn::DeeplabDecoder decoder_;
  nn::Mode mode_ = nn::Mode::kInference;
};

/// Probability clamp applied to model outputs; matches the loss epsilon.
constexpr double kProbEpsilon = 1e-7;

/// Thresholds a probability map (shape (H,W) or (1,1,H,W)): pixel = 1 iff
/// p >= threshold. Throws ContractError when values leave [0,1] or the
/// threshold leaves (0,1).
BinaryMask binarize(const Tensor& probs, double threshold = 0.5);

/// Extracts sample n / channel 0 of an NCHW tensor as an (H,W) map.
Tensor slice_map(const Tensor& batch, int n);

struct Checkpoint {
  ModelConfig config;
  PreprocessSettings preprocess;
  std::unique_ptr<SegmentationModel> model;
};

void save_checkpoint(SegmentationModel& model, const PreprocessSettings& preprocess,
                     const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace drseg
