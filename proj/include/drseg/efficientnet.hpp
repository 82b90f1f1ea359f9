#pragma once

#include <memory>
#include <string>
#include <vector>

#include "drseg/nn.hpp"

namespace drseg::nn {

/// Inverted-bottleneck block: optional 1x1 expansion, depthwise k x k,
/// squeeze-excitation, 1x1 projection, with an identity shortcut whenever
/// the block keeps shape.
class MBConvBlock final : public Module {
 public:
  MBConvBlock(std::string name, int in_channels, int out_channels, int expand_ratio, int kernel,
              int stride, int dilation, Rng& rng);

  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& g) override;
  void set_mode(Mode mode) override;
  void collect_parameters(std::vector<Parameter*>& out) override;
  void collect_buffers(std::vector<Parameter*>& out) override;

  bool has_residual() const { return residual_; }

 private:
  std::unique_ptr<Sequential> expand_;  // null when expand_ratio == 1
  Sequential depthwise_;
  std::unique_ptr<SqueezeExcite> se_;
  Sequential project_;
  bool residual_;
};

/// EfficientNet feature extractor with two taps: the stride-4 stage for
/// the decoder skip and the final stage at the requested output stride
/// (stride-2 stages beyond it switch to stride 1 with doubled dilation).
///
/// Variants: efficientnet-b0/b1/b2/b3 (compound-scaled channel/depth
/// tables) and "micro", a miniature same-topology network for CPU-scale
/// tests and smoke runs.
class EfficientNetBackbone {
 public:
  EfficientNetBackbone(const std::string& variant, int output_stride, Rng& rng);

  struct Features {
    Tensor low;   // stride 4
    Tensor high;  // stride = output_stride
  };

  Features forward(const Tensor& x);
  /// Gradient w.r.t. the input given gradients at both taps.
  Tensor backward(const Tensor& grad_high, const Tensor& grad_low);

  void set_mode(Mode mode);
  void collect_parameters(std::vector<Parameter*>& out);
  void collect_buffers(std::vector<Parameter*>& out);

  int low_level_channels() const { return low_level_channels_; }
  int high_level_channels() const { return high_level_channels_; }
  int block_count() const { return static_cast<int>(blocks_.size()); }
  const std::string& variant() const { return variant_; }

  static bool is_known_variant(const std::string& variant);

 private:
  std::string variant_;
  Sequential stem_;
  std::vector<std::unique_ptr<MBConvBlock>> blocks_;
  int low_tap_block_ = 0;  // gradient at this block's output also receives grad_low
  int low_level_channels_ = 0;
  int high_level_channels_ = 0;
};

}  // namespace drseg::nn
