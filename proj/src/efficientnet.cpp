#include "drseg/efficientnet.hpp"

#include <cmath>

namespace drseg::nn {
namespace {

struct StageSpec {
  int expand_ratio;
  int channels;
  int repeats;
  int stride;
  int kernel;
};

struct VariantSpec {
  int stem_channels;
  double width_mult;
  double depth_mult;
  std::vector<StageSpec> stages;
};

const std::vector<StageSpec> kBaseStages = {
    {1, 16, 1, 1, 3}, {6, 24, 2, 2, 3}, {6, 40, 2, 2, 5}, {6, 80, 3, 2, 3},
    {6, 112, 3, 1, 5}, {6, 192, 4, 2, 5}, {6, 320, 1, 1, 3},
};

// Small same-topology network: every block kind (expansion, k5, stride,
// dilation, residual repeat) is still exercised, at CPU-test cost.
const std::vector<StageSpec> kMicroStages = {
    {1, 8, 1, 1, 3}, {2, 12, 1, 2, 3}, {2, 16, 1, 2, 5}, {2, 24, 1, 2, 3},
    {2, 32, 2, 1, 5}, {2, 48, 1, 2, 5}, {2, 64, 1, 1, 3},
};

int round_filters(int filters, double width_mult, int divisor = 8) {
  const double scaled = filters * width_mult;
  int rounded = std::max(divisor, int(scaled + divisor / 2.0) / divisor * divisor);
  if (rounded < 0.9 * scaled) rounded += divisor;
  return rounded;
}

int round_repeats(int repeats, double depth_mult) {
  return static_cast<int>(std::ceil(depth_mult * repeats));
}

VariantSpec variant_spec(const std::string& variant) {
  if (variant == "micro") return {8, 1.0, 1.0, kMicroStages};
  if (variant == "efficientnet-b0") return {32, 1.0, 1.0, kBaseStages};
  if (variant == "efficientnet-b1") return {32, 1.0, 1.1, kBaseStages};
  if (variant == "efficientnet-b2") return {32, 1.1, 1.2, kBaseStages};
  if (variant == "efficientnet-b3") return {40, 1.2, 1.4, kBaseStages};
  throw ConfigError("unknown backbone '" + variant +
                    "' (expected efficientnet-b0..b3 or micro)");
}

constexpr double kSeRatio = 0.25;

}  // namespace

// ---------------------------------------------------------------------------
// MBConvBlock

MBConvBlock::MBConvBlock(std::string name, int in_channels, int out_channels, int expand_ratio,
                         int kernel, int stride, int dilation, Rng& rng) {
  const int mid = in_channels * expand_ratio;
  if (expand_ratio != 1) {
    expand_ = std::make_unique<Sequential>();
    expand_->emplace<Conv2d>(name + ".expand.conv", in_channels, mid, 1, 1, 1, 1, false, rng);
    expand_->emplace<BatchNorm2d>(name + ".expand.bn", mid);
    expand_->emplace<Swish>();
  }
  depthwise_.emplace<Conv2d>(name + ".depthwise.conv", mid, mid, kernel, stride, dilation, mid,
                             false, rng);
  depthwise_.emplace<BatchNorm2d>(name + ".depthwise.bn", mid);
  depthwise_.emplace<Swish>();

  const int squeezed = std::max(1, static_cast<int>(in_channels * kSeRatio));
  se_ = std::make_unique<SqueezeExcite>(name + ".se", mid, squeezed, rng);

  project_.emplace<Conv2d>(name + ".project.conv", mid, out_channels, 1, 1, 1, 1, false, rng);
  project_.emplace<BatchNorm2d>(name + ".project.bn", out_channels);

  residual_ = stride == 1 && in_channels == out_channels;
}

Tensor MBConvBlock::forward(const Tensor& x) {
  Tensor y = expand_ ? expand_->forward(x) : x;
  y = depthwise_.forward(y);
  y = se_->forward(y);
  y = project_.forward(y);
  if (residual_) y.add_(x);
  return y;
}

Tensor MBConvBlock::backward(const Tensor& g) {
  Tensor dx = project_.backward(g);
  dx = se_->backward(dx);
  dx = depthwise_.backward(dx);
  if (expand_) dx = expand_->backward(dx);
  if (residual_) dx.add_(g);
  return dx;
}

void MBConvBlock::set_mode(Mode mode) {
  Module::set_mode(mode);
  if (expand_) expand_->set_mode(mode);
  depthwise_.set_mode(mode);
  se_->set_mode(mode);
  project_.set_mode(mode);
}

void MBConvBlock::collect_parameters(std::vector<Parameter*>& out) {
  if (expand_) expand_->collect_parameters(out);
  depthwise_.collect_parameters(out);
  se_->collect_parameters(out);
  project_.collect_parameters(out);
}

void MBConvBlock::collect_buffers(std::vector<Parameter*>& out) {
  if (expand_) expand_->collect_buffers(out);
  depthwise_.collect_buffers(out);
  project_.collect_buffers(out);
}

// ---------------------------------------------------------------------------
// EfficientNetBackbone

bool EfficientNetBackbone::is_known_variant(const std::string& variant) {
  try {
    variant_spec(variant);
    return true;
  } catch (const ConfigError&) {
    return false;
  }
}

EfficientNetBackbone::EfficientNetBackbone(const std::string& variant, int output_stride, Rng& rng)
    : variant_(variant) {
  const VariantSpec spec = variant_spec(variant);
  if (output_stride != 8 && output_stride != 16) {
    throw ConfigError("output stride must be 8 or 16");
  }

  const int stem_channels = round_filters(spec.stem_channels, spec.width_mult);
  stem_.emplace<Conv2d>("backbone.stem.conv", 3, stem_channels, 3, 2, 1, 1, false, rng);
  stem_.emplace<BatchNorm2d>("backbone.stem.bn", stem_channels);
  stem_.emplace<Swish>();

  int current_stride = 2;
  int current_dilation = 1;
  int in_channels = stem_channels;
  int block_index = 0;
  for (std::size_t stage = 0; stage < spec.stages.size(); ++stage) {
    const StageSpec& s = spec.stages[stage];
    const int out_channels = round_filters(s.channels, spec.width_mult);
    const int repeats = round_repeats(s.repeats, spec.depth_mult);
    for (int r = 0; r < repeats; ++r) {
      int stride = r == 0 ? s.stride : 1;
      if (stride == 2) {
        if (current_stride == output_stride) {
          // Keep resolution: trade the stride for a doubled dilation.
          stride = 1;
          current_dilation *= 2;
        } else {
          current_stride *= 2;
        }
      }
      blocks_.push_back(std::make_unique<MBConvBlock>(
          "backbone.block" + std::to_string(block_index), in_channels, out_channels,
          s.expand_ratio, s.kernel, stride, current_dilation, rng));
      in_channels = out_channels;
      ++block_index;
    }
    if (stage == 1) {
      low_tap_block_ = block_index;  // end of the stride-4 stage
      low_level_channels_ = in_channels;
    }
  }
  high_level_channels_ = in_channels;
}

EfficientNetBackbone::Features EfficientNetBackbone::forward(const Tensor& x) {
  Features f;
  Tensor y = stem_.forward(x);
  for (int i = 0; i < static_cast<int>(blocks_.size()); ++i) {
    y = blocks_[i]->forward(y);
    if (i + 1 == low_tap_block_) f.low = y;
  }
  f.high = std::move(y);
  return f;
}

Tensor EfficientNetBackbone::backward(const Tensor& grad_high, const Tensor& grad_low) {
  Tensor g = grad_high;
  for (int i = static_cast<int>(blocks_.size()) - 1; i >= 0; --i) {
    if (i + 1 == low_tap_block_ && !grad_low.empty()) g.add_(grad_low);
    g = blocks_[i]->backward(g);
  }
  return stem_.backward(g);
}

void EfficientNetBackbone::set_mode(Mode mode) {
  stem_.set_mode(mode);
  for (auto& b : blocks_) b->set_mode(mode);
}

void EfficientNetBackbone::collect_parameters(std::vector<Parameter*>& out) {
  stem_.collect_parameters(out);
  for (auto& b : blocks_) b->collect_parameters(out);
}

void EfficientNetBackbone::collect_buffers(std::vector<Parameter*>& out) {
  stem_.collect_buffers(out);
  for (auto& b : blocks_) b->collect_buffers(out);
}

}  // namespace drseg::nn
