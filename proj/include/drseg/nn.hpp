#pragma once

#include <memory>
#include <string>
#include <vector>

#include "drseg/tensor.hpp"

namespace drseg::nn {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;
};

enum class Mode { kInference, kTrain };

/// Layer base. forward() in kTrain mode caches whatever backward() needs;
/// kInference skips the caches (and switches batch-norm to running stats).
/// backward() consumes the gradient w.r.t. the layer output, accumulates
/// into parameter grads, and returns the gradient w.r.t. the input.
class Module {
 public:
  virtual ~Module() = default;

  virtual Tensor forward(const Tensor& input) = 0;
  virtual Tensor backward(const Tensor& grad_output) = 0;

  virtual void set_mode(Mode mode) { mode_ = mode; }
  Mode mode() const { return mode_; }

  /// Trainable parameters, in graph order.
  virtual void collect_parameters(std::vector<Parameter*>&) {}
  /// Persistent non-trainable state (batch-norm running stats).
  virtual void collect_buffers(std::vector<Parameter*>&) {}

 protected:
  bool training() const { return mode_ == Mode::kTrain; }
  Mode mode_ = Mode::kInference;
};

/// Fixed per-channel standardization applied to [0,1] inputs.
class Normalize final : public Module {
 public:
  Normalize(std::vector<double> mean, std::vector<double> std);
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& g) override;

 private:
  std::vector<double> mean_, std_;
};

/// 2-D convolution with implicit "same" padding: pad = dilation*(k-1)/2.
/// Supports dense (groups=1) and depthwise (groups=in=out) convolutions.
class Conv2d final : public Module {
 public:
  Conv2d(std::string name, int in_channels, int out_channels, int kernel, int stride,
         int dilation, int groups, bool bias, Rng& rng);

  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& g) override;
  void collect_parameters(std::vector<Parameter*>& out) override;

  int in_channels() const { return in_channels_; }
  int out_channels() const { return out_channels_; }
  int kernel() const { return kernel_; }
  int stride() const { return stride_; }
  int dilation() const { return dilation_; }
  int groups() const { return groups_; }

 private:
  Tensor forward_dense(const Tensor& x);
  Tensor forward_depthwise(const Tensor& x);
  Tensor backward_dense(const Tensor& g);
  Tensor backward_depthwise(const Tensor& g);

  int in_channels_, out_channels_, kernel_, stride_, dilation_, groups_, pad_;
  bool has_bias_;
  Parameter weight_;
  Parameter bias_;
  Tensor cached_input_;
};

/// Standard batch normalization over (N, H, W) per channel.
class BatchNorm2d final : public Module {
 public:
  BatchNorm2d(std::string name, int channels, double eps = 1e-3, double momentum = 0.01);

  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& g) override;
  void collect_parameters(std::vector<Parameter*>& out) override;
  void collect_buffers(std::vector<Parameter*>& out) override;

 private:
  int channels_;
  double eps_, momentum_;
  Parameter gamma_, beta_;
  Parameter running_mean_, running_var_;
  Tensor cached_input_;
  std::vector<double> cached_mean_, cached_inv_std_;
};

class ReLU final : public Module {
 public:
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& g) override;

 private:
  Tensor cached_input_;
};

/// x * sigmoid(x).
class Swish final : public Module {
 public:
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& g) override;

 private:
  Tensor cached_input_;
};

class Sigmoid final : public Module {
 public:
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& g) override;

 private:
  Tensor cached_output_;
};

/// N,C,H,W -> N,C,1,1 spatial mean.
class GlobalAvgPool final : public Module {
 public:
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& g) override;

 private:
  int cached_h_ = 0, cached_w_ = 0;
};

/// Channel re-weighting: pool -> 1x1 reduce -> swish -> 1x1 expand ->
/// sigmoid -> scale the input.
class SqueezeExcite final : public Module {
 public:
  SqueezeExcite(std::string name, int channels, int squeezed_channels, Rng& rng);

  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& g) override;
  void set_mode(Mode mode) override;
  void collect_parameters(std::vector<Parameter*>& out) override;

 private:
  GlobalAvgPool pool_;
  Conv2d reduce_;
  Swish swish_;
  Conv2d expand_;
  Sigmoid sigmoid_;
  Tensor cached_input_, cached_scale_;
};

/// Bilinear upsampling by an integer factor (half-pixel alignment).
class UpsampleBilinear final : public Module {
 public:
  explicit UpsampleBilinear(int scale);
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& g) override;

 private:
  int scale_;
  std::vector<int> cached_in_shape_;
};

class Sequential final : public Module {
 public:
  Sequential() = default;

  template <typename M, typename... Args>
  M* emplace(Args&&... args) {
    auto mod = std::make_unique<M>(std::forward<Args>(args)...);
    M* raw = mod.get();
    modules_.push_back(std::move(mod));
    return raw;
  }

  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& g) override;
  void set_mode(Mode mode) override;
  void collect_parameters(std::vector<Parameter*>& out) override;
  void collect_buffers(std::vector<Parameter*>& out) override;

  std::size_t size() const { return modules_.size(); }

 private:
  std::vector<std::unique_ptr<Module>> modules_;
};

/// Concatenates same-spatial tensors along the channel axis.
Tensor concat_channels(const std::vector<const Tensor*>& parts);
/// Splits a channel-axis gradient back into per-part gradients.
std::vector<Tensor> split_channels(const Tensor& t, const std::vector<int>& channel_counts);

}  // namespace drseg::nn
