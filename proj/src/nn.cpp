#include "drseg/nn.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>

namespace drseg::nn {
namespace {

void require_4d(const Tensor& t, const char* who) {
  if (t.ndim() != 4) throw ContractError(std::string(who) + ": expected a 4-D NCHW tensor, got " + t.shape_string());
}

int conv_out_size(int in, int kernel, int stride, int dilation, int pad) {
  return (in + 2 * pad - dilation * (kernel - 1) - 1) / stride + 1;
}

/// C = alpha * op(A) op(B) + beta * C, row-major.
void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha, const double* a,
          int lda, const double* b, int ldb, double beta, double* c, int ldc) {
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

/// Unrolls one sample's conv receptive fields into a (C*k*k, Hout*Wout)
/// matrix. `x_n` points at the sample's (C, H, W) block.
void im2col(const double* x_n, int channels, int height, int width, int kernel, int stride,
            int dilation, int pad, int out_h, int out_w, double* cols) {
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  const std::size_t out_plane = static_cast<std::size_t>(out_h) * out_w;
  double* col = cols;
  for (int c = 0; c < channels; ++c) {
    const double* src = x_n + c * plane;
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky * dilation;
          if (iy < 0 || iy >= height) {
            std::fill(col, col + out_w, 0.0);
            col += out_w;
            continue;
          }
          const double* row = src + static_cast<std::size_t>(iy) * width;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + kx * dilation;
            *col++ = (ix >= 0 && ix < width) ? row[ix] : 0.0;
          }
        }
      }
    }
  }
  (void)out_plane;
}

/// Transpose of im2col: accumulates a cols-shaped gradient back into the
/// (C, H, W) input gradient block.
void col2im(const double* cols, int channels, int height, int width, int kernel, int stride,
            int dilation, int pad, int out_h, int out_w, double* dx_n) {
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  const double* col = cols;
  for (int c = 0; c < channels; ++c) {
    double* dst = dx_n + c * plane;
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky * dilation;
          if (iy < 0 || iy >= height) {
            col += out_w;
            continue;
          }
          double* row = dst + static_cast<std::size_t>(iy) * width;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + kx * dilation;
            if (ix >= 0 && ix < width) row[ix] += col[ox];
          }
          col += out_w;
        }
      }
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Normalize

Normalize::Normalize(std::vector<double> mean, std::vector<double> std)
    : mean_(std::move(mean)), std_(std::move(std)) {
  if (mean_.size() != std_.size()) throw ConfigError("Normalize: mean/std size mismatch");
  for (double s : std_) {
    if (s <= 0.0) throw ConfigError("Normalize: std values must be positive");
  }
}

Tensor Normalize::forward(const Tensor& x) {
  require_4d(x, "Normalize");
  if (x.dim(1) != static_cast<int>(mean_.size())) {
    throw ContractError("Normalize: channel count mismatch");
  }
  Tensor out = x;
  const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  for (int n = 0; n < x.dim(0); ++n) {
    for (int c = 0; c < x.dim(1); ++c) {
      double* p = out.data() + (static_cast<std::size_t>(n) * x.dim(1) + c) * plane;
      const double m = mean_[c], inv = 1.0 / std_[c];
      for (std::size_t i = 0; i < plane; ++i) p[i] = (p[i] - m) * inv;
    }
  }
  return out;
}

Tensor Normalize::backward(const Tensor& g) {
  Tensor out = g;
  const std::size_t plane = static_cast<std::size_t>(g.dim(2)) * g.dim(3);
  for (int n = 0; n < g.dim(0); ++n) {
    for (int c = 0; c < g.dim(1); ++c) {
      double* p = out.data() + (static_cast<std::size_t>(n) * g.dim(1) + c) * plane;
      const double inv = 1.0 / std_[c];
      for (std::size_t i = 0; i < plane; ++i) p[i] *= inv;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Conv2d

Conv2d::Conv2d(std::string name, int in_channels, int out_channels, int kernel, int stride,
               int dilation, int groups, bool bias, Rng& rng)
    : in_channels_(in_channels),
      out_channels_(out_channels),
      kernel_(kernel),
      stride_(stride),
      dilation_(dilation),
      groups_(groups),
      pad_(dilation * (kernel - 1) / 2),
      has_bias_(bias) {
  if (kernel % 2 == 0) throw ConfigError("Conv2d: only odd kernels are supported");
  if (groups != 1 && !(groups == in_channels && groups == out_channels)) {
    throw ConfigError("Conv2d: groups must be 1 (dense) or equal to channels (depthwise)");
  }
  if (in_channels % groups != 0) throw ConfigError("Conv2d: channels not divisible by groups");

  weight_.name = name + ".weight";
  weight_.value = Tensor({out_channels, in_channels / groups, kernel, kernel});
  weight_.grad = Tensor({out_channels, in_channels / groups, kernel, kernel});
  const int fan_in = (in_channels / groups) * kernel * kernel;
  const double std_dev = std::sqrt(2.0 / fan_in);
  for (std::int64_t i = 0; i < weight_.value.numel(); ++i) {
    weight_.value[i] = rng.next_normal() * std_dev;
  }
  if (has_bias_) {
    bias_.name = name + ".bias";
    bias_.value = Tensor({out_channels});
    bias_.grad = Tensor({out_channels});
  }
}

void Conv2d::collect_parameters(std::vector<Parameter*>& out) {
  out.push_back(&weight_);
  if (has_bias_) out.push_back(&bias_);
}

Tensor Conv2d::forward(const Tensor& x) {
  require_4d(x, "Conv2d");
  if (x.dim(1) != in_channels_) {
    throw ContractError("Conv2d: input has " + std::to_string(x.dim(1)) + " channels, expected " +
                        std::to_string(in_channels_));
  }
  if (training()) cached_input_ = x;
  return groups_ == 1 ? forward_dense(x) : forward_depthwise(x);
}

Tensor Conv2d::backward(const Tensor& g) {
  if (cached_input_.empty()) throw ContractError("Conv2d::backward without a training-mode forward");
  return groups_ == 1 ? backward_dense(g) : backward_depthwise(g);
}

Tensor Conv2d::forward_dense(const Tensor& x) {
  const int batch = x.dim(0), in_h = x.dim(2), in_w = x.dim(3);
  const int out_h = conv_out_size(in_h, kernel_, stride_, dilation_, pad_);
  const int out_w = conv_out_size(in_w, kernel_, stride_, dilation_, pad_);
  const int patch = in_channels_ * kernel_ * kernel_;
  const std::size_t spatial = static_cast<std::size_t>(out_h) * out_w;

  Tensor out({batch, out_channels_, out_h, out_w});
  const bool pointwise = kernel_ == 1 && stride_ == 1;
  std::vector<double> cols;
  if (!pointwise) cols.resize(static_cast<std::size_t>(patch) * spatial);

  for (int n = 0; n < batch; ++n) {
    const double* x_n = x.data() + static_cast<std::size_t>(n) * in_channels_ * in_h * in_w;
    const double* mat = x_n;
    if (!pointwise) {
      im2col(x_n, in_channels_, in_h, in_w, kernel_, stride_, dilation_, pad_, out_h, out_w, cols.data());
      mat = cols.data();
    }
    double* out_n = out.data() + static_cast<std::size_t>(n) * out_channels_ * spatial;
    gemm(false, false, out_channels_, static_cast<int>(spatial), patch, 1.0, weight_.value.data(),
         patch, mat, static_cast<int>(spatial), 0.0, out_n, static_cast<int>(spatial));
    if (has_bias_) {
      for (int c = 0; c < out_channels_; ++c) {
        double* p = out_n + static_cast<std::size_t>(c) * spatial;
        const double b = bias_.value[c];
        for (std::size_t i = 0; i < spatial; ++i) p[i] += b;
      }
    }
  }
  return out;
}

Tensor Conv2d::backward_dense(const Tensor& g) {
  const Tensor& x = cached_input_;
  const int batch = x.dim(0), in_h = x.dim(2), in_w = x.dim(3);
  const int out_h = g.dim(2), out_w = g.dim(3);
  const int patch = in_channels_ * kernel_ * kernel_;
  const std::size_t spatial = static_cast<std::size_t>(out_h) * out_w;
  const bool pointwise = kernel_ == 1 && stride_ == 1;

  Tensor dx({batch, in_channels_, in_h, in_w});
  std::vector<double> cols, dcols;
  if (!pointwise) {
    cols.resize(static_cast<std::size_t>(patch) * spatial);
    dcols.resize(static_cast<std::size_t>(patch) * spatial);
  }

  for (int n = 0; n < batch; ++n) {
    const double* x_n = x.data() + static_cast<std::size_t>(n) * in_channels_ * in_h * in_w;
    const double* g_n = g.data() + static_cast<std::size_t>(n) * out_channels_ * spatial;
    double* dx_n = dx.data() + static_cast<std::size_t>(n) * in_channels_ * in_h * in_w;

    const double* mat = x_n;
    if (!pointwise) {
      im2col(x_n, in_channels_, in_h, in_w, kernel_, stride_, dilation_, pad_, out_h, out_w, cols.data());
      mat = cols.data();
    }
    // dW += g_n @ cols^T
    gemm(false, true, out_channels_, patch, static_cast<int>(spatial), 1.0, g_n,
         static_cast<int>(spatial), mat, static_cast<int>(spatial), 1.0, weight_.grad.data(), patch);
    // dcols = W^T @ g_n
    double* dmat = pointwise ? dx_n : dcols.data();
    gemm(true, false, patch, static_cast<int>(spatial), out_channels_, 1.0, weight_.value.data(),
         patch, g_n, static_cast<int>(spatial), 0.0, dmat, static_cast<int>(spatial));
    if (!pointwise) {
      col2im(dcols.data(), in_channels_, in_h, in_w, kernel_, stride_, dilation_, pad_, out_h, out_w, dx_n);
    }
    if (has_bias_) {
      for (int c = 0; c < out_channels_; ++c) {
        const double* p = g_n + static_cast<std::size_t>(c) * spatial;
        double acc = 0.0;
        for (std::size_t i = 0; i < spatial; ++i) acc += p[i];
        bias_.grad[c] += acc;
      }
    }
  }
  return dx;
}

Tensor Conv2d::forward_depthwise(const Tensor& x) {
  const int batch = x.dim(0), channels = x.dim(1), in_h = x.dim(2), in_w = x.dim(3);
  const int out_h = conv_out_size(in_h, kernel_, stride_, dilation_, pad_);
  const int out_w = conv_out_size(in_w, kernel_, stride_, dilation_, pad_);
  Tensor out({batch, channels, out_h, out_w});

  for (int n = 0; n < batch; ++n) {
    for (int c = 0; c < channels; ++c) {
      const double* src = x.data() + (static_cast<std::size_t>(n) * channels + c) * in_h * in_w;
      double* dst = out.data() + (static_cast<std::size_t>(n) * channels + c) * out_h * out_w;
      const double* w = weight_.value.data() + static_cast<std::size_t>(c) * kernel_ * kernel_;
      for (int ky = 0; ky < kernel_; ++ky) {
        for (int kx = 0; kx < kernel_; ++kx) {
          const double wv = w[ky * kernel_ + kx];
          if (wv == 0.0) continue;
          for (int oy = 0; oy < out_h; ++oy) {
            const int iy = oy * stride_ - pad_ + ky * dilation_;
            if (iy < 0 || iy >= in_h) continue;
            const double* row = src + static_cast<std::size_t>(iy) * in_w;
            double* orow = dst + static_cast<std::size_t>(oy) * out_w;
            for (int ox = 0; ox < out_w; ++ox) {
              const int ix = ox * stride_ - pad_ + kx * dilation_;
              if (ix >= 0 && ix < in_w) orow[ox] += wv * row[ix];
            }
          }
        }
      }
      if (has_bias_) {
        const double b = bias_.value[c];
        for (std::size_t i = 0; i < static_cast<std::size_t>(out_h) * out_w; ++i) dst[i] += b;
      }
    }
  }
  return out;
}

Tensor Conv2d::backward_depthwise(const Tensor& g) {
  const Tensor& x = cached_input_;
  const int batch = x.dim(0), channels = x.dim(1), in_h = x.dim(2), in_w = x.dim(3);
  const int out_h = g.dim(2), out_w = g.dim(3);
  Tensor dx({batch, channels, in_h, in_w});

  for (int n = 0; n < batch; ++n) {
    for (int c = 0; c < channels; ++c) {
      const double* src = x.data() + (static_cast<std::size_t>(n) * channels + c) * in_h * in_w;
      const double* gp = g.data() + (static_cast<std::size_t>(n) * channels + c) * out_h * out_w;
      double* dxp = dx.data() + (static_cast<std::size_t>(n) * channels + c) * in_h * in_w;
      const double* w = weight_.value.data() + static_cast<std::size_t>(c) * kernel_ * kernel_;
      double* dw = weight_.grad.data() + static_cast<std::size_t>(c) * kernel_ * kernel_;
      for (int ky = 0; ky < kernel_; ++ky) {
        for (int kx = 0; kx < kernel_; ++kx) {
          const double wv = w[ky * kernel_ + kx];
          double dw_acc = 0.0;
          for (int oy = 0; oy < out_h; ++oy) {
            const int iy = oy * stride_ - pad_ + ky * dilation_;
            if (iy < 0 || iy >= in_h) continue;
            const double* xrow = src + static_cast<std::size_t>(iy) * in_w;
            double* dxrow = dxp + static_cast<std::size_t>(iy) * in_w;
            const double* grow = gp + static_cast<std::size_t>(oy) * out_w;
            for (int ox = 0; ox < out_w; ++ox) {
              const int ix = ox * stride_ - pad_ + kx * dilation_;
              if (ix >= 0 && ix < in_w) {
                dw_acc += grow[ox] * xrow[ix];
                dxrow[ix] += wv * grow[ox];
              }
            }
          }
          dw[ky * kernel_ + kx] += dw_acc;
        }
      }
      if (has_bias_) {
        double acc = 0.0;
        for (std::size_t i = 0; i < static_cast<std::size_t>(out_h) * out_w; ++i) acc += gp[i];
        bias_.grad[c] += acc;
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// BatchNorm2d

BatchNorm2d::BatchNorm2d(std::string name, int channels, double eps, double momentum)
    : channels_(channels), eps_(eps), momentum_(momentum) {
  gamma_.name = name + ".weight";
  gamma_.value = Tensor::full({channels}, 1.0);
  gamma_.grad = Tensor({channels});
  beta_.name = name + ".bias";
  beta_.value = Tensor({channels});
  beta_.grad = Tensor({channels});
  running_mean_.name = name + ".running_mean";
  running_mean_.value = Tensor({channels});
  running_mean_.trainable = false;
  running_var_.name = name + ".running_var";
  running_var_.value = Tensor::full({channels}, 1.0);
  running_var_.trainable = false;
}

void BatchNorm2d::collect_parameters(std::vector<Parameter*>& out) {
  out.push_back(&gamma_);
  out.push_back(&beta_);
}

void BatchNorm2d::collect_buffers(std::vector<Parameter*>& out) {
  out.push_back(&running_mean_);
  out.push_back(&running_var_);
}

Tensor BatchNorm2d::forward(const Tensor& x) {
  require_4d(x, "BatchNorm2d");
  if (x.dim(1) != channels_) throw ContractError("BatchNorm2d: channel mismatch");
  const int batch = x.dim(0), h = x.dim(2), w = x.dim(3);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const double m = double(batch) * h * w;

  Tensor out({batch, channels_, h, w});
  if (training()) {
    cached_input_ = x;
    cached_mean_.assign(channels_, 0.0);
    cached_inv_std_.assign(channels_, 0.0);
    for (int c = 0; c < channels_; ++c) {
      double sum = 0.0, sq = 0.0;
      for (int n = 0; n < batch; ++n) {
        const double* p = x.data() + (static_cast<std::size_t>(n) * channels_ + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          sum += p[i];
          sq += p[i] * p[i];
        }
      }
      const double mean = sum / m;
      const double var = std::max(0.0, sq / m - mean * mean);
      cached_mean_[c] = mean;
      cached_inv_std_[c] = 1.0 / std::sqrt(var + eps_);
      running_mean_.value[c] = (1.0 - momentum_) * running_mean_.value[c] + momentum_ * mean;
      running_var_.value[c] = (1.0 - momentum_) * running_var_.value[c] + momentum_ * var;

      const double g = gamma_.value[c], b = beta_.value[c], inv = cached_inv_std_[c];
      for (int n = 0; n < batch; ++n) {
        const double* p = x.data() + (static_cast<std::size_t>(n) * channels_ + c) * plane;
        double* q = out.data() + (static_cast<std::size_t>(n) * channels_ + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) q[i] = (p[i] - mean) * inv * g + b;
      }
    }
  } else {
    for (int c = 0; c < channels_; ++c) {
      const double mean = running_mean_.value[c];
      const double inv = 1.0 / std::sqrt(running_var_.value[c] + eps_);
      const double g = gamma_.value[c], b = beta_.value[c];
      for (int n = 0; n < batch; ++n) {
        const double* p = x.data() + (static_cast<std::size_t>(n) * channels_ + c) * plane;
        double* q = out.data() + (static_cast<std::size_t>(n) * channels_ + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) q[i] = (p[i] - mean) * inv * g + b;
      }
    }
  }
  return out;
}

Tensor BatchNorm2d::backward(const Tensor& g) {
  if (cached_input_.empty()) throw ContractError("BatchNorm2d::backward without a training-mode forward");
  const Tensor& x = cached_input_;
  const int batch = x.dim(0), h = x.dim(2), w = x.dim(3);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const double m = double(batch) * h * w;

  Tensor dx({batch, channels_, h, w});
  for (int c = 0; c < channels_; ++c) {
    const double mean = cached_mean_[c], inv = cached_inv_std_[c];
    double dbeta = 0.0, dgamma = 0.0;
    for (int n = 0; n < batch; ++n) {
      const double* xp = x.data() + (static_cast<std::size_t>(n) * channels_ + c) * plane;
      const double* gp = g.data() + (static_cast<std::size_t>(n) * channels_ + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        dbeta += gp[i];
        dgamma += gp[i] * (xp[i] - mean) * inv;
      }
    }
    gamma_.grad[c] += dgamma;
    beta_.grad[c] += dbeta;

    const double scale = gamma_.value[c] * inv;
    for (int n = 0; n < batch; ++n) {
      const double* xp = x.data() + (static_cast<std::size_t>(n) * channels_ + c) * plane;
      const double* gp = g.data() + (static_cast<std::size_t>(n) * channels_ + c) * plane;
      double* dp = dx.data() + (static_cast<std::size_t>(n) * channels_ + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        const double x_hat = (xp[i] - mean) * inv;
        dp[i] = scale * (gp[i] - dbeta / m - x_hat * dgamma / m);
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Activations

Tensor ReLU::forward(const Tensor& x) {
  if (training()) cached_input_ = x;
  Tensor out = x;
  for (std::int64_t i = 0; i < out.numel(); ++i) {
    if (out[i] < 0.0) out[i] = 0.0;
  }
  return out;
}

Tensor ReLU::backward(const Tensor& g) {
  if (cached_input_.empty()) throw ContractError("ReLU::backward without a training-mode forward");
  Tensor dx = g;
  for (std::int64_t i = 0; i < dx.numel(); ++i) {
    if (cached_input_[i] <= 0.0) dx[i] = 0.0;
  }
  return dx;
}

Tensor Swish::forward(const Tensor& x) {
  if (training()) cached_input_ = x;
  Tensor out = x;
  for (std::int64_t i = 0; i < out.numel(); ++i) {
    out[i] = out[i] / (1.0 + std::exp(-out[i]));
  }
  return out;
}

Tensor Swish::backward(const Tensor& g) {
  if (cached_input_.empty()) throw ContractError("Swish::backward without a training-mode forward");
  Tensor dx = g;
  for (std::int64_t i = 0; i < dx.numel(); ++i) {
    const double x = cached_input_[i];
    const double s = 1.0 / (1.0 + std::exp(-x));
    dx[i] *= s * (1.0 + x * (1.0 - s));
  }
  return dx;
}

Tensor Sigmoid::forward(const Tensor& x) {
  Tensor out = x;
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = 1.0 / (1.0 + std::exp(-out[i]));
  if (training()) cached_output_ = out;
  return out;
}

Tensor Sigmoid::backward(const Tensor& g) {
  if (cached_output_.empty()) throw ContractError("Sigmoid::backward without a training-mode forward");
  Tensor dx = g;
  for (std::int64_t i = 0; i < dx.numel(); ++i) {
    const double y = cached_output_[i];
    dx[i] *= y * (1.0 - y);
  }
  return dx;
}

// ---------------------------------------------------------------------------
// GlobalAvgPool

Tensor GlobalAvgPool::forward(const Tensor& x) {
  require_4d(x, "GlobalAvgPool");
  cached_h_ = x.dim(2);
  cached_w_ = x.dim(3);
  const std::size_t plane = static_cast<std::size_t>(cached_h_) * cached_w_;
  Tensor out({x.dim(0), x.dim(1), 1, 1});
  for (int n = 0; n < x.dim(0); ++n) {
    for (int c = 0; c < x.dim(1); ++c) {
      const double* p = x.data() + (static_cast<std::size_t>(n) * x.dim(1) + c) * plane;
      double acc = 0.0;
      for (std::size_t i = 0; i < plane; ++i) acc += p[i];
      out.at(n, c, 0, 0) = acc / double(plane);
    }
  }
  return out;
}

Tensor GlobalAvgPool::backward(const Tensor& g) {
  const std::size_t plane = static_cast<std::size_t>(cached_h_) * cached_w_;
  Tensor dx({g.dim(0), g.dim(1), cached_h_, cached_w_});
  for (int n = 0; n < g.dim(0); ++n) {
    for (int c = 0; c < g.dim(1); ++c) {
      const double v = g.at(n, c, 0, 0) / double(plane);
      double* p = dx.data() + (static_cast<std::size_t>(n) * g.dim(1) + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) p[i] = v;
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// SqueezeExcite

SqueezeExcite::SqueezeExcite(std::string name, int channels, int squeezed_channels, Rng& rng)
    : reduce_(name + ".reduce", channels, squeezed_channels, 1, 1, 1, 1, true, rng),
      expand_(name + ".expand", squeezed_channels, channels, 1, 1, 1, 1, true, rng) {}

void SqueezeExcite::set_mode(Mode mode) {
  Module::set_mode(mode);
  pool_.set_mode(mode);
  reduce_.set_mode(mode);
  swish_.set_mode(mode);
  expand_.set_mode(mode);
  sigmoid_.set_mode(mode);
}

void SqueezeExcite::collect_parameters(std::vector<Parameter*>& out) {
  reduce_.collect_parameters(out);
  expand_.collect_parameters(out);
}

Tensor SqueezeExcite::forward(const Tensor& x) {
  require_4d(x, "SqueezeExcite");
  Tensor scale = sigmoid_.forward(expand_.forward(swish_.forward(reduce_.forward(pool_.forward(x)))));
  if (training()) {
    cached_input_ = x;
    cached_scale_ = scale;
  }
  Tensor out = x;
  const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  for (int n = 0; n < x.dim(0); ++n) {
    for (int c = 0; c < x.dim(1); ++c) {
      double* p = out.data() + (static_cast<std::size_t>(n) * x.dim(1) + c) * plane;
      const double s = scale.at(n, c, 0, 0);
      for (std::size_t i = 0; i < plane; ++i) p[i] *= s;
    }
  }
  return out;
}

Tensor SqueezeExcite::backward(const Tensor& g) {
  if (cached_input_.empty()) throw ContractError("SqueezeExcite::backward without a training-mode forward");
  const Tensor& x = cached_input_;
  const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);

  // Direct path: d(x*s)/dx = s. Scale path: ds = sum_hw g*x.
  Tensor dx = g;
  Tensor dscale({x.dim(0), x.dim(1), 1, 1});
  for (int n = 0; n < x.dim(0); ++n) {
    for (int c = 0; c < x.dim(1); ++c) {
      double* dp = dx.data() + (static_cast<std::size_t>(n) * x.dim(1) + c) * plane;
      const double* xp = x.data() + (static_cast<std::size_t>(n) * x.dim(1) + c) * plane;
      const double s = cached_scale_.at(n, c, 0, 0);
      double acc = 0.0;
      for (std::size_t i = 0; i < plane; ++i) {
        acc += dp[i] * xp[i];
        dp[i] *= s;
      }
      dscale.at(n, c, 0, 0) = acc;
    }
  }
  Tensor dpool = reduce_.backward(swish_.backward(expand_.backward(sigmoid_.backward(dscale))));
  dx.add_(pool_.backward(dpool));
  return dx;
}

// ---------------------------------------------------------------------------
// UpsampleBilinear

UpsampleBilinear::UpsampleBilinear(int scale) : scale_(scale) {
  if (scale < 1) throw ConfigError("UpsampleBilinear: scale must be >= 1");
}

Tensor UpsampleBilinear::forward(const Tensor& x) {
  require_4d(x, "UpsampleBilinear");
  cached_in_shape_ = x.shape();
  if (scale_ == 1) return x;
  const int batch = x.dim(0), channels = x.dim(1), in_h = x.dim(2), in_w = x.dim(3);
  const int out_h = in_h * scale_, out_w = in_w * scale_;
  Tensor out({batch, channels, out_h, out_w});
  for (int oy = 0; oy < out_h; ++oy) {
    const double sy = (oy + 0.5) / scale_ - 0.5;
    const int y0 = std::clamp(static_cast<int>(std::floor(sy)), 0, in_h - 1);
    const int y1 = std::min(y0 + 1, in_h - 1);
    const double fy = std::clamp(sy - y0, 0.0, 1.0);
    for (int ox = 0; ox < out_w; ++ox) {
      const double sx = (ox + 0.5) / scale_ - 0.5;
      const int x0 = std::clamp(static_cast<int>(std::floor(sx)), 0, in_w - 1);
      const int x1 = std::min(x0 + 1, in_w - 1);
      const double fx = std::clamp(sx - x0, 0.0, 1.0);
      for (int n = 0; n < batch; ++n) {
        for (int c = 0; c < channels; ++c) {
          const double v = (1 - fy) * ((1 - fx) * x.at(n, c, y0, x0) + fx * x.at(n, c, y0, x1)) +
                           fy * ((1 - fx) * x.at(n, c, y1, x0) + fx * x.at(n, c, y1, x1));
          out.at(n, c, oy, ox) = v;
        }
      }
    }
  }
  return out;
}

Tensor UpsampleBilinear::backward(const Tensor& g) {
  if (cached_in_shape_.empty()) throw ContractError("UpsampleBilinear::backward before forward");
  if (scale_ == 1) return g;
  const int batch = cached_in_shape_[0], channels = cached_in_shape_[1];
  const int in_h = cached_in_shape_[2], in_w = cached_in_shape_[3];
  Tensor dx({batch, channels, in_h, in_w});
  const int out_h = g.dim(2), out_w = g.dim(3);
  for (int oy = 0; oy < out_h; ++oy) {
    const double sy = (oy + 0.5) / scale_ - 0.5;
    const int y0 = std::clamp(static_cast<int>(std::floor(sy)), 0, in_h - 1);
    const int y1 = std::min(y0 + 1, in_h - 1);
    const double fy = std::clamp(sy - y0, 0.0, 1.0);
    for (int ox = 0; ox < out_w; ++ox) {
      const double sx = (ox + 0.5) / scale_ - 0.5;
      const int x0 = std::clamp(static_cast<int>(std::floor(sx)), 0, in_w - 1);
      const int x1 = std::min(x0 + 1, in_w - 1);
      const double fx = std::clamp(sx - x0, 0.0, 1.0);
      for (int n = 0; n < batch; ++n) {
        for (int c = 0; c < channels; ++c) {
          const double gv = g.at(n, c, oy, ox);
          dx.at(n, c, y0, x0) += (1 - fy) * (1 - fx) * gv;
          dx.at(n, c, y0, x1) += (1 - fy) * fx * gv;
          dx.at(n, c, y1, x0) += fy * (1 - fx) * gv;
          dx.at(n, c, y1, x1) += fy * fx * gv;
        }
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Sequential

Tensor Sequential::forward(const Tensor& x) {
  Tensor out = x;
  for (auto& m : modules_) out = m->forward(out);
  return out;
}

Tensor Sequential::backward(const Tensor& g) {
  Tensor grad = g;
  for (auto it = modules_.rbegin(); it != modules_.rend(); ++it) grad = (*it)->backward(grad);
  return grad;
}

void Sequential::set_mode(Mode mode) {
  Module::set_mode(mode);
  for (auto& m : modules_) m->set_mode(mode);
}

void Sequential::collect_parameters(std::vector<Parameter*>& out) {
  for (auto& m : modules_) m->collect_parameters(out);
}

void Sequential::collect_buffers(std::vector<Parameter*>& out) {
  for (auto& m : modules_) m->collect_buffers(out);
}

// ---------------------------------------------------------------------------
// Channel concat/split

Tensor concat_channels(const std::vector<const Tensor*>& parts) {
  if (parts.empty()) throw ContractError("concat_channels: no inputs");
  const Tensor& first = *parts.front();
  int channels = 0;
  for (const Tensor* p : parts) {
    if (p->ndim() != 4 || p->dim(0) != first.dim(0) || p->dim(2) != first.dim(2) ||
        p->dim(3) != first.dim(3)) {
      throw ContractError("concat_channels: inputs must share N, H, W");
    }
    channels += p->dim(1);
  }
  Tensor out({first.dim(0), channels, first.dim(2), first.dim(3)});
  const std::size_t plane = static_cast<std::size_t>(first.dim(2)) * first.dim(3);
  for (int n = 0; n < first.dim(0); ++n) {
    std::size_t c_off = 0;
    for (const Tensor* p : parts) {
      const std::size_t block = static_cast<std::size_t>(p->dim(1)) * plane;
      std::copy(p->data() + n * block, p->data() + (n + 1) * block,
                out.data() + (static_cast<std::size_t>(n) * channels) * plane + c_off * plane);
      c_off += p->dim(1);
    }
  }
  return out;
}

std::vector<Tensor> split_channels(const Tensor& t, const std::vector<int>& channel_counts) {
  int total = 0;
  for (int c : channel_counts) total += c;
  if (total != t.dim(1)) throw ContractError("split_channels: counts do not sum to channel dim");
  const std::size_t plane = static_cast<std::size_t>(t.dim(2)) * t.dim(3);
  std::vector<Tensor> parts;
  parts.reserve(channel_counts.size());
  int c_off = 0;
  for (int c : channel_counts) {
    Tensor part({t.dim(0), c, t.dim(2), t.dim(3)});
    for (int n = 0; n < t.dim(0); ++n) {
      const double* src = t.data() + (static_cast<std::size_t>(n) * t.dim(1) + c_off) * plane;
      std::copy(src, src + static_cast<std::size_t>(c) * plane,
                part.data() + static_cast<std::size_t>(n) * c * plane);
    }
    parts.push_back(std::move(part));
    c_off += c;
  }
  return parts;
}

}  // namespace drseg::nn
