#pragma once

#include <vector>

#include "drseg/nn.hpp"

namespace drseg {

/// Adam with bias correction; stock coefficients unless overridden.
class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<nn::Parameter*> params, double learning_rate, double beta1 = 0.9,
                double beta2 = 0.999, double epsilon = 1e-8);

  /// One update from the currently accumulated gradients.
  void step();
  void zero_grad();

  double learning_rate() const { return lr_; }

 private:
  std::vector<nn::Parameter*> params_;
  std::vector<Tensor> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
};

}  // namespace drseg
