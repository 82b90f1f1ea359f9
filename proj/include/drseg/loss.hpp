#pragma once

#include "drseg/tensor.hpp"

namespace drseg {

/// Clamp applied to predictions before the log terms.
constexpr double kBceEpsilon = 1e-7;

/// Mean binary cross-entropy over all elements:
///   -(1/n) * sum_i [ y_i ln p_i + (1 - y_i) ln(1 - p_i) ]
/// with p clamped to [kBceEpsilon, 1 - kBceEpsilon]. Targets must be 0/1.
/// Throws ContractError on element-count mismatch.
double binary_cross_entropy(const Tensor& pred, const Tensor& target);

/// Numerically stable BCE straight from logits (equivalent up to the
/// clamp), used by the training loop. Also fills `grad_logits` with
/// d(loss)/d(logit) = (sigmoid(z) - y)/n when requested.
double bce_with_logits(const Tensor& logits, const Tensor& target, Tensor* grad_logits = nullptr);

}  // namespace drseg
