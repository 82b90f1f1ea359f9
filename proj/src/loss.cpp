#include "drseg/loss.hpp"

#include <algorithm>
#include <cmath>

namespace drseg {
namespace {

void require_matched(const Tensor& a, const Tensor& b, const char* who) {
  if (a.numel() != b.numel()) {
    throw ContractError(std::string(who) + ": element count mismatch (" +
                        std::to_string(a.numel()) + " vs " + std::to_string(b.numel()) + ")");
  }
  if (a.numel() == 0) throw ContractError(std::string(who) + ": empty tensors");
}

void require_binary_target(double y, const char* who) {
  if (y != 0.0 && y != 1.0) {
    throw ContractError(std::string(who) + ": target " + std::to_string(y) + " is not 0/1");
  }
}

}  // namespace

double binary_cross_entropy(const Tensor& pred, const Tensor& target) {
  require_matched(pred, target, "binary_cross_entropy");
  double acc = 0.0;
  for (std::int64_t i = 0; i < pred.numel(); ++i) {
    const double y = target[i];
    require_binary_target(y, "binary_cross_entropy");
    const double p = std::clamp(pred[i], kBceEpsilon, 1.0 - kBceEpsilon);
    acc += y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
  }
  return -acc / static_cast<double>(pred.numel());
}

double bce_with_logits(const Tensor& logits, const Tensor& target, Tensor* grad_logits) {
  require_matched(logits, target, "bce_with_logits");
  const double n = static_cast<double>(logits.numel());
  if (grad_logits) *grad_logits = Tensor(logits.shape());
  double acc = 0.0;
  for (std::int64_t i = 0; i < logits.numel(); ++i) {
    const double z = logits[i];
    const double y = target[i];
    require_binary_target(y, "bce_with_logits");
    // softplus(z) - z*y, with softplus(z) = max(z,0) + log1p(exp(-|z|)).
    acc += std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))) - z * y;
    if (grad_logits) {
      const double s = 1.0 / (1.0 + std::exp(-z));
      (*grad_logits)[i] = (s - y) / n;
    }
  }
  return acc / n;
}

}  // namespace drseg
