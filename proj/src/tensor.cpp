#include "drseg/tensor.hpp"

#include <sstream>

namespace drseg {

std::size_t Tensor::compute_numel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw ContractError("negative tensor dimension");
    n *= static_cast<std::size_t>(d);
  }
  return shape.empty() ? 0 : n;
}

void Tensor::require_same_shape(const Tensor& other) const {
  if (shape_ != other.shape_) {
    throw ContractError("tensor shape mismatch: " + shape_string() + " vs " + other.shape_string());
  }
}

std::string Tensor::shape_string() const {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) os << ", ";
    os << shape_[i];
  }
  os << ')';
  return os.str();
}

}  // namespace drseg
