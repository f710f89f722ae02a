#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "focusclf/tensor.hpp"

namespace focusclf::numerics {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  AdamHyper hyper;
  std::uint64_t step = 0;
  std::vector<Tensor<T>> first_moment;
  std::vector<Tensor<T>> second_moment;
};

/// One bias-corrected Adam update. Moments are allocated on the first call.
/// A non-finite gradient raises NumericError before any parameter is touched.
template <typename T>
void adam_step(std::span<Tensor<T>* const> params, std::span<const Tensor<T>* const> grads, AdamState<T>& state);

}  // namespace focusclf::numerics
