#include "focusclf/numerics/adam.hpp"

#include <cmath>
#include <string>

namespace focusclf::numerics {

template <typename T>
void adam_step(std::span<Tensor<T>* const> params, std::span<const Tensor<T>* const> grads, AdamState<T>& state) {
  if (params.size() != grads.size()) throw ShapeError("adam_step: parameter and gradient counts differ");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->shape() != grads[i]->shape()) {
      throw ShapeError("adam_step: gradient " + std::to_string(i) + " shape " + shape_string(grads[i]->shape()) +
                       " does not match parameter " + shape_string(params[i]->shape()));
    }
    if (!grads[i]->all_finite()) throw NumericError("adam_step: non-finite gradient in parameter " + std::to_string(i));
  }
  if (state.first_moment.empty()) {
    for (const Tensor<T>* p : params) {
      state.first_moment.emplace_back(p->shape());
      state.second_moment.emplace_back(p->shape());
    }
  } else if (state.first_moment.size() != params.size()) {
    throw StateError("adam_step: optimizer state tracks a different parameter set");
  }

  state.step += 1;
  const AdamHyper& h = state.hyper;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(h.beta1, t);
  const double c2 = 1.0 - std::pow(h.beta2, t);
  const T b1 = static_cast<T>(h.beta1), b2 = static_cast<T>(h.beta2);
  const T step_size = static_cast<T>(h.lr / c1);
  const T inv_sqrt_c2 = static_cast<T>(1.0 / std::sqrt(c2));
  const T eps = static_cast<T>(h.eps);

  for (std::size_t i = 0; i < params.size(); ++i) {
    T* p = params[i]->ptr();
    const T* g = grads[i]->ptr();
    T* m = state.first_moment[i].ptr();
    T* v = state.second_moment[i].ptr();
    for (std::size_t j = 0; j < params[i]->size(); ++j) {
      m[j] = b1 * m[j] + (T{1} - b1) * g[j];
      v[j] = b2 * v[j] + (T{1} - b2) * g[j] * g[j];
      // p -= lr·m̂/(√v̂ + eps) with m̂ = m/c1, v̂ = v/c2
      p[j] -= step_size * m[j] / (std::sqrt(v[j]) * inv_sqrt_c2 + eps);
    }
  }
}

template void adam_step<float>(std::span<Tensor<float>* const>, std::span<const Tensor<float>* const>, AdamState<float>&);
template void adam_step<double>(std::span<Tensor<double>* const>, std::span<const Tensor<double>* const>, AdamState<double>&);

}  // namespace focusclf::numerics
