#pragma once

#include <cstdint>
#include <vector>

#include "focusclf/tensor.hpp"

// Layer primitives with explicit forward/backward functions. Spatial tensors
// are channels-last: H×W×C for a single sample or N×H×W×C for a batch.
namespace focusclf::numerics {

enum class Mode { Train, Infer };

// ---- convolution -----------------------------------------------------------

/// "Same" 2-D convolution with zero padding (K-1)/2. Weights are Kh×Kw×Cin×Cout.
template <typename T>
Tensor<T> conv2d_same(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias);

template <typename T>
struct ConvGrads {
  Tensor<T> input;  // empty when not requested
  Tensor<T> weights;
  Tensor<T> bias;
};

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& grad_out,
                             bool need_input_grad = true);

// ---- batch normalization ---------------------------------------------------

template <typename T>
struct BatchNormParams {
  Tensor<T> scale;
  Tensor<T> shift;
  Tensor<T> running_mean;
  Tensor<T> running_var;
  double momentum = 0.1;
  double eps = 1e-5;
  bool stats_ready = false;

  /// scale 1, shift 0, running mean 0, running variance 1.
  static BatchNormParams fresh(std::size_t channels);
  /// Same, but inference refuses to run until a training step has set the stats.
  static BatchNormParams uninitialized(std::size_t channels);

  std::size_t channels() const { return scale.size(); }
};

template <typename T>
struct BatchNormCache {
  Mode mode = Mode::Train;
  std::size_t count = 0;    // reduction size per channel
  std::vector<T> mean;      // batch mean (train) or running mean (infer)
  std::vector<T> variance;  // biased batch variance (train) or running variance (infer)
  std::vector<T> inv_std;
  Tensor<T> normalized;     // x-hat, same shape as the input
};

/// Pure forward pass; fills `cache` when given. Does not touch running stats.
template <typename T>
Tensor<T> batchnorm_forward(const Tensor<T>& x, const BatchNormParams<T>& params, Mode mode,
                            BatchNormCache<T>* cache = nullptr);

/// running = (1 - momentum)·running + momentum·batch, with the unbiased batch variance.
template <typename T>
void update_running_stats(BatchNormParams<T>& params, const BatchNormCache<T>& cache);

/// Forward plus running-stat update in train mode.
template <typename T>
Tensor<T> batchnorm(const Tensor<T>& x, BatchNormParams<T>& params, Mode mode);

template <typename T>
struct BatchNormGrads {
  Tensor<T> input;
  Tensor<T> scale;
  Tensor<T> shift;
};

template <typename T>
BatchNormGrads<T> batchnorm_backward(const Tensor<T>& grad_out, const BatchNormParams<T>& params,
                                     const BatchNormCache<T>& cache);

// ---- pointwise / pooling / dense -------------------------------------------

template <typename T>
Tensor<T> relu(const Tensor<T>& x);

/// Gradient of relu given its output (mask is output > 0).
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& output, const Tensor<T>& grad_out);

template <typename T>
struct PoolResult {
  Tensor<T> output;
  std::vector<std::uint32_t> argmax;  // flat input index per output element
  Shape input_shape;
};

/// 2×2 stride-2 max pooling, floor semantics on odd extents. Ties resolve to the
/// first cell in row-major order.
template <typename T>
PoolResult<T> maxpool2x2(const Tensor<T>& x);

template <typename T>
Tensor<T> maxpool2x2_backward(const PoolResult<T>& pool, const Tensor<T>& grad_out);

/// y = x·W + b, x is N×in (or a length-in vector), W is in×out.
template <typename T>
Tensor<T> dense(const Tensor<T>& x, const Tensor<T>& weights, const Tensor<T>& bias);

template <typename T>
struct DenseGrads {
  Tensor<T> input;
  Tensor<T> weights;
  Tensor<T> bias;
};

template <typename T>
DenseGrads<T> dense_backward(const Tensor<T>& x, const Tensor<T>& weights, const Tensor<T>& grad_out);

template <typename T>
std::vector<T> softmax(std::span<const T> logits);

template <typename T>
struct LossAndGrad {
  T loss;
  Tensor<T> grad;
};

/// loss = -log softmax(logits)·target for a single logit vector; target must be one-hot.
template <typename T>
LossAndGrad<T> softmax_xent(const Tensor<T>& logits, const Tensor<T>& target);

/// Mean cross-entropy over an N×m batch with integer class labels; the gradient
/// is already divided by N.
template <typename T>
LossAndGrad<T> softmax_xent_batch(const Tensor<T>& logits, std::span<const int> labels);

}  // namespace focusclf::numerics
