#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "focusclf/numerics/adam.hpp"
#include "focusclf/numerics/layers.hpp"
#include "focusclf/rng.hpp"
#include "focusclf/tensor.hpp"

namespace focusclf::cnn {

using numerics::Mode;

struct ModelConfig {
  std::size_t input_size = 32;
  std::vector<std::string> channels{"T2W", "ADC", "DWI_b50"};
  std::vector<std::size_t> conv_widths{32, 32, 64, 64};
  std::size_t kernel_size = 3;
  std::vector<std::size_t> fc_widths{512, 128};
  std::size_t classes = 2;
  numerics::AdamHyper adam;
  int epochs = 100;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  /// Stop a fold once validation accuracy reaches 1.0; the selected snapshot
  /// is unchanged because later epochs can only tie.
  bool stop_at_perfect_validation = true;

  /// Throws ConfigError on anything build_model cannot honour.
  void validate() const;
  std::size_t input_channels() const { return channels.size(); }
};

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

template <typename T>
struct ConvBlock {
  Tensor<T> weight;  // K×K×Cin×Cout
  Tensor<T> bias;    // Cout
  numerics::BatchNormParams<T> bn;
};

template <typename T>
struct DenseLayer {
  Tensor<T> weight;  // in×out
  Tensor<T> bias;    // out
};

/// C1→C2→pool→C3→C4→pool→FC1→FC2→output, every conv followed by BN + ReLU,
/// ReLU after FC1 and FC2.
template <typename T>
struct ModelParams {
  std::array<ConvBlock<T>, 4> conv;
  std::array<DenseLayer<T>, 3> fc;  // FC1, FC2, output

  /// Trainable tensors in a fixed order (weights, biases, BN scale/shift).
  std::vector<std::pair<std::string, Tensor<T>*>> trainable();
  std::vector<std::pair<std::string, const Tensor<T>*>> trainable() const;
  /// Trainable tensors plus BN running statistics.
  std::vector<std::pair<std::string, Tensor<T>*>> all_tensors();
  std::vector<std::pair<std::string, const Tensor<T>*>> all_tensors() const;

  /// Same-shaped zero tensors (gradient accumulator).
  ModelParams zeros_like() const;

  template <typename U>
  ModelParams<U> cast() const;

  std::size_t parameter_count() const;
};

using ModelParamsF = ModelParams<float>;

/// Orthogonally initialized conv filters, Glorot dense layers, fresh BN.
ModelParamsF build_model(const ModelConfig& config, Rng& rng);

/// Spatial extent after each stage for an S×S input: C1, C2, pool1, C3, C4, pool2.
std::array<std::size_t, 6> stage_sizes(std::size_t input_size);
std::size_t flatten_length(const ModelConfig& config);

template <typename T>
struct ForwardCache {
  Tensor<T> input;
  std::array<numerics::BatchNormCache<T>, 4> bn;
  std::array<Tensor<T>, 4> activation; // post BN+ReLU, the C1..C4 feature maps
  numerics::PoolResult<T> pool1;
  numerics::PoolResult<T> pool2;
  Tensor<T> flat;                      // N×flatten_length
  Tensor<T> fc1;                       // post-ReLU
  Tensor<T> fc2;                       // post-ReLU
  Tensor<T> logits;
};

/// Batch forward (N×S×S×C). Train mode uses batch statistics and does not
/// touch running stats; call update_bn_stats afterwards.
template <typename T>
Tensor<T> forward(const ModelParams<T>& params, const Tensor<T>& batch, Mode mode, ForwardCache<T>* cache = nullptr);

/// Conv stack only (C1..C4 with the first pool), valid for any spatial size.
/// Returns the C4 feature maps; fills the conv part of `cache` when given.
template <typename T>
Tensor<T> conv_stack_forward(const ModelParams<T>& params, const Tensor<T>& batch, Mode mode,
                             ForwardCache<T>* cache = nullptr);

/// Gradients of every trainable tensor given dLoss/dLogits. The returned
/// struct mirrors `params`; BN running-stat slots are unused.
template <typename T>
ModelParams<T> backward(const ModelParams<T>& params, const ForwardCache<T>& cache, const Tensor<T>& grad_logits);

/// Backward through the conv stack from a gradient on the C4 maps.
template <typename T>
void conv_stack_backward(const ModelParams<T>& params, const ForwardCache<T>& cache, Tensor<T> grad_c4,
                         ModelParams<T>& grads);

template <typename T>
void update_bn_stats(ModelParams<T>& params, const ForwardCache<T>& cache);

}  // namespace focusclf::cnn
