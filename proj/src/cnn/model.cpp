#include "focusclf/cnn/model.hpp"

#include <algorithm>

#include "focusclf/errors.hpp"
#include "focusclf/numerics/init.hpp"

namespace focusclf::cnn {

namespace nm = focusclf::numerics;
using nlohmann::json;

void ModelConfig::validate() const {
  static constexpr std::size_t kSizes[] = {30, 32, 34, 64};
  if (std::find(std::begin(kSizes), std::end(kSizes), input_size) == std::end(kSizes)) {
    throw ConfigError("input size " + std::to_string(input_size) + " is not one of 30, 32, 34, 64");
  }
  if (channels.empty()) throw ConfigError("model needs at least one input channel");
  if (conv_widths.size() != 4) throw ConfigError("model has exactly four conv layers");
  if (fc_widths.size() != 2) throw ConfigError("model has exactly two hidden dense layers");
  for (std::size_t w : conv_widths)
    if (w == 0) throw ConfigError("conv width must be positive");
  for (std::size_t w : fc_widths)
    if (w == 0) throw ConfigError("dense width must be positive");
  if (kernel_size == 0 || kernel_size % 2 == 0) throw ConfigError("kernel size must be odd");
  if (classes != 2) throw ConfigError("only binary classification is supported");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (epochs < 0) throw ConfigError("epochs must be non-negative");
  if (!(adam.lr > 0.0) || !(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0) ||
      !(adam.eps > 0.0)) {
    throw ConfigError("invalid Adam hyperparameters");
  }
}

json to_json(const ModelConfig& c) {
  return json{{"input_size", c.input_size},
              {"channels", c.channels},
              {"conv_widths", c.conv_widths},
              {"kernel_size", c.kernel_size},
              {"fc_widths", c.fc_widths},
              {"classes", c.classes},
              {"adam", {{"lr", c.adam.lr}, {"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"eps", c.adam.eps}}},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"seed", c.seed},
              {"stop_at_perfect_validation", c.stop_at_perfect_validation}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  try {
    c.input_size = j.value("input_size", c.input_size);
    c.channels = j.value("channels", c.channels);
    c.conv_widths = j.value("conv_widths", c.conv_widths);
    c.kernel_size = j.value("kernel_size", c.kernel_size);
    c.fc_widths = j.value("fc_widths", c.fc_widths);
    c.classes = j.value("classes", c.classes);
    if (j.contains("adam")) {
      const auto& a = j.at("adam");
      c.adam.lr = a.value("lr", c.adam.lr);
      c.adam.beta1 = a.value("beta1", c.adam.beta1);
      c.adam.beta2 = a.value("beta2", c.adam.beta2);
      c.adam.eps = a.value("eps", c.adam.eps);
    }
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.seed = j.value("seed", c.seed);
    c.stop_at_perfect_validation = j.value("stop_at_perfect_validation", c.stop_at_perfect_validation);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  return c;
}

// ---- parameter plumbing -----------------------------------------------------

template <typename T>
std::vector<std::pair<std::string, Tensor<T>*>> ModelParams<T>::trainable() {
  std::vector<std::pair<std::string, Tensor<T>*>> out;
  for (std::size_t i = 0; i < 4; ++i) {
    const std::string c = "c" + std::to_string(i + 1);
    const std::string b = "bn" + std::to_string(i + 1);
    out.emplace_back(c + ".weight", &conv[i].weight);
    out.emplace_back(c + ".bias", &conv[i].bias);
    out.emplace_back(b + ".scale", &conv[i].bn.scale);
    out.emplace_back(b + ".shift", &conv[i].bn.shift);
  }
  static const char* kDense[3] = {"fc1", "fc2", "out"};
  for (std::size_t i = 0; i < 3; ++i) {
    out.emplace_back(std::string(kDense[i]) + ".weight", &fc[i].weight);
    out.emplace_back(std::string(kDense[i]) + ".bias", &fc[i].bias);
  }
  return out;
}

template <typename T>
std::vector<std::pair<std::string, const Tensor<T>*>> ModelParams<T>::trainable() const {
  std::vector<std::pair<std::string, const Tensor<T>*>> out;
  for (auto& [name, t] : const_cast<ModelParams*>(this)->trainable()) out.emplace_back(name, t);
  return out;
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>*>> ModelParams<T>::all_tensors() {
  auto out = trainable();
  for (std::size_t i = 0; i < 4; ++i) {
    const std::string b = "bn" + std::to_string(i + 1);
    out.emplace_back(b + ".running_mean", &conv[i].bn.running_mean);
    out.emplace_back(b + ".running_var", &conv[i].bn.running_var);
  }
  return out;
}

template <typename T>
std::vector<std::pair<std::string, const Tensor<T>*>> ModelParams<T>::all_tensors() const {
  std::vector<std::pair<std::string, const Tensor<T>*>> out;
  for (auto& [name, t] : const_cast<ModelParams*>(this)->all_tensors()) out.emplace_back(name, t);
  return out;
}

template <typename T>
ModelParams<T> ModelParams<T>::zeros_like() const {
  ModelParams z = *this;
  for (auto& [name, t] : z.all_tensors()) t->fill(T{0});
  return z;
}

template <typename T>
template <typename U>
ModelParams<U> ModelParams<T>::cast() const {
  ModelParams<U> out;
  for (std::size_t i = 0; i < 4; ++i) {
    out.conv[i].weight = conv[i].weight.template cast<U>();
    out.conv[i].bias = conv[i].bias.template cast<U>();
    const auto& src = conv[i].bn;
    auto& dst = out.conv[i].bn;
    dst.scale = src.scale.template cast<U>();
    dst.shift = src.shift.template cast<U>();
    dst.running_mean = src.running_mean.template cast<U>();
    dst.running_var = src.running_var.template cast<U>();
    dst.momentum = src.momentum;
    dst.eps = src.eps;
    dst.stats_ready = src.stats_ready;
  }
  for (std::size_t i = 0; i < 3; ++i) {
    out.fc[i].weight = fc[i].weight.template cast<U>();
    out.fc[i].bias = fc[i].bias.template cast<U>();
  }
  return out;
}

template <typename T>
std::size_t ModelParams<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : trainable()) n += t->size();
  return n;
}

// ---- construction -----------------------------------------------------------

std::array<std::size_t, 6> stage_sizes(std::size_t s) { return {s, s, s / 2, s / 2, s / 2, s / 4}; }

std::size_t flatten_length(const ModelConfig& config) {
  const std::size_t side = stage_sizes(config.input_size)[5];
  return side * side * config.conv_widths[3];
}

ModelParamsF build_model(const ModelConfig& config, Rng& rng) {
  config.validate();
  Rng init = rng.substream("init");
  ModelParamsF p;
  std::size_t in = config.input_channels();
  for (std::size_t i = 0; i < 4; ++i) {
    const std::size_t out = config.conv_widths[i];
    p.conv[i].weight = nm::semi_orthogonal_init(init, {config.kernel_size, config.kernel_size, in, out});
    p.conv[i].bias = TensorF({out});
    p.conv[i].bn = nm::BatchNormParams<float>::fresh(out);
    in = out;
  }
  const std::size_t widths[4] = {flatten_length(config), config.fc_widths[0], config.fc_widths[1], config.classes};
  for (std::size_t i = 0; i < 3; ++i) {
    p.fc[i].weight = nm::glorot_uniform(init, widths[i], widths[i + 1]);
    p.fc[i].bias = TensorF({widths[i + 1]});
  }
  return p;
}

// ---- forward / backward -----------------------------------------------------

namespace {

template <typename T>
const Tensor<T>& conv_input(const ForwardCache<T>& c, std::size_t layer) {
  switch (layer) {
    case 0: return c.input;
    case 1: return c.activation[0];
    case 2: return c.pool1.output;
    default: return c.activation[2];
  }
}

template <typename T>
Tensor<T> conv_block(const ConvBlock<T>& block, const Tensor<T>& x, Mode mode, nm::BatchNormCache<T>* bn_cache) {
  return nm::relu(nm::batchnorm_forward(nm::conv2d_same(x, block.weight, block.bias), block.bn, mode, bn_cache));
}

}  // namespace

template <typename T>
Tensor<T> conv_stack_forward(const ModelParams<T>& params, const Tensor<T>& batch, Mode mode, ForwardCache<T>* cache) {
  if (batch.rank() != 4) throw ShapeError("forward: expected an N×S×S×C batch, got " + shape_string(batch.shape()));
  if (batch.extent(3) != params.conv[0].weight.extent(2)) {
    throw InputError("forward: batch has " + std::to_string(batch.extent(3)) + " channels, model expects " +
                     std::to_string(params.conv[0].weight.extent(2)));
  }
  ForwardCache<T> local;
  ForwardCache<T>& c = cache ? *cache : local;
  c.input = batch;
  c.activation[0] = conv_block(params.conv[0], c.input, mode, &c.bn[0]);
  c.activation[1] = conv_block(params.conv[1], c.activation[0], mode, &c.bn[1]);
  c.pool1 = nm::maxpool2x2(c.activation[1]);
  c.activation[2] = conv_block(params.conv[2], c.pool1.output, mode, &c.bn[2]);
  c.activation[3] = conv_block(params.conv[3], c.activation[2], mode, &c.bn[3]);
  return c.activation[3];
}

template <typename T>
Tensor<T> forward(const ModelParams<T>& params, const Tensor<T>& batch, Mode mode, ForwardCache<T>* cache) {
  ForwardCache<T> local;
  ForwardCache<T>& c = cache ? *cache : local;
  conv_stack_forward(params, batch, mode, &c);
  c.pool2 = nm::maxpool2x2(c.activation[3]);
  const std::size_t n = batch.extent(0);
  const std::size_t flat = c.pool2.output.size() / n;
  if (flat != params.fc[0].weight.extent(0)) {
    throw ShapeError("forward: flattened length " + std::to_string(flat) + " does not match FC1 input " +
                     std::to_string(params.fc[0].weight.extent(0)) + " (wrong patch size?)");
  }
  c.flat = c.pool2.output.reshaped({n, flat});
  c.fc1 = nm::relu(nm::dense(c.flat, params.fc[0].weight, params.fc[0].bias));
  c.fc2 = nm::relu(nm::dense(c.fc1, params.fc[1].weight, params.fc[1].bias));
  c.logits = nm::dense(c.fc2, params.fc[2].weight, params.fc[2].bias);
  return c.logits;
}

template <typename T>
void conv_stack_backward(const ModelParams<T>& params, const ForwardCache<T>& cache, Tensor<T> grad, ModelParams<T>& grads) {
  for (std::size_t layer = 4; layer-- > 0;) {
    grad = nm::relu_backward(cache.activation[layer], grad);
    auto bn = nm::batchnorm_backward(grad, params.conv[layer].bn, cache.bn[layer]);
    grads.conv[layer].bn.scale = std::move(bn.scale);
    grads.conv[layer].bn.shift = std::move(bn.shift);
    auto conv = nm::conv2d_backward(conv_input(cache, layer), params.conv[layer].weight, bn.input, layer > 0);
    grads.conv[layer].weight = std::move(conv.weights);
    grads.conv[layer].bias = std::move(conv.bias);
    if (layer == 0) break;
    grad = std::move(conv.input);
    if (layer == 2) grad = nm::maxpool2x2_backward(cache.pool1, grad);
  }
}

template <typename T>
ModelParams<T> backward(const ModelParams<T>& params, const ForwardCache<T>& cache, const Tensor<T>& grad_logits) {
  ModelParams<T> grads = params.zeros_like();
  auto out = nm::dense_backward(cache.fc2, params.fc[2].weight, grad_logits);
  grads.fc[2].weight = std::move(out.weights);
  grads.fc[2].bias = std::move(out.bias);
  auto h2 = nm::dense_backward(cache.fc1, params.fc[1].weight, nm::relu_backward(cache.fc2, out.input));
  grads.fc[1].weight = std::move(h2.weights);
  grads.fc[1].bias = std::move(h2.bias);
  auto h1 = nm::dense_backward(cache.flat, params.fc[0].weight, nm::relu_backward(cache.fc1, h2.input));
  grads.fc[0].weight = std::move(h1.weights);
  grads.fc[0].bias = std::move(h1.bias);
  Tensor<T> g_pool2 = h1.input.reshaped(cache.pool2.output.shape());
  conv_stack_backward(params, cache, nm::maxpool2x2_backward(cache.pool2, g_pool2), grads);
  return grads;
}

template <typename T>
void update_bn_stats(ModelParams<T>& params, const ForwardCache<T>& cache) {
  for (std::size_t i = 0; i < 4; ++i) nm::update_running_stats(params.conv[i].bn, cache.bn[i]);
}

template struct ModelParams<float>;
template struct ModelParams<double>;
template ModelParams<double> ModelParams<float>::cast<double>() const;
template ModelParams<float> ModelParams<double>::cast<float>() const;
template ModelParams<float> ModelParams<float>::cast<float>() const;

#define FOCUSCLF_INSTANTIATE_MODEL(T)                                                                          \
  template Tensor<T> forward<T>(const ModelParams<T>&, const Tensor<T>&, Mode, ForwardCache<T>*);              \
  template Tensor<T> conv_stack_forward<T>(const ModelParams<T>&, const Tensor<T>&, Mode, ForwardCache<T>*);   \
  template ModelParams<T> backward<T>(const ModelParams<T>&, const ForwardCache<T>&, const Tensor<T>&);        \
  template void conv_stack_backward<T>(const ModelParams<T>&, const ForwardCache<T>&, Tensor<T>, ModelParams<T>&); \
  template void update_bn_stats<T>(ModelParams<T>&, const ForwardCache<T>&);

FOCUSCLF_INSTANTIATE_MODEL(float)
FOCUSCLF_INSTANTIATE_MODEL(double)

}  // namespace focusclf::cnn
