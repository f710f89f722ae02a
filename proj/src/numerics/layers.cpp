#include "focusclf/numerics/layers.hpp"

#include <Eigen/Core>
#include <cmath>
#include <cstring>
#include <limits>

namespace focusclf::numerics {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

struct SpatialDims {
  std::size_t n, h, w, c;
  bool batched;
};

SpatialDims spatial_dims(const Shape& shape, const char* op) {
  if (shape.size() == 3) return {1, shape[0], shape[1], shape[2], false};
  if (shape.size() == 4) return {shape[0], shape[1], shape[2], shape[3], true};
  throw ShapeError(std::string(op) + ": expected H×W×C or N×H×W×C input, got " + shape_string(shape));
}

Shape spatial_shape(const SpatialDims& d, std::size_t h, std::size_t w, std::size_t c) {
  if (d.batched) return {d.n, h, w, c};
  return {h, w, c};
}

struct ConvGeometry {
  SpatialDims in;
  std::size_t kh, kw, cout;
  std::size_t patch_len() const { return kh * kw * in.c; }
};

template <typename T>
ConvGeometry conv_geometry(const Tensor<T>& input, const Tensor<T>& weights) {
  ConvGeometry g{spatial_dims(input.shape(), "conv2d_same"), 0, 0, 0};
  if (weights.rank() != 4) throw ShapeError("conv2d_same: weights must be Kh×Kw×Cin×Cout, got " + shape_string(weights.shape()));
  g.kh = weights.extent(0);
  g.kw = weights.extent(1);
  g.cout = weights.extent(3);
  if (g.kh % 2 == 0 || g.kw % 2 == 0) throw ShapeError("conv2d_same: kernel extents must be odd");
  if (weights.extent(2) != g.in.c) {
    throw ShapeError("conv2d_same: input has " + std::to_string(g.in.c) + " channels but weights expect " +
                     std::to_string(weights.extent(2)));
  }
  return g;
}

// Column matrix (H·W) × (Kh·Kw·Cin) for one sample, zero padded.
// Column sums in a fixed order. Eigen's vectorized reductions peel by the
// buffer's address, so their rounding would change from run to run.
template <typename T>
void add_column_sums(const T* rows, std::size_t n, std::size_t cols, T* out) {
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < cols; ++j) out[j] += rows[i * cols + j];
}

template <typename T>
void im2col(const T* image, const ConvGeometry& g, T* col) {
  const auto [n, h, w, c, batched] = g.in;
  const long ph = static_cast<long>(g.kh - 1) / 2;
  const long pw = static_cast<long>(g.kw - 1) / 2;
  const std::size_t row_len = g.patch_len();
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      T* row = col + (y * w + x) * row_len;
      for (std::size_t ky = 0; ky < g.kh; ++ky) {
        long sy = static_cast<long>(y) + static_cast<long>(ky) - ph;
        for (std::size_t kx = 0; kx < g.kw; ++kx) {
          long sx = static_cast<long>(x) + static_cast<long>(kx) - pw;
          T* dst = row + (ky * g.kw + kx) * c;
          if (sy < 0 || sx < 0 || sy >= static_cast<long>(h) || sx >= static_cast<long>(w)) {
            std::fill(dst, dst + c, T{0});
          } else {
            std::memcpy(dst, image + (static_cast<std::size_t>(sy) * w + static_cast<std::size_t>(sx)) * c, c * sizeof(T));
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, const ConvGeometry& g, T* image) {
  const auto [n, h, w, c, batched] = g.in;
  const long ph = static_cast<long>(g.kh - 1) / 2;
  const long pw = static_cast<long>(g.kw - 1) / 2;
  const std::size_t row_len = g.patch_len();
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const T* row = col + (y * w + x) * row_len;
      for (std::size_t ky = 0; ky < g.kh; ++ky) {
        long sy = static_cast<long>(y) + static_cast<long>(ky) - ph;
        if (sy < 0 || sy >= static_cast<long>(h)) continue;
        for (std::size_t kx = 0; kx < g.kw; ++kx) {
          long sx = static_cast<long>(x) + static_cast<long>(kx) - pw;
          if (sx < 0 || sx >= static_cast<long>(w)) continue;
          const T* src = row + (ky * g.kw + kx) * c;
          T* dst = image + (static_cast<std::size_t>(sy) * w + static_cast<std::size_t>(sx)) * c;
          for (std::size_t ci = 0; ci < c; ++ci) dst[ci] += src[ci];
        }
      }
    }
  }
}

std::size_t channel_count(const Shape& shape, const char* op) {
  if (shape.empty()) throw ShapeError(std::string(op) + ": scalar input");
  return shape.back();
}

}  // namespace

// ---- convolution -----------------------------------------------------------

template <typename T>
Tensor<T> conv2d_same(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias) {
  const ConvGeometry g = conv_geometry(input, weights);
  if (bias.size() != g.cout) throw ShapeError("conv2d_same: bias length does not match Cout");
  const std::size_t pixels = g.in.h * g.in.w;
  Tensor<T> out(spatial_shape(g.in, g.in.h, g.in.w, g.cout));
  std::vector<T> col(pixels * g.patch_len());
  ConstMapMat<T> wmat(weights.ptr(), static_cast<Eigen::Index>(g.patch_len()), static_cast<Eigen::Index>(g.cout));
  Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(bias.ptr(), static_cast<Eigen::Index>(g.cout));
  for (std::size_t s = 0; s < g.in.n; ++s) {
    im2col(input.ptr() + s * pixels * g.in.c, g, col.data());
    ConstMapMat<T> cmat(col.data(), static_cast<Eigen::Index>(pixels), static_cast<Eigen::Index>(g.patch_len()));
    MapMat<T> omat(out.ptr() + s * pixels * g.cout, static_cast<Eigen::Index>(pixels), static_cast<Eigen::Index>(g.cout));
    omat.noalias() = cmat * wmat;
    omat.rowwise() += b;
  }
  return out;
}

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& grad_out,
                             bool need_input_grad) {
  const ConvGeometry g = conv_geometry(input, weights);
  if (grad_out.shape() != spatial_shape(g.in, g.in.h, g.in.w, g.cout)) {
    throw ShapeError("conv2d_backward: grad_out shape " + shape_string(grad_out.shape()) + " inconsistent with forward");
  }
  const std::size_t pixels = g.in.h * g.in.w;
  ConvGrads<T> grads;
  grads.weights = Tensor<T>(weights.shape());
  grads.bias = Tensor<T>({g.cout});
  if (need_input_grad) grads.input = Tensor<T>(input.shape());

  std::vector<T> col(pixels * g.patch_len());
  std::vector<T> gcol(need_input_grad ? pixels * g.patch_len() : 0);
  ConstMapMat<T> wmat(weights.ptr(), static_cast<Eigen::Index>(g.patch_len()), static_cast<Eigen::Index>(g.cout));
  MapMat<T> gw(grads.weights.ptr(), static_cast<Eigen::Index>(g.patch_len()), static_cast<Eigen::Index>(g.cout));
  for (std::size_t s = 0; s < g.in.n; ++s) {
    im2col(input.ptr() + s * pixels * g.in.c, g, col.data());
    ConstMapMat<T> cmat(col.data(), static_cast<Eigen::Index>(pixels), static_cast<Eigen::Index>(g.patch_len()));
    ConstMapMat<T> gout(grad_out.ptr() + s * pixels * g.cout, static_cast<Eigen::Index>(pixels), static_cast<Eigen::Index>(g.cout));
    gw.noalias() += cmat.transpose() * gout;
    add_column_sums(grad_out.ptr() + s * pixels * g.cout, pixels, g.cout, grads.bias.ptr());
    if (need_input_grad) {
      MapMat<T> gc(gcol.data(), static_cast<Eigen::Index>(pixels), static_cast<Eigen::Index>(g.patch_len()));
      gc.noalias() = gout * wmat.transpose();
      col2im_add(gcol.data(), g, grads.input.ptr() + s * pixels * g.in.c);
    }
  }
  return grads;
}

// ---- batch normalization ---------------------------------------------------

template <typename T>
BatchNormParams<T> BatchNormParams<T>::fresh(std::size_t channels) {
  BatchNormParams p;
  p.scale = Tensor<T>({channels}, T{1});
  p.shift = Tensor<T>({channels}, T{0});
  p.running_mean = Tensor<T>({channels}, T{0});
  p.running_var = Tensor<T>({channels}, T{1});
  p.stats_ready = true;
  return p;
}

template <typename T>
BatchNormParams<T> BatchNormParams<T>::uninitialized(std::size_t channels) {
  BatchNormParams p = fresh(channels);
  p.stats_ready = false;
  return p;
}

template <typename T>
Tensor<T> batchnorm_forward(const Tensor<T>& x, const BatchNormParams<T>& params, Mode mode, BatchNormCache<T>* cache) {
  const std::size_t c = channel_count(x.shape(), "batchnorm");
  if (params.channels() != c) throw ShapeError("batchnorm: parameter channels do not match input");
  const std::size_t count = x.size() / c;
  const T eps = static_cast<T>(params.eps);

  std::vector<T> mean(c), variance(c), inv_std(c);
  if (mode == Mode::Train) {
    if (count < 2) throw ShapeError("batchnorm: train mode needs at least 2 values per channel");
    // Accumulate in double so float batches keep their precision.
    std::vector<double> sum(c, 0.0), sq(c, 0.0);
    for (std::size_t i = 0; i < count; ++i) {
      const T* row = x.ptr() + i * c;
      for (std::size_t k = 0; k < c; ++k) sum[k] += row[k];
    }
    for (std::size_t k = 0; k < c; ++k) sum[k] /= static_cast<double>(count);
    for (std::size_t i = 0; i < count; ++i) {
      const T* row = x.ptr() + i * c;
      for (std::size_t k = 0; k < c; ++k) {
        double d = row[k] - sum[k];
        sq[k] += d * d;
      }
    }
    for (std::size_t k = 0; k < c; ++k) {
      mean[k] = static_cast<T>(sum[k]);
      variance[k] = static_cast<T>(sq[k] / static_cast<double>(count));
    }
  } else {
    if (!params.stats_ready) throw StateError("batchnorm: inference requested before running statistics were initialized");
    for (std::size_t k = 0; k < c; ++k) {
      mean[k] = params.running_mean[k];
      variance[k] = params.running_var[k];
    }
  }
  for (std::size_t k = 0; k < c; ++k) inv_std[k] = T{1} / std::sqrt(variance[k] + eps);

  Tensor<T> normalized(x.shape());
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < count; ++i) {
    const T* row = x.ptr() + i * c;
    T* nrow = normalized.ptr() + i * c;
    T* orow = out.ptr() + i * c;
    for (std::size_t k = 0; k < c; ++k) {
      nrow[k] = (row[k] - mean[k]) * inv_std[k];
      orow[k] = nrow[k] * params.scale[k] + params.shift[k];
    }
  }
  if (cache) {
    cache->mode = mode;
    cache->count = count;
    cache->mean = std::move(mean);
    cache->variance = std::move(variance);
    cache->inv_std = std::move(inv_std);
    cache->normalized = std::move(normalized);
  }
  return out;
}

template <typename T>
void update_running_stats(BatchNormParams<T>& params, const BatchNormCache<T>& cache) {
  if (cache.mode != Mode::Train) return;
  const double m = params.momentum;
  const double unbias = static_cast<double>(cache.count) / static_cast<double>(cache.count - 1);
  for (std::size_t k = 0; k < params.channels(); ++k) {
    params.running_mean[k] = static_cast<T>((1.0 - m) * params.running_mean[k] + m * cache.mean[k]);
    params.running_var[k] = static_cast<T>((1.0 - m) * params.running_var[k] + m * cache.variance[k] * unbias);
  }
  params.stats_ready = true;
}

template <typename T>
Tensor<T> batchnorm(const Tensor<T>& x, BatchNormParams<T>& params, Mode mode) {
  BatchNormCache<T> cache;
  Tensor<T> out = batchnorm_forward(x, params, mode, &cache);
  update_running_stats(params, cache);
  return out;
}

template <typename T>
BatchNormGrads<T> batchnorm_backward(const Tensor<T>& grad_out, const BatchNormParams<T>& params,
                                     const BatchNormCache<T>& cache) {
  const std::size_t c = params.channels();
  if (grad_out.shape() != cache.normalized.shape()) throw ShapeError("batchnorm_backward: grad_out shape mismatch");
  const std::size_t count = cache.count;
  std::vector<double> sum_g(c, 0.0), sum_gx(c, 0.0);
  for (std::size_t i = 0; i < count; ++i) {
    const T* g = grad_out.ptr() + i * c;
    const T* xh = cache.normalized.ptr() + i * c;
    for (std::size_t k = 0; k < c; ++k) {
      sum_g[k] += g[k];
      sum_gx[k] += static_cast<double>(g[k]) * xh[k];
    }
  }
  BatchNormGrads<T> grads;
  grads.scale = Tensor<T>({c});
  grads.shift = Tensor<T>({c});
  for (std::size_t k = 0; k < c; ++k) {
    grads.scale[k] = static_cast<T>(sum_gx[k]);
    grads.shift[k] = static_cast<T>(sum_g[k]);
  }
  grads.input = Tensor<T>(grad_out.shape());
  if (cache.mode == Mode::Train) {
    const double inv_count = 1.0 / static_cast<double>(count);
    std::vector<T> mean_g(c), mean_gx(c), factor(c);
    for (std::size_t k = 0; k < c; ++k) {
      mean_g[k] = static_cast<T>(sum_g[k] * inv_count);
      mean_gx[k] = static_cast<T>(sum_gx[k] * inv_count);
      factor[k] = params.scale[k] * cache.inv_std[k];
    }
    for (std::size_t i = 0; i < count; ++i) {
      const T* g = grad_out.ptr() + i * c;
      const T* xh = cache.normalized.ptr() + i * c;
      T* gi = grads.input.ptr() + i * c;
      for (std::size_t k = 0; k < c; ++k) gi[k] = factor[k] * (g[k] - mean_g[k] - xh[k] * mean_gx[k]);
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      const T* g = grad_out.ptr() + i * c;
      T* gi = grads.input.ptr() + i * c;
      for (std::size_t k = 0; k < c; ++k) gi[k] = g[k] * params.scale[k] * cache.inv_std[k];
    }
  }
  return grads;
}

// ---- pointwise / pooling / dense -------------------------------------------

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> out = x;
  for (T& v : out.data()) v = v > T{0} ? v : T{0};
  return out;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& output, const Tensor<T>& grad_out) {
  if (output.shape() != grad_out.shape()) throw ShapeError("relu_backward: shape mismatch");
  Tensor<T> g(grad_out.shape());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = output[i] > T{0} ? grad_out[i] : T{0};
  return g;
}

template <typename T>
PoolResult<T> maxpool2x2(const Tensor<T>& x) {
  const SpatialDims d = spatial_dims(x.shape(), "maxpool2x2");
  const std::size_t oh = d.h / 2, ow = d.w / 2;
  if (oh == 0 || ow == 0) throw ShapeError("maxpool2x2: input " + shape_string(x.shape()) + " too small");
  PoolResult<T> r;
  r.input_shape = x.shape();
  r.output = Tensor<T>(spatial_shape(d, oh, ow, d.c));
  r.argmax.resize(r.output.size());
  std::size_t o = 0;
  for (std::size_t s = 0; s < d.n; ++s) {
    const std::size_t base = s * d.h * d.w * d.c;
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t xx = 0; xx < ow; ++xx) {
        for (std::size_t k = 0; k < d.c; ++k, ++o) {
          std::size_t best = base + ((2 * y) * d.w + 2 * xx) * d.c + k;
          T best_v = x[best];
          // Row-major window order; strict '>' keeps the first maximum.
          const std::size_t cand[3] = {base + ((2 * y) * d.w + 2 * xx + 1) * d.c + k,
                                       base + ((2 * y + 1) * d.w + 2 * xx) * d.c + k,
                                       base + ((2 * y + 1) * d.w + 2 * xx + 1) * d.c + k};
          for (std::size_t idx : cand) {
            if (x[idx] > best_v) {
              best_v = x[idx];
              best = idx;
            }
          }
          r.output[o] = best_v;
          r.argmax[o] = static_cast<std::uint32_t>(best);
        }
      }
    }
  }
  return r;
}

template <typename T>
Tensor<T> maxpool2x2_backward(const PoolResult<T>& pool, const Tensor<T>& grad_out) {
  if (grad_out.shape() != pool.output.shape()) throw ShapeError("maxpool2x2_backward: grad_out shape mismatch");
  Tensor<T> g(pool.input_shape);
  for (std::size_t i = 0; i < grad_out.size(); ++i) g[pool.argmax[i]] += grad_out[i];
  return g;
}

template <typename T>
Tensor<T> dense(const Tensor<T>& x, const Tensor<T>& weights, const Tensor<T>& bias) {
  if (weights.rank() != 2) throw ShapeError("dense: weights must be in×out");
  const std::size_t in = weights.extent(0), out = weights.extent(1);
  if (x.size() % in != 0 || (x.rank() == 2 && x.extent(1) != in) || (x.rank() == 1 && x.size() != in)) {
    throw ShapeError("dense: input " + shape_string(x.shape()) + " incompatible with weights " + shape_string(weights.shape()));
  }
  if (bias.size() != out) throw ShapeError("dense: bias length does not match output width");
  const std::size_t n = x.size() / in;
  Tensor<T> y(x.rank() == 1 ? Shape{out} : Shape{n, out});
  ConstMapMat<T> xm(x.ptr(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(in));
  ConstMapMat<T> wm(weights.ptr(), static_cast<Eigen::Index>(in), static_cast<Eigen::Index>(out));
  MapMat<T> ym(y.ptr(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(out));
  Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(bias.ptr(), static_cast<Eigen::Index>(out));
  ym.noalias() = xm * wm;
  ym.rowwise() += b;
  return y;
}

template <typename T>
DenseGrads<T> dense_backward(const Tensor<T>& x, const Tensor<T>& weights, const Tensor<T>& grad_out) {
  const std::size_t in = weights.extent(0), out = weights.extent(1);
  const std::size_t n = x.size() / in;
  if (grad_out.size() != n * out) throw ShapeError("dense_backward: grad_out shape mismatch");
  DenseGrads<T> g;
  g.input = Tensor<T>(x.shape());
  g.weights = Tensor<T>(weights.shape());
  g.bias = Tensor<T>({out});
  ConstMapMat<T> xm(x.ptr(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(in));
  ConstMapMat<T> wm(weights.ptr(), static_cast<Eigen::Index>(in), static_cast<Eigen::Index>(out));
  ConstMapMat<T> gm(grad_out.ptr(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(out));
  MapMat<T>(g.input.ptr(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(in)).noalias() = gm * wm.transpose();
  MapMat<T>(g.weights.ptr(), static_cast<Eigen::Index>(in), static_cast<Eigen::Index>(out)).noalias() = xm.transpose() * gm;
  add_column_sums(grad_out.ptr(), n, out, g.bias.ptr());
  return g;
}

template <typename T>
std::vector<T> softmax(std::span<const T> logits) {
  std::vector<T> p(logits.size());
  if (logits.empty()) return p;
  T mx = *std::max_element(logits.begin(), logits.end());
  T total{0};
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    total += p[i];
  }
  for (T& v : p) v /= total;
  return p;
}

namespace {

// -log softmax(logits)[label], computed via log-sum-exp.
template <typename T>
T xent_single(std::span<const T> logits, std::size_t label, T* grad) {
  T mx = *std::max_element(logits.begin(), logits.end());
  T total{0};
  for (T v : logits) total += std::exp(v - mx);
  const T lse = mx + std::log(total);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    grad[i] = std::exp(logits[i] - lse) - (i == label ? T{1} : T{0});
  }
  return lse - logits[label];
}

}  // namespace

template <typename T>
LossAndGrad<T> softmax_xent(const Tensor<T>& logits, const Tensor<T>& target) {
  if (logits.size() != target.size() || logits.size() == 0) throw ShapeError("softmax_xent: logits/target length mismatch");
  std::size_t hot = target.size();
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target[i] == T{1}) {
      if (hot != target.size()) throw InputError("softmax_xent: target has more than one hot entry");
      hot = i;
    } else if (target[i] != T{0}) {
      throw InputError("softmax_xent: target entries must be 0 or 1");
    }
  }
  if (hot == target.size()) throw InputError("softmax_xent: target has no hot entry");
  LossAndGrad<T> r{T{0}, Tensor<T>(logits.shape())};
  r.loss = xent_single<T>(logits.data(), hot, r.grad.ptr());
  return r;
}

template <typename T>
LossAndGrad<T> softmax_xent_batch(const Tensor<T>& logits, std::span<const int> labels) {
  if (logits.rank() != 2 || logits.extent(0) != labels.size()) throw ShapeError("softmax_xent_batch: logits must be N×m with N labels");
  const std::size_t n = logits.extent(0), m = logits.extent(1);
  LossAndGrad<T> r{T{0}, Tensor<T>(logits.shape())};
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= m) throw InputError("softmax_xent_batch: label out of range");
    total += xent_single<T>(logits.data().subspan(i * m, m), static_cast<std::size_t>(labels[i]), r.grad.ptr() + i * m);
  }
  const T inv_n = T{1} / static_cast<T>(n);
  for (T& g : r.grad.data()) g *= inv_n;
  r.loss = static_cast<T>(total / static_cast<double>(n));
  return r;
}

#define FOCUSCLF_INSTANTIATE_LAYERS(T)                                                                       \
  template Tensor<T> conv2d_same<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                   \
  template ConvGrads<T> conv2d_backward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, bool);      \
  template struct BatchNormParams<T>;                                                                        \
  template Tensor<T> batchnorm_forward<T>(const Tensor<T>&, const BatchNormParams<T>&, Mode, BatchNormCache<T>*); \
  template void update_running_stats<T>(BatchNormParams<T>&, const BatchNormCache<T>&);                     \
  template Tensor<T> batchnorm<T>(const Tensor<T>&, BatchNormParams<T>&, Mode);                              \
  template BatchNormGrads<T> batchnorm_backward<T>(const Tensor<T>&, const BatchNormParams<T>&, const BatchNormCache<T>&); \
  template Tensor<T> relu<T>(const Tensor<T>&);                                                              \
  template Tensor<T> relu_backward<T>(const Tensor<T>&, const Tensor<T>&);                                   \
  template PoolResult<T> maxpool2x2<T>(const Tensor<T>&);                                                    \
  template Tensor<T> maxpool2x2_backward<T>(const PoolResult<T>&, const Tensor<T>&);                         \
  template Tensor<T> dense<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                         \
  template DenseGrads<T> dense_backward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);            \
  template std::vector<T> softmax<T>(std::span<const T>);                                                    \
  template LossAndGrad<T> softmax_xent<T>(const Tensor<T>&, const Tensor<T>&);                               \
  template LossAndGrad<T> softmax_xent_batch<T>(const Tensor<T>&, std::span<const int>);

FOCUSCLF_INSTANTIATE_LAYERS(float)
FOCUSCLF_INSTANTIATE_LAYERS(double)

}  // namespace focusclf::numerics
