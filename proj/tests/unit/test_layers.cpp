#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "focusclf/numerics/adam.hpp"
#include "focusclf/numerics/init.hpp"
#include "focusclf/numerics/layers.hpp"
#include "support/oracles.hpp"

namespace focusclf::numerics {
namespace {

using testing::gather;
using testing::numeric_gradient;
using testing::probe;
using testing::random_tensor;
using testing::relative_error;

TEST(Conv2d, ZeroInputYieldsBias) {
  Rng rng(1);
  auto w = random_tensor<float>(rng, {3, 3, 1, 1});
  TensorF in({4, 4, 1});
  TensorF b({1}, 0.75f);
  auto out = conv2d_same(in, w, b);
  ASSERT_EQ(out.shape(), (Shape{4, 4, 1}));
  for (float v : out.data()) EXPECT_EQ(v, 0.75f);
}

TEST(Conv2d, IdentityKernelCopiesInput) {
  Rng rng(2);
  auto in = random_tensor<float>(rng, {5, 4, 1});
  TensorF w({3, 3, 1, 1});
  w[4] = 1.0f;
  auto out = conv2d_same(in, w, TensorF({1}));
  EXPECT_EQ(out, in);
}

TEST(Conv2d, TwoByTwoAllOnesMatchesDirectSum) {
  TensorD in({2, 2, 1}, {1, 2, 3, 4});
  TensorD w({3, 3, 1, 1}, 1.0);
  TensorD b({1});
  auto expected = testing::conv_direct(in, w, b);
  // Every 3×3 window around a cell of a 2×2 image covers all four cells.
  for (double v : expected.data()) EXPECT_EQ(v, 10.0);
  EXPECT_EQ(conv2d_same(in, w, b), expected);
}

TEST(Conv2d, MatchesDirectOracleOnRandomShapes) {
  Rng rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t h = 3 + rng.below(5), wd = 3 + rng.below(5), cin = 1 + rng.below(3), cout = 1 + rng.below(4);
    const std::size_t k = trial % 2 ? 5 : 3;
    auto in = random_tensor<double>(rng, {h, wd, cin});
    auto w = random_tensor<double>(rng, {k, k, cin, cout});
    auto b = random_tensor<double>(rng, {cout});
    auto got = conv2d_same(in, w, b);
    auto want = testing::conv_direct(in, w, b);
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
  }
}

TEST(Conv2d, BatchedEqualsPerSample) {
  Rng rng(4);
  auto batch = random_tensor<float>(rng, {3, 6, 6, 2});
  auto w = random_tensor<float>(rng, {3, 3, 2, 4});
  auto b = random_tensor<float>(rng, {4});
  auto out = conv2d_same(batch, w, b);
  for (std::size_t s = 0; s < 3; ++s) {
    TensorF one({6, 6, 2}, std::vector<float>(batch.data().begin() + s * 72, batch.data().begin() + (s + 1) * 72));
    auto single = conv2d_same(one, w, b);
    for (std::size_t i = 0; i < single.size(); ++i) EXPECT_EQ(out[s * 144 + i], single[i]);
  }
}

TEST(Conv2d, Linearity) {
  Rng rng(5);
  auto x = random_tensor<float>(rng, {6, 6, 3});
  auto y = random_tensor<float>(rng, {6, 6, 3});
  auto w = random_tensor<float>(rng, {3, 3, 3, 4}, 0.3);
  TensorF zero_bias({4});
  const float a = 0.7f, c = -1.3f;
  TensorF mix(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) mix[i] = a * x[i] + c * y[i];
  auto fm = conv2d_same(mix, w, zero_bias);
  auto fx = conv2d_same(x, w, zero_bias);
  auto fy = conv2d_same(y, w, zero_bias);
  for (std::size_t i = 0; i < fm.size(); ++i) EXPECT_NEAR(fm[i], a * fx[i] + c * fy[i], 1e-5);
}

TEST(Conv2d, ChannelMismatchIsShapeError) {
  TensorF in({4, 4, 2});
  TensorF w({3, 3, 3, 1});
  EXPECT_THROW(conv2d_same(in, w, TensorF({1})), ShapeError);
  EXPECT_THROW(conv2d_backward(in, w, TensorF({4, 4, 1})), ShapeError);
}

TEST(Conv2dBackward, ZeroGradOutGivesZeroGrads) {
  Rng rng(6);
  auto in = random_tensor<float>(rng, {5, 5, 2});
  auto w = random_tensor<float>(rng, {3, 3, 2, 3});
  auto g = conv2d_backward(in, w, TensorF({5, 5, 3}));
  for (const auto* t : {&g.input, &g.weights, &g.bias})
    for (float v : t->data()) EXPECT_EQ(v, 0.0f);
}

TEST(Conv2dBackward, IdentityKernelPassesGradient) {
  Rng rng(7);
  auto in = random_tensor<float>(rng, {4, 5, 1});
  auto gout = random_tensor<float>(rng, {4, 5, 1});
  TensorF w({3, 3, 1, 1});
  w[4] = 1.0f;
  EXPECT_EQ(conv2d_backward(in, w, gout).input, gout);
}

TEST(Conv2dBackward, MatchesFiniteDifferences) {
  Rng rng(8);
  auto in = random_tensor<double>(rng, {5, 5, 2});
  auto w = random_tensor<double>(rng, {3, 3, 2, 3});
  auto b = random_tensor<double>(rng, {3});
  auto r = random_tensor<double>(rng, {5, 5, 3});
  auto loss = [&] { return probe(conv2d_same(in, w, b), r); };
  auto g = conv2d_backward(in, w, r);
  EXPECT_LE(relative_error(gather(g.input), numeric_gradient(in, loss)), 1e-4);
  EXPECT_LE(relative_error(gather(g.weights), numeric_gradient(w, loss)), 1e-4);
  EXPECT_LE(relative_error(gather(g.bias), numeric_gradient(b, loss)), 1e-4);
}

TEST(BatchNorm, ConstantBatchNormalizesToZero) {
  TensorF x({2, 3, 3, 2});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = i % 2 ? 5.0f : -2.0f;
  auto p = BatchNormParams<float>::fresh(2);
  auto out = batchnorm(x, p, Mode::Train);
  for (float v : out.data()) EXPECT_EQ(v, 0.0f);
}

TEST(BatchNorm, TrainOutputIsStandardized) {
  Rng rng(9);
  auto x = random_tensor<double>(rng, {4, 3, 3, 3}, 3.0);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += static_cast<double>(i % 3) * 10.0;
  auto p = BatchNormParams<double>::fresh(3);
  BatchNormCache<double> cache;
  batchnorm_forward(x, p, Mode::Train, &cache);
  const std::size_t count = x.size() / 3;
  for (std::size_t k = 0; k < 3; ++k) {
    double mean = 0, var = 0;
    for (std::size_t i = 0; i < count; ++i) mean += cache.normalized[i * 3 + k];
    mean /= count;
    for (std::size_t i = 0; i < count; ++i) var += std::pow(cache.normalized[i * 3 + k] - mean, 2);
    var /= count;
    EXPECT_NEAR(mean, 0.0, 1e-5);
    // Variance is σ²/(σ²+eps) by definition of the eps guard.
    EXPECT_NEAR(var, 1.0, 1e-5);
  }
}

TEST(BatchNorm, InferMatchesHandFormulaAfterFreezing) {
  Rng rng(10);
  auto p = BatchNormParams<float>::fresh(2);
  for (int step = 0; step < 5; ++step) batchnorm(random_tensor<float>(rng, {4, 2, 2, 2}, 2.0), p, Mode::Train);
  p.scale[0] = 1.5f;
  p.shift[1] = -0.25f;
  auto x = random_tensor<float>(rng, {3, 2, 2, 2});
  auto out = batchnorm(x, p, Mode::Infer);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::size_t k = i % 2;
    const double want = (x[i] - p.running_mean[k]) / std::sqrt(static_cast<double>(p.running_var[k]) + 1e-5) * p.scale[k] + p.shift[k];
    EXPECT_NEAR(out[i], want, 1e-6);
  }
}

TEST(BatchNorm, RunningStatsFollowMomentum) {
  TensorD x({4, 1}, {1, 2, 3, 6});
  auto p = BatchNormParams<double>::fresh(1);
  batchnorm(x, p, Mode::Train);
  // batch mean 3, unbiased variance (4+1+0+9)/3
  EXPECT_NEAR(p.running_mean[0], 0.1 * 3.0, 1e-12);
  EXPECT_NEAR(p.running_var[0], 0.9 + 0.1 * 14.0 / 3.0, 1e-12);
  for (double v : p.running_var.data()) EXPECT_GE(v, 0.0);
}

TEST(BatchNorm, InferBeforeStatsIsStateError) {
  auto p = BatchNormParams<float>::uninitialized(2);
  EXPECT_THROW(batchnorm(TensorF({2, 2, 2}), p, Mode::Infer), StateError);
  batchnorm(TensorF({2, 2, 2}, 1.0f), p, Mode::Train);
  EXPECT_NO_THROW(batchnorm(TensorF({2, 2, 2}), p, Mode::Infer));
}

TEST(BatchNorm, TrainModeNeedsTwoValues) {
  auto p = BatchNormParams<float>::fresh(3);
  EXPECT_THROW(batchnorm(TensorF({1, 1, 1, 3}), p, Mode::Train), ShapeError);
}

TEST(BatchNormBackward, MatchesFiniteDifferencesBothModes) {
  Rng rng(11);
  for (Mode mode : {Mode::Train, Mode::Infer}) {
    auto x = random_tensor<double>(rng, {2, 3, 3, 3});
    auto p = BatchNormParams<double>::fresh(3);
    p.scale = random_tensor<double>(rng, {3});
    p.shift = random_tensor<double>(rng, {3});
    p.running_mean = random_tensor<double>(rng, {3});
    p.running_var = TensorD({3}, {0.5, 1.5, 2.0});
    auto r = random_tensor<double>(rng, x.shape());
    auto loss = [&] { return probe(batchnorm_forward(x, p, mode), r); };
    BatchNormCache<double> cache;
    batchnorm_forward(x, p, mode, &cache);
    auto g = batchnorm_backward(r, p, cache);
    EXPECT_LE(relative_error(gather(g.input), numeric_gradient(x, loss)), 1e-4);
    EXPECT_LE(relative_error(gather(g.scale), numeric_gradient(p.scale, loss)), 1e-4);
    EXPECT_LE(relative_error(gather(g.shift), numeric_gradient(p.shift, loss)), 1e-4);
  }
}

TEST(Relu, Definition) {
  TensorF x({3}, {-1, 0, 2});
  EXPECT_EQ(relu(x), TensorF({3}, {0, 0, 2}));
  EXPECT_EQ(relu_backward(relu(x), TensorF({3}, {5, 5, 5})), TensorF({3}, {0, 0, 5}));
}

TEST(MaxPool, TwoByTwoExample) {
  TensorF x({2, 2, 1}, {1, 2, 3, 4});
  auto pool = maxpool2x2(x);
  EXPECT_EQ(pool.output, TensorF({1, 1, 1}, {4}));
  EXPECT_EQ(maxpool2x2_backward(pool, TensorF({1, 1, 1}, {1})), TensorF({2, 2, 1}, {0, 0, 0, 1}));
}

TEST(MaxPool, OddExtentFloors) {
  TensorF x({15, 15, 2});
  EXPECT_EQ(maxpool2x2(x).output.shape(), (Shape{7, 7, 2}));
  EXPECT_EQ(maxpool2x2(TensorF({3, 30, 30, 1})).output.shape(), (Shape{3, 15, 15, 1}));
}

TEST(MaxPool, TiesRouteToFirstCell) {
  TensorF x({2, 2, 1}, 3.0f);
  auto pool = maxpool2x2(x);
  EXPECT_EQ(maxpool2x2_backward(pool, TensorF({1, 1, 1}, {1})), TensorF({2, 2, 1}, {1, 0, 0, 0}));
}

TEST(MaxPool, GradientMassIsConserved) {
  Rng rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t h = 2 + rng.below(6), w = 2 + rng.below(6);
    auto x = random_tensor<double>(rng, {2, h, w, 3});
    auto pool = maxpool2x2(x);
    auto g = random_tensor<double>(rng, pool.output.shape());
    auto gi = maxpool2x2_backward(pool, g);
    double sin = 0, sout = 0;
    for (double v : gi.data()) sin += v;
    for (double v : g.data()) sout += v;
    EXPECT_NEAR(sin, sout, 1e-12);
  }
}

TEST(MaxPool, MatchesFiniteDifferences) {
  Rng rng(13);
  auto x = random_tensor<double>(rng, {5, 6, 3});
  auto r = random_tensor<double>(rng, {2, 3, 3});
  auto g = maxpool2x2_backward(maxpool2x2(x), r);
  auto loss = [&] { return probe(maxpool2x2(x).output, r); };
  EXPECT_LE(relative_error(gather(g), numeric_gradient(x, loss)), 1e-4);
}

TEST(Dense, MatchesFiniteDifferences) {
  Rng rng(14);
  auto x = random_tensor<double>(rng, {3, 6});
  auto w = random_tensor<double>(rng, {6, 4});
  auto b = random_tensor<double>(rng, {4});
  auto r = random_tensor<double>(rng, {3, 4});
  auto loss = [&] { return probe(dense(x, w, b), r); };
  auto g = dense_backward(x, w, r);
  EXPECT_LE(relative_error(gather(g.input), numeric_gradient(x, loss)), 1e-4);
  EXPECT_LE(relative_error(gather(g.weights), numeric_gradient(w, loss)), 1e-4);
  EXPECT_LE(relative_error(gather(g.bias), numeric_gradient(b, loss)), 1e-4);
}

TEST(Dense, VectorInput) {
  TensorF x({2}, {1, 2});
  TensorF w({2, 1}, {3, 4});
  EXPECT_EQ(dense(x, w, TensorF({1}, {0.5f})), TensorF({1}, {11.5f}));
}

TEST(SoftmaxXent, UniformLogitsGiveLn2) {
  auto r = softmax_xent(TensorD({2}, {0.3, 0.3}), TensorD({2}, {0, 1}));
  EXPECT_NEAR(r.loss, std::log(2.0), 1e-12);
  EXPECT_NEAR(r.loss, 0.6931, 1e-4);
}

TEST(SoftmaxXent, LossNonNegativeAndGradientSumsToZero) {
  Rng rng(15);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t m = 2 + rng.below(4);
    auto logits = random_tensor<double>(rng, {m}, 5.0);
    TensorD target({m});
    target[rng.below(static_cast<std::uint32_t>(m))] = 1.0;
    auto r = softmax_xent(logits, target);
    EXPECT_GE(r.loss, 0.0);
    double s = 0;
    for (double g : r.grad.data()) s += g;
    EXPECT_NEAR(s, 0.0, 1e-12);
    auto loss = [&] { return softmax_xent(logits, target).loss; };
    EXPECT_LE(relative_error(gather(r.grad), numeric_gradient(logits, loss)), 1e-4);
  }
}

TEST(SoftmaxXent, RejectsNonOneHotTargets) {
  TensorF logits({2}, {0, 1});
  EXPECT_THROW(softmax_xent(logits, TensorF({2}, {0.5f, 0.5f})), InputError);
  EXPECT_THROW(softmax_xent(logits, TensorF({2}, {1, 1})), InputError);
  EXPECT_THROW(softmax_xent(logits, TensorF({2}, {0, 0})), InputError);
}

TEST(SoftmaxXent, BatchIsMeanOfSingles) {
  Rng rng(16);
  auto logits = random_tensor<double>(rng, {3, 2});
  std::vector<int> labels{0, 1, 1};
  auto batch = softmax_xent_batch(logits, labels);
  double total = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    TensorD row({2}, {logits[2 * i], logits[2 * i + 1]});
    TensorD target({2});
    target[labels[i]] = 1.0;
    auto single = softmax_xent(row, target);
    total += single.loss;
    for (std::size_t k = 0; k < 2; ++k) EXPECT_NEAR(batch.grad[2 * i + k], single.grad[k] / 3.0, 1e-15);
  }
  EXPECT_NEAR(batch.loss, total / 3.0, 1e-15);
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  TensorD p({3}, {1, -2, 3});
  TensorD g({3});
  AdamState<double> state;
  std::vector<TensorD*> ps{&p};
  std::vector<const TensorD*> gs{&g};
  adam_step<double>(ps, gs, state);
  EXPECT_EQ(p, TensorD({3}, {1, -2, 3}));
  EXPECT_EQ(state.step, 1u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  TensorD p({4}, {0, 0, 0, 0});
  TensorD g({4}, {1e-3, -5.0, 1e3, 0.2});
  AdamState<double> state;
  std::vector<TensorD*> ps{&p};
  std::vector<const TensorD*> gs{&g};
  adam_step<double>(ps, gs, state);
  for (std::size_t i = 0; i < 4; ++i) {
    // t = 1: m̂ = g, v̂ = g², update = lr·g/(|g| + eps)
    const double want = -1e-3 * g[i] / (std::abs(g[i]) + 1e-8);
    EXPECT_NEAR(p[i], want, 1e-15);
    EXPECT_NEAR(std::abs(p[i]), 1e-3, 1e-7);
  }
}

TEST(Adam, TwoStepsMatchRecurrence) {
  const double g = 0.3, lr = 1e-3, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  TensorD p({1}, {1.0});
  TensorD grad({1}, {g});
  AdamState<double> state;
  std::vector<TensorD*> ps{&p};
  std::vector<const TensorD*> gs{&grad};
  adam_step<double>(ps, gs, state);
  adam_step<double>(ps, gs, state);
  double m = 0, v = 0, x = 1.0;
  for (int t = 1; t <= 2; ++t) {
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    x -= lr * (m / (1 - std::pow(b1, t))) / (std::sqrt(v / (1 - std::pow(b2, t))) + eps);
  }
  EXPECT_NEAR(p[0], x, 1e-7);
  EXPECT_EQ(state.step, 2u);
  EXPECT_GE(state.second_moment[0][0], 0.0);
}

TEST(Adam, NonFiniteGradientAbortsStep) {
  TensorF p({2}, {1, 2});
  TensorF q({1}, {3});
  TensorF gp({2}, {0.1f, 0.1f});
  TensorF gq({1}, {std::nanf("")});
  AdamState<float> state;
  std::vector<TensorF*> ps{&p, &q};
  std::vector<const TensorF*> gs{&gp, &gq};
  EXPECT_THROW(adam_step<float>(ps, gs, state), NumericError);
  EXPECT_EQ(p, TensorF({2}, {1, 2}));
  EXPECT_EQ(state.step, 0u);
}

double max_offdiag_gram(const std::vector<std::vector<double>>& rows, double* max_norm_dev) {
  double worst = 0;
  *max_norm_dev = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows.size(); ++j) {
      double d = 0;
      for (std::size_t k = 0; k < rows[i].size(); ++k) d += rows[i][k] * rows[j][k];
      if (i == j) {
        *max_norm_dev = std::max(*max_norm_dev, std::abs(std::sqrt(d) - 1.0));
      } else {
        worst = std::max(worst, std::abs(d));
      }
    }
  }
  return worst;
}

TEST(OrthogonalInit, SingleFilterHasUnitNorm) {
  Rng rng(17);
  auto w = orthogonal_init(rng, {3, 3, 2, 1});
  double s = 0;
  for (float v : w.data()) s += static_cast<double>(v) * v;
  EXPECT_NEAR(std::sqrt(s), 1.0, 1e-6);
}

TEST(OrthogonalInit, FilterRowsAreOrthonormal) {
  Rng rng(18);
  for (Shape shape : {Shape{3, 3, 32, 32}, Shape{3, 3, 32, 64}, Shape{3, 3, 64, 64}, Shape{5, 5, 3, 32}, Shape{3, 3, 1, 9}}) {
    auto w = orthogonal_init(rng, shape);
    double norm_dev = 0;
    EXPECT_LE(max_offdiag_gram(filter_rows(w), &norm_dev), 1e-5) << shape_string(shape);
    EXPECT_LE(norm_dev, 1e-5);
  }
}

TEST(OrthogonalInit, SeedDeterminesBytes) {
  Rng a(42), b(42);
  auto wa = orthogonal_init(a, {3, 3, 1, 4});
  auto wb = orthogonal_init(b, {3, 3, 1, 4});
  ASSERT_EQ(wa.size(), wb.size());
  EXPECT_EQ(std::memcmp(wa.ptr(), wb.ptr(), wa.size() * sizeof(float)), 0);
}

TEST(OrthogonalInit, TooManyFiltersIsConfigError) {
  Rng rng(19);
  EXPECT_THROW(orthogonal_init(rng, {3, 3, 3, 32}), ConfigError);
}

TEST(OrthogonalInit, OvercompleteShapeGetsOrthonormalColumns) {
  Rng rng(20);
  auto w = semi_orthogonal_init(rng, {3, 3, 3, 32});
  const auto rows = filter_rows(w);  // 32 × 27
  std::vector<std::vector<double>> cols(27, std::vector<double>(32));
  for (std::size_t o = 0; o < 32; ++o)
    for (std::size_t r = 0; r < 27; ++r) cols[r][o] = rows[o][r];
  double norm_dev = 0;
  EXPECT_LE(max_offdiag_gram(cols, &norm_dev), 1e-5);
  EXPECT_LE(norm_dev, 1e-5);
}

TEST(Rng, SameSeedSameStream) {
  Rng a(7), b(7), c(8);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    auto x = a.next_u32();
    EXPECT_EQ(x, b.next_u32());
    differs |= x != c.next_u32();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, SubstreamsAreIndependentOfConsumptionOrder) {
  Rng root(99);
  Rng first = root.substream("augmentation");
  root.next_u64();
  Rng second = root.substream("augmentation");
  EXPECT_EQ(first.next_u64(), second.next_u64());
  EXPECT_NE(root.substream("init").next_u64(), root.substream("tsne").next_u64());
}

TEST(Rng, KnownPcg32Output) {
  // Reference values from the PCG32 demo (seed 42, stream 54).
  Rng rng(42, 54);
  EXPECT_EQ(rng.next_u32(), 0xa15c02b7u);
  EXPECT_EQ(rng.next_u32(), 0x7b47f409u);
  EXPECT_EQ(rng.next_u32(), 0xba1d3330u);
}

}  // namespace
}  // namespace focusclf::numerics
