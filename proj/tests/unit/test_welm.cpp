#include <gtest/gtest.h>

#include <filesystem>

#include "focusclf/welm/features.hpp"
#include "focusclf/welm/grid.hpp"
#include "focusclf/welm/welm.hpp"
#include "support/welm_oracle.hpp"

namespace fs = std::filesystem;
using namespace focusclf;
using namespace focusclf::welm;

namespace {

Matrix random_points(Rng& rng, std::size_t n, std::size_t d, std::vector<int>& labels, double separation = 1.5) {
  Matrix x(n, std::vector<double>(d));
  labels.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = i % 4 == 0;  // 1:3 imbalance
    for (std::size_t k = 0; k < d; ++k) x[i][k] = rng.normal() + (labels[i] ? separation : 0.0);
  }
  return x;
}

}  // namespace

TEST(Kernels, Values) {
  const std::vector<double> u{1, 2}, v{2, 0};
  EXPECT_DOUBLE_EQ(linear_kernel(u, v), 2.0);
  EXPECT_DOUBLE_EQ(rbf_kernel(u, v, 0.5), std::exp(-0.5 * 5.0));
  EXPECT_DOUBLE_EQ(rbf_kernel(u, u, 3.0), 1.0);
  EXPECT_THROW(linear_kernel(u, std::vector<double>{1}), InputError);
  const Matrix x{{0, 0}, {3, 4}};
  EXPECT_DOUBLE_EQ(squared_distances(x)(0, 1), 25.0);
  EXPECT_DOUBLE_EQ(kernel_matrix(x, Kernel::Rbf, 0.04)(1, 0), std::exp(-1.0));
}

TEST(Standardizer, FitsMeanAndScale) {
  const Matrix x{{1, 5}, {3, 5}, {5, 5}};
  const auto s = fit_standardizer(x);
  EXPECT_DOUBLE_EQ(s.mean[0], 3.0);
  EXPECT_DOUBLE_EQ(s.scale[1], 1.0);  // constant dimension
  const auto z = s.apply(x);
  EXPECT_DOUBLE_EQ(z[1][0], 0.0);
  EXPECT_DOUBLE_EQ(z[0][1], 0.0);
  EXPECT_NEAR(z[0][0], -z[2][0], 1e-15);
}

TEST(Welm, ClassWeightsAndTargets) {
  const std::vector<int> y{1, 0, 0, 0};
  const auto w = inverse_class_weights(y);
  EXPECT_DOUBLE_EQ(w[0], 1.0);
  EXPECT_DOUBLE_EQ(w[1], 1.0 / 3.0);
  const auto t = target_matrix(y);
  EXPECT_EQ(t(0, 1), 1.0);
  EXPECT_EQ(t(0, 0), -1.0);
  EXPECT_EQ(t(2, 0), 1.0);
}

TEST(Welm, HandSolvedTwoPointSystem) {
  // Ω = [[0,0],[0,1]], W = I, C = 1: A = diag(1, 1/2)·T.
  WelmOptions o;
  o.C = 1;
  o.kernel = Kernel::Linear;
  o.standardize = false;
  const Matrix x{{0.0}, {1.0}};
  const std::vector<int> y{0, 1};
  const auto m = welm_fit(x, y, o);
  EXPECT_NEAR(m.coefficients(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(m.coefficients(0, 1), -1.0, 1e-15);
  EXPECT_NEAR(m.coefficients(1, 0), -0.5, 1e-15);
  EXPECT_NEAR(m.coefficients(1, 1), 0.5, 1e-15);
  const auto p = welm_predict(m, std::vector<double>{2.0});
  EXPECT_NEAR(p.scores[0], -1.0, 1e-15);
  EXPECT_NEAR(p.scores[1], 1.0, 1e-15);
  EXPECT_EQ(p.decision, 1);
}

TEST(Welm, TieGoesToBenign) {
  WelmOptions o;
  o.kernel = Kernel::Linear;
  o.standardize = false;
  const auto m = welm_fit(Matrix{{0.0}, {1.0}}, std::vector<int>{0, 1}, o);
  const auto p = welm_predict(m, std::vector<double>{0.0});  // both scores are 0
  EXPECT_EQ(p.scores[0], p.scores[1]);
  EXPECT_EQ(p.decision, 0);
}

TEST(Welm, LinearKernelMatchesPrimalGradientDescent) {
  Rng rng(21);
  std::vector<int> y;
  const Matrix x = random_points(rng, 30, 3, y);
  WelmOptions o;
  o.C = 2.0;
  o.kernel = Kernel::Linear;
  o.standardize = false;
  const auto m = welm_fit(x, y, o);
  const auto beta = focusclf::testing::primal_gradient_descent(x, y, inverse_class_weights(y), o.C);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto p = welm_predict(m, x[i]);
    for (int c = 0; c < 2; ++c) {
      double primal = 0;
      for (std::size_t k = 0; k < 3; ++k) primal += x[i][k] * beta(static_cast<Eigen::Index>(k), c);
      EXPECT_NEAR(p.scores[c], primal, 1e-4);
    }
  }
}

TEST(Welm, LargeCInterpolatesTrainingTargets) {
  Rng rng(22);
  std::vector<int> y;
  const Matrix x = random_points(rng, 40, 4, y, 0.0);  // labels carry no signal
  WelmOptions o;
  o.C = 1e8;
  o.gamma = 0.5;
  const auto m = welm_fit(x, y, o);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto p = welm_predict(m, x[i]);
    EXPECT_NEAR(p.scores[y[i]], 1.0, 1e-3);
    EXPECT_NEAR(p.scores[1 - y[i]], -1.0, 1e-3);
  }
}

TEST(Welm, UnitWeightsReduceToKelm) {
  Rng rng(23);
  std::vector<int> y;
  const Matrix x = random_points(rng, 25, 3, y);
  WelmOptions o;
  o.C = 4;
  o.gamma = 0.3;
  o.standardize = false;
  o.weights.assign(x.size(), 1.0);
  const auto a = welm_fit(x, y, o);
  const auto b = kelm_fit(x, y, 4, 0.3);
  EXPECT_LE((a.coefficients - b.coefficients).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Welm, ScalingWeightsEqualsScalingC) {
  Rng rng(24);
  std::vector<int> y;
  const Matrix x = random_points(rng, 25, 3, y);
  WelmOptions a;
  a.C = 3;
  a.standardize = false;
  a.weights = inverse_class_weights(y);
  WelmOptions b = a;
  for (auto& w : b.weights) w *= 5;
  a.C *= 5;
  // (I/(5C) + WΩ)A = WT  ⇔  (I/C + 5WΩ)A = 5WT
  EXPECT_LE((welm_fit(x, y, a).coefficients - welm_fit(x, y, b).coefficients).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Welm, WeightingHelpsTheMinorityClass) {
  Rng rng(25);
  std::vector<int> y;
  const Matrix x = random_points(rng, 200, 2, y, 1.0);
  WelmOptions weighted;
  weighted.C = 1;
  weighted.gamma = 0.5;
  WelmOptions unweighted = weighted;
  unweighted.weights.assign(x.size(), 1.0 / x.size());
  const auto pw = welm_predict(welm_fit(x, y, weighted), x);
  const auto pu = welm_predict(welm_fit(x, y, unweighted), x);
  const auto mw = evaluate_predictions(pw, y);
  const auto mu = evaluate_predictions(pu, y);
  EXPECT_GE(mw.sensitivity, mu.sensitivity);
}

TEST(Welm, SingularSystemIsANumericError) {
  WelmOptions o;
  o.C = 1e30;
  o.kernel = Kernel::Linear;
  o.standardize = false;
  EXPECT_THROW(welm_fit(Matrix{{1.0}, {1.0}, {1.0}}, std::vector<int>{0, 1, 0}, o), NumericError);
  EXPECT_THROW(welm_fit(Matrix{{1.0}, {2.0}}, std::vector<int>{0, 0}, WelmOptions{}), InputError);
}

TEST(Welm, SaveLoadRoundTrip) {
  Rng rng(26);
  std::vector<int> y;
  const Matrix x = random_points(rng, 30, 5, y);
  WelmOptions o;
  o.C = 8;
  o.gamma = 0.125;
  const auto m = welm_fit(x, y, o);
  const auto path = fs::temp_directory_path() / "focusclf_test_welm.ckpt";
  save_kernel_model(path, m);
  const auto back = load_kernel_model(path);
  EXPECT_EQ(back.kernel, Kernel::Rbf);
  EXPECT_EQ(back.C, 8.0);
  ASSERT_TRUE(back.standardizer.has_value());
  for (const auto& row : x) {
    const auto a = welm_predict(m, row), b = welm_predict(back, row);
    EXPECT_NEAR(a.scores[1], b.scores[1], 1e-4);
    EXPECT_EQ(a.decision, b.decision);
  }
}

TEST(Grid, DefaultsAndValidation) {
  const auto g = HyperGrid::defaults();
  EXPECT_EQ(g.C.size(), 10u);
  EXPECT_EQ(g.C.front(), std::ldexp(1.0, -6));
  EXPECT_EQ(g.C.back(), std::ldexp(1.0, 12));
  EXPECT_EQ(g.gamma.size(), 8u);
  EXPECT_EQ(g.gamma.front(), std::ldexp(1.0, -10));
  EXPECT_EQ(g.gamma.back(), std::ldexp(1.0, 4));
  HyperGrid bad{{1.0}, {}};
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = {{-1.0}, {1.0}};
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Grid, PicksBestValidationGMeanFirstOnTies) {
  Rng rng(27);
  std::vector<int> ty, vy;
  const Matrix tx = random_points(rng, 80, 3, ty, 2.0);
  const Matrix vx = random_points(rng, 40, 3, vy, 2.0);
  const HyperGrid grid{{0.25, 4, 64}, {0.01, 0.1, 1}};
  const auto r = welm_grid_search(tx, ty, vx, vy, grid);
  ASSERT_EQ(r.cells.size(), 9u);
  EXPECT_EQ(r.cells[1].C, 0.25);
  EXPECT_EQ(r.cells[1].gamma, 0.1);
  double best = -1;
  std::size_t first = 0;
  for (std::size_t i = 0; i < r.cells.size(); ++i) {
    if (r.cells[i].metrics.g_mean > best) {
      best = r.cells[i].metrics.g_mean;
      first = i;
    }
  }
  EXPECT_EQ(r.C, r.cells[first].C);
  EXPECT_EQ(r.gamma, r.cells[first].gamma);
  EXPECT_EQ(r.best.g_mean, best);
  // The returned model reproduces the winning cell.
  const auto m = evaluate_predictions(welm_predict(r.model, vx), vy);
  EXPECT_EQ(m.g_mean, best);
}

TEST(Features, TapParsing) {
  EXPECT_EQ(parse_taps("C1+C4"), (std::vector<Tap>{Tap::C1, Tap::C4}));
  EXPECT_EQ(taps_name(parse_taps("FC2")), "FC2");
  EXPECT_THROW(parse_taps("C9"), InputError);
  EXPECT_EQ(default_tap_sets().size(), 7u);
  EXPECT_EQ(parse_pooling("flatten"), Pooling::Flatten);
}

TEST(Features, Dimensions) {
  cnn::ModelConfig c;
  EXPECT_EQ(feature_dimension(c, parse_taps("C1+C4"), Pooling::ChannelAverage), 96u);
  EXPECT_EQ(feature_dimension(c, parse_taps("FC1"), Pooling::ChannelAverage), 512u);
  EXPECT_EQ(feature_dimension(c, parse_taps("C1"), Pooling::Flatten), 32u * 32 * 32);
}

TEST(Features, ExtractionMatchesForwardActivations) {
  cnn::ModelConfig c;
  Rng rng(28);
  auto p = cnn::build_model(c, rng);
  std::vector<data::Patch> patches(3);
  TensorF batch({3, 32, 32, 3});
  for (auto& v : batch.data()) v = static_cast<float>(rng.uniform());
  for (std::size_t i = 0; i < 3; ++i) {
    patches[i].channels = c.channels;
    patches[i].size = 32;
    patches[i].data = TensorF({32, 32, 3}, std::vector<float>(batch.ptr() + i * 3072, batch.ptr() + (i + 1) * 3072));
    patches[i].record.lesion_id = "L" + std::to_string(i);
    patches[i].record.label = data::Label::Malignant;
  }
  cnn::ForwardCache<float> cache;
  cnn::forward(p, batch, cnn::Mode::Train, &cache);
  cnn::update_bn_stats(p, cache);
  cnn::forward(p, batch, cnn::Mode::Infer, &cache);
  const auto f = extract_features(p, patches, parse_taps("C4+FC2"));
  ASSERT_EQ(f.size(), 3u);
  ASSERT_EQ(f[1].values.size(), 64u + 128u);
  double mean = 0;
  for (std::size_t y = 0; y < 16; ++y)
    for (std::size_t x = 0; x < 16; ++x) mean += cache.activation[3][((1 * 16 + y) * 16 + x) * 64 + 5];
  EXPECT_NEAR(f[1].values[5], mean / 256, 1e-5);
  EXPECT_NEAR(f[2].values[64 + 7], cache.fc2[2 * 128 + 7], 1e-5);
  EXPECT_EQ(f[0].label, 1);
}

TEST(Features, CsvRoundTripIsExact) {
  std::vector<FeatureVector> f(2);
  f[0] = {"A", 1, {Tap::C1}, Pooling::ChannelAverage, {0.1, 1.0 / 3.0, -2e-300}};
  f[1] = {"B", -1, {Tap::C1}, Pooling::ChannelAverage, {5, 6, 7}};
  const auto path = fs::temp_directory_path() / "focusclf_test_features.csv";
  write_features_csv(path, f);
  const auto back = read_features_csv(path);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].values, f[0].values);
  EXPECT_EQ(back[1].label, -1);
  EXPECT_EQ(feature_labels(back), (std::vector<int>{1, -1}));
}
