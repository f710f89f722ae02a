#include <gtest/gtest.h>

#include <cmath>

#include "focusclf/eval/metrics.hpp"
#include "focusclf/eval/report.hpp"
#include "focusclf/eval/tsne.hpp"
#include "focusclf/rng.hpp"

using namespace focusclf;
using namespace focusclf::eval;

namespace {

// O(N⁺·N⁻) definition: P(score of a positive > score of a negative), ties half.
double pairwise_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0;
  double pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (y[i] == 1 && y[j] == 0) {
        pairs += 1;
        wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
      }
  return wins / pairs;
}

std::vector<std::vector<double>> three_clusters(std::size_t n, std::size_t d, std::uint64_t seed, std::vector<int>& labels) {
  Rng rng(seed);
  std::vector<std::vector<double>> x;
  labels.clear();
  for (std::size_t i = 0; i < n; ++i) {
    const int c = static_cast<int>(i % 3);
    std::vector<double> row(d);
    for (std::size_t k = 0; k < d; ++k) row[k] = rng.normal() + (k == static_cast<std::size_t>(c) ? 10.0 : 0.0);
    x.push_back(row);
    labels.push_back(c);
  }
  return x;
}

}  // namespace

TEST(Metrics, WorkedCountExample) {
  const auto m = metrics_from_counts(7, 0, 20, 4);
  EXPECT_DOUBLE_EQ(m.sensitivity, 1.0);
  EXPECT_NEAR(m.specificity, 20.0 / 24.0, 1e-15);
  EXPECT_EQ(round2(m.sensitivity), 1.00);
  EXPECT_EQ(round2(m.specificity), 0.83);
  EXPECT_EQ(round2(m.g_mean), 0.91);
  EXPECT_NEAR(m.accuracy, 27.0 / 31.0, 1e-15);
}

TEST(Metrics, ConfusionCountsFromDecisions) {
  const std::vector<int> y{1, 1, 1, 0, 0, 0, 0};
  const std::vector<int> d{1, 0, 1, 0, 1, 0, 0};
  const auto m = confusion_metrics(d, y);
  EXPECT_EQ(m.tp, 2u);
  EXPECT_EQ(m.fn, 1u);
  EXPECT_EQ(m.tn, 3u);
  EXPECT_EQ(m.fp, 1u);
  EXPECT_EQ(m.total(), 7u);
}

TEST(Metrics, GMeanSquaredIsSensTimesSpec) {
  Rng rng(3);
  for (int t = 0; t < 200; ++t) {
    const auto m = metrics_from_counts(1 + rng.below(50), rng.below(50), 1 + rng.below(50),
                                       rng.below(50));
    EXPECT_NEAR(m.g_mean * m.g_mean, m.sensitivity * m.specificity, 1e-12);
    EXPECT_GE(m.g_mean, 0.0);
    EXPECT_LE(m.g_mean, 1.0);
  }
}

TEST(Metrics, UndefinedRatesAreNaN) {
  const auto m = metrics_from_counts(0, 0, 5, 1);
  EXPECT_FALSE(m.sensitivity_defined);
  EXPECT_TRUE(std::isnan(m.sensitivity));
  EXPECT_TRUE(std::isnan(m.g_mean));
  EXPECT_TRUE(m.specificity_defined);
  EXPECT_TRUE(std::isnan(roc_auc(std::vector<double>{0.1, 0.2}, std::vector<int>{0, 0})));
}

TEST(Metrics, ThresholdIsStrict) {
  const std::vector<double> s{0.5, 0.51, 0.2};
  const std::vector<int> y{1, 1, 0};
  const auto m = evaluate_scores(s, y, 0.5);
  EXPECT_EQ(m.tp, 1u);
  EXPECT_EQ(m.fn, 1u);
}

TEST(Metrics, AucMatchesPairwiseDefinition) {
  Rng rng(11);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + rng.below(199);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      // Coarse scores so ties are common.
      s[i] = std::round(rng.uniform() * 20.0) / 20.0;
      y[i] = rng.uniform() < 0.3;
    }
    y[0] = 1;
    y[1] = 0;
    const double auc = roc_auc(s, y);
    EXPECT_EQ(auc, pairwise_auc(s, y));
    const auto curve = roc_curve(s, y);
    EXPECT_NEAR(trapezoid_area(curve), auc, 1e-12);
  }
}

TEST(Metrics, AucInvariantToMonotoneTransform) {
  Rng rng(12);
  std::vector<double> s(50), t(50);
  std::vector<int> y(50);
  for (std::size_t i = 0; i < 50; ++i) {
    s[i] = rng.normal();
    t[i] = std::exp(3 * s[i]) + 7;
    y[i] = i % 3 == 0;
  }
  EXPECT_EQ(roc_auc(s, y), roc_auc(t, y));
}

TEST(Metrics, AverageIsMeanOfFoldValues) {
  const std::vector<MetricsReport> folds{metrics_from_counts(1, 1, 4, 0), metrics_from_counts(2, 0, 2, 2)};
  const auto avg = average_reports(folds);
  EXPECT_NEAR(avg.sensitivity, 0.75, 1e-15);
  EXPECT_NEAR(avg.g_mean, (folds[0].g_mean + folds[1].g_mean) / 2, 1e-15);
  EXPECT_NE(avg.g_mean, std::sqrt(avg.sensitivity * avg.specificity));
}

TEST(Metrics, Rounding) {
  EXPECT_EQ(round2(0.825), 0.83);
  EXPECT_EQ(round2(0.9128709), 0.91);
  EXPECT_EQ(round2(1.0), 1.0);
}

TEST(Report, TableHasTwoDecimalsAndNa) {
  std::vector<ReportRow> rows{{"CV1", metrics_from_counts(7, 0, 20, 4)}, {"CV2", metrics_from_counts(0, 0, 3, 1)}};
  rows[0].metrics.auc = 0.9512;
  const std::string table = format_table(rows, "title");
  EXPECT_NE(table.find("1.00"), std::string::npos);
  EXPECT_NE(table.find("0.83"), std::string::npos);
  EXPECT_NE(table.find("0.91"), std::string::npos);
  EXPECT_NE(table.find("0.95"), std::string::npos);
  EXPECT_NE(table.find("n/a"), std::string::npos);
  const std::string csv = format_csv(rows);
  EXPECT_EQ(csv.substr(0, csv.find(',')), "name");
}

TEST(Report, FoldRowsEndWithAverage) {
  const std::vector<MetricsReport> folds{metrics_from_counts(1, 0, 1, 0), metrics_from_counts(1, 0, 1, 0)};
  const auto rows = fold_rows(folds, average_reports(folds));
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].name, "CV1");
  EXPECT_EQ(rows[2].name, "Average");
}

TEST(Tsne, CalibratedRowHitsPerplexity) {
  Rng rng(4);
  std::vector<double> d2(60);
  for (auto& v : d2) v = rng.uniform() * 10;
  d2[7] = 0;
  std::vector<double> p(60);
  const double achieved = calibrate_row(d2, 7, 15.0, 1e-5, 100, p);
  EXPECT_NEAR(achieved, 15.0, 1e-2);
  EXPECT_EQ(p[7], 0.0);
  double sum = 0, h = 0;
  for (double v : p) {
    sum += v;
    if (v > 0) h -= v * std::log(v);
  }
  EXPECT_NEAR(sum, 1.0, 1e-12);
  EXPECT_NEAR(std::exp(h), achieved, 1e-6);
}

TEST(Tsne, SeparatesClustersAndIsDeterministic) {
  std::vector<int> labels;
  const auto x = three_clusters(90, 8, 5, labels);
  TsneOptions o;
  o.perplexity = 10;
  o.iterations = 400;
  o.seed = 9;
  const auto a = tsne(x, o);
  EXPECT_LT(a.final_kl, 0.5 * a.initial_kl);
  EXPECT_GE(knn_purity(a.coords, labels, 5), 0.9);
  const auto b = tsne(x, o);
  EXPECT_EQ(a.coords, b.coords);
  EXPECT_EQ(a.final_kl, b.final_kl);
}

TEST(Tsne, RejectsImpossiblePerplexity) {
  std::vector<int> labels;
  const auto x = three_clusters(9, 4, 5, labels);
  TsneOptions o;
  o.perplexity = 30;
  EXPECT_THROW(tsne(x, o), InputError);
}

TEST(Tsne, KnnPurityOfPerfectClusters) {
  std::vector<std::array<double, 2>> c{{0, 0}, {0, 1}, {1, 0}, {100, 100}, {100, 101}, {101, 100}};
  const std::vector<int> y{0, 0, 0, 1, 1, 1};
  EXPECT_DOUBLE_EQ(knn_purity(c, y, 2), 1.0);
  const std::vector<int> mixed{0, 1, 0, 1, 0, 1};
  EXPECT_LT(knn_purity(c, mixed, 2), 0.5);
}
