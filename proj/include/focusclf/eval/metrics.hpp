#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

// Binary classification metrics; malignant (class 1) is the positive class.
namespace focusclf::eval {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct MetricsReport {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  double sensitivity = kNaN;
  double specificity = kNaN;
  double g_mean = kNaN;
  double accuracy = kNaN;
  double auc = kNaN;
  bool sensitivity_defined = false;  // false when there are no positive labels
  bool specificity_defined = false;  // false when there are no negative labels
  bool auc_defined = false;
  int fold = -1;
  std::string fingerprint;

  std::size_t total() const { return tp + fp + tn + fn; }
};

/// Metrics from hard decisions (0/1) against binary labels.
MetricsReport confusion_metrics(std::span<const int> decisions, std::span<const int> labels);

MetricsReport metrics_from_counts(std::size_t tp, std::size_t fn, std::size_t tn, std::size_t fp);

/// Mann-Whitney AUC with half credit for ties. Integer pair counting, so the
/// result is bit-identical to the pairwise definition. NaN if a class is absent.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

struct RocPoint {
  double fpr;
  double tpr;
};

/// ROC vertices from (0,0) to (1,1), one per distinct score threshold.
std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels);
double trapezoid_area(std::span<const RocPoint> curve);

/// Threshold `scores` (malignant probability or score) at `threshold` and add AUC.
MetricsReport evaluate_scores(std::span<const double> scores, std::span<const int> labels, double threshold = 0.5);

/// Mean of each per-fold value (so the averaged g_mean is the mean of fold
/// g-means, not the g-mean of the averaged rates). Undefined fold values are skipped.
MetricsReport average_reports(std::span<const MetricsReport> folds);

/// Two-decimal display rounding used in the tables.
double round2(double value);

}  // namespace focusclf::eval
