#include "focusclf/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "focusclf/errors.hpp"

namespace focusclf::eval {
namespace {

void check_binary(std::span<const int> labels) {
  for (int l : labels)
    if (l != 0 && l != 1) throw InputError("labels must be binary (0 = benign, 1 = malignant)");
}

}  // namespace

MetricsReport metrics_from_counts(std::size_t tp, std::size_t fn, std::size_t tn, std::size_t fp) {
  MetricsReport r;
  r.tp = tp;
  r.fn = fn;
  r.tn = tn;
  r.fp = fp;
  if (tp + fn > 0) {
    r.sensitivity = static_cast<double>(tp) / static_cast<double>(tp + fn);
    r.sensitivity_defined = true;
  }
  if (tn + fp > 0) {
    r.specificity = static_cast<double>(tn) / static_cast<double>(tn + fp);
    r.specificity_defined = true;
  }
  r.g_mean = std::sqrt(r.sensitivity * r.specificity);
  if (r.total() > 0) r.accuracy = static_cast<double>(tp + tn) / static_cast<double>(r.total());
  return r;
}

MetricsReport confusion_metrics(std::span<const int> decisions, std::span<const int> labels) {
  if (decisions.size() != labels.size()) throw InputError("confusion_metrics: decisions and labels differ in length");
  check_binary(labels);
  check_binary(decisions);
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) {
      (decisions[i] == 1 ? tp : fn)++;
    } else {
      (decisions[i] == 1 ? fp : tn)++;
    }
  }
  return metrics_from_counts(tp, fn, tn, fp);
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw InputError("roc_auc: scores and labels differ in length");
  check_binary(labels);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Twice the Mann-Whitney U: 2 per correctly ordered pair, 1 per tie.
  std::uint64_t twice_u = 0, negatives_below = 0, positives = 0, negatives = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::uint64_t pos = 0, neg = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == 1 ? pos : neg)++;
      ++j;
    }
    twice_u += 2 * pos * negatives_below + pos * neg;
    negatives_below += neg;
    positives += pos;
    negatives += neg;
    i = j;
  }
  if (positives == 0 || negatives == 0) return kNaN;
  return static_cast<double>(twice_u) / (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));
}

std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw InputError("roc_curve: scores and labels differ in length");
  check_binary(labels);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  const auto pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  const auto neg = static_cast<double>(labels.size()) - pos;
  std::vector<RocPoint> curve{{0.0, 0.0}};
  if (pos == 0 || neg == 0) return curve;
  double tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == 1 ? tp : fp) += 1;
      ++j;
    }
    curve.push_back({fp / neg, tp / pos});
    i = j;
  }
  return curve;
}

double trapezoid_area(std::span<const RocPoint> curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    area += (curve[i].fpr - curve[i - 1].fpr) * (curve[i].tpr + curve[i - 1].tpr) / 2.0;
  }
  return area;
}

MetricsReport evaluate_scores(std::span<const double> scores, std::span<const int> labels, double threshold) {
  std::vector<int> decisions(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) decisions[i] = scores[i] > threshold ? 1 : 0;
  MetricsReport r = confusion_metrics(decisions, labels);
  r.auc = roc_auc(scores, labels);
  r.auc_defined = !std::isnan(r.auc);
  return r;
}

MetricsReport average_reports(std::span<const MetricsReport> folds) {
  MetricsReport avg;
  auto mean_of = [&](auto field) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& f : folds) {
      double v = field(f);
      if (!std::isnan(v)) {
        sum += v;
        ++n;
      }
    }
    return n ? sum / static_cast<double>(n) : kNaN;
  };
  for (const auto& f : folds) {
    avg.tp += f.tp;
    avg.fp += f.fp;
    avg.tn += f.tn;
    avg.fn += f.fn;
  }
  avg.sensitivity = mean_of([](const MetricsReport& r) { return r.sensitivity; });
  avg.specificity = mean_of([](const MetricsReport& r) { return r.specificity; });
  avg.g_mean = mean_of([](const MetricsReport& r) { return r.g_mean; });
  avg.accuracy = mean_of([](const MetricsReport& r) { return r.accuracy; });
  avg.auc = mean_of([](const MetricsReport& r) { return r.auc; });
  avg.sensitivity_defined = !std::isnan(avg.sensitivity);
  avg.specificity_defined = !std::isnan(avg.specificity);
  avg.auc_defined = !std::isnan(avg.auc);
  return avg;
}

double round2(double value) { return std::round(value * 100.0) / 100.0; }

}  // namespace focusclf::eval
