#pragma once

#include <span>
#include <string>
#include <vector>

#include "focusclf/cnn/train.hpp"
#include "focusclf/welm/features.hpp"
#include "focusclf/welm/welm.hpp"

namespace focusclf::welm {

struct HyperGrid {
  std::vector<double> C;
  std::vector<double> gamma;

  /// C ∈ {2^-6, 2^-4, …, 2^12}, γ ∈ {2^-10, 2^-8, …, 2^4}.
  static HyperGrid defaults();
  void validate() const;  // ConfigError when empty or non-positive
};

struct GridCell {
  double C = 0.0;
  double gamma = 0.0;
  eval::MetricsReport metrics;
};

struct GridResult {
  double C = 0.0;
  double gamma = 0.0;
  eval::MetricsReport best;
  std::vector<GridCell> cells;  // C-major order
  KernelModel model;            // fitted at the selected pair
};

/// Fits every (C, γ) on the training rows and keeps the pair with the highest
/// validation G-mean (first in grid order on ties).
GridResult welm_grid_search(const Matrix& train_x, std::span<const int> train_labels, const Matrix& val_x,
                            std::span<const int> val_labels, const HyperGrid& grid, Kernel kernel = Kernel::Rbf,
                            bool standardize = true);

struct TapRow {
  std::string taps;
  std::vector<eval::MetricsReport> folds;
  std::vector<std::pair<double, double>> chosen;  // (C, γ) per fold
  eval::MetricsReport average;
};

struct TapTableOptions {
  std::vector<std::vector<Tap>> tap_sets = default_tap_sets();
  Pooling pooling = Pooling::ChannelAverage;
  HyperGrid grid = HyperGrid::defaults();
  Kernel kernel = Kernel::Rbf;
  bool standardize = true;
};

/// For every fold of a cross-validation run: features of the unaugmented
/// training and validation lesions from that fold's network, then a per-fold
/// grid search for every tap set. Training labels carry the same label noise
/// the network was trained with.
std::vector<TapRow> welm_tap_table(std::span<const data::LesionImage> lesions, const cnn::CvResult& cv,
                                   const cnn::CvOptions& cv_options, const TapTableOptions& options);

}  // namespace focusclf::welm
