#include "focusclf/welm/grid.hpp"

#include <cmath>

#include "focusclf/errors.hpp"

namespace focusclf::welm {

HyperGrid HyperGrid::defaults() {
  HyperGrid g;
  for (int e = -6; e <= 12; e += 2) g.C.push_back(std::ldexp(1.0, e));
  for (int e = -10; e <= 4; e += 2) g.gamma.push_back(std::ldexp(1.0, e));
  return g;
}

void HyperGrid::validate() const {
  if (C.empty() || gamma.empty()) throw ConfigError("wELM hyperparameter grid is empty");
  for (double c : C)
    if (!(c > 0.0) || !std::isfinite(c)) throw ConfigError("wELM grid: C values must be positive");
  for (double g : gamma)
    if (!(g > 0.0) || !std::isfinite(g)) throw ConfigError("wELM grid: gamma values must be positive");
}

GridResult welm_grid_search(const Matrix& train_x, std::span<const int> train_labels, const Matrix& val_x,
                            std::span<const int> val_labels, const HyperGrid& grid, Kernel kernel, bool standardize) {
  grid.validate();
  std::optional<Standardizer> standardizer;
  if (standardize) standardizer = fit_standardizer(train_x);
  const Matrix train = standardizer ? standardizer->apply(train_x) : train_x;
  const Matrix val = standardizer ? standardizer->apply(val_x) : val_x;
  const Eigen::MatrixXd d2 = squared_distances(train);
  const Eigen::MatrixXd linear = kernel == Kernel::Linear ? kernel_matrix(train, Kernel::Linear, 1.0) : Eigen::MatrixXd();
  // The linear kernel ignores γ, so only the first γ is evaluated for it.
  const std::vector<double> gammas = kernel == Kernel::Linear ? std::vector<double>{grid.gamma[0]} : grid.gamma;

  GridResult result;
  bool have = false;
  double best_g = -1.0;
  for (double c : grid.C) {
    for (double g : gammas) {
      WelmOptions opts;
      opts.C = c;
      opts.gamma = g;
      opts.kernel = kernel;
      opts.standardize = false;
      const Eigen::MatrixXd omega = kernel == Kernel::Rbf ? Eigen::MatrixXd((-g * d2.array()).exp()) : linear;
      KernelModel m = welm_fit_kernel(train, omega, train_labels, opts);
      GridCell cell{c, g, evaluate_predictions(welm_predict(m, val), val_labels)};
      const double gm = std::isnan(cell.metrics.g_mean) ? -1.0 : cell.metrics.g_mean;
      if (!have || gm > best_g) {
        have = true;
        best_g = gm;
        result.C = c;
        result.gamma = g;
        result.best = cell.metrics;
        result.model = std::move(m);
      }
      result.cells.push_back(std::move(cell));
    }
  }
  result.model.standardizer = standardizer;
  return result;
}

std::vector<TapRow> welm_tap_table(std::span<const data::LesionImage> lesions, const cnn::CvResult& cv,
                                   const cnn::CvOptions& cv_options, const TapTableOptions& options) {
  options.grid.validate();
  std::vector<TapRow> rows(options.tap_sets.size());
  for (std::size_t t = 0; t < rows.size(); ++t) rows[t].taps = taps_name(options.tap_sets[t]);
  for (const auto& fold : cv.folds) {
    const auto& config = fold.checkpoint.config;
    auto [train_lesions, val_lesions] = data::split_by_fold<data::LesionImage>(
        lesions, cv.split, fold.fold, [](const data::LesionImage& l) -> const data::LesionRecord& { return l.record; });
    train_lesions = cnn::noisy_training_lesions(std::move(train_lesions), cv_options.train_label_noise, config.seed,
                                                fold.fold);
    const auto train = data::original_patches(train_lesions, config.input_size);
    const auto val = data::original_patches(val_lesions, config.input_size);
    const auto train_taps = extract_tap_features(fold.checkpoint.params, train, options.pooling);
    const auto val_taps = extract_tap_features(fold.checkpoint.params, val, options.pooling);
    for (std::size_t t = 0; t < rows.size(); ++t) {
      const auto tf = compose_features(train_taps, train, options.tap_sets[t], options.pooling);
      const auto vf = compose_features(val_taps, val, options.tap_sets[t], options.pooling);
      auto r = welm_grid_search(feature_matrix(tf), feature_labels(tf), feature_matrix(vf), feature_labels(vf),
                                options.grid, options.kernel, options.standardize);
      r.best.fold = static_cast<int>(fold.fold);
      rows[t].folds.push_back(r.best);
      rows[t].chosen.emplace_back(r.C, r.gamma);
    }
  }
  for (auto& row : rows) row.average = eval::average_reports(row.folds);
  return rows;
}

}  // namespace focusclf::welm
