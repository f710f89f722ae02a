#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "focusclf/eval/metrics.hpp"

// Weighted kernel extreme learning machine. Targets are coded ±1 per class
// column; the output weights are never formed, only kernel products.
namespace focusclf::welm {

enum class Kernel { Rbf, Linear };

std::string to_string(Kernel kernel);
Kernel parse_kernel(const std::string& text);

using Matrix = std::vector<std::vector<double>>;

/// exp(-gamma·‖u−v‖²)
double rbf_kernel(std::span<const double> u, std::span<const double> v, double gamma);
double linear_kernel(std::span<const double> u, std::span<const double> v);

/// Pairwise squared distances of the rows of X.
Eigen::MatrixXd squared_distances(const Matrix& x);
Eigen::MatrixXd kernel_matrix(const Matrix& x, Kernel kernel, double gamma);

/// Per-dimension mean and scale fitted on training rows (scale 1 for constant dims).
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  std::vector<double> apply(std::span<const double> row) const;
  Matrix apply(const Matrix& rows) const;
};
Standardizer fit_standardizer(const Matrix& x);

struct WelmOptions {
  double C = 1.0;
  double gamma = 1.0;
  Kernel kernel = Kernel::Rbf;
  bool standardize = true;
  /// Per-sample weights; empty means 1/(size of the sample's class).
  std::vector<double> weights;
};

struct KernelModel {
  Kernel kernel = Kernel::Rbf;
  double C = 1.0;
  double gamma = 1.0;
  std::optional<Standardizer> standardizer;
  Matrix train;                   // rows after standardization
  std::vector<double> weights;    // w_i
  Eigen::MatrixXd coefficients;   // N×2
  double rcond = 0.0;             // reciprocal condition estimate of the solved system

  std::size_t dimension() const { return train.empty() ? 0 : train[0].size(); }
};

/// Class weights 1/count(class of i).
std::vector<double> inverse_class_weights(std::span<const int> labels);

/// N×2 target matrix, +1 in the true class column and −1 in the other.
Eigen::MatrixXd target_matrix(std::span<const int> labels);

/// Solves (I/C + W·Ω)·A = W·T.
KernelModel welm_fit(const Matrix& x, std::span<const int> labels, const WelmOptions& options);

/// Same solve from a precomputed Ω (rows already standardized). Used by the grid search.
KernelModel welm_fit_kernel(const Matrix& x, const Eigen::MatrixXd& omega, std::span<const int> labels,
                            const WelmOptions& options);

/// Unweighted kernel ELM: (I/C + Ω)·A = T by Cholesky.
KernelModel kelm_fit(const Matrix& x, std::span<const int> labels, double C, double gamma, Kernel kernel = Kernel::Rbf,
                     bool standardize = false);

struct WelmPrediction {
  std::array<double, 2> scores{0.0, 0.0};
  int decision = 0;  // argmax; a tie goes to benign
};

WelmPrediction welm_predict(const KernelModel& model, std::span<const double> x);
std::vector<WelmPrediction> welm_predict(const KernelModel& model, const Matrix& x);

/// Hard decisions for metrics, malignant-column scores for AUC.
eval::MetricsReport evaluate_predictions(std::span<const WelmPrediction> predictions, std::span<const int> labels);

void save_kernel_model(const std::filesystem::path& path, const KernelModel& model);
KernelModel load_kernel_model(const std::filesystem::path& path);

}  // namespace focusclf::welm
