#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace focusclf::eval {

struct TsneOptions {
  double perplexity = 30.0;
  int iterations = 1000;
  std::uint64_t seed = 0;
  double learning_rate = 200.0;
  double exaggeration = 4.0;
  int exaggeration_iterations = 100;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  int momentum_switch = 250;
  double entropy_tolerance = 1e-5;
  int max_bisection_steps = 50;
};

struct Embedding2D {
  std::vector<std::array<double, 2>> coords;
  double initial_kl = 0.0;  // KL right after the random initialization
  double final_kl = 0.0;
  std::vector<double> perplexities;  // achieved per-point perplexity
  TsneOptions options;
};

/// Conditional distribution p_{j|i} for one point: bisection on the Gaussian
/// precision until exp(entropy) matches `perplexity`. Returns the achieved perplexity.
double calibrate_row(std::span<const double> squared_distances, std::size_t self, double perplexity,
                     double tolerance, int max_steps, std::span<double> out_probabilities);

/// Exact (O(N²) per iteration) t-SNE into two dimensions.
Embedding2D tsne(const std::vector<std::vector<double>>& features, const TsneOptions& options);

/// Fraction of each point's k nearest neighbours (excluding itself) that share
/// its label, averaged over points.
double knn_purity(std::span<const std::array<double, 2>> coords, std::span<const int> labels, std::size_t k);

}  // namespace focusclf::eval
