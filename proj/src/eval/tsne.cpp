#include "focusclf/eval/tsne.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "focusclf/errors.hpp"
#include "focusclf/rng.hpp"

namespace focusclf::eval {
namespace {

std::vector<double> pairwise_squared(const std::vector<std::vector<double>>& x) {
  const std::size_t n = x.size();
  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < x[i].size(); ++k) {
        double diff = x[i][k] - x[j][k];
        s += diff * diff;
      }
      d[i * n + j] = d[j * n + i] = s;
    }
  }
  return d;
}

// Student-t affinities: fills num (unnormalized) and returns their sum.
double student_t(const std::vector<std::array<double, 2>>& y, std::vector<double>& num) {
  const std::size_t n = y.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    num[i * n + i] = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      double dx = y[i][0] - y[j][0], dy = y[i][1] - y[j][1];
      double q = 1.0 / (1.0 + dx * dx + dy * dy);
      num[i * n + j] = num[j * n + i] = q;
      total += 2.0 * q;
    }
  }
  return total;
}

double kl_divergence(const std::vector<double>& p, const std::vector<double>& num, double num_sum) {
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) {
      double q = std::max(num[i] / num_sum, std::numeric_limits<double>::min());
      kl += p[i] * std::log(p[i] / q);
    }
  }
  return std::max(kl, 0.0);
}

}  // namespace

double calibrate_row(std::span<const double> sq, std::size_t self, double perplexity, double tolerance, int max_steps,
                     std::span<double> out) {
  const double target = std::log(perplexity);
  double min_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < sq.size(); ++j)
    if (j != self) min_d = std::min(min_d, sq[j]);
  double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
  double entropy = 0.0;
  for (int step = 0; step < max_steps; ++step) {
    double sum = 0.0, weighted = 0.0;
    for (std::size_t j = 0; j < sq.size(); ++j) {
      // Shifting by the nearest distance keeps exp() away from underflow.
      out[j] = j == self ? 0.0 : std::exp(-beta * (sq[j] - min_d));
      sum += out[j];
      weighted += (sq[j] - min_d) * out[j];
    }
    entropy = std::log(sum) + beta * weighted / sum;
    for (double& v : out) v /= sum;
    const double diff = entropy - target;
    if (std::abs(diff) < tolerance) break;
    if (diff > 0) {
      lo = beta;
      beta = std::isinf(hi) ? beta * 2.0 : (beta + hi) / 2.0;
    } else {
      hi = beta;
      beta = (beta + lo) / 2.0;
    }
  }
  return std::exp(entropy);
}

Embedding2D tsne(const std::vector<std::vector<double>>& features, const TsneOptions& options) {
  const std::size_t n = features.size();
  if (n == 0) throw InputError("tsne: no samples");
  if (static_cast<double>(n) < 3.0 * options.perplexity) {
    throw ConfigError("tsne: need N >= 3·perplexity (N = " + std::to_string(n) + ")");
  }
  const std::size_t dim = features[0].size();
  for (const auto& f : features)
    if (f.size() != dim) throw ShapeError("tsne: ragged feature matrix");

  std::vector<double> sq = pairwise_squared(features);
  if (std::all_of(sq.begin(), sq.end(), [](double v) { return v == 0.0; })) {
    throw InputError("tsne: all feature vectors are identical; the embedding is undefined");
  }
  // Scale-free bandwidth search: normalize by the largest distance.
  const double max_sq = *std::max_element(sq.begin(), sq.end());
  for (double& v : sq) v /= max_sq;

  Embedding2D result;
  result.options = options;
  result.perplexities.resize(n);
  std::vector<double> p(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    result.perplexities[i] = calibrate_row(std::span<const double>(sq).subspan(i * n, n), i, options.perplexity,
                                           options.entropy_tolerance, options.max_bisection_steps,
                                           std::span<double>(p).subspan(i * n, n));
  }
  // Symmetrize: p_ij = (p_{j|i} + p_{i|j}) / 2N.
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double v = (p[i * n + j] + p[j * n + i]) / (2.0 * static_cast<double>(n));
      v = std::max(v, 1e-12);
      p[i * n + j] = p[j * n + i] = v;
    }
  }

  Rng rng = Rng(options.seed).substream("tsne");
  std::vector<std::array<double, 2>> y(n), velocity(n, {0.0, 0.0}), gains(n, {1.0, 1.0});
  for (auto& pt : y) pt = {rng.normal() * 1e-4, rng.normal() * 1e-4};

  std::vector<double> num(n * n, 0.0);
  result.initial_kl = kl_divergence(p, num, student_t(y, num));

  std::vector<std::array<double, 2>> grad(n);
  for (int iter = 0; iter < options.iterations; ++iter) {
    const double exaggeration = iter < options.exaggeration_iterations ? options.exaggeration : 1.0;
    const double momentum = iter < options.momentum_switch ? options.initial_momentum : options.final_momentum;
    const double num_sum = student_t(y, num);
    for (std::size_t i = 0; i < n; ++i) {
      double gx = 0.0, gy = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const double q = num[i * n + j];
        const double mult = (exaggeration * p[i * n + j] - q / num_sum) * q;
        gx += mult * (y[i][0] - y[j][0]);
        gy += mult * (y[i][1] - y[j][1]);
      }
      grad[i] = {4.0 * gx, 4.0 * gy};
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (int d = 0; d < 2; ++d) {
        const bool same_sign = (grad[i][d] > 0) == (velocity[i][d] > 0);
        gains[i][d] = same_sign ? std::max(gains[i][d] * 0.8, 0.01) : gains[i][d] + 0.2;
        velocity[i][d] = momentum * velocity[i][d] - options.learning_rate * gains[i][d] * grad[i][d];
        y[i][d] += velocity[i][d];
      }
    }
    double mx = 0.0, my = 0.0;
    for (const auto& pt : y) {
      mx += pt[0];
      my += pt[1];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    for (auto& pt : y) {
      pt[0] -= mx;
      pt[1] -= my;
    }
  }
  result.final_kl = kl_divergence(p, num, student_t(y, num));
  for (const auto& pt : y) {
    if (!std::isfinite(pt[0]) || !std::isfinite(pt[1])) throw NumericError("tsne: embedding diverged");
  }
  result.coords = std::move(y);
  return result;
}

double knn_purity(std::span<const std::array<double, 2>> coords, std::span<const int> labels, std::size_t k) {
  const std::size_t n = coords.size();
  if (labels.size() != n) throw InputError("knn_purity: coords and labels differ in length");
  if (k == 0 || k >= n) throw ConfigError("knn_purity: k must be in [1, N)");
  double total = 0.0;
  std::vector<std::pair<double, std::size_t>> dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double dx = coords[i][0] - coords[j][0], dy = coords[i][1] - coords[j][1];
      dist[j] = {j == i ? std::numeric_limits<double>::infinity() : dx * dx + dy * dy, j};
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    std::size_t same = 0;
    for (std::size_t m = 0; m < k; ++m) same += labels[dist[m].second] == labels[i];
    total += static_cast<double>(same) / static_cast<double>(k);
  }
  return total / static_cast<double>(n);
}

}  // namespace focusclf::eval
