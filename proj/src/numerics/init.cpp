#include "focusclf/numerics/init.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace focusclf::numerics {
namespace {

using Rows = std::vector<std::vector<double>>;

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Modified Gram-Schmidt, two passes; rows.size() must not exceed the row length.
void orthonormalize(Rows& rows) {
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t j = 0; j < i; ++j) {
        double proj = dot(rows[i], rows[j]);
        for (std::size_t k = 0; k < rows[i].size(); ++k) rows[i][k] -= proj * rows[j][k];
      }
    }
    double norm = std::sqrt(dot(rows[i], rows[i]));
    if (norm < 1e-12) throw NumericError("orthogonal_init: degenerate random draw");
    for (double& v : rows[i]) v /= norm;
  }
}

Rows gaussian_rows(Rng& rng, std::size_t count, std::size_t length) {
  Rows rows(count, std::vector<double>(length));
  for (auto& row : rows)
    for (double& v : row) v = rng.normal();
  return rows;
}

void check_conv_shape(const Shape& shape) {
  if (shape.size() != 4) throw ConfigError("orthogonal_init: expected Kh×Kw×Cin×Cout, got " + shape_string(shape));
  for (std::size_t e : shape)
    if (e == 0) throw ConfigError("orthogonal_init: zero extent in " + shape_string(shape));
}

}  // namespace

TensorF orthogonal_init(Rng& rng, const Shape& shape) {
  check_conv_shape(shape);
  const std::size_t len = shape[0] * shape[1] * shape[2];
  const std::size_t cout = shape[3];
  if (cout > len) {
    throw ConfigError("orthogonal_init: " + std::to_string(cout) + " filters cannot be orthonormal in dimension " +
                      std::to_string(len));
  }
  Rows rows = gaussian_rows(rng, cout, len);
  orthonormalize(rows);
  TensorF w(shape);
  // Element (kh, kw, ci, o) lives at flat index r·Cout + o with r = (kh·Kw + kw)·Cin + ci.
  for (std::size_t o = 0; o < cout; ++o)
    for (std::size_t r = 0; r < len; ++r) w[r * cout + o] = static_cast<float>(rows[o][r]);
  return w;
}

TensorF semi_orthogonal_init(Rng& rng, const Shape& shape) {
  check_conv_shape(shape);
  const std::size_t len = shape[0] * shape[1] * shape[2];
  const std::size_t cout = shape[3];
  if (cout <= len) return orthogonal_init(rng, shape);
  Rows cols = gaussian_rows(rng, len, cout);
  orthonormalize(cols);
  TensorF w(shape);
  for (std::size_t r = 0; r < len; ++r)
    for (std::size_t o = 0; o < cout; ++o) w[r * cout + o] = static_cast<float>(cols[r][o]);
  return w;
}

Rows filter_rows(const TensorF& weights) {
  if (weights.rank() != 4) throw ShapeError("filter_rows: expected a rank-4 conv weight tensor");
  const std::size_t cout = weights.extent(3);
  const std::size_t len = weights.size() / cout;
  Rows rows(cout, std::vector<double>(len));
  for (std::size_t o = 0; o < cout; ++o)
    for (std::size_t r = 0; r < len; ++r) rows[o][r] = weights[r * cout + o];
  return rows;
}

TensorF glorot_uniform(Rng& rng, std::size_t fan_in, std::size_t fan_out) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  TensorF w({fan_in, fan_out});
  for (float& v : w.data()) v = static_cast<float>(rng.uniform(-limit, limit));
  return w;
}

}  // namespace focusclf::numerics
