#pragma once

#include "focusclf/rng.hpp"
#include "focusclf/tensor.hpp"

namespace focusclf::numerics {

/// Conv filters Kh×Kw×Cin×Cout whose flattened rows (one per output channel,
/// length Kh·Kw·Cin) are orthonormal: Gram-Schmidt on a Gaussian draw.
/// Throws ConfigError when Cout > Kh·Kw·Cin.
TensorF orthogonal_init(Rng& rng, const Shape& shape);

/// Like orthogonal_init, but when there are more filters than the row length
/// the orthonormal axis flips: the Kh·Kw·Cin columns of the filter matrix are
/// orthonormal instead (a Parseval tight frame of filters).
TensorF semi_orthogonal_init(Rng& rng, const Shape& shape);

/// Flattened filter matrix F (Cout × Kh·Kw·Cin) of a conv weight tensor.
std::vector<std::vector<double>> filter_rows(const TensorF& weights);

/// Glorot-uniform draw for an in×out dense weight matrix.
TensorF glorot_uniform(Rng& rng, std::size_t fan_in, std::size_t fan_out);

}  // namespace focusclf::numerics
