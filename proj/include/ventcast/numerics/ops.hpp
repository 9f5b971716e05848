#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "ventcast/numerics/tensor.hpp"

namespace ventcast::num {

// Elementwise, identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);

// x[m×n] + bias[n] broadcast over rows.
Tensor add_row(const Tensor& x, const Tensor& bias);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
// Exact (erf) GELU; smooth everywhere, which keeps finite-difference checks clean.
Tensor gelu(const Tensor& x);
Tensor log(const Tensor& x);

// Numerically stable softmax along `axis` of a tensor of any rank.
Tensor softmax(const Tensor& x, std::size_t axis);
// Row softmax of x[m×n] restricted to entries where mask[i*n+j] != 0. Fully
// masked rows produce zeros. Masked entries contribute exactly nothing, so the
// result is bitwise independent of their values.
Tensor masked_softmax(const Tensor& x, std::span<const std::uint8_t> mask);
Tensor log_softmax(const Tensor& x);

// Row-wise layer normalisation of x[m×n] with affine gamma[n], beta[n].
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

// Rows of table[V×d] selected by ids → [ids.size()×d].
Tensor embedding(const Tensor& table, std::span<const std::int64_t> ids);

// Concatenation of matrices along axis 0 (rows) or 1 (columns); vectors along 0.
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
// Contiguous slice [start, start+length) along axis 0 or 1 of a matrix.
Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length);
// Stack equally shaped tensors along a new leading axis.
Tensor stack(const std::vector<Tensor>& parts);
Tensor reshape(const Tensor& x, Shape shape);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
// Column means of x[m×n] → [n].
Tensor mean_rows(const Tensor& x);

// out[i][j] = x[i][index[i*n+j]] for x[m×k], producing [m×n].
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> index, std::size_t n);
// out[i] = x[i][cols[i]] → [m].
Tensor pick(const Tensor& x, std::span<const std::size_t> cols);

// Binary cross-entropy on a probability tensor (any shape, mean reduction).
// Probabilities outside [0,1] violate the contract; inside, they are clamped
// to [eps, 1-eps].
inline constexpr double kProbabilityEps = 1e-12;
Tensor bce_loss(const Tensor& p, std::span<const double> labels);
Tensor bce_loss(const Tensor& p, double label);

// Inverted dropout; identity when rate == 0.
Tensor dropout(const Tensor& x, double rate, std::mt19937_64& rng);

}  // namespace ventcast::num
