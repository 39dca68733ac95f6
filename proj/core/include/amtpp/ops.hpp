// Differentiable primitives over Tensor, plus a few composites built from
// them (gelu, log-sum-exp, log-softmax). Elementwise binaries broadcast with
// the usual right-aligned rules. Shape violations throw std::invalid_argument
// naming the op; domain violations (log of a non-positive value, division by
// zero, bad pow base) throw std::domain_error.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "amtpp/tensor.hpp"

namespace amtpp {

class Rng;

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor divide(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, double b);
Tensor sub(const Tensor& a, double b);
Tensor sub(double a, const Tensor& b);
Tensor mul(const Tensor& a, double b);
Tensor neg(const Tensor& a);

Tensor matmul(const Tensor& a, const Tensor& b);  // (m×k)·(k×n)
Tensor transpose(const Tensor& a);                // 2-D

Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);                      // strictly positive input
Tensor pow(const Tensor& a, double p);
Tensor sin(const Tensor& a);
Tensor cos(const Tensor& a);
Tensor erf(const Tensor& a);

// Numerically stable softmax (max subtraction). axis -1 means the last axis;
// 2-D tensors accept axis 0 (columns) or 1 (rows).
Tensor softmax(const Tensor& a, int axis = -1);

Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis);
Tensor reshape(const Tensor& a, Shape shape);
Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t stop);
// Gathers along `axis` (0 or 1); rank-1 tensors gather elements.
Tensor index_select(const Tensor& a, std::size_t axis, std::vector<std::size_t> idx);

Tensor sum_all(const Tensor& a);                  // scalar
Tensor sum_axis(const Tensor& a, std::size_t axis);  // 2-D, keeps the reduced dim as 1
Tensor broadcast_to(const Tensor& a, Shape shape);

// out[i] = mask[i] ? value : a[i]; no gradient through filled entries.
Tensor masked_fill(const Tensor& a, const std::vector<std::uint8_t>& mask, double value);

// Piecewise combination: out[i] = sel[i] >= 0 ? if_ge[i] : if_lt[i].
// The selector only routes values and gradients; it receives no gradient.
Tensor select_ge0(const Tensor& sel, const Tensor& if_ge, const Tensor& if_lt);

// ---- composites ----

Tensor gelu(const Tensor& a);                     // 0.5·x·(1+erf(x/√2))
Tensor logsumexp_rows(const Tensor& a);           // (m×n) -> (m×1)
Tensor log_softmax_rows(const Tensor& a);         // (m×n) -> (m×n)
// Row maxima as a detached (m×1) constant; used to stabilize exp/log chains
// without contributing a gradient path.
Tensor row_max_detached(const Tensor& a);
// Inverted-scale dropout on a tensor; rate 0 is an exact no-op.
Tensor dropout(const Tensor& a, double rate, Rng& rng);

}  // namespace amtpp
