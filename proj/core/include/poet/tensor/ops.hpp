#pragma once

#include <span>
#include <vector>

#include "poet/tensor/tensor.hpp"

namespace poet {

// All operations are eager: values are computed immediately and a backward
// rule is recorded on the active Tape when any input requires a gradient.
// Binary elementwise ops broadcast when the second operand is a scalar or
// its shape is a suffix of the first operand's shape (and symmetrically for
// a scalar first operand); anything else requires an explicit reshape.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose2d(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

// scale * a + offset, elementwise with constants.
Tensor affine(const Tensor& a, double scale, double offset);

Tensor relu(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);

// arccos(clamp(x, -1 + eps, 1 - eps)); gradient is zero in the clamped
// region, so it stays finite at the rotation-distance extremes.
Tensor acos_clamped(const Tensor& a, double eps);

Tensor softmax(const Tensor& a, std::size_t axis);
Tensor layernorm(const Tensor& a, std::size_t axis, double eps);

Tensor sum(const Tensor& a);
// Euclidean norm of all elements; subgradient 0 at the exact origin.
Tensor norm(const Tensor& a);

Tensor reshape(const Tensor& a, std::vector<std::size_t> shape);
Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t len);
Tensor concat(std::span<const Tensor> parts, std::size_t axis);

// out[i, j] = a[i, j] * s[i], with s of shape [rows(a)].
Tensor rows_scale(const Tensor& a, const Tensor& s);
// Sums consecutive groups of `group` rows: [g*group, n] -> [g, n].
Tensor group_sum_rows(const Tensor& a, std::size_t group);

// map: [C, H, W]; points: [P, 2] normalized (x, y) in [0,1]^2 with the
// align-to-cell-center convention; out-of-range points are border-clamped.
// Differentiable w.r.t. both map values and point coordinates. Returns [P, C].
Tensor bilinear_sample(const Tensor& map, const Tensor& points);

// input [Cin, H, W], weight [Cout, Cin, kh, kw], bias [Cout].
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              std::size_t stride, std::size_t pad);

}  // namespace poet
