#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "unimatch/numerics/tensor.hpp"

// Differentiable primitives. Every function records its adjoint on the active
// tape when an input requires grad, and raises NumericError on non-finite
// output. "Rows" means the tensor viewed as [prod(leading extents) x last].

namespace unimatch {

enum class Padding { kSame, kValid };

// Linear algebra.
Tensor matmul(const Tensor& a, const Tensor& b);     // [m x k] . [k x n]
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // [m x k] . [n x k]^T
Tensor transpose(const Tensor& a);                   // 2-D only
/// [m x k] . [n x k]^T with a fixed left-to-right summation per entry, so
/// pairwise_dot(a, b) is bitwise the transpose of pairwise_dot(b, a).
Tensor pairwise_dot(const Tensor& a, const Tensor& b);

// Elementwise (identical shapes).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, Real s);
Tensor add_scalar(const Tensor& a, Real s);
Tensor abs(const Tensor& a);
Tensor smooth_l1(const Tensor& a, Real beta);
Tensor gelu(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor clamp_min(const Tensor& a, Real lo);
Tensor clamp(const Tensor& a, Real lo, Real hi);
Tensor reciprocal(const Tensor& a);

// Row broadcasting.
Tensor add_bias(const Tensor& a, const Tensor& bias);  // bias has a.cols() values
Tensor mul_col(const Tensor& a, const Tensor& s);      // s has a.rows() values
Tensor rowwise_dot(const Tensor& a, const Tensor& b);  // -> [rows x 1]

// Reductions.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

/// softmax(scale * t) over the last axis, with max subtraction. Entries whose
/// `keep` flag is 0 receive probability 0; every slice must keep one entry.
Tensor softmax_last(const Tensor& t, Real scale, std::span<const std::uint8_t> keep = {});

/// Layer normalization over the last axis with affine gamma/beta.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Real eps = 1e-5);
/// Per-channel normalization over all rows (H*W), no affine.
Tensor instance_norm(const Tensor& x, Real eps = 1e-5);

/// Cross-correlation of an [H x W x Cin] map with a [k x k x Cin x Cout] kernel.
Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride, Padding pad);

/// Samples an [H x W x D] map at (x, y) pixel coordinates [H' x W' x 2] with
/// 4-neighbour bilinear weights; neighbours outside the grid contribute zero.
Tensor bilinear_sample(const Tensor& feat, const Tensor& coords);

// Layout.
Tensor reshape(const Tensor& a, Shape shape);
/// out row r = a row idx[r]; idx[r] < 0 yields a zero row.
Tensor gather_rows(const Tensor& a, std::span<const std::int64_t> idx);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_last(std::span<const Tensor> parts);
Tensor slice_last(const Tensor& a, std::size_t begin, std::size_t count);

}  // namespace unimatch
