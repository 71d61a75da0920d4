#include "unimatch/numerics/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "unimatch/errors.hpp"
#include "unimatch/numerics/tape.hpp"

namespace unimatch {
namespace {

using MatR = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;

constexpr Real kInvSqrt2 = 0.70710678118654752440;
constexpr Real kInvSqrt2Pi = 0.39894228040143267794;

void require_rank(const Tensor& t, std::size_t r, const char* op) {
  if (t.rank() != r) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(r) + ", got " +
                         shape_str(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

Tensor finish(Tensor out, const char* op) {
  detail::check_finite(out, op);
  return out;
}

// Shared implementation for unary elementwise maps: f(x) and f'(x).
template <typename F, typename DF>
Tensor unary(const Tensor& a, const char* op, F f, DF df) {
  Tensor out(a.shape());
  const Real* x = a.data();
  Real* y = out.data_mut();
  for (std::size_t i = 0, n = a.numel(); i < n; ++i) y[i] = f(x[i]);
  finish(out, op);
  if (detail::should_record({&a})) {
    detail::record(out, {&a}, [a, df](const detail::TensorImpl& o) {
      Real* ga = detail::grad_of(a);
      if (!ga) return;
      const Real* x = a.data();
      for (std::size_t i = 0, n = o.data.size(); i < n; ++i) ga[i] += o.grad[i] * df(x[i]);
    });
  }
  return out;
}

Shape with_last(const Shape& s, std::size_t last) {
  Shape r = s.empty() ? Shape{1} : s;
  r.back() = last;
  return r;
}

// Visits the in-grid neighbours of sample point i with
// (flat offset, weight, dweight/dx, dweight/dy).
template <typename Visit>
void bilinear_corners(const Real* coords, long h, long w, std::size_t i, Visit&& visit) {
  const Real x = coords[2 * i], y = coords[2 * i + 1];
  if (!(x > -1 && x < static_cast<Real>(w) && y > -1 && y < static_cast<Real>(h))) return;
  const Real fx0 = std::floor(x), fy0 = std::floor(y);
  const long x0 = static_cast<long>(fx0), y0 = static_cast<long>(fy0);
  const Real ax = x - fx0, ay = y - fy0;
  const long xs[2] = {x0, x0 + 1}, ys[2] = {y0, y0 + 1};
  const Real wx[2] = {1 - ax, ax}, wy[2] = {1 - ay, ay};
  const Real dw[2] = {-1, 1};
  for (int cy = 0; cy < 2; ++cy)
    for (int cx = 0; cx < 2; ++cx) {
      if (xs[cx] < 0 || xs[cx] >= w || ys[cy] < 0 || ys[cy] >= h) continue;
      visit(static_cast<std::size_t>(ys[cy] * w + xs[cx]), wx[cx] * wy[cy], dw[cx] * wy[cy],
            wx[cx] * dw[cy]);
    }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner extents differ " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  }
  Tensor out(Shape{m, n});
  if (k > 0) {
    MapR(out.data_mut(), m, n).noalias() = CMapR(a.data(), m, k) * CMapR(b.data(), k, n);
  }
  finish(out, "matmul");
  if (detail::should_record({&a, &b})) {
    detail::record(out, {&a, &b}, [a, b, m, k, n](const detail::TensorImpl& o) {
      CMapR g(o.grad.data(), m, n);
      if (Real* ga = detail::grad_of(a); ga && k > 0) {
        MapR(ga, m, k).noalias() += g * CMapR(b.data(), k, n).transpose();
      }
      if (Real* gb = detail::grad_of(b); gb && k > 0) {
        MapR(gb, k, n).noalias() += CMapR(a.data(), m, k).transpose() * g;
      }
    });
  }
  return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul_nt");
  require_rank(b, 2, "matmul_nt");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
  if (b.dim(1) != k) {
    throw DimensionError("matmul_nt: inner extents differ " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()) + "^T");
  }
  Tensor out(Shape{m, n});
  if (k > 0) {
    MapR(out.data_mut(), m, n).noalias() =
        CMapR(a.data(), m, k) * CMapR(b.data(), n, k).transpose();
  }
  finish(out, "matmul_nt");
  if (detail::should_record({&a, &b})) {
    detail::record(out, {&a, &b}, [a, b, m, k, n](const detail::TensorImpl& o) {
      CMapR g(o.grad.data(), m, n);
      if (Real* ga = detail::grad_of(a); ga && k > 0) {
        MapR(ga, m, k).noalias() += g * CMapR(b.data(), n, k);
      }
      if (Real* gb = detail::grad_of(b); gb && k > 0) {
        MapR(gb, n, k).noalias() += g.transpose() * CMapR(a.data(), m, k);
      }
    });
  }
  return out;
}

Tensor pairwise_dot(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "pairwise_dot");
  require_rank(b, 2, "pairwise_dot");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
  if (b.dim(1) != k) {
    throw DimensionError("pairwise_dot: inner extents differ " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
  Tensor out(Shape{m, n});
  for (std::size_t i = 0; i < m; ++i) {
    const Real* ai = a.data() + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const Real* bj = b.data() + j * k;
      Real acc = 0;
      for (std::size_t t = 0; t < k; ++t) acc += ai[t] * bj[t];
      out.data_mut()[i * n + j] = acc;
    }
  }
  finish(out, "pairwise_dot");
  if (detail::should_record({&a, &b})) {
    detail::record(out, {&a, &b}, [a, b, m, k, n](const detail::TensorImpl& o) {
      CMapR g(o.grad.data(), m, n);
      if (Real* ga = detail::grad_of(a); ga && k > 0) {
        MapR(ga, m, k).noalias() += g * CMapR(b.data(), n, k);
      }
      if (Real* gb = detail::grad_of(b); gb && k > 0) {
        MapR(gb, n, k).noalias() += g.transpose() * CMapR(a.data(), m, k);
      }
    });
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  Tensor out(Shape{n, m});
  MapR(out.data_mut(), n, m) = CMapR(a.data(), m, n).transpose();
  if (detail::should_record({&a})) {
    detail::record(out, {&a}, [a, m, n](const detail::TensorImpl& o) {
      if (Real* ga = detail::grad_of(a)) {
        MapR(ga, m, n) += CMapR(o.grad.data(), n, m).transpose();
      }
    });
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out(a.shape());
  for (std::size_t i = 0, n = a.numel(); i < n; ++i) out.data_mut()[i] = a[i] + b[i];
  finish(out, "add");
  if (detail::should_record({&a, &b})) {
    detail::record(out, {&a, &b}, [a, b](const detail::TensorImpl& o) {
      const std::size_t n = o.data.size();
      if (Real* ga = detail::grad_of(a))
        for (std::size_t i = 0; i < n; ++i) ga[i] += o.grad[i];
      if (Real* gb = detail::grad_of(b))
        for (std::size_t i = 0; i < n; ++i) gb[i] += o.grad[i];
    });
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor out(a.shape());
  for (std::size_t i = 0, n = a.numel(); i < n; ++i) out.data_mut()[i] = a[i] - b[i];
  finish(out, "sub");
  if (detail::should_record({&a, &b})) {
    detail::record(out, {&a, &b}, [a, b](const detail::TensorImpl& o) {
      const std::size_t n = o.data.size();
      if (Real* ga = detail::grad_of(a))
        for (std::size_t i = 0; i < n; ++i) ga[i] += o.grad[i];
      if (Real* gb = detail::grad_of(b))
        for (std::size_t i = 0; i < n; ++i) gb[i] -= o.grad[i];
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor out(a.shape());
  for (std::size_t i = 0, n = a.numel(); i < n; ++i) out.data_mut()[i] = a[i] * b[i];
  finish(out, "mul");
  if (detail::should_record({&a, &b})) {
    detail::record(out, {&a, &b}, [a, b](const detail::TensorImpl& o) {
      const std::size_t n = o.data.size();
      if (Real* ga = detail::grad_of(a))
        for (std::size_t i = 0; i < n; ++i) ga[i] += o.grad[i] * b[i];
      if (Real* gb = detail::grad_of(b))
        for (std::size_t i = 0; i < n; ++i) gb[i] += o.grad[i] * a[i];
    });
  }
  return out;
}

Tensor scale(const Tensor& a, Real s) {
  return unary(
      a, "scale", [s](Real x) { return s * x; }, [s](Real) { return s; });
}

Tensor add_scalar(const Tensor& a, Real s) {
  return unary(
      a, "add_scalar", [s](Real x) { return x + s; }, [](Real) { return Real(1); });
}

Tensor abs(const Tensor& a) {
  return unary(
      a, "abs", [](Real x) { return std::abs(x); },
      [](Real x) { return x > 0 ? Real(1) : (x < 0 ? Real(-1) : Real(0)); });
}

Tensor smooth_l1(const Tensor& a, Real beta) {
  if (!(beta > 0)) throw ConfigError("smooth_l1: beta must be positive");
  return unary(
      a, "smooth_l1",
      [beta](Real x) {
        const Real ax = std::abs(x);
        return ax < beta ? Real(0.5) * x * x / beta : ax - Real(0.5) * beta;
      },
      [beta](Real x) {
        if (std::abs(x) < beta) return x / beta;
        return x > 0 ? Real(1) : Real(-1);
      });
}

Tensor gelu(const Tensor& a) {
  return unary(
      a, "gelu", [](Real x) { return Real(0.5) * x * (Real(1) + std::erf(x * kInvSqrt2)); },
      [](Real x) {
        const Real cdf = Real(0.5) * (Real(1) + std::erf(x * kInvSqrt2));
        return cdf + x * kInvSqrt2Pi * std::exp(Real(-0.5) * x * x);
      });
}

Tensor relu(const Tensor& a) {
  return unary(
      a, "relu", [](Real x) { return x > 0 ? x : Real(0); },
      [](Real x) { return x > 0 ? Real(1) : Real(0); });
}

Tensor clamp_min(const Tensor& a, Real lo) {
  return unary(
      a, "clamp_min", [lo](Real x) { return x > lo ? x : lo; },
      [lo](Real x) { return x > lo ? Real(1) : Real(0); });
}

Tensor clamp(const Tensor& a, Real lo, Real hi) {
  if (!(lo <= hi)) throw ContractError("clamp: empty interval");
  return unary(
      a, "clamp", [lo, hi](Real x) { return x < lo ? lo : (x > hi ? hi : x); },
      [lo, hi](Real x) { return (x < lo || x > hi) ? Real(0) : Real(1); });
}

Tensor reciprocal(const Tensor& a) {
  return unary(
      a, "reciprocal", [](Real x) { return Real(1) / x; },
      [](Real x) { return Real(-1) / (x * x); });
}

Tensor add_bias(const Tensor& a, const Tensor& bias) {
  const std::size_t r = a.rows(), c = a.cols();
  if (bias.numel() != c) {
    throw DimensionError("add_bias: bias of " + shape_str(bias.shape()) + " for " +
                         shape_str(a.shape()));
  }
  Tensor out(a.shape());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.data_mut()[i * c + j] = a[i * c + j] + bias[j];
  finish(out, "add_bias");
  if (detail::should_record({&a, &bias})) {
    detail::record(out, {&a, &bias}, [a, bias, r, c](const detail::TensorImpl& o) {
      if (Real* ga = detail::grad_of(a))
        for (std::size_t i = 0; i < r * c; ++i) ga[i] += o.grad[i];
      if (Real* gb = detail::grad_of(bias))
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) gb[j] += o.grad[i * c + j];
    });
  }
  return out;
}

Tensor mul_col(const Tensor& a, const Tensor& s) {
  const std::size_t r = a.rows(), c = a.cols();
  if (s.numel() != r) {
    throw DimensionError("mul_col: scale of " + shape_str(s.shape()) + " for " +
                         shape_str(a.shape()));
  }
  Tensor out(a.shape());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.data_mut()[i * c + j] = a[i * c + j] * s[i];
  finish(out, "mul_col");
  if (detail::should_record({&a, &s})) {
    detail::record(out, {&a, &s}, [a, s, r, c](const detail::TensorImpl& o) {
      Real* ga = detail::grad_of(a);
      Real* gs = detail::grad_of(s);
      for (std::size_t i = 0; i < r; ++i) {
        Real acc = 0;
        for (std::size_t j = 0; j < c; ++j) {
          const Real g = o.grad[i * c + j];
          if (ga) ga[i * c + j] += g * s[i];
          acc += g * a[i * c + j];
        }
        if (gs) gs[i] += acc;
      }
    });
  }
  return out;
}

Tensor rowwise_dot(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "rowwise_dot");
  const std::size_t r = a.rows(), c = a.cols();
  Tensor out(Shape{r, 1});
  for (std::size_t i = 0; i < r; ++i) {
    Real acc = 0;
    for (std::size_t j = 0; j < c; ++j) acc += a[i * c + j] * b[i * c + j];
    out.data_mut()[i] = acc;
  }
  finish(out, "rowwise_dot");
  if (detail::should_record({&a, &b})) {
    detail::record(out, {&a, &b}, [a, b, r, c](const detail::TensorImpl& o) {
      Real* ga = detail::grad_of(a);
      Real* gb = detail::grad_of(b);
      for (std::size_t i = 0; i < r; ++i) {
        const Real g = o.grad[i];
        for (std::size_t j = 0; j < c; ++j) {
          if (ga) ga[i * c + j] += g * b[i * c + j];
          if (gb) gb[i * c + j] += g * a[i * c + j];
        }
      }
    });
  }
  return out;
}

Tensor sum(const Tensor& a) {
  Real acc = 0;
  for (std::size_t i = 0, n = a.numel(); i < n; ++i) acc += a[i];
  Tensor out = finish(Tensor::scalar(acc), "sum");
  if (detail::should_record({&a})) {
    detail::record(out, {&a}, [a](const detail::TensorImpl& o) {
      if (Real* ga = detail::grad_of(a))
        for (std::size_t i = 0, n = a.numel(); i < n; ++i) ga[i] += o.grad[0];
    });
  }
  return out;
}

Tensor mean(const Tensor& a) {
  if (a.numel() == 0) throw DimensionError("mean of an empty tensor");
  return scale(sum(a), Real(1) / static_cast<Real>(a.numel()));
}

Tensor softmax_last(const Tensor& t, Real scale_factor, std::span<const std::uint8_t> keep) {
  const std::size_t n = t.cols();
  if (n == 0 || t.rank() == 0) throw DimensionError("softmax_last: empty last axis");
  if (!keep.empty() && keep.size() != t.numel()) {
    throw DimensionError("softmax_last: mask size does not match " + shape_str(t.shape()));
  }
  const std::size_t r = t.rows();
  Tensor out(t.shape());
  Real* y = out.data_mut();
  for (std::size_t i = 0; i < r; ++i) {
    const Real* x = t.data() + i * n;
    const std::uint8_t* k = keep.empty() ? nullptr : keep.data() + i * n;
    Real mx = -std::numeric_limits<Real>::infinity();
    for (std::size_t j = 0; j < n; ++j)
      if (!k || k[j]) mx = std::max(mx, scale_factor * x[j]);
    if (!std::isfinite(mx)) {
      throw ContractError("softmax_last: slice " + std::to_string(i) +
                          " has no admissible entry or non-finite logits");
    }
    Real z = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const Real e = (!k || k[j]) ? std::exp(scale_factor * x[j] - mx) : Real(0);
      y[i * n + j] = e;
      z += e;
    }
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] /= z;
  }
  finish(out, "softmax_last");
  if (detail::should_record({&t})) {
    detail::record(out, {&t}, [t, r, n, scale_factor](const detail::TensorImpl& o) {
      Real* gt = detail::grad_of(t);
      if (!gt) return;
      for (std::size_t i = 0; i < r; ++i) {
        const Real* yy = o.data.data() + i * n;
        const Real* gy = o.grad.data() + i * n;
        Real dot = 0;
        for (std::size_t j = 0; j < n; ++j) dot += yy[j] * gy[j];
        for (std::size_t j = 0; j < n; ++j)
          gt[i * n + j] += scale_factor * yy[j] * (gy[j] - dot);
      }
    });
  }
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Real eps) {
  const std::size_t r = x.rows(), c = x.cols();
  if (gamma.numel() != c || beta.numel() != c) {
    throw DimensionError("layer_norm: affine parameters do not match " + shape_str(x.shape()));
  }
  Tensor out(x.shape());
  std::vector<Real> xhat(r * c), inv(r);
  for (std::size_t i = 0; i < r; ++i) {
    const Real* xi = x.data() + i * c;
    Real mu = 0;
    for (std::size_t j = 0; j < c; ++j) mu += xi[j];
    mu /= static_cast<Real>(c);
    Real var = 0;
    for (std::size_t j = 0; j < c; ++j) var += (xi[j] - mu) * (xi[j] - mu);
    var /= static_cast<Real>(c);
    inv[i] = Real(1) / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) {
      xhat[i * c + j] = (xi[j] - mu) * inv[i];
      out.data_mut()[i * c + j] = xhat[i * c + j] * gamma[j] + beta[j];
    }
  }
  finish(out, "layer_norm");
  if (detail::should_record({&x, &gamma, &beta})) {
    detail::record(out, {&x, &gamma, &beta},
                   [x, gamma, beta, r, c, xhat = std::move(xhat),
                    inv = std::move(inv)](const detail::TensorImpl& o) {
                     Real* gx = detail::grad_of(x);
                     Real* gg = detail::grad_of(gamma);
                     Real* gb = detail::grad_of(beta);
                     std::vector<Real> dxh(c);
                     for (std::size_t i = 0; i < r; ++i) {
                       Real m1 = 0, m2 = 0;
                       for (std::size_t j = 0; j < c; ++j) {
                         const Real g = o.grad[i * c + j];
                         if (gg) gg[j] += g * xhat[i * c + j];
                         if (gb) gb[j] += g;
                         dxh[j] = g * gamma[j];
                         m1 += dxh[j];
                         m2 += dxh[j] * xhat[i * c + j];
                       }
                       if (!gx) continue;
                       m1 /= static_cast<Real>(c);
                       m2 /= static_cast<Real>(c);
                       for (std::size_t j = 0; j < c; ++j)
                         gx[i * c + j] += inv[i] * (dxh[j] - m1 - xhat[i * c + j] * m2);
                     }
                   });
  }
  return out;
}

Tensor instance_norm(const Tensor& x, Real eps) {
  const std::size_t r = x.rows(), c = x.cols();
  if (r == 0) throw DimensionError("instance_norm: empty spatial extent");
  Tensor out(x.shape());
  std::vector<Real> mu(c, 0), inv(c, 0);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) mu[j] += x[i * c + j];
  for (auto& m : mu) m /= static_cast<Real>(r);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      const Real d = x[i * c + j] - mu[j];
      inv[j] += d * d;
    }
  for (auto& v : inv) v = Real(1) / std::sqrt(v / static_cast<Real>(r) + eps);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j)
      out.data_mut()[i * c + j] = (x[i * c + j] - mu[j]) * inv[j];
  finish(out, "instance_norm");
  if (detail::should_record({&x})) {
    detail::record(out, {&x}, [x, r, c, inv = std::move(inv)](const detail::TensorImpl& o) {
      Real* gx = detail::grad_of(x);
      if (!gx) return;
      std::vector<Real> m1(c, 0), m2(c, 0);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) {
          m1[j] += o.grad[i * c + j];
          m2[j] += o.grad[i * c + j] * o.data[i * c + j];
        }
      const Real rn = static_cast<Real>(r);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j)
          gx[i * c + j] +=
              inv[j] * (o.grad[i * c + j] - m1[j] / rn - o.data[i * c + j] * m2[j] / rn);
    });
  }
  return out;
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride, Padding pad) {
  require_rank(input, 3, "conv2d input");
  require_rank(kernel, 4, "conv2d kernel");
  const int h = static_cast<int>(input.dim(0)), w = static_cast<int>(input.dim(1));
  const int cin = static_cast<int>(input.dim(2));
  const int k = static_cast<int>(kernel.dim(0));
  const int cout = static_cast<int>(kernel.dim(3));
  if (kernel.dim(1) != kernel.dim(0) || static_cast<int>(kernel.dim(2)) != cin) {
    throw DimensionError("conv2d: kernel " + shape_str(kernel.shape()) + " for input " +
                         shape_str(input.shape()));
  }
  if (k % 2 == 0) throw DimensionError("conv2d: kernel extent must be odd");
  if (stride < 1) throw ConfigError("conv2d: stride must be >= 1");
  const int p = pad == Padding::kSame ? k / 2 : 0;
  if (k > h + 2 * p || k > w + 2 * p) {
    throw DimensionError("conv2d: kernel " + std::to_string(k) + " larger than padded input " +
                         shape_str(input.shape()));
  }
  const int ho = (h + 2 * p - k) / stride + 1;
  const int wo = (w + 2 * p - k) / stride + 1;
  const std::size_t patch = static_cast<std::size_t>(k) * k * cin;
  const std::size_t npix = static_cast<std::size_t>(ho) * wo;

  const bool pointwise = (k == 1 && stride == 1);
  auto cols = std::make_shared<std::vector<Real>>();
  if (!pointwise) {
    cols->assign(npix * patch, Real(0));
    for (int oy = 0; oy < ho; ++oy)
      for (int ox = 0; ox < wo; ++ox) {
        Real* row = cols->data() + (static_cast<std::size_t>(oy) * wo + ox) * patch;
        for (int ky = 0; ky < k; ++ky) {
          const int iy = oy * stride - p + ky;
          if (iy < 0 || iy >= h) continue;
          for (int kx = 0; kx < k; ++kx) {
            const int ix = ox * stride - p + kx;
            if (ix < 0 || ix >= w) continue;
            std::copy_n(input.data() + (static_cast<std::size_t>(iy) * w + ix) * cin, cin,
                        row + (static_cast<std::size_t>(ky) * k + kx) * cin);
          }
        }
      }
  }
  const Real* col_data = pointwise ? input.data() : cols->data();
  Tensor out(Shape{static_cast<std::size_t>(ho), static_cast<std::size_t>(wo),
                   static_cast<std::size_t>(cout)});
  MapR(out.data_mut(), npix, cout).noalias() =
      CMapR(col_data, npix, patch) * CMapR(kernel.data(), patch, cout);
  finish(out, "conv2d");
  if (detail::should_record({&input, &kernel})) {
    detail::record(out, {&input, &kernel},
                   [input, kernel, cols, pointwise, h, w, cin, k, cout, ho, wo, stride, p, patch,
                    npix](const detail::TensorImpl& o) {
                     CMapR g(o.grad.data(), npix, cout);
                     const Real* col_data = pointwise ? input.data() : cols->data();
                     if (Real* gk = detail::grad_of(kernel)) {
                       MapR(gk, patch, cout).noalias() +=
                           CMapR(col_data, npix, patch).transpose() * g;
                     }
                     Real* gi = detail::grad_of(input);
                     if (!gi) return;
                     if (pointwise) {
                       MapR(gi, npix, patch).noalias() +=
                           g * CMapR(kernel.data(), patch, cout).transpose();
                       return;
                     }
                     MatR dcols = g * CMapR(kernel.data(), patch, cout).transpose();
                     for (int oy = 0; oy < ho; ++oy)
                       for (int ox = 0; ox < wo; ++ox) {
                         const Real* row = dcols.data() + (static_cast<std::size_t>(oy) * wo + ox) * patch;
                         for (int ky = 0; ky < k; ++ky) {
                           const int iy = oy * stride - p + ky;
                           if (iy < 0 || iy >= h) continue;
                           for (int kx = 0; kx < k; ++kx) {
                             const int ix = ox * stride - p + kx;
                             if (ix < 0 || ix >= w) continue;
                             Real* dst = gi + (static_cast<std::size_t>(iy) * w + ix) * cin;
                             const Real* src = row + (static_cast<std::size_t>(ky) * k + kx) * cin;
                             for (int c = 0; c < cin; ++c) dst[c] += src[c];
                           }
                         }
                       }
                   });
  }
  return out;
}

Tensor bilinear_sample(const Tensor& feat, const Tensor& coords) {
  require_rank(feat, 3, "bilinear_sample feat");
  if (coords.rank() < 1 || coords.cols() != 2) {
    throw DimensionError("bilinear_sample: coords must end in extent 2, got " +
                         shape_str(coords.shape()));
  }
  const long h = static_cast<long>(feat.dim(0)), w = static_cast<long>(feat.dim(1));
  const std::size_t d = feat.dim(2);
  const std::size_t npts = coords.rows();
  Shape out_shape(coords.shape().begin(), coords.shape().end() - 1);
  out_shape.push_back(d);
  Tensor out(out_shape);

  for (std::size_t i = 0; i < npts; ++i) {
    Real* dst = out.data_mut() + i * d;
    bilinear_corners(coords.data(), h, w, i, [&](std::size_t off, Real wt, Real, Real) {
      const Real* src = feat.data() + off * d;
      for (std::size_t c = 0; c < d; ++c) dst[c] += wt * src[c];
    });
  }
  finish(out, "bilinear_sample");
  if (detail::should_record({&feat, &coords})) {
    detail::record(out, {&feat, &coords},
                   [feat, coords, npts, d, h, w](const detail::TensorImpl& o) {
                     Real* gf = detail::grad_of(feat);
                     Real* gc = detail::grad_of(coords);
                     for (std::size_t i = 0; i < npts; ++i) {
                       const Real* g = o.grad.data() + i * d;
                       bilinear_corners(coords.data(), h, w, i,
                                        [&](std::size_t off, Real wt, Real dx, Real dy) {
                         const Real* src = feat.data() + off * d;
                         Real acc = 0;
                         for (std::size_t c = 0; c < d; ++c) {
                           if (gf) gf[off * d + c] += wt * g[c];
                           acc += g[c] * src[c];
                         }
                         if (gc) {
                           gc[2 * i] += dx * acc;
                           gc[2 * i + 1] += dy * acc;
                         }
                       });
                     }
                   });
  }
  return out;
}

Tensor reshape(const Tensor& a, Shape shape) {
  Tensor out = a.reshaped(std::move(shape));
  if (detail::should_record({&a})) {
    detail::record(out, {&a}, [a](const detail::TensorImpl& o) {
      if (Real* ga = detail::grad_of(a))
        for (std::size_t i = 0, n = o.data.size(); i < n; ++i) ga[i] += o.grad[i];
    });
  }
  return out;
}

Tensor gather_rows(const Tensor& a, std::span<const std::int64_t> idx) {
  const std::size_t r = a.rows(), c = a.cols();
  Tensor out(Shape{idx.size(), c});
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0) continue;
    if (static_cast<std::size_t>(idx[i]) >= r) {
      throw DimensionError("gather_rows: index " + std::to_string(idx[i]) + " out of " +
                           std::to_string(r) + " rows");
    }
    std::copy_n(a.data() + idx[i] * c, c, out.data_mut() + i * c);
  }
  if (detail::should_record({&a})) {
    detail::record(out, {&a},
                   [a, c, index = std::vector<std::int64_t>(idx.begin(), idx.end())](
                       const detail::TensorImpl& o) {
                     Real* ga = detail::grad_of(a);
                     if (!ga) return;
                     for (std::size_t i = 0; i < index.size(); ++i) {
                       if (index[i] < 0) continue;
                       Real* dst = ga + index[i] * c;
                       for (std::size_t j = 0; j < c; ++j) dst[j] += o.grad[i * c + j];
                     }
                   });
  }
  return out;
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  const std::size_t c = parts[0].cols();
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.cols() != c) throw DimensionError("concat_rows: column extents differ");
    total += p.rows();
  }
  Tensor out(Shape{total, c});
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy_n(p.data(), p.numel(), out.data_mut() + off);
    off += p.numel();
  }
  bool any = false;
  for (const auto& p : parts) any = any || p.requires_grad();
  if (any && Tape::active()) {
    std::vector<Tensor> keep(parts.begin(), parts.end());
    detail::record(out, parts, [keep](const detail::TensorImpl& o) {
      std::size_t off = 0;
      for (const auto& p : keep) {
        if (Real* gp = detail::grad_of(p))
          for (std::size_t i = 0; i < p.numel(); ++i) gp[i] += o.grad[off + i];
        off += p.numel();
      }
    });
  }
  return out;
}

Tensor concat_last(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_last: no inputs");
  const std::size_t r = parts[0].rows();
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.rows() != r) throw DimensionError("concat_last: row extents differ");
    total += p.cols();
  }
  Tensor out(with_last(parts[0].shape(), total));
  std::size_t off = 0;
  for (const auto& p : parts) {
    const std::size_t c = p.cols();
    for (std::size_t i = 0; i < r; ++i)
      std::copy_n(p.data() + i * c, c, out.data_mut() + i * total + off);
    off += c;
  }
  bool any = false;
  for (const auto& p : parts) any = any || p.requires_grad();
  if (any && Tape::active()) {
    std::vector<Tensor> keep(parts.begin(), parts.end());
    detail::record(out, parts, [keep, r, total](const detail::TensorImpl& o) {
      std::size_t off = 0;
      for (const auto& p : keep) {
        const std::size_t c = p.cols();
        if (Real* gp = detail::grad_of(p))
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) gp[i * c + j] += o.grad[i * total + off + j];
        off += c;
      }
    });
  }
  return out;
}

Tensor slice_last(const Tensor& a, std::size_t begin, std::size_t count) {
  const std::size_t r = a.rows(), c = a.cols();
  if (begin + count > c) throw DimensionError("slice_last: range exceeds last extent");
  Tensor out(with_last(a.shape(), count));
  for (std::size_t i = 0; i < r; ++i)
    std::copy_n(a.data() + i * c + begin, count, out.data_mut() + i * count);
  if (detail::should_record({&a})) {
    detail::record(out, {&a}, [a, r, c, begin, count](const detail::TensorImpl& o) {
      if (Real* ga = detail::grad_of(a))
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < count; ++j) ga[i * c + begin + j] += o.grad[i * count + j];
    });
  }
  return out;
}

}  // namespace unimatch
