#pragma once

// Differentiable primitives. Every op validates shapes, computes its forward
// value, and records a backward rule that accumulates into its inputs.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "unimts/diff/tape.hpp"
#include "unimts/diff/tensor.hpp"
#include "unimts/error.hpp"

namespace unimts::diff {

namespace kernel {

// Four independent partial sums so the reduction pipelines and vectorizes.
template <class Real>
Real dot(const Real* a, const Real* b, std::size_t n) {
  Real s0{0}, s1{0}, s2{0}, s3{0};
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    s0 += a[j] * b[j];
    s1 += a[j + 1] * b[j + 1];
    s2 += a[j + 2] * b[j + 2];
    s3 += a[j + 3] * b[j + 3];
  }
  for (; j < n; ++j) s0 += a[j] * b[j];
  return (s0 + s1) + (s2 + s3);
}

// C[m x n] += A[m x k] * B[k x n]
template <class Real>
void gemm(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    Real* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const Real aip = a[i * k + p];
      if (aip == Real{0}) continue;
      const Real* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

// C[m x k] += A[m x n] * B[k x n]^T
template <class Real>
void gemm_bt(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    const Real* arow = a + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      c[i * k + p] += dot(arow, b + p * n, n);
    }
  }
}

// C[k x n] += A[m x k]^T * B[m x n]
template <class Real>
void gemm_at(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const Real* brow = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const Real aip = a[i * k + p];
      if (aip == Real{0}) continue;
      Real* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

}  // namespace kernel

namespace detail {

template <class Real>
void require_same_shape(const Var<Real>& a, const Var<Real>& b, const char* op) {
  if (a.shape() != b.shape())
    throw Error(ErrorKind::ShapeMismatch, std::string(op) + ": " + to_string(a.shape()) + " vs " +
                                              to_string(b.shape()));
}

template <class Real>
void require_rank(const Var<Real>& a, std::size_t rank, const char* op) {
  if (a.shape().size() != rank)
    throw Error(ErrorKind::ShapeMismatch,
                std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                    to_string(a.shape()));
}

template <class Real>
void accumulate(Tape<Real>& tape, std::size_t id, const Tensor<Real>& g, Real scale = Real{1}) {
  if (!tape.requires_grad(id)) return;
  auto dst = tape.grad(id).values();
  auto src = g.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
}

}  // namespace detail

template <class Real>
Var<Real> add(const Var<Real>& a, const Var<Real>& b) {
  detail::require_same_shape(a, b, "add");
  Tensor<Real> out = a.value();
  auto bv = b.value().values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape<Real>& t, std::size_t self) {
    const Tensor<Real> g = t.grad(self);
    detail::accumulate(t, ia, g);
    detail::accumulate(t, ib, g);
  }, "add");
}

template <class Real>
Var<Real> sub(const Var<Real>& a, const Var<Real>& b) {
  detail::require_same_shape(a, b, "sub");
  Tensor<Real> out = a.value();
  auto bv = b.value().values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape<Real>& t, std::size_t self) {
    const Tensor<Real> g = t.grad(self);
    detail::accumulate(t, ia, g);
    detail::accumulate(t, ib, g, Real{-1});
  }, "sub");
}

/// Elementwise product.
template <class Real>
Var<Real> mul(const Var<Real>& a, const Var<Real>& b) {
  detail::require_same_shape(a, b, "mul");
  Tensor<Real> out = a.value();
  auto bv = b.value().values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape<Real>& t, std::size_t self) {
    const auto g = t.grad(self).values();
    const auto av = t.value(ia).values();
    const auto bv = t.value(ib).values();
    if (t.requires_grad(ia)) {
      auto d = t.grad(ia).values();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * bv[i];
    }
    if (t.requires_grad(ib)) {
      auto d = t.grad(ib).values();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * av[i];
    }
  }, "mul");
}

/// a * c for a constant scalar c.
template <class Real>
Var<Real> scale(const Var<Real>& a, Real c) {
  Tensor<Real> out = a.value();
  for (auto& v : out.values()) v *= c;
  const auto ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia, c](Tape<Real>& t, std::size_t self) {
    detail::accumulate(t, ia, Tensor<Real>(t.grad(self)), c);
  }, "scale");
}

/// a * s for a differentiable scalar s (any shape with one element).
template <class Real>
Var<Real> scale(const Var<Real>& a, const Var<Real>& s) {
  if (s.value().size() != 1) throw Error(ErrorKind::ShapeMismatch, "scale: factor must be scalar");
  const Real c = s.value()[0];
  Tensor<Real> out = a.value();
  for (auto& v : out.values()) v *= c;
  const auto ia = a.id(), is = s.id();
  return a.tape().record(std::move(out), {a, s}, [ia, is](Tape<Real>& t, std::size_t self) {
    const auto g = t.grad(self).values();
    const auto av = t.value(ia).values();
    const Real c = t.value(is)[0];
    if (t.requires_grad(ia)) {
      auto d = t.grad(ia).values();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += c * g[i];
    }
    if (t.requires_grad(is)) {
      Real acc{0};
      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * av[i];
      t.grad(is)[0] += acc;
    }
  }, "scale");
}

template <class Real>
Var<Real> exp(const Var<Real>& a) {
  Tensor<Real> out = a.value();
  for (auto& v : out.values()) v = std::exp(v);
  const auto ia = a.id();
  const auto io = a.tape().size();
  return a.tape().record(std::move(out), {a}, [ia, io](Tape<Real>& t, std::size_t self) {
    const auto g = t.grad(self).values();
    const auto y = t.value(io).values();
    auto d = t.grad(ia).values();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * y[i];
  }, "exp");
}

/// max(x, 0); the subgradient at exactly 0 is 0.
template <class Real>
Var<Real> relu(const Var<Real>& a) {
  Tensor<Real> out = a.value();
  for (auto& v : out.values()) v = v > Real{0} ? v : Real{0};
  const auto ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia](Tape<Real>& t, std::size_t self) {
    const auto g = t.grad(self).values();
    const auto x = t.value(ia).values();
    auto d = t.grad(ia).values();
    for (std::size_t i = 0; i < d.size(); ++i)
      if (x[i] > Real{0}) d[i] += g[i];
  }, "relu");
}

/// [m x k] * [k x n].
template <class Real>
Var<Real> matmul(const Var<Real>& a, const Var<Real>& b) {
  detail::require_rank(a, 2, "matmul");
  detail::require_rank(b, 2, "matmul");
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k)
    throw Error(ErrorKind::ShapeMismatch,
                "matmul: " + to_string(a.shape()) + " * " + to_string(b.shape()));
  Tensor<Real> out(Shape{m, n});
  kernel::gemm(a.value().data(), b.value().data(), out.data(), m, k, n);
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [=](Tape<Real>& t, std::size_t self) {
    const Real* g = t.grad(self).data();
    if (t.requires_grad(ia)) kernel::gemm_bt(g, t.value(ib).data(), t.grad(ia).data(), m, n, k);
    if (t.requires_grad(ib)) kernel::gemm_at(t.value(ia).data(), g, t.grad(ib).data(), m, k, n);
  }, "matmul");
}

/// Contraction of the last axis of x with the first axis of m:
/// y[..., w] = sum_v x[..., v] * m[v, w].
template <class Real>
Var<Real> contract_last(const Var<Real>& x, const Var<Real>& m) {
  detail::require_rank(m, 2, "contract_last");
  if (x.shape().empty() || x.shape().back() != m.shape()[0])
    throw Error(ErrorKind::ShapeMismatch,
                "contract_last: " + to_string(x.shape()) + " with " + to_string(m.shape()));
  const std::size_t v = m.shape()[0], w = m.shape()[1];
  const std::size_t rows = x.value().size() / v;
  Shape shape = x.shape();
  shape.back() = w;
  Tensor<Real> out(shape);
  kernel::gemm(x.value().data(), m.value().data(), out.data(), rows, v, w);
  const auto ix = x.id(), im = m.id();
  return x.tape().record(std::move(out), {x, m}, [=](Tape<Real>& t, std::size_t self) {
    const Real* g = t.grad(self).data();
    if (t.requires_grad(ix)) kernel::gemm_bt(g, t.value(im).data(), t.grad(ix).data(), rows, w, v);
    if (t.requires_grad(im)) kernel::gemm_at(t.value(ix).data(), g, t.grad(im).data(), rows, v, w);
  }, "contract_last");
}

template <class Real>
Var<Real> transpose(const Var<Real>& a) {
  detail::require_rank(a, 2, "transpose");
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  Tensor<Real> out(Shape{n, m});
  const auto& av = a.value();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out(j, i) = av(i, j);
  const auto ia = a.id();
  return a.tape().record(std::move(out), {a}, [=](Tape<Real>& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto& d = t.grad(ia);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) d(i, j) += g(j, i);
  }, "transpose");
}

template <class Real>
Var<Real> reshape(const Var<Real>& a, Shape shape) {
  Tensor<Real> out = a.value().reshaped(std::move(shape));
  const auto ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia](Tape<Real>& t, std::size_t self) {
    const auto g = t.grad(self).values();
    auto d = t.grad(ia).values();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
  }, "reshape");
}

/// Convolution with a K x 1 kernel over axis 1 of x[C x T x V] with zero
/// padding (K odd, output length T): y[o, t, v] = sum_{c,k} w[o, c, k] x[c, t + k - K/2, v].
template <class Real>
Var<Real> conv_kx1(const Var<Real>& x, const Var<Real>& w) {
  detail::require_rank(x, 3, "conv_kx1");
  detail::require_rank(w, 3, "conv_kx1");
  const std::size_t c_in = x.shape()[0], frames = x.shape()[1], joints = x.shape()[2];
  const std::size_t c_out = w.shape()[0], kt = w.shape()[2];
  if (w.shape()[1] != c_in || kt % 2 == 0)
    throw Error(ErrorKind::ShapeMismatch,
                "conv_kx1: weights " + to_string(w.shape()) + " for input " + to_string(x.shape()));
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(kt / 2);
  const std::ptrdiff_t tn = static_cast<std::ptrdiff_t>(frames);
  const std::size_t plane = frames * joints;

  // Visits every (o, c, k) tap with the overlapping output frame range.
  auto for_each_tap = [=](auto&& fn) {
    for (std::size_t o = 0; o < c_out; ++o)
      for (std::size_t c = 0; c < c_in; ++c)
        for (std::size_t k = 0; k < kt; ++k) {
          const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(k) - pad;
          const std::ptrdiff_t t0 = std::max<std::ptrdiff_t>(0, -shift);
          const std::ptrdiff_t t1 = std::min<std::ptrdiff_t>(tn, tn - shift);
          if (t1 <= t0) continue;
          const std::size_t out_off = o * plane + static_cast<std::size_t>(t0) * joints;
          const std::size_t in_off = c * plane + static_cast<std::size_t>(t0 + shift) * joints;
          const std::size_t len = static_cast<std::size_t>(t1 - t0) * joints;
          fn((o * c_in + c) * kt + k, out_off, in_off, len);
        }
  };

  Tensor<Real> out(Shape{c_out, frames, joints});
  {
    const Real* xv = x.value().data();
    const Real* wv = w.value().data();
    Real* y = out.data();
    for_each_tap([&](std::size_t wi, std::size_t oo, std::size_t io, std::size_t len) {
      const Real wk = wv[wi];
      if (wk == Real{0}) return;
      for (std::size_t i = 0; i < len; ++i) y[oo + i] += wk * xv[io + i];
    });
  }
  const auto ix = x.id(), iw = w.id();
  return x.tape().record(std::move(out), {x, w}, [=](Tape<Real>& t, std::size_t self) {
    const Real* g = t.grad(self).data();
    const Real* xv = t.value(ix).data();
    const Real* wv = t.value(iw).data();
    Real* dx = t.requires_grad(ix) ? t.grad(ix).data() : nullptr;
    Real* dw = t.requires_grad(iw) ? t.grad(iw).data() : nullptr;
    for_each_tap([&](std::size_t wi, std::size_t oo, std::size_t io, std::size_t len) {
      if (dx) {
        const Real wk = wv[wi];
        for (std::size_t i = 0; i < len; ++i) dx[io + i] += wk * g[oo + i];
      }
      if (dw) dw[wi] += kernel::dot(g + oo, xv + io, len);
    });
  }, "conv_kx1");
}

namespace detail {

// Broadcasts a [C] vector along axis 0 of x[C x ...].
template <class Real>
std::size_t channel_block(const Var<Real>& x, const Var<Real>& v, const char* op) {
  require_rank(v, 1, op);
  if (x.shape().empty() || x.shape()[0] != v.shape()[0])
    throw Error(ErrorKind::ShapeMismatch,
                std::string(op) + ": " + to_string(x.shape()) + " with " + to_string(v.shape()));
  return x.value().size() / v.shape()[0];
}

}  // namespace detail

/// y[c, ...] = x[c, ...] + b[c].
template <class Real>
Var<Real> add_channel(const Var<Real>& x, const Var<Real>& b) {
  const std::size_t block = detail::channel_block(x, b, "add_channel");
  const std::size_t channels = b.shape()[0];
  Tensor<Real> out = x.value();
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t i = 0; i < block; ++i) out[c * block + i] += b.value()[c];
  const auto ix = x.id(), ib = b.id();
  return x.tape().record(std::move(out), {x, b}, [=](Tape<Real>& t, std::size_t self) {
    const Tensor<Real> g = t.grad(self);
    detail::accumulate(t, ix, g);
    if (t.requires_grad(ib)) {
      auto& d = t.grad(ib);
      for (std::size_t c = 0; c < channels; ++c) {
        Real acc{0};
        for (std::size_t i = 0; i < block; ++i) acc += g[c * block + i];
        d[c] += acc;
      }
    }
  }, "add_channel");
}

/// y[c, ...] = x[c, ...] * s[c].
template <class Real>
Var<Real> mul_channel(const Var<Real>& x, const Var<Real>& s) {
  const std::size_t block = detail::channel_block(x, s, "mul_channel");
  const std::size_t channels = s.shape()[0];
  Tensor<Real> out = x.value();
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t i = 0; i < block; ++i) out[c * block + i] *= s.value()[c];
  const auto ix = x.id(), is = s.id();
  return x.tape().record(std::move(out), {x, s}, [=](Tape<Real>& t, std::size_t self) {
    const auto& g = t.grad(self);
    const auto& xv = t.value(ix);
    const auto& sv = t.value(is);
    if (t.requires_grad(ix)) {
      auto& d = t.grad(ix);
      for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t i = 0; i < block; ++i) d[c * block + i] += g[c * block + i] * sv[c];
    }
    if (t.requires_grad(is)) {
      auto& d = t.grad(is);
      for (std::size_t c = 0; c < channels; ++c) {
        Real acc{0};
        for (std::size_t i = 0; i < block; ++i) acc += g[c * block + i] * xv[c * block + i];
        d[c] += acc;
      }
    }
  }, "mul_channel");
}

/// Sub-range [start, start + length) along `axis`.
template <class Real>
Var<Real> slice(const Var<Real>& a, std::size_t axis, std::size_t start, std::size_t length) {
  const Shape& in = a.shape();
  if (axis >= in.size() || start + length > in[axis] || length == 0)
    throw Error(ErrorKind::ShapeMismatch, "slice out of range on " + to_string(in));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= in[i];
  for (std::size_t i = axis + 1; i < in.size(); ++i) inner *= in[i];
  const std::size_t extent = in[axis];
  Shape shape = in;
  shape[axis] = length;
  Tensor<Real> out(shape);
  const Real* src = a.value().data();
  for (std::size_t o = 0; o < outer; ++o)
    std::copy_n(src + (o * extent + start) * inner, length * inner, out.data() + o * length * inner);
  const auto ia = a.id();
  return a.tape().record(std::move(out), {a}, [=](Tape<Real>& t, std::size_t self) {
    const Real* g = t.grad(self).data();
    Real* d = t.grad(ia).data();
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t i = 0; i < length * inner; ++i)
        d[(o * extent + start) * inner + i] += g[o * length * inner + i];
  }, "slice");
}

/// Mean over the listed axes; those axes are removed from the result.
template <class Real>
Var<Real> mean_axes(const Var<Real>& a, std::vector<std::size_t> axes) {
  const Shape& in = a.shape();
  std::vector<bool> reduce(in.size(), false);
  for (auto ax : axes) {
    if (ax >= in.size() || reduce[ax])
      throw Error(ErrorKind::ShapeMismatch, "mean_axes: bad axis list for " + to_string(in));
    reduce[ax] = true;
  }
  Shape shape;
  std::size_t count = 1;
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (reduce[i]) count *= in[i];
    else shape.push_back(in[i]);
  }
  // Output index of every input element.
  std::vector<std::size_t> target(a.value().size());
  {
    std::vector<std::size_t> idx(in.size(), 0);
    for (std::size_t flat = 0; flat < target.size(); ++flat) {
      std::size_t o = 0;
      for (std::size_t i = 0; i < in.size(); ++i)
        if (!reduce[i]) o = o * in[i] + idx[i];
      target[flat] = o;
      for (std::size_t i = in.size(); i-- > 0;) {
        if (++idx[i] < in[i]) break;
        idx[i] = 0;
      }
    }
  }
  Tensor<Real> out(shape);
  const Real inv = Real{1} / static_cast<Real>(count);
  for (std::size_t i = 0; i < target.size(); ++i) out[target[i]] += a.value()[i];
  for (auto& v : out.values()) v *= inv;
  const auto ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia, target = std::move(target), inv](Tape<Real>& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto& d = t.grad(ia);
    for (std::size_t i = 0; i < target.size(); ++i) d[i] += g[target[i]] * inv;
  }, "mean_axes");
}

/// Sum of all elements, as a rank-0 tensor.
template <class Real>
Var<Real> sum(const Var<Real>& a) {
  Real acc{0};
  for (auto v : a.value().values()) acc += v;
  const auto ia = a.id();
  return a.tape().record(Tensor<Real>::scalar(acc), {a}, [ia](Tape<Real>& t, std::size_t self) {
    const Real g = t.grad(self)[0];
    for (auto& d : t.grad(ia).values()) d += g;
  }, "sum");
}

template <class Real>
Var<Real> mean(const Var<Real>& a) {
  return scale(sum(a), Real{1} / static_cast<Real>(a.value().size()));
}

/// Numerically stable row-wise log-softmax of x[B x D].
template <class Real>
Var<Real> log_softmax_rows(const Var<Real>& x) {
  detail::require_rank(x, 2, "log_softmax_rows");
  const std::size_t rows = x.shape()[0], cols = x.shape()[1];
  Tensor<Real> out(x.shape());
  const auto& xv = x.value();
  for (std::size_t r = 0; r < rows; ++r) {
    Real hi = -std::numeric_limits<Real>::infinity();
    for (std::size_t c = 0; c < cols; ++c) hi = std::max(hi, xv(r, c));
    Real acc{0};
    for (std::size_t c = 0; c < cols; ++c) acc += std::exp(xv(r, c) - hi);
    const Real lse = hi + std::log(acc);
    for (std::size_t c = 0; c < cols; ++c) out(r, c) = xv(r, c) - lse;
  }
  const auto ix = x.id();
  const auto io = x.tape().size();
  return x.tape().record(std::move(out), {x}, [=](Tape<Real>& t, std::size_t self) {
    const auto& g = t.grad(self);
    const auto& y = t.value(io);
    auto& d = t.grad(ix);
    for (std::size_t r = 0; r < rows; ++r) {
      Real gsum{0};
      for (std::size_t c = 0; c < cols; ++c) gsum += g(r, c);
      for (std::size_t c = 0; c < cols; ++c) d(r, c) += g(r, c) - std::exp(y(r, c)) * gsum;
    }
  }, "log_softmax_rows");
}

/// y[r] = x[r, index[r]].
template <class Real>
Var<Real> pick(const Var<Real>& x, std::vector<std::size_t> index) {
  detail::require_rank(x, 2, "pick");
  const std::size_t rows = x.shape()[0], cols = x.shape()[1];
  if (index.size() != rows) throw Error(ErrorKind::ShapeMismatch, "pick: one index per row");
  Tensor<Real> out(Shape{rows});
  for (std::size_t r = 0; r < rows; ++r) {
    if (index[r] >= cols) throw Error(ErrorKind::ShapeMismatch, "pick: column out of range");
    out[r] = x.value()(r, index[r]);
  }
  const auto ix = x.id();
  return x.tape().record(std::move(out), {x}, [ix, index = std::move(index)](Tape<Real>& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto& d = t.grad(ix);
    for (std::size_t r = 0; r < index.size(); ++r) d(r, index[r]) += g[r];
  }, "pick");
}

/// Stacks equally shaped tensors along a new leading axis.
template <class Real>
Var<Real> stack(const std::vector<Var<Real>>& parts) {
  if (parts.empty()) throw Error(ErrorKind::ShapeMismatch, "stack of nothing");
  const Shape& inner = parts.front().shape();
  for (const auto& p : parts)
    if (p.shape() != inner) throw Error(ErrorKind::ShapeMismatch, "stack: ragged inputs");
  const std::size_t block = element_count(inner);
  Shape shape{parts.size()};
  shape.insert(shape.end(), inner.begin(), inner.end());
  Tensor<Real> out(shape);
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    std::copy_n(parts[i].value().data(), block, out.data() + i * block);
    ids.push_back(parts[i].id());
  }
  return parts.front().tape().record(std::move(out), parts, [ids, block](Tape<Real>& t, std::size_t self) {
    const Real* g = t.grad(self).data();
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (!t.requires_grad(ids[i])) continue;
      Real* d = t.grad(ids[i]).data();
      for (std::size_t j = 0; j < block; ++j) d[j] += g[i * block + j];
    }
  }, "stack");
}

/// Mean of the selected rows of table[N x E] (repeats count repeatedly).
template <class Real>
Var<Real> gather_mean_rows(const Var<Real>& table, std::vector<std::size_t> rows) {
  detail::require_rank(table, 2, "gather_mean_rows");
  if (rows.empty()) throw Error(ErrorKind::ShapeMismatch, "gather_mean_rows: no rows");
  const std::size_t n = table.shape()[0], e = table.shape()[1];
  Tensor<Real> out(Shape{e});
  const Real inv = Real{1} / static_cast<Real>(rows.size());
  for (auto r : rows) {
    if (r >= n) throw Error(ErrorKind::ShapeMismatch, "gather_mean_rows: row out of range");
    for (std::size_t j = 0; j < e; ++j) out[j] += table.value()(r, j);
  }
  for (auto& v : out.values()) v *= inv;
  const auto it = table.id();
  return table.tape().record(std::move(out), {table}, [it, e, inv, rows = std::move(rows)](Tape<Real>& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto& d = t.grad(it);
    for (auto r : rows)
      for (std::size_t j = 0; j < e; ++j) d(r, j) += g[j] * inv;
  }, "gather_mean_rows");
}

}  // namespace unimts::diff
