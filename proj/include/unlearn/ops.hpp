#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>
#include <vector>

#include "unlearn/tape.hpp"
#include "unlearn/tensor.hpp"

namespace unlearn {

// ---- dense kernels ----------------------------------------------------------
// Thin wrappers over Eigen products; everything is row-major and accumulates
// into C, which the callers pre-zero (or pre-fill with bias).

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// C[M,N] += A[M,K] * B[K,N]
template <typename T>
void gemm_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  Eigen::Map<RowMat<T>> C(c, m, n);
  Eigen::Map<const RowMat<T>> A(a, m, k), B(b, k, n);
  C.noalias() += A * B;
}

// C[M,N] += A[M,K] * B[N,K]^T
template <typename T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  Eigen::Map<RowMat<T>> C(c, m, n);
  Eigen::Map<const RowMat<T>> A(a, m, k), B(b, n, k);
  C.noalias() += A * B.transpose();
}

// C[M,N] += A[K,M]^T * B[K,N]
template <typename T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  Eigen::Map<RowMat<T>> C(c, m, n);
  Eigen::Map<const RowMat<T>> A(a, k, m), B(b, k, n);
  C.noalias() += A.transpose() * B;
}

namespace detail {

template <typename T>
bool recorded(const TensorT<T>& t) {
  return t.node >= 0;
}

inline std::size_t last_dim(const Shape& s) {
  if (s.empty()) throw std::invalid_argument("operation requires rank >= 1, got scalar");
  return s.back();
}

}  // namespace detail

// ---- elementwise ------------------------------------------------------------

template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b, TapeT<T>* tape = nullptr) {
  if (!same_shape(a, b))
    throw std::invalid_argument("add: shape mismatch " + shape_str(a.shape) + " vs " + shape_str(b.shape));
  TensorT<T> y(a.shape);
  for (std::size_t i = 0; i < y.size(); ++i) y.data[i] = a.data[i] + b.data[i];
  if (tape && (detail::recorded(a) || detail::recorded(b))) {
    y.node = tape->record("add", [an = a.node, bn = b.node](const TensorT<T>& g) {
      std::vector<std::pair<int, TensorT<T>>> out;
      if (an >= 0) out.emplace_back(an, g);
      if (bn >= 0) out.emplace_back(bn, g);
      return out;
    });
  }
  return y;
}

template <typename T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b, TapeT<T>* tape = nullptr) {
  if (!same_shape(a, b))
    throw std::invalid_argument("mul: shape mismatch " + shape_str(a.shape) + " vs " + shape_str(b.shape));
  TensorT<T> y(a.shape);
  for (std::size_t i = 0; i < y.size(); ++i) y.data[i] = a.data[i] * b.data[i];
  if (tape && (detail::recorded(a) || detail::recorded(b))) {
    y.node = tape->record("mul", [an = a.node, bn = b.node, av = a.data, bv = b.data](const TensorT<T>& g) {
      std::vector<std::pair<int, TensorT<T>>> out;
      if (an >= 0) {
        TensorT<T> ga(g.shape);
        for (std::size_t i = 0; i < ga.size(); ++i) ga.data[i] = g.data[i] * bv[i];
        out.emplace_back(an, std::move(ga));
      }
      if (bn >= 0) {
        TensorT<T> gb(g.shape);
        for (std::size_t i = 0; i < gb.size(); ++i) gb.data[i] = g.data[i] * av[i];
        out.emplace_back(bn, std::move(gb));
      }
      return out;
    });
  }
  return y;
}

template <typename T>
TensorT<T> scale(const TensorT<T>& a, T c, TapeT<T>* tape = nullptr) {
  TensorT<T> y(a.shape);
  for (std::size_t i = 0; i < y.size(); ++i) y.data[i] = a.data[i] * c;
  if (tape && detail::recorded(a)) {
    y.node = tape->record("scale", [an = a.node, c](const TensorT<T>& g) {
      TensorT<T> ga(g.shape);
      for (std::size_t i = 0; i < ga.size(); ++i) ga.data[i] = g.data[i] * c;
      return std::vector<std::pair<int, TensorT<T>>>{{an, std::move(ga)}};
    });
  }
  return y;
}

template <typename T>
TensorT<T> exp(const TensorT<T>& a, TapeT<T>* tape = nullptr) {
  TensorT<T> y(a.shape);
  for (std::size_t i = 0; i < y.size(); ++i) y.data[i] = std::exp(a.data[i]);
  if (tape && detail::recorded(a)) {
    y.node = tape->record("exp", [an = a.node, yv = y.data](const TensorT<T>& g) {
      TensorT<T> ga(g.shape);
      for (std::size_t i = 0; i < ga.size(); ++i) ga.data[i] = g.data[i] * yv[i];
      return std::vector<std::pair<int, TensorT<T>>>{{an, std::move(ga)}};
    });
  }
  return y;
}

template <typename T>
TensorT<T> relu(const TensorT<T>& x, TapeT<T>* tape = nullptr) {
  TensorT<T> y(x.shape);
  for (std::size_t i = 0; i < y.size(); ++i) y.data[i] = x.data[i] > T(0) ? x.data[i] : T(0);
  if (tape && detail::recorded(x)) {
    // Gradient at the kink (x == 0) is defined as 0.
    std::vector<char> mask(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) mask[i] = x.data[i] > T(0);
    y.node = tape->record("relu", [xn = x.node, mask = std::move(mask)](const TensorT<T>& g) {
      TensorT<T> gx(g.shape);
      for (std::size_t i = 0; i < gx.size(); ++i) gx.data[i] = mask[i] ? g.data[i] : T(0);
      return std::vector<std::pair<int, TensorT<T>>>{{xn, std::move(gx)}};
    });
  }
  return y;
}

// ---- reductions ---------------------------------------------------------------

template <typename T>
TensorT<T> sum(const TensorT<T>& x, TapeT<T>* tape = nullptr) {
  TensorT<T> y(Shape{});
  y.data[0] = std::accumulate(x.data.begin(), x.data.end(), T(0));
  if (tape && detail::recorded(x)) {
    y.node = tape->record("sum", [xn = x.node, shape = x.shape](const TensorT<T>& g) {
      return std::vector<std::pair<int, TensorT<T>>>{{xn, constant<T>(shape, g.data[0])}};
    });
  }
  return y;
}

template <typename T>
TensorT<T> mean(const TensorT<T>& x, TapeT<T>* tape = nullptr) {
  if (x.size() == 0) throw std::invalid_argument("mean of empty tensor");
  const T inv = T(1) / static_cast<T>(x.size());
  TensorT<T> y(Shape{});
  y.data[0] = std::accumulate(x.data.begin(), x.data.end(), T(0)) * inv;
  if (tape && detail::recorded(x)) {
    y.node = tape->record("mean", [xn = x.node, shape = x.shape, inv](const TensorT<T>& g) {
      return std::vector<std::pair<int, TensorT<T>>>{{xn, constant<T>(shape, g.data[0] * inv)}};
    });
  }
  return y;
}

// ---- shape ops -----------------------------------------------------------------

template <typename T>
TensorT<T> reshape(const TensorT<T>& x, Shape target, TapeT<T>* tape = nullptr) {
  if (numel(target) != x.size())
    throw std::invalid_argument("reshape: " + shape_str(x.shape) + " -> " + shape_str(target) +
                                " changes element count");
  TensorT<T> y(std::move(target), x.data);
  if (tape && detail::recorded(x)) {
    y.node = tape->record("reshape", [xn = x.node, old = x.shape](const TensorT<T>& g) {
      TensorT<T> gx(old, g.data);
      return std::vector<std::pair<int, TensorT<T>>>{{xn, std::move(gx)}};
    });
  }
  return y;
}

namespace detail {

template <typename T>
TensorT<T> permute_values(const TensorT<T>& x, const std::vector<std::size_t>& perm) {
  const std::size_t r = x.shape.size();
  Shape out_shape(r);
  for (std::size_t i = 0; i < r; ++i) out_shape[i] = x.shape[perm[i]];
  std::vector<std::size_t> in_strides(r, 1), out_strides(r, 1);
  for (std::size_t i = r; i-- > 1;) in_strides[i - 1] = in_strides[i] * x.shape[i];
  for (std::size_t i = r; i-- > 1;) out_strides[i - 1] = out_strides[i] * out_shape[i];
  TensorT<T> y(out_shape);
  std::vector<std::size_t> coord(r, 0);
  for (std::size_t o = 0; o < y.size(); ++o) {
    std::size_t rem = o, in_idx = 0;
    for (std::size_t i = 0; i < r; ++i) {
      coord[i] = rem / out_strides[i];
      rem %= out_strides[i];
      in_idx += coord[i] * in_strides[perm[i]];
    }
    y.data[o] = x.data[in_idx];
  }
  return y;
}

}  // namespace detail

template <typename T>
TensorT<T> permute(const TensorT<T>& x, std::vector<std::size_t> perm, TapeT<T>* tape = nullptr) {
  const std::size_t r = x.shape.size();
  if (perm.size() != r) throw std::invalid_argument("permute: axis list rank mismatch");
  std::vector<char> seen(r, 0);
  for (std::size_t a : perm) {
    if (a >= r || seen[a]) throw std::invalid_argument("permute: invalid axis permutation");
    seen[a] = 1;
  }
  TensorT<T> y = detail::permute_values(x, perm);
  if (tape && detail::recorded(x)) {
    std::vector<std::size_t> inv(r);
    for (std::size_t i = 0; i < r; ++i) inv[perm[i]] = i;
    y.node = tape->record("permute", [xn = x.node, inv = std::move(inv)](const TensorT<T>& g) {
      return std::vector<std::pair<int, TensorT<T>>>{{xn, detail::permute_values(g, inv)}};
    });
  }
  return y;
}

// ---- linear algebra -------------------------------------------------------------

template <typename T>
TensorT<T> matmul(const TensorT<T>& a, const TensorT<T>& b, TapeT<T>* tape = nullptr) {
  if (a.shape.size() != 2 || b.shape.size() != 2 || a.shape[1] != b.shape[0])
    throw std::invalid_argument("matmul: incompatible shapes " + shape_str(a.shape) + " x " +
                                shape_str(b.shape));
  const std::size_t m = a.shape[0], k = a.shape[1], n = b.shape[1];
  TensorT<T> y(Shape{m, n});
  gemm_nn(a.data.data(), b.data.data(), y.data.data(), m, k, n);
  if (tape && (detail::recorded(a) || detail::recorded(b))) {
    y.node = tape->record("matmul",
                          [an = a.node, bn = b.node, av = a.data, bv = b.data, m, k, n](const TensorT<T>& g) {
                            std::vector<std::pair<int, TensorT<T>>> out;
                            if (an >= 0) {
                              TensorT<T> ga(Shape{m, k});
                              gemm_nt(g.data.data(), bv.data(), ga.data.data(), m, n, k);
                              out.emplace_back(an, std::move(ga));
                            }
                            if (bn >= 0) {
                              TensorT<T> gb(Shape{k, n});
                              gemm_tn(av.data(), g.data.data(), gb.data.data(), k, m, n);
                              out.emplace_back(bn, std::move(gb));
                            }
                            return out;
                          });
  }
  return y;
}

// x[..., C] + v[C] broadcast over rows.
template <typename T>
TensorT<T> add_rowvec(const TensorT<T>& x, const TensorT<T>& v, TapeT<T>* tape = nullptr) {
  const std::size_t c = detail::last_dim(x.shape);
  if (v.shape.size() != 1 || v.shape[0] != c)
    throw std::invalid_argument("add_rowvec: vector " + shape_str(v.shape) + " does not match last dim of " +
                                shape_str(x.shape));
  const std::size_t rows = x.size() / c;
  TensorT<T> y(x.shape);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < c; ++j) y.data[r * c + j] = x.data[r * c + j] + v.data[j];
  if (tape && (detail::recorded(x) || detail::recorded(v))) {
    y.node = tape->record("add_rowvec", [xn = x.node, vn = v.node, rows, c](const TensorT<T>& g) {
      std::vector<std::pair<int, TensorT<T>>> out;
      if (xn >= 0) out.emplace_back(xn, g);
      if (vn >= 0) {
        TensorT<T> gv(Shape{c});
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < c; ++j) gv.data[j] += g.data[r * c + j];
        out.emplace_back(vn, std::move(gv));
      }
      return out;
    });
  }
  return y;
}

// ---- convolution ------------------------------------------------------------------
// Cross-correlation with zero padding, NCHW activations and FCHW kernels.
// The heavy lifting is an im2col buffer and three GEMMs.

namespace detail {

struct ConvGeom {
  std::size_t n, c, h, w, f, kh, kw, oh, ow, stride, pad;
  std::size_t np() const { return n * oh * ow; }
  std::size_t ck() const { return c * kh * kw; }
};

template <typename T>
void im2col(const T* x, const ConvGeom& g, T* cols) {
  const std::size_t ck = g.ck();
  for (std::size_t n = 0; n < g.n; ++n) {
    for (std::size_t oy = 0; oy < g.oh; ++oy) {
      for (std::size_t ox = 0; ox < g.ow; ++ox) {
        T* row = cols + ((n * g.oh + oy) * g.ow + ox) * ck;
        std::size_t k = 0;
        for (std::size_t c = 0; c < g.c; ++c) {
          for (std::size_t ky = 0; ky < g.kh; ++ky) {
            const long long iy = static_cast<long long>(oy * g.stride + ky) - static_cast<long long>(g.pad);
            for (std::size_t kx = 0; kx < g.kw; ++kx, ++k) {
              const long long ix = static_cast<long long>(ox * g.stride + kx) - static_cast<long long>(g.pad);
              row[k] = (iy >= 0 && iy < static_cast<long long>(g.h) && ix >= 0 &&
                        ix < static_cast<long long>(g.w))
                           ? x[((n * g.c + c) * g.h + iy) * g.w + ix]
                           : T(0);
            }
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* cols, const ConvGeom& g, T* gx) {
  const std::size_t ck = g.ck();
  for (std::size_t n = 0; n < g.n; ++n) {
    for (std::size_t oy = 0; oy < g.oh; ++oy) {
      for (std::size_t ox = 0; ox < g.ow; ++ox) {
        const T* row = cols + ((n * g.oh + oy) * g.ow + ox) * ck;
        std::size_t k = 0;
        for (std::size_t c = 0; c < g.c; ++c) {
          for (std::size_t ky = 0; ky < g.kh; ++ky) {
            const long long iy = static_cast<long long>(oy * g.stride + ky) - static_cast<long long>(g.pad);
            for (std::size_t kx = 0; kx < g.kw; ++kx, ++k) {
              const long long ix = static_cast<long long>(ox * g.stride + kx) - static_cast<long long>(g.pad);
              if (iy >= 0 && iy < static_cast<long long>(g.h) && ix >= 0 && ix < static_cast<long long>(g.w))
                gx[((n * g.c + c) * g.h + iy) * g.w + ix] += row[k];
            }
          }
        }
      }
    }
  }
}

}  // namespace detail

template <typename T>
TensorT<T> conv2d(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& bias, std::size_t stride,
                  std::size_t pad, TapeT<T>* tape = nullptr) {
  if (x.shape.size() != 4) throw std::invalid_argument("conv2d: input must be [N,C,H,W], got " + shape_str(x.shape));
  if (w.shape.size() != 4) throw std::invalid_argument("conv2d: kernel must be [F,C,kh,kw], got " + shape_str(w.shape));
  if (x.shape[1] != w.shape[1])
    throw std::invalid_argument("conv2d: channel mismatch " + shape_str(x.shape) + " vs " + shape_str(w.shape));
  if (bias.shape.size() != 1 || bias.shape[0] != w.shape[0])
    throw std::invalid_argument("conv2d: bias must be [F]");
  if (stride == 0) throw std::invalid_argument("conv2d: stride must be positive");

  detail::ConvGeom g{x.shape[0], x.shape[1], x.shape[2], x.shape[3],
                     w.shape[0], w.shape[2], w.shape[3], 0,          0, stride, pad};
  // Output extents follow the usual floor convention,
  // OH = floor((H + 2 pad - kh) / stride) + 1; a kernel that does not fit the
  // padded input at all is an error.
  const long long hn = static_cast<long long>(g.h) + 2 * static_cast<long long>(pad) - static_cast<long long>(g.kh);
  const long long wn = static_cast<long long>(g.w) + 2 * static_cast<long long>(pad) - static_cast<long long>(g.kw);
  if (hn < 0 || wn < 0)
    throw std::invalid_argument("conv2d: no valid output extent for input " + shape_str(x.shape) +
                                " kernel " + shape_str(w.shape) + " stride " + std::to_string(stride) +
                                " pad " + std::to_string(pad));
  g.oh = static_cast<std::size_t>(hn / static_cast<long long>(stride)) + 1;
  g.ow = static_cast<std::size_t>(wn / static_cast<long long>(stride)) + 1;

  const std::size_t np = g.np(), ck = g.ck(), f = g.f;
  std::vector<T> cols(np * ck);
  detail::im2col(x.data.data(), g, cols.data());
  std::vector<T> out2d(np * f, T(0));
  gemm_nt(cols.data(), w.data.data(), out2d.data(), np, ck, f);

  TensorT<T> y(Shape{g.n, f, g.oh, g.ow});
  const std::size_t plane = g.oh * g.ow;
  for (std::size_t n = 0; n < g.n; ++n)
    for (std::size_t p = 0; p < plane; ++p)
      for (std::size_t j = 0; j < f; ++j)
        y.data[(n * f + j) * plane + p] = out2d[(n * plane + p) * f + j] + bias.data[j];

  if (tape && (detail::recorded(x) || detail::recorded(w) || detail::recorded(bias))) {
    y.node = tape->record(
        "conv2d", [xn = x.node, wn_ = w.node, bn = bias.node, xv = x.data, wv = w.data, g](const TensorT<T>& gout) {
          const std::size_t np = g.np(), ck = g.ck(), f = g.f, plane = g.oh * g.ow;
          std::vector<T> g2d(np * f);
          for (std::size_t n = 0; n < g.n; ++n)
            for (std::size_t p = 0; p < plane; ++p)
              for (std::size_t j = 0; j < f; ++j)
                g2d[(n * plane + p) * f + j] = gout.data[(n * f + j) * plane + p];

          std::vector<std::pair<int, TensorT<T>>> out;
          if (bn >= 0) {
            TensorT<T> gb(Shape{f});
            for (std::size_t p = 0; p < np; ++p)
              for (std::size_t j = 0; j < f; ++j) gb.data[j] += g2d[p * f + j];
            out.emplace_back(bn, std::move(gb));
          }
          if (wn_ >= 0) {
            std::vector<T> cols(np * ck);
            detail::im2col(xv.data(), g, cols.data());
            TensorT<T> gw(Shape{f, g.c, g.kh, g.kw});
            gemm_tn(g2d.data(), cols.data(), gw.data.data(), f, np, ck);
            out.emplace_back(wn_, std::move(gw));
          }
          if (xn >= 0) {
            std::vector<T> gcols(np * ck, T(0));
            gemm_nn(g2d.data(), wv.data(), gcols.data(), np, f, ck);
            TensorT<T> gx(Shape{g.n, g.c, g.h, g.w});
            detail::col2im_add(gcols.data(), g, gx.data.data());
            out.emplace_back(xn, std::move(gx));
          }
          return out;
        });
  }
  return y;
}

// ---- softmax / losses helpers ------------------------------------------------------

// Numerically stable log-softmax over the last axis.
template <typename T>
TensorT<T> log_softmax(const TensorT<T>& x, TapeT<T>* tape = nullptr) {
  const std::size_t k = detail::last_dim(x.shape);
  if (k < 1) throw std::invalid_argument("log_softmax: empty class axis");
  const std::size_t rows = x.size() / k;
  TensorT<T> y(x.shape);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = x.data.data() + r * k;
    T* yr = y.data.data() + r * k;
    T m = xr[0];
    for (std::size_t j = 1; j < k; ++j) m = std::max(m, xr[j]);
    T s = T(0);
    for (std::size_t j = 0; j < k; ++j) s += std::exp(xr[j] - m);
    const T lse = m + std::log(s);
    for (std::size_t j = 0; j < k; ++j) yr[j] = xr[j] - lse;
  }
  if (tape && detail::recorded(x)) {
    y.node = tape->record("log_softmax", [xn = x.node, yv = y.data, rows, k](const TensorT<T>& g) {
      TensorT<T> gx(g.shape);
      for (std::size_t r = 0; r < rows; ++r) {
        const T* gr = g.data.data() + r * k;
        const T* yr = yv.data() + r * k;
        T gsum = T(0);
        for (std::size_t j = 0; j < k; ++j) gsum += gr[j];
        T* o = gx.data.data() + r * k;
        for (std::size_t j = 0; j < k; ++j) o[j] = gr[j] - std::exp(yr[j]) * gsum;
      }
      return std::vector<std::pair<int, TensorT<T>>>{{xn, std::move(gx)}};
    });
  }
  return y;
}

// Mean negative log-likelihood of integer targets over the last axis:
// -(1/R) sum_r logp[r, target_r].
template <typename T>
TensorT<T> nll_lastdim(const TensorT<T>& logp, const std::vector<int>& targets, TapeT<T>* tape = nullptr) {
  const std::size_t k = detail::last_dim(logp.shape);
  const std::size_t rows = logp.size() / k;
  if (targets.size() != rows)
    throw std::invalid_argument("nll: " + std::to_string(targets.size()) + " targets for " +
                                std::to_string(rows) + " rows");
  T acc = T(0);
  for (std::size_t r = 0; r < rows; ++r) {
    const int t = targets[r];
    if (t < 0 || static_cast<std::size_t>(t) >= k)
      throw std::invalid_argument("nll: target " + std::to_string(t) + " out of range [0," +
                                  std::to_string(k) + ")");
    acc -= logp.data[r * k + t];
  }
  TensorT<T> y(Shape{});
  y.data[0] = acc / static_cast<T>(rows);
  if (tape && detail::recorded(logp)) {
    y.node = tape->record("nll", [xn = logp.node, targets, rows, k, shape = logp.shape](const TensorT<T>& g) {
      TensorT<T> gx(shape);
      const T v = -g.data[0] / static_cast<T>(rows);
      for (std::size_t r = 0; r < rows; ++r) gx.data[r * k + targets[r]] = v;
      return std::vector<std::pair<int, TensorT<T>>>{{xn, std::move(gx)}};
    });
  }
  return y;
}

// [N,C,H,W] -> [N,C] spatial mean.
template <typename T>
TensorT<T> global_avg_pool(const TensorT<T>& x, TapeT<T>* tape = nullptr) {
  if (x.shape.size() != 4) throw std::invalid_argument("global_avg_pool: expected [N,C,H,W]");
  const std::size_t n = x.shape[0], c = x.shape[1], plane = x.shape[2] * x.shape[3];
  if (plane == 0) throw std::invalid_argument("global_avg_pool: empty spatial extent");
  const T inv = T(1) / static_cast<T>(plane);
  TensorT<T> y(Shape{n, c});
  for (std::size_t i = 0; i < n * c; ++i) {
    T s = T(0);
    for (std::size_t p = 0; p < plane; ++p) s += x.data[i * plane + p];
    y.data[i] = s * inv;
  }
  if (tape && detail::recorded(x)) {
    y.node = tape->record("gap", [xn = x.node, n, c, plane, inv, shape = x.shape](const TensorT<T>& g) {
      TensorT<T> gx(shape);
      for (std::size_t i = 0; i < n * c; ++i) {
        const T v = g.data[i] * inv;
        for (std::size_t p = 0; p < plane; ++p) gx.data[i * plane + p] = v;
      }
      return std::vector<std::pair<int, TensorT<T>>>{{xn, std::move(gx)}};
    });
  }
  return y;
}

// ---- finite differences ---------------------------------------------------------
// Central-difference gradient oracle: (f(x+eps e_i) - f(x-eps e_i)) / (2 eps).

template <typename T>
TensorT<T> finite_diff_grad(const std::function<T(const TensorT<T>&)>& f, const TensorT<T>& x, T eps) {
  if (!(eps > T(0))) throw std::invalid_argument("finite_diff_grad: eps must be positive");
  TensorT<T> g(x.shape);
  TensorT<T> probe = x.detached();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T orig = probe.data[i];
    probe.data[i] = orig + eps;
    const T fp = f(probe);
    probe.data[i] = orig - eps;
    const T fm = f(probe);
    probe.data[i] = orig;
    g.data[i] = (fp - fm) / (T(2) * eps);
  }
  return g;
}

template <typename T>
std::vector<int> argmax_lastdim(const TensorT<T>& t) {
  const std::size_t k = detail::last_dim(t.shape);
  const std::size_t rows = t.size() / k;
  std::vector<int> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* p = t.data.data() + r * k;
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j)
      if (p[j] > p[best]) best = j;  // ties resolve to the lowest index
    out[r] = static_cast<int>(best);
  }
  return out;
}

}  // namespace unlearn
