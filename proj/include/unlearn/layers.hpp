#pragma once

#include <cstdint>
#include <string>

#include "unlearn/ops.hpp"
#include "unlearn/optim.hpp"
#include "unlearn/rng.hpp"
#include "unlearn/tape.hpp"
#include "unlearn/tensor.hpp"

namespace unlearn {

enum class Mode { train, eval };

// Topology of the three sub-networks.
//   f: conv(3->16, 3x3, s1, p1)+BN+ReLU, conv(16->32, 3x3, s2, p1)+BN+ReLU
//   g: conv(32->64, 3x3, s2, p1)+BN+ReLU, conv(64->64, 3x3, s1, p1)+BN+ReLU, GAP, FC 64->10
//   h: conv(32->32, 3x3, s2, p1)+BN+ReLU, conv(32->24, 1x1) reshaped to [3 channels, 8 levels, 7, 7]
struct ArchSpec {
  std::size_t in_c = 3, in_h = 28, in_w = 28;
  std::size_t f_c1 = 16, f_c2 = 32;
  std::size_t g_c1 = 64, g_c2 = 64, n_classes = 10;
  std::size_t h_c1 = 32;
  std::size_t bias_channels = 3, bias_levels = 8, bias_grid = 7;
  double bn_eps = 1e-5;
  double bn_momentum = 0.1;

  std::size_t feat_c() const { return f_c2; }
  std::size_t feat_hw() const { return in_h / 2; }
  std::size_t h_out_c() const { return bias_channels * bias_levels; }

  // Trainable parameter count implied by the wiring; guards against drift.
  std::size_t param_count() const {
    auto conv = [](std::size_t ci, std::size_t co, std::size_t k) { return co * ci * k * k + co; };
    auto bn = [](std::size_t c) { return 2 * c; };
    std::size_t n = 0;
    n += conv(in_c, f_c1, 3) + bn(f_c1);
    n += conv(f_c1, f_c2, 3) + bn(f_c2);
    n += conv(f_c2, g_c1, 3) + bn(g_c1);
    n += conv(g_c1, g_c2, 3) + bn(g_c2);
    n += g_c2 * n_classes + n_classes;
    n += conv(f_c2, h_c1, 3) + bn(h_c1);
    n += conv(h_c1, h_out_c(), 1);
    return n;
  }
};

template <typename T>
struct BNState {
  TensorT<T> gamma, beta;
  TensorT<T> running_mean, running_var;  // buffers, not trainable
};

enum class Net { f, g, h };

template <typename T>
struct ParamSetT {
  ArchSpec arch;

  TensorT<T> f_w1, f_b1;
  BNState<T> f_bn1;
  TensorT<T> f_w2, f_b2;
  BNState<T> f_bn2;

  TensorT<T> g_w1, g_b1;
  BNState<T> g_bn1;
  TensorT<T> g_w2, g_b2;
  BNState<T> g_bn2;
  TensorT<T> g_fc_w, g_fc_b;

  TensorT<T> h_w1, h_b1;
  BNState<T> h_bn1;
  TensorT<T> h_w2, h_b2;

  // Fixed enumeration order; optimizer state and serialization rely on it.
  template <typename Fn>
  void for_each_param(Fn&& fn) {
    fn("f.conv1.w", f_w1, Net::f);
    fn("f.conv1.b", f_b1, Net::f);
    fn("f.bn1.gamma", f_bn1.gamma, Net::f);
    fn("f.bn1.beta", f_bn1.beta, Net::f);
    fn("f.conv2.w", f_w2, Net::f);
    fn("f.conv2.b", f_b2, Net::f);
    fn("f.bn2.gamma", f_bn2.gamma, Net::f);
    fn("f.bn2.beta", f_bn2.beta, Net::f);
    fn("g.conv1.w", g_w1, Net::g);
    fn("g.conv1.b", g_b1, Net::g);
    fn("g.bn1.gamma", g_bn1.gamma, Net::g);
    fn("g.bn1.beta", g_bn1.beta, Net::g);
    fn("g.conv2.w", g_w2, Net::g);
    fn("g.conv2.b", g_b2, Net::g);
    fn("g.bn2.gamma", g_bn2.gamma, Net::g);
    fn("g.bn2.beta", g_bn2.beta, Net::g);
    fn("g.fc.w", g_fc_w, Net::g);
    fn("g.fc.b", g_fc_b, Net::g);
    fn("h.conv1.w", h_w1, Net::h);
    fn("h.conv1.b", h_b1, Net::h);
    fn("h.bn1.gamma", h_bn1.gamma, Net::h);
    fn("h.bn1.beta", h_bn1.beta, Net::h);
    fn("h.conv2.w", h_w2, Net::h);
    fn("h.conv2.b", h_b2, Net::h);
  }

  template <typename Fn>
  void for_each_buffer(Fn&& fn) {
    fn("f.bn1.running_mean", f_bn1.running_mean);
    fn("f.bn1.running_var", f_bn1.running_var);
    fn("f.bn2.running_mean", f_bn2.running_mean);
    fn("f.bn2.running_var", f_bn2.running_var);
    fn("g.bn1.running_mean", g_bn1.running_mean);
    fn("g.bn1.running_var", g_bn1.running_var);
    fn("g.bn2.running_mean", g_bn2.running_mean);
    fn("g.bn2.running_var", g_bn2.running_var);
    fn("h.bn1.running_mean", h_bn1.running_mean);
    fn("h.bn1.running_var", h_bn1.running_var);
  }

  std::size_t param_count() {
    std::size_t n = 0;
    for_each_param([&](const char*, TensorT<T>& p, Net) { n += p.size(); });
    return n;
  }

  template <typename U>
  ParamSetT<U> cast() const {
    ParamSetT<U> out;
    out.arch = arch;
    auto* self = const_cast<ParamSetT<T>*>(this);
    std::vector<TensorT<U>*> dst;
    std::vector<const TensorT<T>*> src;
    out.for_each_param([&](const char*, TensorT<U>& p, Net) { dst.push_back(&p); });
    self->for_each_param([&](const char*, TensorT<T>& p, Net) { src.push_back(&p); });
    out.for_each_buffer([&](const char*, TensorT<U>& p) { dst.push_back(&p); });
    self->for_each_buffer([&](const char*, TensorT<T>& p) { src.push_back(&p); });
    for (std::size_t i = 0; i < dst.size(); ++i) *dst[i] = src[i]->template cast<U>();
    return out;
  }
};

namespace detail {

template <typename T>
BNState<T> bn_init(std::size_t c) {
  BNState<T> s;
  s.gamma = ones<T>({c});
  s.beta = zeros<T>({c});
  s.running_mean = zeros<T>({c});
  s.running_var = ones<T>({c});
  return s;
}

}  // namespace detail

// Deterministic per seed; each tensor draws from a stream derived from its
// name, so values do not depend on initialization order.
template <typename T>
ParamSetT<T> init_params(const ArchSpec& arch, std::uint64_t seed) {
  ParamSetT<T> p;
  p.arch = arch;
  auto conv_w = [&](const char* name, std::size_t co, std::size_t ci, std::size_t k) {
    Rng rng(mix_seed(seed, name));
    return scaled_normal<T>({co, ci, k, k}, rng, ci * k * k);
  };
  p.f_w1 = conv_w("f.conv1.w", arch.f_c1, arch.in_c, 3);
  p.f_b1 = zeros<T>({arch.f_c1});
  p.f_bn1 = detail::bn_init<T>(arch.f_c1);
  p.f_w2 = conv_w("f.conv2.w", arch.f_c2, arch.f_c1, 3);
  p.f_b2 = zeros<T>({arch.f_c2});
  p.f_bn2 = detail::bn_init<T>(arch.f_c2);

  p.g_w1 = conv_w("g.conv1.w", arch.g_c1, arch.f_c2, 3);
  p.g_b1 = zeros<T>({arch.g_c1});
  p.g_bn1 = detail::bn_init<T>(arch.g_c1);
  p.g_w2 = conv_w("g.conv2.w", arch.g_c2, arch.g_c1, 3);
  p.g_b2 = zeros<T>({arch.g_c2});
  p.g_bn2 = detail::bn_init<T>(arch.g_c2);
  {
    Rng rng(mix_seed(seed, "g.fc.w"));
    p.g_fc_w = scaled_normal<T>({arch.g_c2, arch.n_classes}, rng, arch.g_c2);
  }
  p.g_fc_b = zeros<T>({arch.n_classes});

  p.h_w1 = conv_w("h.conv1.w", arch.h_c1, arch.f_c2, 3);
  p.h_b1 = zeros<T>({arch.h_c1});
  p.h_bn1 = detail::bn_init<T>(arch.h_c1);
  p.h_w2 = conv_w("h.conv2.w", arch.h_out_c(), arch.h_c1, 1);
  p.h_b2 = zeros<T>({arch.h_out_c()});
  return p;
}

// Batch normalization over N,H,W per channel. Train mode normalizes with
// batch statistics (biased variance) and, when update_running is set, blends
// them into the running buffers. Eval mode uses the running buffers and is
// never recorded on a tape.
template <typename T>
TensorT<T> batchnorm2d(const TensorT<T>& x, BNState<T>& bn, Mode mode, double eps, double momentum,
                       TapeT<T>* tape = nullptr, bool update_running = true) {
  if (x.shape.size() != 4) throw std::invalid_argument("batchnorm2d: expected [N,C,H,W]");
  const std::size_t n = x.shape[0], c = x.shape[1], plane = x.shape[2] * x.shape[3];
  if (c != bn.gamma.shape[0]) throw std::invalid_argument("batchnorm2d: channel mismatch");
  const std::size_t m = n * plane;

  TensorT<T> y(x.shape);
  if (mode == Mode::eval) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const T inv = T(1) / std::sqrt(bn.running_var.data[ch] + static_cast<T>(eps));
      const T g = bn.gamma.data[ch], b = bn.beta.data[ch], mu = bn.running_mean.data[ch];
      for (std::size_t i = 0; i < n; ++i) {
        const T* xr = x.data.data() + (i * c + ch) * plane;
        T* yr = y.data.data() + (i * c + ch) * plane;
        for (std::size_t p = 0; p < plane; ++p) yr[p] = g * (xr[p] - mu) * inv + b;
      }
    }
    return y;
  }

  if (m < 2) throw std::invalid_argument("batchnorm2d: train mode needs at least 2 elements per channel");

  std::vector<T> mean_c(c), invstd_c(c);
  std::vector<T> xhat(x.size());
  for (std::size_t ch = 0; ch < c; ++ch) {
    T s = T(0);
    for (std::size_t i = 0; i < n; ++i) {
      const T* xr = x.data.data() + (i * c + ch) * plane;
      for (std::size_t p = 0; p < plane; ++p) s += xr[p];
    }
    const T mu = s / static_cast<T>(m);
    T v = T(0);
    for (std::size_t i = 0; i < n; ++i) {
      const T* xr = x.data.data() + (i * c + ch) * plane;
      for (std::size_t p = 0; p < plane; ++p) {
        const T d = xr[p] - mu;
        v += d * d;
      }
    }
    const T var = v / static_cast<T>(m);
    const T inv = T(1) / std::sqrt(var + static_cast<T>(eps));
    mean_c[ch] = mu;
    invstd_c[ch] = inv;
    const T g = bn.gamma.data[ch], b = bn.beta.data[ch];
    for (std::size_t i = 0; i < n; ++i) {
      const T* xr = x.data.data() + (i * c + ch) * plane;
      T* xh = xhat.data() + (i * c + ch) * plane;
      T* yr = y.data.data() + (i * c + ch) * plane;
      for (std::size_t p = 0; p < plane; ++p) {
        xh[p] = (xr[p] - mu) * inv;
        yr[p] = g * xh[p] + b;
      }
    }
    if (update_running) {
      const T mom = static_cast<T>(momentum);
      bn.running_mean.data[ch] = (T(1) - mom) * bn.running_mean.data[ch] + mom * mu;
      bn.running_var.data[ch] = (T(1) - mom) * bn.running_var.data[ch] + mom * var;
    }
  }

  const bool rec_x = x.node >= 0, rec_g = bn.gamma.node >= 0, rec_b = bn.beta.node >= 0;
  if (tape && (rec_x || rec_g || rec_b)) {
    y.node = tape->record("batchnorm2d", [xn = x.node, gn = bn.gamma.node, bnode = bn.beta.node,
                                          xhat = std::move(xhat), invstd = std::move(invstd_c),
                                          gamma = bn.gamma.data, n, c, plane](const TensorT<T>& gy) {
      const std::size_t m = n * plane;
      std::vector<std::pair<int, TensorT<T>>> out;
      std::vector<T> dgamma(c, T(0)), dbeta(c, T(0));
      for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t i = 0; i < n; ++i) {
          const T* gr = gy.data.data() + (i * c + ch) * plane;
          const T* xh = xhat.data() + (i * c + ch) * plane;
          for (std::size_t p = 0; p < plane; ++p) {
            dgamma[ch] += gr[p] * xh[p];
            dbeta[ch] += gr[p];
          }
        }
      }
      if (xn >= 0) {
        TensorT<T> gx(gy.shape);
        for (std::size_t ch = 0; ch < c; ++ch) {
          const T k = gamma[ch] * invstd[ch];
          const T mg = dbeta[ch] / static_cast<T>(m);
          const T mgx = dgamma[ch] / static_cast<T>(m);
          for (std::size_t i = 0; i < n; ++i) {
            const T* gr = gy.data.data() + (i * c + ch) * plane;
            const T* xh = xhat.data() + (i * c + ch) * plane;
            T* o = gx.data.data() + (i * c + ch) * plane;
            for (std::size_t p = 0; p < plane; ++p) o[p] = k * (gr[p] - mg - xh[p] * mgx);
          }
        }
        out.emplace_back(xn, std::move(gx));
      }
      if (gn >= 0) out.emplace_back(gn, TensorT<T>(Shape{c}, std::move(dgamma)));
      if (bnode >= 0) out.emplace_back(bnode, TensorT<T>(Shape{c}, std::move(dbeta)));
      return out;
    });
  }
  return y;
}

// Identity forward (bit-exact); backward multiplies the upstream gradient by
// -scale. Routes the adversarial signal from the bias head into f.
template <typename T>
TensorT<T> gradient_reversal(const TensorT<T>& x, T scale_val, TapeT<T>* tape = nullptr) {
  if (scale_val < T(0)) throw std::invalid_argument("gradient_reversal: scale must be non-negative");
  TensorT<T> y;
  y.shape = x.shape;
  y.data = x.data;
  if (tape && x.node >= 0) {
    y.node = tape->record("grl", [xn = x.node, scale_val](const TensorT<T>& g) {
      TensorT<T> gx(g.shape);
      for (std::size_t i = 0; i < gx.size(); ++i) gx.data[i] = -scale_val * g.data[i];
      return std::vector<std::pair<int, TensorT<T>>>{{xn, std::move(gx)}};
    });
  }
  return y;
}

namespace detail {

template <typename T>
TensorT<T> conv_bn_relu(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b, BNState<T>& bn,
                        std::size_t stride, const ArchSpec& arch, Mode mode, TapeT<T>* tape,
                        bool update_running) {
  auto y = conv2d(x, w, b, stride, 1, tape);
  y = batchnorm2d(y, bn, mode, arch.bn_eps, arch.bn_momentum, tape, update_running);
  return relu(y, tape);
}

}  // namespace detail

// x [N,3,28,28] -> feature [N,32,14,14]
template <typename T>
TensorT<T> forward_f(const TensorT<T>& x, ParamSetT<T>& p, Mode mode, TapeT<T>* tape = nullptr) {
  const ArchSpec& a = p.arch;
  if (x.shape.size() != 4 || x.shape[1] != a.in_c || x.shape[2] != a.in_h || x.shape[3] != a.in_w)
    throw std::invalid_argument("forward_f: expected [N," + std::to_string(a.in_c) + "," +
                                std::to_string(a.in_h) + "," + std::to_string(a.in_w) + "], got " +
                                shape_str(x.shape));
  auto y = detail::conv_bn_relu(x, p.f_w1, p.f_b1, p.f_bn1, 1, a, mode, tape, true);
  return detail::conv_bn_relu(y, p.f_w2, p.f_b2, p.f_bn2, 2, a, mode, tape, true);
}

// feature [N,32,14,14] -> class logits [N,10]
template <typename T>
TensorT<T> forward_g(const TensorT<T>& feat, ParamSetT<T>& p, Mode mode, TapeT<T>* tape = nullptr) {
  const ArchSpec& a = p.arch;
  if (feat.shape.size() != 4 || feat.shape[1] != a.feat_c())
    throw std::invalid_argument("forward_g: expected [N," + std::to_string(a.feat_c()) + ",H,W], got " +
                                shape_str(feat.shape));
  auto y = detail::conv_bn_relu(feat, p.g_w1, p.g_b1, p.g_bn1, 2, a, mode, tape, true);
  y = detail::conv_bn_relu(y, p.g_w2, p.g_b2, p.g_bn2, 1, a, mode, tape, true);
  y = global_avg_pool(y, tape);
  y = matmul(y, p.g_fc_w, tape);
  return add_rowvec(y, p.g_fc_b, tape);
}

// feature [N,32,14,14] -> bias logits [N, 3 channels, 8 levels, 7, 7].
// stop_param_grad runs the head with detached parameter copies so gradients
// flow only into the feature input; used for the conditional-entropy term
// where h is held fixed.
template <typename T>
TensorT<T> forward_h(const TensorT<T>& feat, ParamSetT<T>& p, Mode mode, TapeT<T>* tape = nullptr,
                     bool stop_param_grad = false, bool update_running = true) {
  const ArchSpec& a = p.arch;
  if (feat.shape.size() != 4 || feat.shape[1] != a.feat_c())
    throw std::invalid_argument("forward_h: expected [N," + std::to_string(a.feat_c()) + ",H,W], got " +
                                shape_str(feat.shape));
  TensorT<T> y;
  if (stop_param_grad) {
    auto w1 = p.h_w1.detached(), b1 = p.h_b1.detached();
    BNState<T> bn1{p.h_bn1.gamma.detached(), p.h_bn1.beta.detached(), p.h_bn1.running_mean,
                   p.h_bn1.running_var};
    auto w2 = p.h_w2.detached(), b2 = p.h_b2.detached();
    y = detail::conv_bn_relu(feat, w1, b1, bn1, 2, a, mode, tape, update_running);
    y = conv2d(y, w2, b2, 1, 0, tape);
  } else {
    y = detail::conv_bn_relu(feat, p.h_w1, p.h_b1, p.h_bn1, 2, a, mode, tape, update_running);
    y = conv2d(y, p.h_w2, p.h_b2, 1, 0, tape);
  }
  const std::size_t n = y.shape[0], grid = y.shape[2];
  return reshape(y, Shape{n, a.bias_channels, a.bias_levels, grid, grid}, tape);
}

// Registers every trainable parameter of the selected networks on the tape.
template <typename T>
void watch_params(ParamSetT<T>& p, TapeT<T>& tape, bool include_f = true, bool include_g = true,
                  bool include_h = true) {
  p.for_each_param([&](const char*, TensorT<T>& t, Net net) {
    if ((net == Net::f && include_f) || (net == Net::g && include_g) || (net == Net::h && include_h))
      tape.watch(t);
  });
}

template <typename T>
void unwatch_params(ParamSetT<T>& p) {
  p.for_each_param([&](const char*, TensorT<T>& t, Net) {
    t.node = -1;
    t.requires_grad = false;
  });
}

}  // namespace unlearn
