#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "unlearn/datagen.hpp"
#include "unlearn/objectives.hpp"
#include "unlearn/run_report.hpp"

namespace unlearn {

// Fraction of equal entries; argmax ties upstream resolve to the lowest index.
double accuracy(const std::vector<int>& preds, const std::vector<int>& labels);

ConfusionMatrix confusion(const std::vector<int>& preds, const std::vector<int>& labels, std::size_t k);

// Plug-in estimator sum p(a,b) ln(p(a,b)/(p(a)p(b))) over a joint count table
// (row-major [ka x kb]); 0 ln 0 = 0. Non-negative, <= min(ln ka, ln kb).
double discrete_mi(const std::vector<std::uint64_t>& joint, std::size_t ka, std::size_t kb);

// The Eq-style bias/label contrast: per-channel plug-in MI between the digit
// label and the quantized color level at the center cell (3,3) of the bias
// grid, summed over the three channels. Large on biased train splits, ~0 on
// unbiased test splits.
double mi_digit_vs_center_color(const BiasedDataset& ds);

// Full-grid variant: the same statistic averaged over all 7x7 cells.
double mi_digit_vs_grid_color(const BiasedDataset& ds);

// Frozen-feature map of f over a dataset, eval mode: [N, 32, 14, 14].
template <typename T>
TensorT<T> extract_features(ParamSetT<T>& params, const BiasedDataset& ds, std::size_t eval_batch = 256);

// Bias-leakage probe: trains a fresh bias head (same architecture as h, new
// seed) on frozen train features, then reports the held-out balanced
// per-position level accuracy. Chance for a degenerate or uninformed
// predictor is 1/8. The probe must actually converge to mean anything, and
// the rare high levels dominate the balanced metric's tail, so it runs far
// hotter and longer than the main optimizer.
struct ProbeResult {
  double balanced_acc = 0.0;  // macro-averaged recall over levels present
  double plain_acc = 0.0;     // raw per-position accuracy
};

template <typename T>
ProbeResult bias_leakage_probe(const TensorT<T>& train_feats, const std::vector<std::uint8_t>& train_bias,
                               const TensorT<T>& test_feats, const std::vector<std::uint8_t>& test_bias,
                               const TrainConfig& cfg, std::uint64_t probe_seed = 7,
                               std::size_t probe_epochs = 150, double probe_lr = 0.05);

// ---- implementation (templated parts) ---------------------------------------

template <typename T>
TensorT<T> extract_features(ParamSetT<T>& params, const BiasedDataset& ds, std::size_t eval_batch) {
  const ArchSpec& a = params.arch;
  TensorT<T> feats(Shape{ds.size(), a.feat_c(), a.feat_hw(), a.feat_hw()});
  const std::size_t per = a.feat_c() * a.feat_hw() * a.feat_hw();
  for (std::size_t start = 0; start < ds.size(); start += eval_batch) {
    const std::size_t stop = std::min(ds.size(), start + eval_batch);
    std::vector<std::size_t> idx(stop - start);
    std::iota(idx.begin(), idx.end(), start);
    auto batch = make_batch<T>(ds, idx);
    auto f = forward_f(batch.images, params, Mode::eval);
    std::copy(f.data.begin(), f.data.end(), feats.data.begin() + start * per);
  }
  return feats;
}

namespace detail {

// Bias head over arbitrary-channel features; mirrors h's wiring.
template <typename T>
struct ProbeHead {
  ArchSpec arch;
  TensorT<T> w1, b1;
  BNState<T> bn1;
  TensorT<T> w2, b2;

  template <typename Fn>
  void for_each_param(Fn&& fn) {
    fn("probe.conv1.w", w1, Net::h);
    fn("probe.conv1.b", b1, Net::h);
    fn("probe.bn1.gamma", bn1.gamma, Net::h);
    fn("probe.bn1.beta", bn1.beta, Net::h);
    fn("probe.conv2.w", w2, Net::h);
    fn("probe.conv2.b", b2, Net::h);
  }

  static ProbeHead init(std::size_t in_c, std::uint64_t seed) {
    ProbeHead p;
    Rng r1(mix_seed(seed, "probe.conv1.w"));
    p.w1 = scaled_normal<T>({p.arch.h_c1, in_c, 3, 3}, r1, in_c * 9);
    p.b1 = zeros<T>({p.arch.h_c1});
    p.bn1.gamma = ones<T>({p.arch.h_c1});
    p.bn1.beta = zeros<T>({p.arch.h_c1});
    p.bn1.running_mean = zeros<T>({p.arch.h_c1});
    p.bn1.running_var = ones<T>({p.arch.h_c1});
    Rng r2(mix_seed(seed, "probe.conv2.w"));
    p.w2 = scaled_normal<T>({p.arch.h_out_c(), p.arch.h_c1, 1, 1}, r2, p.arch.h_c1);
    p.b2 = zeros<T>({p.arch.h_out_c()});
    return p;
  }

  TensorT<T> forward(const TensorT<T>& feat, Mode mode, TapeT<T>* tape) {
    auto y = conv2d(feat, w1, b1, 2, 1, tape);
    y = batchnorm2d(y, bn1, mode, arch.bn_eps, arch.bn_momentum, tape, true);
    y = relu(y, tape);
    y = conv2d(y, w2, b2, 1, 0, tape);
    const std::size_t n = y.shape[0], grid = y.shape[2];
    return reshape(y, Shape{n, arch.bias_channels, arch.bias_levels, grid, grid}, tape);
  }
};

}  // namespace detail

template <typename T>
ProbeResult bias_leakage_probe(const TensorT<T>& train_feats, const std::vector<std::uint8_t>& train_bias,
                               const TensorT<T>& test_feats, const std::vector<std::uint8_t>& test_bias,
                               const TrainConfig& cfg, std::uint64_t probe_seed,
                               std::size_t probe_epochs, double probe_lr) {
  if (train_feats.shape.size() != 4 || train_feats.shape[0] == 0)
    throw std::invalid_argument("bias_leakage_probe: empty feature set");
  const std::size_t n = train_feats.shape[0];
  const std::size_t per = train_feats.size() / n;
  const std::size_t bias_sz = 3 * kBiasGrid * kBiasGrid;
  if (train_bias.size() != n * bias_sz)
    throw std::invalid_argument("bias_leakage_probe: bias label count mismatch");

  auto head = detail::ProbeHead<T>::init(train_feats.shape[1], mix_seed(probe_seed, "probe"));
  OptimStateT<T> opt;
  opt.lr = static_cast<T>(probe_lr);
  opt.momentum = static_cast<T>(cfg.momentum);
  opt.weight_decay = static_cast<T>(cfg.weight_decay);
  head.for_each_param([&](const char*, TensorT<T>& p, Net) { opt.velocity.push_back(zeros<T>(p.shape)); });

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 1; epoch <= probe_epochs; ++epoch) {
    Rng shuffle_rng(mix_seed(mix_seed(probe_seed, "probe-shuffle"), epoch));
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(shuffle_rng.uniform_index(i));
      std::swap(order[i - 1], order[j]);
    }
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      if (stop - start < 2) break;
      TensorT<T> fb(Shape{stop - start, train_feats.shape[1], train_feats.shape[2], train_feats.shape[3]});
      std::vector<int> levels((stop - start) * bias_sz);
      for (std::size_t i = start; i < stop; ++i) {
        const std::size_t s = order[i];
        std::copy(train_feats.data.begin() + s * per, train_feats.data.begin() + (s + 1) * per,
                  fb.data.begin() + (i - start) * per);
        for (std::size_t j = 0; j < bias_sz; ++j)
          levels[(i - start) * bias_sz + j] = train_bias[s * bias_sz + j];
      }
      TapeT<T> tape;
      head.for_each_param([&](const char*, TensorT<T>& p, Net) { tape.watch(p); });
      auto logits = head.forward(fb, Mode::train, &tape);
      auto loss = bias_loss(logits, levels, &tape);
      if (!std::isfinite(static_cast<double>(loss.item())))
        throw NumericError("bias_leakage_probe: non-finite loss");
      auto grads = tape.backward(loss);
      std::size_t slot = 0;
      head.for_each_param([&](const char*, TensorT<T>& p, Net) {
        TensorT<T>& v = opt.velocity.at(slot++);
        if (const TensorT<T>* g = grads.find(p.node))
          sgd_momentum_step(p, *g, v, opt.lr, opt.momentum, opt.weight_decay);
        p.node = -1;
        p.requires_grad = false;
      });
    }
  }

  // Held-out per-level recall.
  std::vector<std::uint64_t> hits(kBiasLevels, 0), totals(kBiasLevels, 0);
  std::uint64_t plain_hits = 0, plain_total = 0;
  const std::size_t tn = test_feats.shape[0];
  const std::size_t tper = test_feats.size() / std::max<std::size_t>(tn, 1);
  for (std::size_t start = 0; start < tn; start += cfg.batch_size) {
    const std::size_t stop = std::min(tn, start + cfg.batch_size);
    TensorT<T> fb(Shape{stop - start, test_feats.shape[1], test_feats.shape[2], test_feats.shape[3]});
    std::copy(test_feats.data.begin() + start * tper, test_feats.data.begin() + stop * tper, fb.data.begin());
    auto logits = head.forward(fb, Mode::eval, nullptr);
    auto preds = argmax_lastdim(detail::levels_last(logits, static_cast<TapeT<T>*>(nullptr)));
    for (std::size_t i = 0; i < preds.size(); ++i) {
      const int truth = test_bias[start * bias_sz + i];
      totals[truth]++;
      hits[truth] += preds[i] == truth;
      plain_hits += preds[i] == truth;
      plain_total++;
    }
  }
  ProbeResult r;
  std::size_t present = 0;
  for (std::size_t l = 0; l < kBiasLevels; ++l) {
    if (totals[l] == 0) continue;
    r.balanced_acc += static_cast<double>(hits[l]) / static_cast<double>(totals[l]);
    present++;
  }
  if (present) r.balanced_acc /= static_cast<double>(present);
  r.plain_acc = plain_total ? static_cast<double>(plain_hits) / static_cast<double>(plain_total) : 0.0;
  return r;
}

}  // namespace unlearn
