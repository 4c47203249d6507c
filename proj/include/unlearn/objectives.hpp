#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "unlearn/datagen.hpp"
#include "unlearn/layers.hpp"
#include "unlearn/run_report.hpp"

namespace unlearn {

enum class Method { baseline, ours, confusion, grl_only, grayscale };

Method parse_method(const std::string& s);
const char* method_name(Method m);

struct TrainConfig {
  double lambda = 0.1;     // weight of the entropy (or confusion) regularizer
  double mu = 1.0;         // weight of the bias prediction loss
  double grl_scale = 0.1;  // gradient reversal scale
  double lr = 0.001;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::size_t batch_size = 128;
  std::size_t epochs = 20;
  std::uint64_t seed = 1;
  Method method = Method::ours;
  double sigma2 = 0.02;  // echoed into reports; the dataset carries its own
  bool use_f64 = false;  // 64-bit training; 32-bit is the default for speed
  bool alternating = false;  // two-phase update instead of the single GRL pass

  void validate() const {
    if (lambda < 0 || mu < 0 || grl_scale < 0)
      throw std::invalid_argument("TrainConfig: lambda, mu and grl_scale must be >= 0");
    if (batch_size < 2) throw std::invalid_argument("TrainConfig: batch_size must be >= 2");
    if (!(sigma2 > 0)) throw std::invalid_argument("TrainConfig: sigma2 must be positive");
    if (!(lr > 0)) throw std::invalid_argument("TrainConfig: lr must be positive");
  }
};

// ---- losses -----------------------------------------------------------------

// Mean over the batch of -log softmax(logits)[label].
template <typename T>
TensorT<T> classification_loss(const TensorT<T>& logits, const std::vector<int>& labels,
                               TapeT<T>* tape = nullptr) {
  if (logits.shape.size() != 2)
    throw std::invalid_argument("classification_loss: logits must be [N,K], got " + shape_str(logits.shape));
  return nll_lastdim(log_softmax(logits, tape), labels, tape);
}

namespace detail {

// [N,3,8,7,7] -> [N,3,7,7,8]: level axis moved last for per-position softmax.
template <typename T>
TensorT<T> levels_last(const TensorT<T>& bias_logits, TapeT<T>* tape) {
  if (bias_logits.shape.size() != 5)
    throw std::invalid_argument("bias logits must be [N,C,L,G,G], got " + shape_str(bias_logits.shape));
  return permute(bias_logits, {0, 1, 3, 4, 2}, tape);
}

}  // namespace detail

// Cross-entropy of the 8-way level classification, averaged over all
// N x 3 x 7 x 7 positions.
template <typename T>
TensorT<T> bias_loss(const TensorT<T>& bias_logits, const std::vector<int>& levels, TapeT<T>* tape = nullptr) {
  auto logp = log_softmax(detail::levels_last(bias_logits, tape), tape);
  return nll_lastdim(logp, levels, tape);
}

// Mean over positions of sum_l q log q, q = softmax over levels. Ranges in
// [-ln 8, 0]; minimized by the uniform distribution. Callers freeze h's
// parameters so the gradient reaches only the features.
template <typename T>
TensorT<T> negative_conditional_entropy(const TensorT<T>& bias_logits, TapeT<T>* tape = nullptr) {
  auto logp = log_softmax(detail::levels_last(bias_logits, tape), tape);
  const std::size_t positions = logp.size() / logp.shape.back();
  auto plogp = mul(exp(logp, tape), logp, tape);
  return scale(sum(plogp, tape), T(1) / static_cast<T>(positions), tape);
}

// Cross-entropy between the level posterior and the uniform distribution:
// mean over positions of -(1/8) sum_l log q_l. Minimized (= ln 8) by uniform q.
template <typename T>
TensorT<T> confusion_loss(const TensorT<T>& bias_logits, TapeT<T>* tape = nullptr) {
  auto logp = log_softmax(detail::levels_last(bias_logits, tape), tape);
  const std::size_t k = logp.shape.back();
  const std::size_t positions = logp.size() / k;
  return scale(sum(logp, tape), T(-1) / static_cast<T>(positions * k), tape);
}

// ---- training ----------------------------------------------------------------

template <typename T>
struct BatchT {
  TensorT<T> images;          // [B,3,28,28]
  std::vector<int> labels;    // digit class per image
  std::vector<int> levels;    // flattened [B,3,7,7] bias levels
};

// Effective term weights for a method.
struct StepPlan {
  double lambda = 0.0;
  double mu = 0.0;
  double grl_scale = 0.0;
  bool entropy_reg = true;  // false -> confusion regularizer
  static StepPlan for_method(const TrainConfig& cfg) {
    StepPlan p;
    switch (cfg.method) {
      case Method::baseline:
      case Method::grayscale: break;  // plain cross-entropy
      case Method::ours:
        p.lambda = cfg.lambda;
        p.mu = cfg.mu;
        p.grl_scale = cfg.grl_scale;
        break;
      case Method::confusion:
        p.lambda = cfg.lambda;
        p.mu = cfg.mu;
        p.grl_scale = cfg.grl_scale;
        p.entropy_reg = false;
        break;
      case Method::grl_only:
        p.mu = cfg.mu;
        p.grl_scale = cfg.grl_scale;
        break;
    }
    return p;
  }
};

namespace detail {

template <typename T>
double plain_accuracy(const std::vector<int>& preds, const std::vector<int>& labels) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) hits += preds[i] == labels[i];
  return preds.empty() ? 0.0 : static_cast<double>(hits) / preds.size();
}

}  // namespace detail

// One simultaneous update of the full objective
//   L_c + lambda * negent(h_frozen(f(x))) + mu * L_B(h(grl(f(x))))
// with every active parameter stepped once by SGD-with-momentum. Inactive
// terms (zero weight) are skipped entirely, so with lambda = mu = 0 the step
// is bit-for-bit plain SGD on L_c and h is untouched.
template <typename T>
StepMetrics minimax_step(const BatchT<T>& batch, ParamSetT<T>& params, OptimStateT<T>& opt,
                         const StepPlan& plan) {
  TapeT<T> tape;
  const bool use_h = plan.mu > 0.0;
  const bool use_reg = plan.lambda > 0.0;
  watch_params(params, tape, true, true, use_h);

  auto feat = forward_f(batch.images, params, Mode::train, &tape);
  auto logits = forward_g(feat, params, Mode::train, &tape);
  auto loss_c = classification_loss(logits, batch.labels, &tape);
  TensorT<T> total = loss_c;

  StepMetrics m;
  m.loss_c = static_cast<double>(loss_c.item());
  m.digit_acc = detail::plain_accuracy<T>(argmax_lastdim(logits), batch.labels);

  if (use_h) {
    auto reversed = gradient_reversal(feat, static_cast<T>(plan.grl_scale), &tape);
    auto bias_logits = forward_h(reversed, params, Mode::train, &tape, false, true);
    auto loss_b = bias_loss(bias_logits, batch.levels, &tape);
    total = add(total, scale(loss_b, static_cast<T>(plan.mu), &tape), &tape);
    m.loss_b = static_cast<double>(loss_b.item());
    m.bias_acc = detail::plain_accuracy<T>(argmax_lastdim(detail::levels_last(bias_logits, static_cast<TapeT<T>*>(nullptr))),
                                           batch.levels);
  }
  if (use_reg) {
    // h runs a second time with frozen parameters; batch statistics are
    // identical, running buffers are left alone.
    auto bias_logits = forward_h(feat, params, Mode::train, &tape, true, false);
    auto reg = plan.entropy_reg ? negative_conditional_entropy(bias_logits, &tape)
                                : confusion_loss(bias_logits, &tape);
    total = add(total, scale(reg, static_cast<T>(plan.lambda), &tape), &tape);
    if (plan.entropy_reg)
      m.negent = static_cast<double>(reg.item());
    else
      m.negent = static_cast<double>(negative_conditional_entropy(bias_logits).item());
  }

  if (!std::isfinite(static_cast<double>(total.item())))
    throw NumericError("minimax_step: non-finite total loss (L_c=" + std::to_string(m.loss_c) +
                       ", L_B=" + std::to_string(m.loss_b) + ", negent=" + std::to_string(m.negent) + ")");

  auto grads = tape.backward(total);
  std::size_t slot = 0;
  params.for_each_param([&](const char* name, TensorT<T>& p, Net) {
    TensorT<T>& v = opt.velocity.at(slot++);
    if (const TensorT<T>* g = grads.find(p.node)) {
      try {
        sgd_momentum_step(p, *g, v, opt.lr, opt.momentum, opt.weight_decay);
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " (parameter " + name + ")");
      }
    }
  });
  unwatch_params(params);
  return m;
}

// Two-phase variant of the same objective without the reversal layer:
// phase 1 updates h on L_B with frozen features; phase 2 updates f,g on
// L_c + lambda * reg - mu * L_B with h frozen (sign-flipped adversarial loss).
template <typename T>
StepMetrics alternating_step(const BatchT<T>& batch, ParamSetT<T>& params, OptimStateT<T>& opt,
                             const StepPlan& plan) {
  StepMetrics m;
  const bool use_h = plan.mu > 0.0;

  if (use_h) {
    TapeT<T> tape;
    watch_params(params, tape, false, false, true);
    auto feat = forward_f(batch.images, params, Mode::train, &tape);
    auto bias_logits = forward_h(feat.detached(), params, Mode::train, &tape, false, true);
    auto loss_b = bias_loss(bias_logits, batch.levels, &tape);
    if (!std::isfinite(static_cast<double>(loss_b.item())))
      throw NumericError("alternating_step: non-finite bias loss");
    auto grads = tape.backward(loss_b);
    std::size_t slot = 0;
    params.for_each_param([&](const char*, TensorT<T>& p, Net) {
      TensorT<T>& v = opt.velocity.at(slot++);
      if (const TensorT<T>* g = grads.find(p.node))
        sgd_momentum_step(p, *g, v, opt.lr, opt.momentum, opt.weight_decay);
    });
    unwatch_params(params);
    m.loss_b = static_cast<double>(loss_b.item());
    m.bias_acc = detail::plain_accuracy<T>(argmax_lastdim(detail::levels_last(bias_logits, static_cast<TapeT<T>*>(nullptr))),
                                           batch.levels);
  }

  TapeT<T> tape;
  watch_params(params, tape, true, true, false);
  auto feat = forward_f(batch.images, params, Mode::train, &tape);
  auto logits = forward_g(feat, params, Mode::train, &tape);
  auto loss_c = classification_loss(logits, batch.labels, &tape);
  TensorT<T> total = loss_c;
  if (plan.lambda > 0.0) {
    auto bias_logits = forward_h(feat, params, Mode::train, &tape, true, false);
    auto reg = plan.entropy_reg ? negative_conditional_entropy(bias_logits, &tape)
                                : confusion_loss(bias_logits, &tape);
    total = add(total, scale(reg, static_cast<T>(plan.lambda), &tape), &tape);
    m.negent = static_cast<double>(plan.entropy_reg
                                       ? reg.item()
                                       : negative_conditional_entropy(bias_logits).item());
  }
  if (use_h) {
    auto bias_logits = forward_h(feat, params, Mode::train, &tape, true, false);
    auto loss_b = bias_loss(bias_logits, batch.levels, &tape);
    total = add(total, scale(loss_b, static_cast<T>(-plan.mu), &tape), &tape);
  }
  if (!std::isfinite(static_cast<double>(total.item())))
    throw NumericError("alternating_step: non-finite total loss");
  auto grads = tape.backward(total);
  std::size_t slot = 0;
  params.for_each_param([&](const char*, TensorT<T>& p, Net) {
    TensorT<T>& v = opt.velocity.at(slot++);
    if (const TensorT<T>* g = grads.find(p.node))
      sgd_momentum_step(p, *g, v, opt.lr, opt.momentum, opt.weight_decay);
  });
  unwatch_params(params);
  m.loss_c = static_cast<double>(loss_c.item());
  m.digit_acc = detail::plain_accuracy<T>(argmax_lastdim(logits), batch.labels);
  return m;
}

// ---- batching / evaluation helpers ---------------------------------------------

template <typename T>
BatchT<T> make_batch(const BiasedDataset& ds, const std::vector<std::size_t>& idx) {
  const std::size_t img_sz = 3 * kImg * kImg, bias_sz = 3 * kBiasGrid * kBiasGrid;
  BatchT<T> b;
  b.images = TensorT<T>(Shape{idx.size(), 3, kImg, kImg});
  b.labels.resize(idx.size());
  b.levels.resize(idx.size() * bias_sz);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const std::size_t s = idx[i];
    const float* src = ds.images.data() + s * img_sz;
    T* dst = b.images.data.data() + i * img_sz;
    for (std::size_t j = 0; j < img_sz; ++j) dst[j] = static_cast<T>(src[j]);
    b.labels[i] = ds.labels[s];
    for (std::size_t j = 0; j < bias_sz; ++j) b.levels[i * bias_sz + j] = ds.bias[s * bias_sz + j];
  }
  return b;
}

// Digit predictions over a dataset in eval mode.
template <typename T>
std::vector<int> predict_digits(ParamSetT<T>& params, const BiasedDataset& ds,
                                std::size_t eval_batch = 256) {
  std::vector<int> preds;
  preds.reserve(ds.size());
  for (std::size_t start = 0; start < ds.size(); start += eval_batch) {
    const std::size_t stop = std::min(ds.size(), start + eval_batch);
    std::vector<std::size_t> idx(stop - start);
    std::iota(idx.begin(), idx.end(), start);
    auto batch = make_batch<T>(ds, idx);
    auto feat = forward_f(batch.images, params, Mode::eval);
    auto logits = forward_g(feat, params, Mode::eval);
    auto p = argmax_lastdim(logits);
    preds.insert(preds.end(), p.begin(), p.end());
  }
  return preds;
}

// Balanced (macro-averaged over levels present) accuracy of h's level
// predictions over a dataset. Chance for a degenerate predictor is 1/8.
template <typename T>
double bias_balanced_accuracy(ParamSetT<T>& params, const BiasedDataset& ds, std::size_t eval_batch = 256) {
  std::vector<std::uint64_t> hits(kBiasLevels, 0), total(kBiasLevels, 0);
  const std::size_t bias_sz = 3 * kBiasGrid * kBiasGrid;
  for (std::size_t start = 0; start < ds.size(); start += eval_batch) {
    const std::size_t stop = std::min(ds.size(), start + eval_batch);
    std::vector<std::size_t> idx(stop - start);
    std::iota(idx.begin(), idx.end(), start);
    auto batch = make_batch<T>(ds, idx);
    auto feat = forward_f(batch.images, params, Mode::eval);
    auto bias_logits = forward_h(feat, params, Mode::eval);
    auto preds = argmax_lastdim(detail::levels_last(bias_logits, static_cast<TapeT<T>*>(nullptr)));
    for (std::size_t i = 0; i < preds.size(); ++i) {
      const int truth = batch.levels[i];
      total[truth]++;
      hits[truth] += preds[i] == truth;
    }
    (void)bias_sz;
  }
  double acc = 0.0;
  std::size_t present = 0;
  for (std::size_t l = 0; l < kBiasLevels; ++l) {
    if (total[l] == 0) continue;
    acc += static_cast<double>(hits[l]) / static_cast<double>(total[l]);
    present++;
  }
  return present ? acc / static_cast<double>(present) : 0.0;
}

// ---- full training loop ----------------------------------------------------------

template <typename T>
std::pair<ParamSetT<T>, RunReport> train_impl(const BiasedDataset& train_set, const BiasedDataset& test_set,
                                              const TrainConfig& cfg) {
  cfg.validate();
  if (train_set.size() == 0) throw std::invalid_argument("train: empty dataset");

  // The grayscale method trains and evaluates on converted copies.
  BiasedDataset tr_hold, te_hold;
  const BiasedDataset* train_ds = &train_set;
  const BiasedDataset* test_ds = &test_set;
  if (cfg.method == Method::grayscale) {
    tr_hold = to_grayscale(train_set);
    te_hold = to_grayscale(test_set);
    train_ds = &tr_hold;
    test_ds = &te_hold;
  }

  ArchSpec arch;
  auto params = init_params<T>(arch, mix_seed(cfg.seed, "params"));
  auto opt = OptimStateT<T>::init(params, static_cast<T>(cfg.lr), static_cast<T>(cfg.momentum),
                                  static_cast<T>(cfg.weight_decay));
  const StepPlan plan = StepPlan::for_method(cfg);

  RunReport report;
  report.method = method_name(cfg.method);
  report.sigma2 = train_ds->sigma2;
  report.seed = cfg.seed;

  std::vector<std::size_t> order(train_ds->size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng shuffle_rng(mix_seed(mix_seed(cfg.seed, "shuffle"), epoch));
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(shuffle_rng.uniform_index(i));
      std::swap(order[i - 1], order[j]);
    }

    EpochRow row;
    row.epoch = static_cast<int>(epoch);
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      if (stop - start < 2) break;  // BN needs at least two samples
      std::vector<std::size_t> idx(order.begin() + start, order.begin() + stop);
      auto batch = make_batch<T>(*train_ds, idx);
      StepMetrics m = cfg.alternating ? alternating_step(batch, params, opt, plan)
                                      : minimax_step(batch, params, opt, plan);
      row.loss_c += m.loss_c;
      row.loss_b += m.loss_b;
      row.negent += m.negent;
      row.train_digit_acc += m.digit_acc;
      row.train_bias_acc += m.bias_acc;
      batches++;
    }
    if (batches == 0) throw std::invalid_argument("train: dataset smaller than one batch");
    row.loss_c /= batches;
    row.loss_b /= batches;
    row.negent /= batches;
    row.train_digit_acc /= batches;
    row.train_bias_acc /= batches;

    if (test_ds->size() > 0) {
      auto preds = predict_digits(params, *test_ds);
      std::size_t hits = 0;
      for (std::size_t i = 0; i < preds.size(); ++i) hits += preds[i] == test_ds->labels[i];
      row.test_acc = static_cast<double>(hits) / preds.size();
      row.test_bias_balanced = plan.mu > 0 ? bias_balanced_accuracy(params, *test_ds) : 0.0;
    }
    report.epochs.push_back(row);
  }
  report.final_test_acc = report.epochs.empty() ? 0.0 : report.epochs.back().test_acc;
  return {std::move(params), std::move(report)};
}

// Public entry: trains in float32 unless cfg.use_f64, returns parameters
// widened to float64 (lossless) for storage and evaluation.
std::pair<ParamSetT<double>, RunReport> train(const BiasedDataset& train_set, const BiasedDataset& test_set,
                                              const TrainConfig& cfg);

}  // namespace unlearn
