#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "unlearn/eval.hpp"
#include "unlearn/objectives.hpp"

using namespace unlearn;
using Tensor = TensorT<double>;

namespace {

constexpr double kLn10 = 2.302585092994046;
constexpr double kLn8 = 2.0794415416798357;
constexpr double kLn2 = 0.6931471805599453;

Tensor random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  return uniform<double>(std::move(s), lo, hi, rng);
}

BatchT<double> random_batch(std::size_t n, Rng& rng) {
  BatchT<double> b;
  b.images = uniform<double>({n, 3, kImg, kImg}, 0.0, 1.0, rng);
  b.labels.resize(n);
  for (auto& l : b.labels) l = static_cast<int>(rng.uniform_index(10));
  b.levels.resize(n * 3 * kBiasGrid * kBiasGrid);
  for (auto& l : b.levels) l = static_cast<int>(rng.uniform_index(8));
  return b;
}

std::vector<Tensor> snapshot(ParamSetT<double>& p) {
  std::vector<Tensor> out;
  p.for_each_param([&](const char*, Tensor& t, Net) { out.push_back(t.detached()); });
  return out;
}

}  // namespace

TEST_CASE("classification_loss frozen values") {
  auto uniform_logits = zeros<double>({4, 10});
  std::vector<int> labels = {0, 3, 7, 9};
  CHECK(classification_loss(uniform_logits, labels).item() == doctest::Approx(kLn10).epsilon(1e-12));

  // two classes, true-class probability 0.9 -> loss = -ln 0.9
  Tensor two({1, 2}, {std::log(9.0), 0.0});
  CHECK(classification_loss(two, {0}).item() == doctest::Approx(0.10536051565782628).epsilon(1e-10));

  Tensor sharp({1, 10});
  sharp.data[4] = 60.0;
  CHECK(classification_loss(sharp, {4}).item() < 1e-9);

  CHECK_THROWS_AS(classification_loss(uniform_logits, {0, 1, 2, 10}), std::invalid_argument);
}

TEST_CASE("bias_loss frozen values and reduction to classification") {
  auto uniform_logits = zeros<double>({2, 3, 8, 7, 7});
  std::vector<int> levels(2 * 3 * 7 * 7, 5);
  CHECK(bias_loss(uniform_logits, levels).item() == doctest::Approx(kLn8).epsilon(1e-12));

  Rng rng(3);
  auto single = random_tensor({1, 1, 8, 1, 1}, rng, -2.0, 2.0);
  Tensor as_logits({1, 8}, single.data);
  for (int lev = 0; lev < 8; ++lev) {
    CHECK(bias_loss(single, {lev}).item() ==
          doctest::Approx(classification_loss(as_logits, {lev}).item()).epsilon(1e-12));
  }

  CHECK_THROWS_AS(bias_loss(uniform_logits, std::vector<int>(2 * 3 * 7 * 7, 8)), std::invalid_argument);
}

TEST_CASE("negative_conditional_entropy frozen values") {
  auto uniform_logits = zeros<double>({1, 3, 8, 7, 7});
  CHECK(negative_conditional_entropy(uniform_logits).item() == doctest::Approx(-kLn8).epsilon(1e-12));

  auto onehot = zeros<double>({1, 1, 8, 1, 1});
  onehot.data[0] = 60.0;
  CHECK(negative_conditional_entropy(onehot).item() == doctest::Approx(0.0).epsilon(1e-9));

  Tensor half({1, 1, 8, 1, 1}, {10, 10, -60, -60, -60, -60, -60, -60});
  CHECK(negative_conditional_entropy(half).item() == doctest::Approx(-kLn2).epsilon(1e-9));
}

TEST_CASE("confusion_loss frozen values") {
  auto uniform_logits = zeros<double>({1, 3, 8, 7, 7});
  CHECK(confusion_loss(uniform_logits).item() == doctest::Approx(kLn8).epsilon(1e-12));

  Tensor two({1, 1, 2, 1, 1}, {4.0, 4.0});
  CHECK(confusion_loss(two).item() == doctest::Approx(kLn2).epsilon(1e-12));

  Tensor skew({1, 1, 2, 1, 1}, {std::log(0.9), std::log(0.1)});
  CHECK(confusion_loss(skew).item() == doctest::Approx(1.2039728043259361).epsilon(1e-10));
  CHECK(confusion_loss(skew).item() > kLn2);
}

TEST_CASE("regularizer range properties on random logits") {
  Rng rng(17);
  for (int rep = 0; rep < 20; ++rep) {
    auto logits = random_tensor({2, 3, 8, 3, 3}, rng, -4.0, 4.0);
    const double ne = negative_conditional_entropy(logits).item();
    const double cf = confusion_loss(logits).item();
    CHECK(ne >= -kLn8 - 1e-12);
    CHECK(ne <= 1e-12);
    CHECK(cf >= kLn8 - 1e-12);
  }
  // equality holds at the uniform distribution
  auto uniform_logits = constant<double>({1, 3, 8, 2, 2}, 0.7);
  CHECK(negative_conditional_entropy(uniform_logits).item() == doctest::Approx(-kLn8).epsilon(1e-9));
  CHECK(confusion_loss(uniform_logits).item() == doctest::Approx(kLn8).epsilon(1e-9));
}

TEST_CASE("minimax_step with zero weights is plain SGD bit-for-bit") {
  ArchSpec arch;
  Rng rng(5);
  auto batch = random_batch(8, rng);

  auto p1 = init_params<double>(arch, 77);
  auto p2 = init_params<double>(arch, 77);
  auto o1 = OptimStateT<double>::init(p1, 0.001, 0.9, 1e-4);
  auto o2 = OptimStateT<double>::init(p2, 0.001, 0.9, 1e-4);

  StepPlan plan;  // lambda = mu = 0
  auto h_before = snapshot(p1);
  (void)minimax_step(batch, p1, o1, plan);

  // reference: manual forward/backward on L_c alone with the same update rule
  {
    TapeT<double> tape;
    watch_params(p2, tape, true, true, false);
    auto feat = forward_f(batch.images, p2, Mode::train, &tape);
    auto logits = forward_g(feat, p2, Mode::train, &tape);
    auto loss = classification_loss(logits, batch.labels, &tape);
    auto grads = tape.backward(loss);
    std::size_t slot = 0;
    p2.for_each_param([&](const char*, Tensor& t, Net) {
      Tensor& v = o2.velocity.at(slot++);
      if (const Tensor* g = grads.find(t.node)) sgd_momentum_step(t, *g, v, 0.001, 0.9, 1e-4);
    });
    unwatch_params(p2);
  }

  std::vector<Tensor> s1 = snapshot(p1), s2 = snapshot(p2);
  for (std::size_t i = 0; i < s1.size(); ++i) CHECK(s1[i].data == s2[i].data);  // bitwise

  // h must be untouched by the baseline step
  std::size_t idx = 0;
  p1.for_each_param([&](const char*, Tensor& t, Net net) {
    if (net == Net::h) CHECK(t.data == h_before[idx].data);
    idx++;
  });
}

TEST_CASE("gradient routing decomposes into the three passes") {
  ArchSpec arch;
  Rng rng(29);
  auto batch = random_batch(6, rng);
  const double lambda = 0.1, mu = 1.0, grl = 0.1;

  // combined pass
  auto params = init_params<double>(arch, 123);
  std::vector<Tensor> total_f, total_h;
  {
    auto p = params;  // fresh copy, running stats isolated
    TapeT<double> tape;
    watch_params(p, tape, true, true, true);
    auto feat = forward_f(batch.images, p, Mode::train, &tape);
    auto logits = forward_g(feat, p, Mode::train, &tape);
    auto total = classification_loss(logits, batch.labels, &tape);
    auto reversed = gradient_reversal(feat, grl, &tape);
    auto bl_adv = forward_h(reversed, p, Mode::train, &tape, false, true);
    total = add(total, scale(bias_loss(bl_adv, batch.levels, &tape), mu, &tape), &tape);
    auto bl_ent = forward_h(feat, p, Mode::train, &tape, true, false);
    total = add(total, scale(negative_conditional_entropy(bl_ent, &tape), lambda, &tape), &tape);
    auto grads = tape.backward(total);
    p.for_each_param([&](const char*, Tensor& t, Net net) {
      if (net == Net::f) total_f.push_back(grads.at(t.node));
      if (net == Net::h) total_h.push_back(grads.at(t.node));
    });
  }

  auto grads_of = [&](auto&& loss_builder, Net which) {
    auto p = params;
    TapeT<double> tape;
    watch_params(p, tape, true, true, true);
    auto loss = loss_builder(p, tape);
    auto grads = tape.backward(loss);
    std::vector<Tensor> out;
    p.for_each_param([&](const char*, Tensor& t, Net net) {
      if (net == which) {
        if (grads.has(t.node))
          out.push_back(grads.at(t.node));
        else
          out.push_back(zeros<double>(t.shape));
      }
    });
    return out;
  };

  auto g_lc = grads_of(
      [&](ParamSetT<double>& p, TapeT<double>& tape) {
        auto feat = forward_f(batch.images, p, Mode::train, &tape);
        return classification_loss(forward_g(feat, p, Mode::train, &tape), batch.labels, &tape);
      },
      Net::f);
  auto g_ent = grads_of(
      [&](ParamSetT<double>& p, TapeT<double>& tape) {
        auto feat = forward_f(batch.images, p, Mode::train, &tape);
        return negative_conditional_entropy(forward_h(feat, p, Mode::train, &tape, true, false), &tape);
      },
      Net::f);
  auto g_lb_f = grads_of(
      [&](ParamSetT<double>& p, TapeT<double>& tape) {
        auto feat = forward_f(batch.images, p, Mode::train, &tape);
        return bias_loss(forward_h(feat, p, Mode::train, &tape, false, true), batch.levels, &tape);
      },
      Net::f);
  auto g_lb_h = grads_of(
      [&](ParamSetT<double>& p, TapeT<double>& tape) {
        auto feat = forward_f(batch.images, p, Mode::train, &tape);
        return bias_loss(forward_h(feat, p, Mode::train, &tape, false, true), batch.levels, &tape);
      },
      Net::h);

  // theta_f: dL_c + lambda d(negent) - grl * mu * dL_B
  for (std::size_t i = 0; i < total_f.size(); ++i) {
    for (std::size_t j = 0; j < total_f[i].size(); ++j) {
      const double expected = g_lc[i].data[j] + lambda * g_ent[i].data[j] - grl * mu * g_lb_f[i].data[j];
      CHECK(std::abs(total_f[i].data[j] - expected) <= 1e-10);
    }
  }
  // theta_h: + mu * dL_B only (no contribution from L_c or the entropy term)
  for (std::size_t i = 0; i < total_h.size(); ++i)
    for (std::size_t j = 0; j < total_h[i].size(); ++j)
      CHECK(std::abs(total_h[i].data[j] - mu * g_lb_h[i].data[j]) <= 1e-10);
}

TEST_CASE("train smoke run: deterministic, finite, reports per epoch") {
  auto raw_train = synth_digits(8, 101);
  auto raw_test = synth_digits(8, 102);
  auto train_set = build_train_set(raw_train, 0.02, 7);
  auto test_set = build_test_set(raw_test, 0.02, 8);

  TrainConfig cfg;
  cfg.method = Method::ours;
  cfg.epochs = 2;
  cfg.batch_size = 16;
  cfg.seed = 3;

  auto [params_a, report_a] = train(train_set, test_set, cfg);
  auto [params_b, report_b] = train(train_set, test_set, cfg);

  REQUIRE(report_a.epochs.size() == 2);
  CHECK(report_a.epochs[0].epoch == 1);
  CHECK(report_a.epochs[1].epoch == 2);
  for (const auto& row : report_a.epochs) {
    CHECK(std::isfinite(row.loss_c));
    CHECK(std::isfinite(row.loss_b));
    CHECK(std::isfinite(row.negent));
    CHECK(row.train_digit_acc >= 0.0);
    CHECK(row.train_digit_acc <= 1.0);
    CHECK(row.test_acc >= 0.0);
    CHECK(row.test_acc <= 1.0);
    CHECK(row.negent >= -kLn8 - 1e-9);
    CHECK(row.negent <= 1e-9);
  }
  CHECK(report_a.epochs.back().loss_c == report_b.epochs.back().loss_c);
  CHECK(report_a.final_test_acc == report_b.final_test_acc);
  CHECK(params_a.f_w1.data == params_b.f_w1.data);

  // method dispatch sanity for the other variants (single epoch each)
  for (Method m : {Method::baseline, Method::confusion, Method::grl_only, Method::grayscale}) {
    TrainConfig c2 = cfg;
    c2.method = m;
    c2.epochs = 1;
    auto [p, r] = train(train_set, test_set, c2);
    CHECK(std::isfinite(r.epochs.at(0).loss_c));
  }

  // alternating ablation runs and stays finite
  TrainConfig alt = cfg;
  alt.alternating = true;
  alt.epochs = 1;
  auto [p_alt, r_alt] = train(train_set, test_set, alt);
  CHECK(std::isfinite(r_alt.epochs.at(0).loss_c));

  CHECK_THROWS_AS(train(BiasedDataset{}, test_set, cfg), std::invalid_argument);
}

TEST_CASE("non-finite losses abort with diagnostics") {
  auto raw = synth_digits(4, 55);
  auto train_set = build_train_set(raw, 0.02, 9);
  auto test_set = build_test_set(raw, 0.02, 10);
  train_set.images[5] = std::numeric_limits<float>::quiet_NaN();

  TrainConfig cfg;
  cfg.method = Method::baseline;
  cfg.epochs = 1;
  cfg.batch_size = 40;
  CHECK_THROWS_AS(train(train_set, test_set, cfg), NumericError);
}

TEST_CASE("config validation") {
  TrainConfig cfg;
  cfg.lambda = -0.1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = TrainConfig{};
  cfg.batch_size = 1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = TrainConfig{};
  cfg.sigma2 = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  CHECK_NOTHROW(TrainConfig{}.validate());
}
