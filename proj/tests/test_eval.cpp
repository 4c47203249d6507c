#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "unlearn/eval.hpp"
#include "unlearn/report.hpp"

using namespace unlearn;
namespace fs = std::filesystem;

namespace {

std::string tmp_dir(const char* name) {
  auto p = fs::temp_directory_path() / (std::string("unlearn_eval_") + name);
  fs::create_directories(p);
  return p.string();
}

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(is);
  return std::string(std::istreambuf_iterator<char>(is), {});
}

}  // namespace

TEST_CASE("accuracy") {
  CHECK(accuracy({1, 2, 3}, {1, 2, 3}) == 1.0);
  CHECK(accuracy({1, 2, 3}, {4, 5, 6}) == 0.0);
  CHECK(accuracy({0, 1, 1, 0}, {0, 1, 0, 0}) == 0.75);
  CHECK_THROWS_AS(accuracy({1}, {1, 2}), std::invalid_argument);
}

TEST_CASE("confusion matrices") {
  auto perfect = confusion({0, 1, 2, 0}, {0, 1, 2, 0}, 3);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 3; ++c)
      CHECK(perfect.counts[r * 3 + c] == (r == c ? (r == 0 ? 2u : 1u) : 0u));
  CHECK(perfect.accuracy() == 1.0);
  CHECK(perfect.trace() == perfect.total());

  // degenerate predictor: a single nonzero column (the vertical pattern)
  auto vertical = confusion({2, 2, 2, 2, 2, 2}, {0, 1, 2, 3, 4, 5}, 6);
  for (std::size_t r = 0; r < 6; ++r)
    for (std::size_t c = 0; c < 6; ++c) CHECK(vertical.counts[r * 6 + c] == (c == 2 ? 1u : 0u));

  // hand-counted 6-sample fixture
  auto m = confusion({0, 1, 1, 0, 1, 0}, {0, 1, 0, 0, 1, 1}, 2);
  CHECK(m.counts == std::vector<std::uint64_t>{2, 1, 1, 2});
  CHECK(m.accuracy() == doctest::Approx(4.0 / 6.0));
  auto norm = m.row_normalized();
  CHECK(norm[0] == doctest::Approx(2.0 / 3.0));

  CHECK_THROWS_AS(confusion({0, 3}, {0, 1}, 3), std::invalid_argument);
}

TEST_CASE("discrete_mi exactness") {
  // independent (product-form) tables
  CHECK(discrete_mi({4, 4, 4, 4}, 2, 2) == 0.0);  // dyadic probabilities, exactly zero
  CHECK(std::abs(discrete_mi({8, 4, 8, 4}, 2, 2)) <= 1e-12);
  CHECK(std::abs(discrete_mi({6, 3, 2, 1}, 2, 2)) <= 1e-12);  // rank-one counts

  // perfectly correlated diagonal, 8 levels
  std::vector<std::uint64_t> diag(64, 0);
  for (int i = 0; i < 8; ++i) diag[i * 8 + i] = 5;
  CHECK(discrete_mi(diag, 8, 8) == doctest::Approx(std::log(8.0)).epsilon(1e-12));

  // frozen small fixture
  CHECK(discrete_mi({2, 1, 1, 2}, 2, 2) == doctest::Approx(0.05663301226513).epsilon(1e-10));

  // brute-force agreement on every small table in a fixture set
  Rng rng(7);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t ka = 1 + rng.uniform_index(3), kb = 1 + rng.uniform_index(3);
    std::vector<std::uint64_t> t(ka * kb);
    for (auto& v : t) v = rng.uniform_index(9);
    std::uint64_t total = 0;
    for (auto v : t) total += v;
    if (total == 0) t[0] = 1;
    const double mine = discrete_mi(t, ka, kb);
    const double ref = oracles::brute_mi(t, ka, kb);
    CHECK(std::abs(mine - ref) <= 1e-12);
    CHECK(mine >= -1e-12);
    CHECK(mine <= std::log(double(std::min(ka, kb))) + 1e-12);
  }

  CHECK_THROWS_AS(discrete_mi({0, 0}, 1, 2), std::invalid_argument);
  CHECK_THROWS_AS(discrete_mi({1, 2, 3}, 2, 2), std::invalid_argument);
}

TEST_CASE("probe on constructed features") {
  // features that carry the color directly: 2x2-pooled image channels
  auto raw = synth_digits(60, 71);
  auto train_set = build_train_set(raw, 0.02, 73);
  auto raw2 = synth_digits(30, 72);
  auto test_set = build_test_set(raw2, 0.02, 74);

  auto pool2 = [](const BiasedDataset& ds) {
    TensorT<double> f(Shape{ds.size(), 3, 14, 14});
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const float* img = ds.image(i);
      for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < 14; ++y)
          for (std::size_t x = 0; x < 14; ++x) {
            double acc = 0;
            for (std::size_t dy = 0; dy < 2; ++dy)
              for (std::size_t dx = 0; dx < 2; ++dx)
                acc += img[c * kImg * kImg + (2 * y + dy) * kImg + (2 * x + dx)];
            f.data[((i * 3 + c) * 14 + y) * 14 + x] = acc / 4.0;
          }
    }
    return f;
  };

  TrainConfig cfg;
  // shortened budget: enough to show the labels are recoverable well above
  // chance while keeping the unit suite fast; the full-budget probe runs in
  // the acceptance suite
  auto recoverable =
      bias_leakage_probe(pool2(train_set), train_set.bias, pool2(test_set), test_set.bias, cfg, 7, 60);
  MESSAGE("recoverable probe: balanced ", recoverable.balanced_acc, " plain ", recoverable.plain_acc);
  CHECK(recoverable.plain_acc > 0.85);
  CHECK(recoverable.balanced_acc > 0.35);

  // pure-noise features: held-out predictions are independent of the truth,
  // so balanced accuracy sits near chance 1/8. It lands slightly above
  // because zero padding leaks cell positions and border cells really do
  // skew toward level 0.
  Rng rng(99);
  auto noise_train = uniform<double>({train_set.size(), 3, 14, 14}, 0.0, 1.0, rng);
  auto noise_test = uniform<double>({test_set.size(), 3, 14, 14}, 0.0, 1.0, rng);
  auto chance = bias_leakage_probe(noise_train, train_set.bias, noise_test, test_set.bias, cfg, 7, 10);
  MESSAGE("noise probe: balanced ", chance.balanced_acc, " plain ", chance.plain_acc);
  CHECK(chance.balanced_acc > 0.09);
  CHECK(chance.balanced_acc < 0.19);

  CHECK_THROWS_AS(bias_leakage_probe(TensorT<double>{}, {}, noise_test, test_set.bias, cfg),
                  std::invalid_argument);
}

TEST_CASE("probe never mutates the feature extractor") {
  ArchSpec arch;
  auto params = init_params<double>(arch, 5);
  auto raw = synth_digits(20, 81);
  auto ds = build_train_set(raw, 0.02, 83);

  std::vector<double> before;
  params.for_each_param([&](const char*, TensorT<double>& t, Net) {
    before.insert(before.end(), t.data.begin(), t.data.end());
  });

  auto feats = extract_features(params, ds);
  TrainConfig cfg;
  (void)bias_leakage_probe(feats, ds.bias, feats, ds.bias, cfg);

  std::vector<double> after;
  params.for_each_param([&](const char*, TensorT<double>& t, Net) {
    after.insert(after.end(), t.data.begin(), t.data.end());
  });
  CHECK(before == after);
}

TEST_CASE("report emission is deterministic") {
  RunReport r;
  r.method = "ours";
  r.sigma2 = 0.02;
  r.seed = 3;
  r.epochs.push_back({1, 2.1, 2.0, -1.9, 0.4, 0.3, 0.45, 0.5});
  r.epochs.push_back({2, 1.7, 1.9, -2.0, 0.6, 0.28, 0.58, 0.4});
  r.final_test_acc = 0.58;
  r.recolored_k = {0};
  r.recolored_confusions.push_back(confusion({0, 0, 1, 2}, {0, 1, 1, 2}, 3));

  const std::string d1 = tmp_dir("r1"), d2 = tmp_dir("r2");
  emit_report(r, d1);
  emit_report(r, d2);
  for (const char* f : {"history.csv", "summary.txt", "confusion_0.csv", "confusion_0.ppm"})
    CHECK(slurp(d1 + "/" + f) == slurp(d2 + "/" + f));

  // fixed header, one row per epoch
  auto hist = slurp(d1 + "/history.csv");
  CHECK(hist.find(kHistoryCsvHeader) == 0);
  CHECK(std::count(hist.begin(), hist.end(), '\n') == 3);

  // confusion CSV rows sum to the per-class sample counts
  auto cm = slurp(d1 + "/confusion_0.csv");
  CHECK(cm.find("2,0,0") != std::string::npos);  // two true-0 samples... row 0: pred 0 once, pred 1 once
  // header-only CSV for an empty report
  RunReport empty;
  empty.method = "none";
  const std::string d3 = tmp_dir("r3");
  emit_report(empty, d3);
  auto empty_hist = slurp(d3 + "/history.csv");
  CHECK(empty_hist == std::string(kHistoryCsvHeader) + "\n");

  fs::remove_all(d1);
  fs::remove_all(d2);
  fs::remove_all(d3);
}

TEST_CASE("confusion csv row sums equal per-class counts") {
  auto m = confusion({0, 0, 1, 2, 2, 1}, {0, 1, 1, 2, 2, 2}, 3);
  // true class 0: 1 sample; class 1: 2; class 2: 3
  std::vector<std::uint64_t> row_sums(3, 0);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 3; ++c) row_sums[r] += m.counts[r * 3 + c];
  CHECK(row_sums == std::vector<std::uint64_t>{1, 2, 3});
}
