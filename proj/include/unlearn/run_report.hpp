#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace unlearn {

// Aggregate of one optimization step; the three loss fields are the summands
// of the full objective.
struct StepMetrics {
  double loss_c = 0.0;        // classification cross-entropy
  double loss_b = 0.0;        // bias prediction cross-entropy (0 when inactive)
  double negent = 0.0;        // negative conditional entropy (0 when inactive)
  double digit_acc = 0.0;     // batch digit accuracy
  double bias_acc = 0.0;      // batch per-position bias accuracy (plain)
};

struct EpochRow {
  int epoch = 0;  // 1-based, contiguous
  double loss_c = 0.0, loss_b = 0.0, negent = 0.0;
  double train_digit_acc = 0.0, train_bias_acc = 0.0;
  double test_acc = 0.0;            // unbiased-test digit accuracy
  double test_bias_balanced = 0.0;  // held-out bias accuracy of h, balanced over levels
};

// K x K integer counts, rows = true class, cols = predicted class.
struct ConfusionMatrix {
  std::size_t k = 0;
  std::vector<std::uint64_t> counts;  // row-major

  std::uint64_t total() const;
  std::uint64_t trace() const;
  double accuracy() const;
  std::vector<double> row_normalized() const;
};

struct RunReport {
  std::string method;
  double sigma2 = 0.0;
  std::uint64_t seed = 0;
  std::vector<EpochRow> epochs;
  double final_test_acc = 0.0;

  // Optional diagnostics, filled by the eval stage.
  std::vector<ConfusionMatrix> recolored_confusions;  // one per mean color
  std::vector<int> recolored_k;                       // aligned with the above
  double probe_acc = -1.0;                            // bias-leakage probe, <0 when absent
  double mi_center_train = -1.0, mi_center_test = -1.0;  // <0 when absent
};

}  // namespace unlearn
