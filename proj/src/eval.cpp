#include "unlearn/eval.hpp"

#include <cmath>

namespace unlearn {

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (auto c : counts) t += c;
  return t;
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t t = 0;
  for (std::size_t i = 0; i < k; ++i) t += counts[i * k + i];
  return t;
}

double ConfusionMatrix::accuracy() const {
  const std::uint64_t t = total();
  return t ? static_cast<double>(trace()) / static_cast<double>(t) : 0.0;
}

std::vector<double> ConfusionMatrix::row_normalized() const {
  std::vector<double> out(counts.size(), 0.0);
  for (std::size_t r = 0; r < k; ++r) {
    std::uint64_t row = 0;
    for (std::size_t c = 0; c < k; ++c) row += counts[r * k + c];
    if (row == 0) continue;
    for (std::size_t c = 0; c < k; ++c) out[r * k + c] = static_cast<double>(counts[r * k + c]) / row;
  }
  return out;
}

double accuracy(const std::vector<int>& preds, const std::vector<int>& labels) {
  if (preds.size() != labels.size())
    throw std::invalid_argument("accuracy: " + std::to_string(preds.size()) + " predictions vs " +
                                std::to_string(labels.size()) + " labels");
  if (preds.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) hits += preds[i] == labels[i];
  return static_cast<double>(hits) / preds.size();
}

ConfusionMatrix confusion(const std::vector<int>& preds, const std::vector<int>& labels, std::size_t k) {
  if (preds.size() != labels.size()) throw std::invalid_argument("confusion: length mismatch");
  ConfusionMatrix m;
  m.k = k;
  m.counts.assign(k * k, 0);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const int p = preds[i], t = labels[i];
    if (p < 0 || t < 0 || static_cast<std::size_t>(p) >= k || static_cast<std::size_t>(t) >= k)
      throw std::invalid_argument("confusion: class out of range at index " + std::to_string(i));
    m.counts[static_cast<std::size_t>(t) * k + static_cast<std::size_t>(p)]++;
  }
  return m;
}

double discrete_mi(const std::vector<std::uint64_t>& joint, std::size_t ka, std::size_t kb) {
  if (joint.size() != ka * kb) throw std::invalid_argument("discrete_mi: table size mismatch");
  std::uint64_t total = 0;
  for (auto c : joint) total += c;
  if (total == 0) throw std::invalid_argument("discrete_mi: empty table");
  std::vector<double> pa(ka, 0.0), pb(kb, 0.0);
  const double n = static_cast<double>(total);
  for (std::size_t a = 0; a < ka; ++a)
    for (std::size_t b = 0; b < kb; ++b) {
      const double p = joint[a * kb + b] / n;
      pa[a] += p;
      pb[b] += p;
    }
  double mi = 0.0;
  for (std::size_t a = 0; a < ka; ++a)
    for (std::size_t b = 0; b < kb; ++b) {
      if (joint[a * kb + b] == 0) continue;  // 0 ln 0 = 0
      const double p = joint[a * kb + b] / n;
      mi += p * std::log(p / (pa[a] * pb[b]));
    }
  return mi;
}

namespace {

double mi_at_cell(const BiasedDataset& ds, std::size_t gy, std::size_t gx) {
  const std::size_t bias_sz = 3 * kBiasGrid * kBiasGrid;
  double total = 0.0;
  for (std::size_t c = 0; c < 3; ++c) {
    std::vector<std::uint64_t> joint(kClasses * kBiasLevels, 0);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const int level = ds.bias[i * bias_sz + (c * kBiasGrid + gy) * kBiasGrid + gx];
      joint[ds.labels[i] * kBiasLevels + level]++;
    }
    total += discrete_mi(joint, kClasses, kBiasLevels);
  }
  return total;
}

}  // namespace

double mi_digit_vs_center_color(const BiasedDataset& ds) { return mi_at_cell(ds, 3, 3); }

double mi_digit_vs_grid_color(const BiasedDataset& ds) {
  double acc = 0.0;
  for (std::size_t gy = 0; gy < kBiasGrid; ++gy)
    for (std::size_t gx = 0; gx < kBiasGrid; ++gx) acc += mi_at_cell(ds, gy, gx);
  return acc / (kBiasGrid * kBiasGrid);
}

}  // namespace unlearn
