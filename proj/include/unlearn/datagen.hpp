#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "unlearn/errors.hpp"
#include "unlearn/rng.hpp"

namespace unlearn {

constexpr std::size_t kImg = 28;        // digit canvas, kImg x kImg
constexpr std::size_t kBiasGrid = 7;    // 4x4 subsampling of the canvas
constexpr std::size_t kBiasLevels = 8;  // quantization levels per channel
constexpr std::size_t kClasses = 10;

// One mean color per digit class, components normalized into [0,1].
struct ColorEntry {
  const char* name;
  std::array<double, 3> rgb;
};

const std::array<ColorEntry, kClasses>& color_table();

// Uncolored source digits, pixels in [0,1].
struct RawDigits {
  std::vector<float> images;  // [N, 28, 28]
  std::vector<std::uint8_t> labels;
  std::size_t size() const { return labels.size(); }
};

enum class Split : std::uint8_t { train = 0, test = 1, recolored = 2 };

// Colorized digits with their per-position quantized color labels.
struct BiasedDataset {
  std::vector<float> images;         // [N, 3, 28, 28] in [0,1]
  std::vector<std::uint8_t> labels;  // digit class per image
  std::vector<std::uint8_t> bias;    // [N, 3, 7, 7] levels in [0,8)
  Split split = Split::train;
  std::uint8_t recolor_k = 0xFF;  // mean-color class for Split::recolored
  std::uint64_t seed = 0;
  double sigma2 = 0.0;
  // Diagnostic only: index of the mean color drawn per image in test builds.
  // Not part of the serialized container.
  std::vector<std::uint8_t> mean_index;

  std::size_t size() const { return labels.size(); }
  const float* image(std::size_t i) const { return images.data() + i * 3 * kImg * kImg; }
};

// IDX (big-endian) ingestion; magic 0x00000803 for images, 0x00000801 for labels.
RawDigits load_idx(const std::string& images_path, const std::string& labels_path);

// Procedurally drawn digit glyphs with pose/thickness/brightness jitter;
// offline stand-in when IDX files are absent. Exactly n_per_class per class.
RawDigits synth_digits(std::size_t n_per_class, std::uint64_t seed);

// Per channel: draw Normal(mean, sigma2) until the value lies strictly in
// (0,1). Rejection, not clipping. Throws after max_iters draws on a channel.
std::array<double, 3> sample_color(const std::array<double, 3>& mean_rgb, double sigma2, Rng& rng,
                                   int max_iters = 10000);

// channel c = gray * rgb[c]: the digit takes the color, background stays black.
void colorize(const float* gray, const std::array<double, 3>& rgb, float* out);

// 4x4 average-pool each channel to 7x7, then level = min(floor(v*8), 7).
std::array<std::uint8_t, 3 * kBiasGrid * kBiasGrid> bias_labels_of(const float* image);

// Train colors are sampled around the class mean; test means are drawn
// uniformly among the ten entries, independent of the digit.
BiasedDataset build_train_set(const RawDigits& raw, double sigma2, std::uint64_t seed);
BiasedDataset build_test_set(const RawDigits& raw, double sigma2, std::uint64_t seed);

// Every image colored around color_table()[k] regardless of its digit.
BiasedDataset recolor_fixed(const RawDigits& raw, int k, double sigma2, std::uint64_t seed);

// Luminance 0.299R + 0.587G + 0.114B replicated to all three channels.
void to_grayscale_image(float* image);
BiasedDataset to_grayscale(const BiasedDataset& ds);

// Binary container with seed/sigma2/split metadata; round trips bit-exactly.
void save_dataset(const BiasedDataset& ds, const std::string& path);
BiasedDataset load_dataset(const std::string& path);

// P6 export of one [3,28,28] image for visual inspection.
void write_ppm(const float* image, const std::string& path);

}  // namespace unlearn
