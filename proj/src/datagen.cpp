#include "unlearn/datagen.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace unlearn {

static_assert(std::endian::native == std::endian::little,
              "dataset container assumes a little-endian host");

const std::array<ColorEntry, kClasses>& color_table() {
  static const std::array<ColorEntry, kClasses> table = {{
      {"crimson", {220 / 255.0, 20 / 255.0, 60 / 255.0}},
      {"teal", {0 / 255.0, 128 / 255.0, 128 / 255.0}},
      {"lemon", {253 / 255.0, 233 / 255.0, 16 / 255.0}},
      {"bondi blue", {0 / 255.0, 149 / 255.0, 182 / 255.0}},
      {"carrot orange", {237 / 255.0, 145 / 255.0, 33 / 255.0}},
      {"strong violet", {145 / 255.0, 30 / 255.0, 188 / 255.0}},
      {"cyan", {70 / 255.0, 240 / 255.0, 240 / 255.0}},
      {"your pink", {250 / 255.0, 197 / 255.0, 187 / 255.0}},
      {"lime", {210 / 255.0, 245 / 255.0, 60 / 255.0}},
      {"maroon", {128 / 255.0, 0 / 255.0, 0 / 255.0}},
  }};
  return table;
}

// ---- IDX ingestion ---------------------------------------------------------

namespace {

std::uint32_t read_be32(std::istream& in, const char* what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw IoError(std::string("truncated IDX header: ") + what);
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
         std::uint32_t(b[3]);
}

}  // namespace

RawDigits load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream imgs(images_path, std::ios::binary);
  if (!imgs) throw IoError("cannot open IDX image file " + images_path);
  std::ifstream labs(labels_path, std::ios::binary);
  if (!labs) throw IoError("cannot open IDX label file " + labels_path);

  const std::uint32_t img_magic = read_be32(imgs, "image magic");
  if (img_magic != 0x00000803)
    throw IoError("bad IDX image magic in " + images_path + " (got " + std::to_string(img_magic) + ")");
  const std::uint32_t n = read_be32(imgs, "image count");
  const std::uint32_t rows = read_be32(imgs, "rows");
  const std::uint32_t cols = read_be32(imgs, "cols");
  if (rows != kImg || cols != kImg)
    throw IoError("unsupported IDX image size " + std::to_string(rows) + "x" + std::to_string(cols));

  const std::uint32_t lab_magic = read_be32(labs, "label magic");
  if (lab_magic != 0x00000801)
    throw IoError("bad IDX label magic in " + labels_path + " (got " + std::to_string(lab_magic) + ")");
  const std::uint32_t nl = read_be32(labs, "label count");
  if (n != nl)
    throw IoError("IDX count mismatch: " + std::to_string(n) + " images vs " + std::to_string(nl) +
                  " labels");

  RawDigits out;
  out.images.resize(std::size_t(n) * kImg * kImg);
  out.labels.resize(n);
  std::vector<unsigned char> buf(std::size_t(n) * kImg * kImg);
  if (!imgs.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
    throw IoError("truncated IDX image payload in " + images_path);
  for (std::size_t i = 0; i < buf.size(); ++i) out.images[i] = buf[i] / 255.0f;
  if (!labs.read(reinterpret_cast<char*>(out.labels.data()), static_cast<std::streamsize>(n)))
    throw IoError("truncated IDX label payload in " + labels_path);
  for (std::uint8_t l : out.labels)
    if (l >= kClasses) throw IoError("IDX label out of range: " + std::to_string(int(l)));
  return out;
}

// ---- synthetic digits --------------------------------------------------------
// Seven-segment style glyphs rendered as soft capsules, with per-image pose,
// thickness and brightness jitter. Digits 1 and 7 get centered variants so
// every class except 0 puts ink near the canvas center.

namespace {

struct Seg {
  double x0, y0, x1, y1;
};

std::vector<Seg> glyph_segments(int digit) {
  const double L = 8.5, R = 19.5, T = 5.0, M = 14.0, B = 23.0;
  const Seg A{L, T, R, T}, Bs{R, T, R, M}, C{R, M, R, B}, D{L, B, R, B}, E{L, M, L, B}, F{L, T, L, M},
      G{L, M, R, M};
  switch (digit) {
    case 0: return {A, Bs, C, D, E, F};
    case 1: return {{14.0, T, 14.0, B}, {14.0, T, 11.0, T + 3.5}};
    case 2: return {A, Bs, G, E, D};
    case 3: return {A, Bs, G, C, D};
    case 4: return {F, G, Bs, C};
    case 5: return {A, F, G, C, D};
    case 6: return {A, F, G, E, D, C};
    case 7: return {A, {R, T, 11.5, B}};
    case 8: return {A, Bs, C, D, E, F, G};
    case 9: return {A, Bs, C, D, F, G};
    default: throw std::invalid_argument("glyph_segments: digit out of range");
  }
}

double dist_to_segment(double px, double py, const Seg& s) {
  const double vx = s.x1 - s.x0, vy = s.y1 - s.y0;
  const double wx = px - s.x0, wy = py - s.y0;
  const double vv = vx * vx + vy * vy;
  double t = vv > 0 ? (wx * vx + wy * vy) / vv : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = wx - t * vx, dy = wy - t * vy;
  return std::sqrt(dx * dx + dy * dy);
}

void render_glyph(int digit, Rng& rng, float* out) {
  auto segs = glyph_segments(digit);
  const double s = rng.uniform(0.90, 1.06);
  const double theta = rng.uniform(-0.06, 0.06);
  const double dx = rng.uniform(-1.2, 1.2), dy = rng.uniform(-1.2, 1.2);
  const double thick = rng.uniform(1.8, 2.6);
  const double amp = rng.uniform(0.82, 1.0);
  const double ct = std::cos(theta), st = std::sin(theta), cx = 14.0, cy = 14.0;

  for (auto& seg : segs) {
    auto xform = [&](double& x, double& y) {
      const double rx = x - cx, ry = y - cy;
      x = cx + s * (ct * rx - st * ry) + dx + rng.uniform(-0.4, 0.4);
      y = cy + s * (st * rx + ct * ry) + dy + rng.uniform(-0.4, 0.4);
    };
    xform(seg.x0, seg.y0);
    xform(seg.x1, seg.y1);
  }

  for (std::size_t py = 0; py < kImg; ++py) {
    for (std::size_t px = 0; px < kImg; ++px) {
      double d = 1e9;
      for (const auto& seg : segs) d = std::min(d, dist_to_segment(px + 0.5, py + 0.5, seg));
      const double v = std::clamp(thick / 2 + 0.5 - d, 0.0, 1.0);
      out[py * kImg + px] = static_cast<float>(amp * v);
    }
  }
}

}  // namespace

RawDigits synth_digits(std::size_t n_per_class, std::uint64_t seed) {
  if (n_per_class < 1) throw std::invalid_argument("synth_digits: n_per_class must be >= 1");
  const std::size_t n = n_per_class * kClasses;
  RawDigits out;
  out.images.resize(n * kImg * kImg);
  out.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int digit = static_cast<int>(i % kClasses);
    Rng rng(mix_seed(mix_seed(seed, "synth"), i));
    render_glyph(digit, rng, out.images.data() + i * kImg * kImg);
    out.labels[i] = static_cast<std::uint8_t>(digit);
  }
  return out;
}

// ---- colorization -------------------------------------------------------------

std::array<double, 3> sample_color(const std::array<double, 3>& mean_rgb, double sigma2, Rng& rng,
                                   int max_iters) {
  if (!(sigma2 > 0)) throw std::invalid_argument("sample_color: sigma2 must be positive");
  const double sigma = std::sqrt(sigma2);
  std::array<double, 3> out{};
  for (int c = 0; c < 3; ++c) {
    int iters = 0;
    for (;;) {
      const double v = rng.normal(mean_rgb[c], sigma);
      if (v > 0.0 && v < 1.0) {
        out[c] = v;
        break;
      }
      if (++iters >= max_iters)
        throw std::runtime_error("sample_color: rejection cap of " + std::to_string(max_iters) +
                                 " draws exhausted (mean " + std::to_string(mean_rgb[c]) + ")");
    }
  }
  return out;
}

void colorize(const float* gray, const std::array<double, 3>& rgb, float* out) {
  for (int c = 0; c < 3; ++c)
    for (std::size_t p = 0; p < kImg * kImg; ++p)
      out[c * kImg * kImg + p] = static_cast<float>(gray[p] * rgb[c]);
}

std::array<std::uint8_t, 3 * kBiasGrid * kBiasGrid> bias_labels_of(const float* image) {
  std::array<std::uint8_t, 3 * kBiasGrid * kBiasGrid> out{};
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t gy = 0; gy < kBiasGrid; ++gy) {
      for (std::size_t gx = 0; gx < kBiasGrid; ++gx) {
        double acc = 0.0;
        for (std::size_t y = 0; y < 4; ++y)
          for (std::size_t x = 0; x < 4; ++x)
            acc += image[c * kImg * kImg + (gy * 4 + y) * kImg + (gx * 4 + x)];
        const double v = acc / 16.0;
        int level = static_cast<int>(v * kBiasLevels);
        if (level > int(kBiasLevels) - 1) level = kBiasLevels - 1;
        out[(c * kBiasGrid + gy) * kBiasGrid + gx] = static_cast<std::uint8_t>(level);
      }
    }
  }
  return out;
}

namespace {

enum class ColorRule { by_label, uniform, fixed };

BiasedDataset build_colored(const RawDigits& raw, double sigma2, std::uint64_t seed, ColorRule rule,
                            int fixed_k, const char* salt) {
  if (!(sigma2 > 0)) throw std::invalid_argument("dataset build: sigma2 must be positive");
  const std::size_t n = raw.size();
  if (n == 0) throw std::invalid_argument("dataset build: empty source digits");
  BiasedDataset ds;
  ds.images.resize(n * 3 * kImg * kImg);
  ds.labels = raw.labels;
  ds.bias.resize(n * 3 * kBiasGrid * kBiasGrid);
  ds.seed = seed;
  ds.sigma2 = sigma2;
  if (rule == ColorRule::uniform) ds.mean_index.resize(n);

  const auto& table = color_table();
  const std::uint64_t stream_base = mix_seed(seed, salt);
  for (std::size_t i = 0; i < n; ++i) {
    // Independent per-image streams keep generation order-independent.
    Rng rng(mix_seed(stream_base, i));
    std::size_t k;
    switch (rule) {
      case ColorRule::by_label: k = raw.labels[i]; break;
      case ColorRule::uniform:
        k = static_cast<std::size_t>(rng.uniform_index(kClasses));
        ds.mean_index[i] = static_cast<std::uint8_t>(k);
        break;
      default: k = static_cast<std::size_t>(fixed_k); break;
    }
    const auto rgb = sample_color(table[k].rgb, sigma2, rng);
    float* img = ds.images.data() + i * 3 * kImg * kImg;
    colorize(raw.images.data() + i * kImg * kImg, rgb, img);
    const auto levels = bias_labels_of(img);
    std::memcpy(ds.bias.data() + i * levels.size(), levels.data(), levels.size());
  }
  return ds;
}

}  // namespace

BiasedDataset build_train_set(const RawDigits& raw, double sigma2, std::uint64_t seed) {
  auto ds = build_colored(raw, sigma2, seed, ColorRule::by_label, -1, "train");
  ds.split = Split::train;
  return ds;
}

BiasedDataset build_test_set(const RawDigits& raw, double sigma2, std::uint64_t seed) {
  auto ds = build_colored(raw, sigma2, seed, ColorRule::uniform, -1, "test");
  ds.split = Split::test;
  return ds;
}

BiasedDataset recolor_fixed(const RawDigits& raw, int k, double sigma2, std::uint64_t seed) {
  if (k < 0 || k >= int(kClasses)) throw std::invalid_argument("recolor_fixed: class index out of range");
  auto ds = build_colored(raw, sigma2, seed, ColorRule::fixed, k, "recolor");
  ds.split = Split::recolored;
  ds.recolor_k = static_cast<std::uint8_t>(k);
  return ds;
}

void to_grayscale_image(float* image) {
  for (std::size_t p = 0; p < kImg * kImg; ++p) {
    const float lum = 0.299f * image[p] + 0.587f * image[kImg * kImg + p] + 0.114f * image[2 * kImg * kImg + p];
    image[p] = lum;
    image[kImg * kImg + p] = lum;
    image[2 * kImg * kImg + p] = lum;
  }
}

BiasedDataset to_grayscale(const BiasedDataset& ds) {
  BiasedDataset out = ds;
  for (std::size_t i = 0; i < out.size(); ++i) {
    float* img = out.images.data() + i * 3 * kImg * kImg;
    to_grayscale_image(img);
    const auto levels = bias_labels_of(img);
    std::memcpy(out.bias.data() + i * levels.size(), levels.data(), levels.size());
  }
  return out;
}

// ---- container -------------------------------------------------------------
// magic[8] | u32 version | u8 split | u8 recolor_k | u16 reserved |
// u64 seed | f64 sigma2 | u64 N | f32 images | u8 labels | u8 bias levels

namespace {
constexpr char kMagic[8] = {'C', 'B', 'I', 'A', 'S', 'D', 'S', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, const char* what) {
  T v;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T)))
    throw IoError(std::string("truncated dataset container: ") + what);
  return v;
}
}  // namespace

void save_dataset(const BiasedDataset& ds, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  os.write(kMagic, sizeof(kMagic));
  write_pod(os, kVersion);
  write_pod(os, static_cast<std::uint8_t>(ds.split));
  write_pod(os, ds.recolor_k);
  write_pod(os, std::uint16_t{0});
  write_pod(os, ds.seed);
  write_pod(os, ds.sigma2);
  write_pod(os, static_cast<std::uint64_t>(ds.size()));
  os.write(reinterpret_cast<const char*>(ds.images.data()),
           static_cast<std::streamsize>(ds.images.size() * sizeof(float)));
  os.write(reinterpret_cast<const char*>(ds.labels.data()), static_cast<std::streamsize>(ds.labels.size()));
  os.write(reinterpret_cast<const char*>(ds.bias.data()), static_cast<std::streamsize>(ds.bias.size()));
  if (!os) throw IoError("write failure on " + path);
}

BiasedDataset load_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open dataset " + path);
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw IoError("bad dataset magic in " + path);
  const auto version = read_pod<std::uint32_t>(is, "version");
  if (version != kVersion)
    throw IoError("unsupported dataset version " + std::to_string(version) + " in " + path);
  BiasedDataset ds;
  const auto split = read_pod<std::uint8_t>(is, "split");
  if (split > 2) throw IoError("invalid split tag in " + path);
  ds.split = static_cast<Split>(split);
  ds.recolor_k = read_pod<std::uint8_t>(is, "recolor_k");
  (void)read_pod<std::uint16_t>(is, "reserved");
  ds.seed = read_pod<std::uint64_t>(is, "seed");
  ds.sigma2 = read_pod<double>(is, "sigma2");
  const auto n = read_pod<std::uint64_t>(is, "count");
  ds.images.resize(n * 3 * kImg * kImg);
  ds.labels.resize(n);
  ds.bias.resize(n * 3 * kBiasGrid * kBiasGrid);
  if (!is.read(reinterpret_cast<char*>(ds.images.data()),
               static_cast<std::streamsize>(ds.images.size() * sizeof(float))))
    throw IoError("truncated dataset image block in " + path);
  if (!is.read(reinterpret_cast<char*>(ds.labels.data()), static_cast<std::streamsize>(n)))
    throw IoError("truncated dataset label block in " + path);
  if (!is.read(reinterpret_cast<char*>(ds.bias.data()), static_cast<std::streamsize>(ds.bias.size())))
    throw IoError("truncated dataset bias block in " + path);
  return ds;
}

void write_ppm(const float* image, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  os << "P6\n" << kImg << ' ' << kImg << "\n255\n";
  for (std::size_t p = 0; p < kImg * kImg; ++p) {
    for (int c = 0; c < 3; ++c) {
      const float v = std::clamp(image[c * kImg * kImg + p], 0.0f, 1.0f);
      os.put(static_cast<char>(std::lround(v * 255.0f)));
    }
  }
  if (!os) throw IoError("write failure on " + path);
}

}  // namespace unlearn
