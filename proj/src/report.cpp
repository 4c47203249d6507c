#include "unlearn/report.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "unlearn/errors.hpp"

namespace unlearn {

const char* kHistoryCsvHeader =
    "epoch,method,sigma2,seed,loss_c,loss_b,negent,train_acc,train_bias_acc,test_acc,test_bias_balanced";

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

void write_history_csv(const RunReport& report, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path + " for writing");
  os << kHistoryCsvHeader << '\n';
  for (const auto& e : report.epochs) {
    os << e.epoch << ',' << report.method << ',' << fmt(report.sigma2) << ',' << report.seed << ','
       << fmt(e.loss_c) << ',' << fmt(e.loss_b) << ',' << fmt(e.negent) << ',' << fmt(e.train_digit_acc)
       << ',' << fmt(e.train_bias_acc) << ',' << fmt(e.test_acc) << ',' << fmt(e.test_bias_balanced) << '\n';
  }
  if (!os) throw IoError("write failure on " + path);
}

void write_confusion_csv(const ConfusionMatrix& m, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path + " for writing");
  os << "true\\pred";
  for (std::size_t c = 0; c < m.k; ++c) os << ',' << c;
  os << '\n';
  for (std::size_t r = 0; r < m.k; ++r) {
    os << r;
    for (std::size_t c = 0; c < m.k; ++c) os << ',' << m.counts[r * m.k + c];
    os << '\n';
  }
  if (!os) throw IoError("write failure on " + path);
}

void write_confusion_ppm(const ConfusionMatrix& m, const std::string& path, std::size_t cell_px) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  const auto norm = m.row_normalized();
  const std::size_t px = m.k * cell_px;
  os << "P6\n" << px << ' ' << px << "\n255\n";
  for (std::size_t y = 0; y < px; ++y) {
    for (std::size_t x = 0; x < px; ++x) {
      const double v = norm[(y / cell_px) * m.k + (x / cell_px)];
      // white -> blue ramp
      const int r = static_cast<int>(std::lround(255 * (1.0 - v)));
      const int g = static_cast<int>(std::lround(255 * (1.0 - 0.8 * v)));
      os.put(static_cast<char>(r));
      os.put(static_cast<char>(g));
      os.put(static_cast<char>(255));
    }
  }
  if (!os) throw IoError("write failure on " + path);
}

void emit_report(const RunReport& report, const std::string& dir) {
  std::filesystem::create_directories(dir);
  write_history_csv(report, dir + "/history.csv");

  for (std::size_t i = 0; i < report.recolored_confusions.size(); ++i) {
    const int k = i < report.recolored_k.size() ? report.recolored_k[i] : static_cast<int>(i);
    write_confusion_csv(report.recolored_confusions[i], dir + "/confusion_" + std::to_string(k) + ".csv");
    write_confusion_ppm(report.recolored_confusions[i], dir + "/confusion_" + std::to_string(k) + ".ppm");
  }

  std::ofstream os(dir + "/summary.txt");
  if (!os) throw IoError("cannot open " + dir + "/summary.txt for writing");
  os << "method " << report.method << '\n';
  os << "sigma2 " << fmt(report.sigma2) << '\n';
  os << "seed " << report.seed << '\n';
  os << "epochs " << report.epochs.size() << '\n';
  os << "final_test_acc " << fmt(report.final_test_acc) << '\n';
  if (report.probe_acc >= 0) os << "probe_balanced_acc " << fmt(report.probe_acc) << '\n';
  if (report.mi_center_train >= 0) os << "mi_center_train " << fmt(report.mi_center_train) << '\n';
  if (report.mi_center_test >= 0) os << "mi_center_test " << fmt(report.mi_center_test) << '\n';
  for (std::size_t i = 0; i < report.recolored_confusions.size(); ++i) {
    const int k = i < report.recolored_k.size() ? report.recolored_k[i] : static_cast<int>(i);
    os << "recolor_" << k << "_acc " << fmt(report.recolored_confusions[i].accuracy()) << '\n';
  }
  if (!os) throw IoError("write failure on summary.txt");
}

std::uint64_t hash_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot hash missing file " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 15];
  while (is.read(buf, sizeof(buf)) || is.gcount() > 0) {
    const std::streamsize n = is.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
    if (!is) break;
  }
  return h;
}

}  // namespace unlearn
