#include "unlearn/cli.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <thread>

#include "unlearn/datagen.hpp"
#include "unlearn/eval.hpp"
#include "unlearn/objectives.hpp"
#include "unlearn/params_io.hpp"
#include "unlearn/report.hpp"

#ifndef UNLEARN_BUILD_ID
#define UNLEARN_BUILD_ID "untagged"
#endif

namespace unlearn {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

// ---- raw digit sidecar -------------------------------------------------------
// gen stores the uncolored test digits next to the colored containers so that
// eval can rebuild fixed-mean recolorings of the same images.

constexpr char kRawMagic[8] = {'C', 'R', 'A', 'W', 'D', 'G', '1', '\0'};

void save_raw_digits(const RawDigits& raw, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  os.write(kRawMagic, sizeof(kRawMagic));
  const std::uint64_t n = raw.size();
  os.write(reinterpret_cast<const char*>(&n), sizeof(n));
  os.write(reinterpret_cast<const char*>(raw.images.data()),
           static_cast<std::streamsize>(raw.images.size() * sizeof(float)));
  os.write(reinterpret_cast<const char*>(raw.labels.data()), static_cast<std::streamsize>(n));
  if (!os) throw IoError("write failure on " + path);
}

RawDigits load_raw_digits(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open raw digit file " + path);
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kRawMagic, sizeof(kRawMagic)) != 0)
    throw IoError("bad raw digit magic in " + path);
  std::uint64_t n = 0;
  if (!is.read(reinterpret_cast<char*>(&n), sizeof(n))) throw IoError("truncated raw digit file " + path);
  RawDigits raw;
  raw.images.resize(n * kImg * kImg);
  raw.labels.resize(n);
  if (!is.read(reinterpret_cast<char*>(raw.images.data()),
               static_cast<std::streamsize>(raw.images.size() * sizeof(float))) ||
      !is.read(reinterpret_cast<char*>(raw.labels.data()), static_cast<std::streamsize>(n)))
    throw IoError("truncated raw digit file " + path);
  return raw;
}

// ---- shared helpers ------------------------------------------------------------

struct SourceSpec {
  bool synthetic = true;
  std::size_t n_per_class = 200;
  std::string train_images, train_labels, test_images, test_labels;
};

SourceSpec parse_source(const std::string& s) {
  SourceSpec spec;
  if (s.rfind("synthetic:", 0) == 0) {
    const long long n = std::stoll(s.substr(10));
    if (n < 1) throw CLI::ValidationError("--source", "synthetic image count must be >= 1");
    spec.n_per_class = static_cast<std::size_t>(n);
    return spec;
  }
  if (s.rfind("idx:", 0) == 0) {
    spec.synthetic = false;
    std::string rest = s.substr(4);
    std::vector<std::string> parts;
    std::size_t pos = 0;
    while ((pos = rest.find(',')) != std::string::npos) {
      parts.push_back(rest.substr(0, pos));
      rest.erase(0, pos + 1);
    }
    parts.push_back(rest);
    if (parts.size() != 4)
      throw CLI::ValidationError(
          "--source", "idx source needs train-images,train-labels,test-images,test-labels");
    spec.train_images = parts[0];
    spec.train_labels = parts[1];
    spec.test_images = parts[2];
    spec.test_labels = parts[3];
    return spec;
  }
  throw CLI::ValidationError("--source", "expected synthetic:<n> or idx:<4 paths>");
}

std::pair<RawDigits, RawDigits> load_source(const SourceSpec& spec, std::uint64_t seed) {
  if (spec.synthetic) {
    return {synth_digits(spec.n_per_class, mix_seed(seed, "raw-train")),
            synth_digits(spec.n_per_class, mix_seed(seed, "raw-test"))};
  }
  return {load_idx(spec.train_images, spec.train_labels), load_idx(spec.test_images, spec.test_labels)};
}

std::string default_data_dir(const std::string& given) {
  if (!given.empty()) return given;
  if (const char* env = std::getenv("UNLEARN_DATA_DIR")) return env;
  throw CLI::ValidationError("--data", "no data directory given and UNLEARN_DATA_DIR is unset");
}

std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

void write_manifest(const std::string& dir, const std::string& command,
                    const std::vector<std::pair<std::string, std::string>>& config,
                    const std::vector<std::string>& outputs, double wall_seconds) {
  std::ofstream os(dir + "/manifest.txt");
  if (!os) throw IoError("cannot open " + dir + "/manifest.txt for writing");
  os << "build " << UNLEARN_BUILD_ID << '\n';
  os << "command " << command << '\n';
  for (const auto& [k, v] : config) os << k << ' ' << v << '\n';
  for (const auto& f : outputs) {
    char hex[24];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(hash_file(f)));
    os << "file " << f << ' ' << hex << '\n';
  }
  os << "wall_clock_seconds " << fmt6(wall_seconds) << '\n';
  if (!os) throw IoError("write failure on manifest");
}

// ---- gen ------------------------------------------------------------------------

struct GenArgs {
  double sigma2 = 0.02;
  std::uint64_t seed = 1;
  std::string source = "synthetic:200";
  std::string out;
  std::size_t ppm_samples = 0;
};

int cmd_gen(const GenArgs& a) {
  const auto t0 = Clock::now();
  if (!(a.sigma2 > 0)) throw CLI::ValidationError("--sigma2", "sigma2 must be positive");
  const SourceSpec src = parse_source(a.source);
  auto [raw_train, raw_test] = load_source(src, a.seed);

  auto train_set = build_train_set(raw_train, a.sigma2, mix_seed(a.seed, "train-colors"));
  auto test_set = build_test_set(raw_test, a.sigma2, mix_seed(a.seed, "test-colors"));

  fs::create_directories(a.out);
  const std::string train_path = a.out + "/train.bin";
  const std::string test_path = a.out + "/test.bin";
  const std::string raw_path = a.out + "/raw_test.bin";
  save_dataset(train_set, train_path);
  save_dataset(test_set, test_path);
  save_raw_digits(raw_test, raw_path);

  std::vector<std::string> outputs = {train_path, test_path, raw_path};
  for (std::size_t i = 0; i < a.ppm_samples && i < train_set.size(); ++i) {
    const std::string p = a.out + "/sample_" + std::to_string(i) + ".ppm";
    write_ppm(train_set.image(i), p);
    outputs.push_back(p);
  }

  const double wall = std::chrono::duration<double>(Clock::now() - t0).count();
  write_manifest(a.out, "gen",
                 {{"sigma2", fmt6(a.sigma2)},
                  {"seed", std::to_string(a.seed)},
                  {"source", a.source},
                  {"n_train", std::to_string(train_set.size())},
                  {"n_test", std::to_string(test_set.size())}},
                 outputs, wall);
  std::cout << "gen: wrote " << train_set.size() << " train / " << test_set.size() << " test images to "
            << a.out << '\n';
  return 0;
}

// ---- train ----------------------------------------------------------------------

struct TrainArgs {
  TrainConfig cfg;
  std::string method = "ours";
  std::string data, out, config_file;
  bool lambda_set = false, mu_set = false, grl_set = false;
};

// Plain key=value file; keys mirror the train flags. Values fill only the
// options the command line left untouched, so flags always win.
void apply_config_file(const std::string& path, TrainArgs& a,
                       const std::map<std::string, bool>& flag_given) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config file " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw CLI::ValidationError("--config", "line " + std::to_string(lineno) + " is not key=value");
    const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    auto given = [&](const char* k) {
      auto it = flag_given.find(k);
      return it != flag_given.end() && it->second;
    };
    try {
      if (key == "method") {
        if (!given("method")) a.method = value;
      } else if (key == "lambda") {
        if (!given("lambda")) a.cfg.lambda = std::stod(value);
      } else if (key == "mu") {
        if (!given("mu")) a.cfg.mu = std::stod(value);
      } else if (key == "grl-scale") {
        if (!given("grl-scale")) a.cfg.grl_scale = std::stod(value);
      } else if (key == "lr") {
        if (!given("lr")) a.cfg.lr = std::stod(value);
      } else if (key == "momentum") {
        if (!given("momentum")) a.cfg.momentum = std::stod(value);
      } else if (key == "weight-decay") {
        if (!given("weight-decay")) a.cfg.weight_decay = std::stod(value);
      } else if (key == "batch") {
        if (!given("batch")) a.cfg.batch_size = std::stoul(value);
      } else if (key == "epochs") {
        if (!given("epochs")) a.cfg.epochs = std::stoul(value);
      } else if (key == "seed") {
        if (!given("seed")) a.cfg.seed = std::stoull(value);
      } else if (key == "f64") {
        if (!given("f64")) a.cfg.use_f64 = value == "1" || value == "true";
      } else if (key == "alternating") {
        if (!given("alternating")) a.cfg.alternating = value == "1" || value == "true";
      } else if (key == "data") {
        if (!given("data") && a.data.empty()) a.data = value;
      } else {
        throw CLI::ValidationError("--config", "unknown key '" + key + "'");
      }
    } catch (const std::invalid_argument&) {
      throw CLI::ValidationError("--config", "bad value for '" + key + "'");
    }
  }
}

int cmd_train(const TrainArgs& a) {
  const auto t0 = Clock::now();
  TrainConfig cfg = a.cfg;
  cfg.method = parse_method(a.method);

  const bool ignores_reg = cfg.method == Method::baseline || cfg.method == Method::grayscale;
  if (ignores_reg && (a.lambda_set || a.mu_set || a.grl_set))
    std::cerr << "warning: --lambda/--mu/--grl-scale are ignored for method '" << a.method << "'\n";
  if (cfg.method == Method::grl_only && a.lambda_set)
    std::cerr << "warning: --lambda is ignored for method 'grl-only'\n";

  const std::string data_dir = default_data_dir(a.data);
  auto train_set = load_dataset(data_dir + "/train.bin");
  auto test_set = load_dataset(data_dir + "/test.bin");
  cfg.sigma2 = train_set.sigma2;
  cfg.validate();

  std::cout << "train: method=" << a.method << " lambda=" << cfg.lambda << " mu=" << cfg.mu
            << " grl_scale=" << cfg.grl_scale << " lr=" << cfg.lr << " momentum=" << cfg.momentum
            << " weight_decay=" << cfg.weight_decay << " batch=" << cfg.batch_size
            << " epochs=" << cfg.epochs << " seed=" << cfg.seed << (cfg.use_f64 ? " f64" : " f32")
            << (cfg.alternating ? " alternating" : "") << '\n';

  auto [params, report] = train(train_set, test_set, cfg);

  fs::create_directories(a.out);
  const std::string bin = a.out + "/params.bin";
  const std::string man = a.out + "/params.manifest";
  const std::string hist = a.out + "/history.csv";
  save_params(params, bin, man);
  write_history_csv(report, hist);

  const double wall = std::chrono::duration<double>(Clock::now() - t0).count();
  write_manifest(a.out, "train",
                 {{"method", a.method},
                  {"lambda", fmt6(cfg.lambda)},
                  {"mu", fmt6(cfg.mu)},
                  {"grl_scale", fmt6(cfg.grl_scale)},
                  {"lr", fmt6(cfg.lr)},
                  {"momentum", fmt6(cfg.momentum)},
                  {"weight_decay", fmt6(cfg.weight_decay)},
                  {"batch_size", std::to_string(cfg.batch_size)},
                  {"epochs", std::to_string(cfg.epochs)},
                  {"seed", std::to_string(cfg.seed)},
                  {"sigma2", fmt6(cfg.sigma2)},
                  {"f64", cfg.use_f64 ? "1" : "0"},
                  {"alternating", cfg.alternating ? "1" : "0"},
                  {"data", data_dir}},
                 {bin, man, hist}, wall);

  std::cout << "train: final unbiased-test accuracy " << fmt6(report.final_test_acc) << " after "
            << report.epochs.size() << " epochs -> " << a.out << '\n';
  return 0;
}

// ---- eval -----------------------------------------------------------------------

struct EvalArgs {
  std::string params, data, out;
  std::string recolor;  // "", "all", or a digit class
  bool probe = false;
  bool f64 = false;
};

template <typename T>
int cmd_eval_impl(const EvalArgs& a) {
  const auto t0 = Clock::now();
  const std::string data_dir = default_data_dir(a.data);
  auto params = load_params<T>(a.params + "/params.bin", a.params + "/params.manifest");
  auto test_set = load_dataset(data_dir + "/test.bin");

  RunReport report;
  report.method = "eval";
  report.sigma2 = test_set.sigma2;
  report.seed = test_set.seed;

  std::vector<int> labels(test_set.labels.begin(), test_set.labels.end());
  auto preds = predict_digits(params, test_set);
  const double test_acc = accuracy(preds, labels);
  report.final_test_acc = test_acc;
  std::cout << "eval: test accuracy " << fmt6(test_acc) << " on " << test_set.size() << " images\n";

  report.mi_center_test = mi_digit_vs_center_color(test_set);
  if (fs::exists(data_dir + "/train.bin")) {
    auto train_set = load_dataset(data_dir + "/train.bin");
    report.mi_center_train = mi_digit_vs_center_color(train_set);
  }

  if (!a.recolor.empty()) {
    auto raw_test = load_raw_digits(data_dir + "/raw_test.bin");
    std::vector<int> ks;
    if (a.recolor == "all")
      for (int k = 0; k < int(kClasses); ++k) ks.push_back(k);
    else
      ks.push_back(std::stoi(a.recolor));
    for (int k : ks) {
      auto rec = recolor_fixed(raw_test, k, test_set.sigma2, mix_seed(test_set.seed, "recolor-eval"));
      std::vector<int> rlabels(rec.labels.begin(), rec.labels.end());
      auto rpreds = predict_digits(params, rec);
      auto cm = confusion(rpreds, rlabels, kClasses);
      report.recolored_confusions.push_back(cm);
      report.recolored_k.push_back(k);
      std::size_t to_k = 0;
      for (int p : rpreds) to_k += p == k;
      std::cout << "eval: recolor " << k << " (" << color_table()[k].name << ") accuracy "
                << fmt6(cm.accuracy()) << ", predicted-as-" << k << " fraction "
                << fmt6(double(to_k) / rpreds.size()) << '\n';
    }
  }

  if (a.probe) {
    auto train_set = load_dataset(data_dir + "/train.bin");
    TrainConfig cfg;
    auto train_feats = extract_features(params, train_set);
    auto test_feats = extract_features(params, test_set);
    auto probe = bias_leakage_probe(train_feats, train_set.bias, test_feats, test_set.bias, cfg);
    report.probe_acc = probe.balanced_acc;
    std::cout << "eval: bias-leakage probe balanced accuracy " << fmt6(probe.balanced_acc) << " (plain "
              << fmt6(probe.plain_acc) << ", chance 0.125)\n";
  }

  if (!a.out.empty()) {
    emit_report(report, a.out);
    const double wall = std::chrono::duration<double>(Clock::now() - t0).count();
    std::vector<std::string> outputs = {a.out + "/history.csv", a.out + "/summary.txt"};
    for (int k : report.recolored_k) {
      outputs.push_back(a.out + "/confusion_" + std::to_string(k) + ".csv");
      outputs.push_back(a.out + "/confusion_" + std::to_string(k) + ".ppm");
    }
    write_manifest(a.out, "eval", {{"params", a.params}, {"data", data_dir}}, outputs, wall);
  }
  return 0;
}

// ---- reproduce -------------------------------------------------------------------

struct ReproduceArgs {
  std::string scale = "desk";
  std::string out;
  std::string source;  // empty -> scale default
  std::size_t seeds = 3;
  std::size_t jobs = 1;
  std::size_t epochs = 0;  // 0 -> scale default
  bool f64 = false;
};

struct SweepCell {
  double sigma2;
  Method method;
  std::uint64_t seed;
  double final_acc = 0.0;
};

int cmd_reproduce(const ReproduceArgs& a) {
  const auto t0 = Clock::now();
  if (a.scale != "desk" && a.scale != "full")
    throw CLI::ValidationError("--scale", "expected desk or full");
  if (a.seeds < 1) throw CLI::ValidationError("--seeds", "need at least one seed");

  SourceSpec src;
  if (!a.source.empty()) {
    src = parse_source(a.source);
  } else if (a.scale == "desk") {
    src.synthetic = true;
    src.n_per_class = 200;
  } else {
    throw CLI::ValidationError("--source", "full scale needs --source idx:<4 paths> (MNIST IDX files)");
  }

  const std::vector<double> sigmas = {0.02, 0.03, 0.04, 0.05};
  const std::vector<Method> methods = {Method::baseline, Method::confusion, Method::ours,
                                       Method::grayscale};
  const std::size_t epochs = a.epochs ? a.epochs : (a.scale == "desk" ? 15 : 20);

  // One job per (sigma2, seed): builds the datasets once, trains each method.
  struct Job {
    double sigma2;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (double s : sigmas)
    for (std::size_t seed = 1; seed <= a.seeds; ++seed) jobs.push_back({s, seed});
  std::vector<std::vector<SweepCell>> results(jobs.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t j = next.fetch_add(1);
      if (j >= jobs.size()) return;
      const Job job = jobs[j];
      auto [raw_train, raw_test] = load_source(src, job.seed);
      auto train_set = build_train_set(raw_train, job.sigma2, mix_seed(job.seed, "train-colors"));
      auto test_set = build_test_set(raw_test, job.sigma2, mix_seed(job.seed, "test-colors"));
      for (Method m : methods) {
        TrainConfig cfg;
        cfg.method = m;
        cfg.seed = job.seed;
        cfg.epochs = epochs;
        cfg.use_f64 = a.f64;
        cfg.sigma2 = job.sigma2;
        auto [params, report] = train(train_set, test_set, cfg);
        results[j].push_back({job.sigma2, m, job.seed, report.final_test_acc});
        std::cout << "reproduce: sigma2=" << fmt6(job.sigma2) << " method=" << method_name(m)
                  << " seed=" << job.seed << " acc=" << fmt6(report.final_test_acc) << std::endl;
      }
    }
  };
  const std::size_t nthreads = std::max<std::size_t>(1, a.jobs);
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < nthreads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  fs::create_directories(a.out);
  const std::string runs_path = a.out + "/runs.csv";
  {
    std::ofstream os(runs_path);
    if (!os) throw IoError("cannot open " + runs_path);
    os << "sigma2,method,seed,test_acc\n";
    for (double s : sigmas)
      for (Method m : methods)
        for (std::size_t j = 0; j < jobs.size(); ++j)
          for (const auto& c : results[j])
            if (c.sigma2 == s && c.method == m)
              os << fmt6(c.sigma2) << ',' << method_name(c.method) << ',' << c.seed << ','
                 << fmt6(c.final_acc) << '\n';
  }
  const std::string summary_path = a.out + "/summary.csv";
  {
    std::ofstream os(summary_path);
    if (!os) throw IoError("cannot open " + summary_path);
    os << "sigma2,method,mean_acc,stddev_acc\n";
    for (double s : sigmas) {
      for (Method m : methods) {
        std::vector<double> accs;
        for (std::size_t j = 0; j < jobs.size(); ++j)
          for (const auto& c : results[j])
            if (c.sigma2 == s && c.method == m) accs.push_back(c.final_acc);
        double mean = 0;
        for (double v : accs) mean += v;
        mean /= accs.size();
        double var = 0;
        for (double v : accs) var += (v - mean) * (v - mean);
        const double sd = accs.size() > 1 ? std::sqrt(var / (accs.size() - 1)) : 0.0;
        os << fmt6(s) << ',' << method_name(m) << ',' << fmt6(mean) << ',' << fmt6(sd) << '\n';
      }
    }
  }
  const double wall = std::chrono::duration<double>(Clock::now() - t0).count();
  write_manifest(a.out, "reproduce",
                 {{"scale", a.scale},
                  {"seeds", std::to_string(a.seeds)},
                  {"epochs", std::to_string(epochs)},
                  {"jobs", std::to_string(nthreads)}},
                 {runs_path, summary_path}, wall);
  std::cout << "reproduce: sweep finished in " << fmt6(wall) << " s -> " << a.out << '\n';
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Color-bias planting, minimax debiasing training and diagnostics for digit classifiers"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* cgen = app.add_subcommand("gen", "Generate biased train / unbiased test dataset containers");
  cgen->add_option("--sigma2", gen.sigma2, "color sampling variance")->capture_default_str();
  cgen->add_option("--seed", gen.seed, "generation seed")->capture_default_str();
  cgen->add_option("--source", gen.source, "synthetic:<n-per-class> or idx:<4 comma-separated paths>")
      ->capture_default_str();
  cgen->add_option("--out", gen.out, "output directory")->required();
  cgen->add_option("--ppm", gen.ppm_samples, "export first N train images as PPM");

  TrainArgs tr;
  auto* ctrain = app.add_subcommand("train", "Train a model on a generated dataset");
  ctrain->add_option("--config", tr.config_file, "plain key=value config file; flags override it");
  auto* ometh = ctrain->add_option("--method", tr.method, "baseline|ours|confusion|grl-only|grayscale")
                    ->capture_default_str();
  auto* odata = ctrain->add_option("--data", tr.data, "dataset directory (default $UNLEARN_DATA_DIR)");
  ctrain->add_option("--out", tr.out, "output directory")->required();
  auto* olam = ctrain->add_option("--lambda", tr.cfg.lambda, "entropy/confusion regularizer weight")
                   ->capture_default_str();
  auto* omu = ctrain->add_option("--mu", tr.cfg.mu, "bias prediction loss weight")->capture_default_str();
  auto* ogrl =
      ctrain->add_option("--grl-scale", tr.cfg.grl_scale, "gradient reversal scale")->capture_default_str();
  auto* olr = ctrain->add_option("--lr", tr.cfg.lr, "learning rate")->capture_default_str();
  auto* omom = ctrain->add_option("--momentum", tr.cfg.momentum, "SGD momentum")->capture_default_str();
  auto* owd =
      ctrain->add_option("--weight-decay", tr.cfg.weight_decay, "coupled weight decay")->capture_default_str();
  auto* obatch = ctrain->add_option("--batch", tr.cfg.batch_size, "batch size")->capture_default_str();
  auto* oep = ctrain->add_option("--epochs", tr.cfg.epochs, "training epochs")->capture_default_str();
  auto* oseed = ctrain->add_option("--seed", tr.cfg.seed, "training seed")->capture_default_str();
  auto* of64 = ctrain->add_flag("--f64", tr.cfg.use_f64, "train in float64 instead of float32");
  auto* oalt =
      ctrain->add_flag("--alternating", tr.cfg.alternating, "two-phase adversarial update instead of GRL");

  EvalArgs ev;
  auto* ceval = app.add_subcommand("eval", "Evaluate stored parameters on a dataset");
  ceval->add_option("--params", ev.params, "directory with params.bin/params.manifest")->required();
  ceval->add_option("--data", ev.data, "dataset directory (default $UNLEARN_DATA_DIR)");
  ceval->add_option("--recolor", ev.recolor, "fixed-mean recoloring: a class index or 'all'");
  ceval->add_flag("--probe", ev.probe, "train a fresh bias head on frozen features");
  ceval->add_flag("--f64", ev.f64, "run evaluation in float64");
  ceval->add_option("--out", ev.out, "report output directory");

  ReproduceArgs rep;
  auto* crep = app.add_subcommand("reproduce", "Sweep sigma2 x methods x seeds and emit summary CSVs");
  crep->add_option("--scale", rep.scale, "desk|full")->capture_default_str();
  crep->add_option("--out", rep.out, "output directory")->required();
  crep->add_option("--source", rep.source, "override source (synthetic:<n> or idx:<4 paths>)");
  crep->add_option("--seeds", rep.seeds, "seeds per cell")->capture_default_str();
  crep->add_option("--jobs", rep.jobs, "parallel worker threads")->capture_default_str();
  crep->add_option("--epochs", rep.epochs, "override epochs (0 = scale default)");
  crep->add_flag("--f64", rep.f64, "train in float64");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (cgen->parsed()) return cmd_gen(gen);
    if (ctrain->parsed()) {
      tr.lambda_set = olam->count() > 0;
      tr.mu_set = omu->count() > 0;
      tr.grl_set = ogrl->count() > 0;
      if (!tr.config_file.empty()) {
        apply_config_file(tr.config_file, tr,
                          {{"method", ometh->count() > 0},
                           {"data", odata->count() > 0},
                           {"lambda", tr.lambda_set},
                           {"mu", tr.mu_set},
                           {"grl-scale", tr.grl_set},
                           {"lr", olr->count() > 0},
                           {"momentum", omom->count() > 0},
                           {"weight-decay", owd->count() > 0},
                           {"batch", obatch->count() > 0},
                           {"epochs", oep->count() > 0},
                           {"seed", oseed->count() > 0},
                           {"f64", of64->count() > 0},
                           {"alternating", oalt->count() > 0}});
      }
      return cmd_train(tr);
    }
    if (ceval->parsed()) return ev.f64 ? cmd_eval_impl<double>(ev) : cmd_eval_impl<float>(ev);
    if (crep->parsed()) return cmd_reproduce(rep);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 4;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 2;
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("unlearn");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace unlearn
