#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "unlearn/cli.hpp"
#include "unlearn/datagen.hpp"
#include "unlearn/report.hpp"

using namespace unlearn;
namespace fs = std::filesystem;

namespace {

std::string tmp_dir(const char* name) {
  auto p = fs::temp_directory_path() / (std::string("unlearn_cli_") + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

struct CaptureCerr {
  std::ostringstream captured;
  std::streambuf* old;
  CaptureCerr() : old(std::cerr.rdbuf(captured.rdbuf())) {}
  ~CaptureCerr() { std::cerr.rdbuf(old); }
};

}  // namespace

TEST_CASE("gen writes deterministic containers") {
  const std::string d1 = tmp_dir("gen1"), d2 = tmp_dir("gen2");
  CHECK(run_cli({"gen", "--sigma2", "0.02", "--seed", "1", "--source", "synthetic:6", "--out", d1}) == 0);
  CHECK(run_cli({"gen", "--sigma2", "0.02", "--seed", "1", "--source", "synthetic:6", "--out", d2}) == 0);

  for (const char* f : {"/train.bin", "/test.bin", "/raw_test.bin"}) {
    CHECK(fs::exists(d1 + f));
    CHECK(hash_file(d1 + f) == hash_file(d2 + f));
  }
  auto ds = load_dataset(d1 + "/train.bin");
  CHECK(ds.size() == 60);
  CHECK(ds.sigma2 == 0.02);
  CHECK(ds.split == Split::train);

  // different seed -> different bytes
  const std::string d3 = tmp_dir("gen3");
  CHECK(run_cli({"gen", "--sigma2", "0.02", "--seed", "2", "--source", "synthetic:6", "--out", d3}) == 0);
  CHECK(hash_file(d1 + "/train.bin") != hash_file(d3 + "/train.bin"));

  // manifest lists every output with a content hash
  std::ifstream man(d1 + "/manifest.txt");
  std::string text((std::istreambuf_iterator<char>(man)), {});
  CHECK(text.find("file " + d1 + "/train.bin") != std::string::npos);
  CHECK(text.find("sigma2") != std::string::npos);

  fs::remove_all(d1);
  fs::remove_all(d2);
  fs::remove_all(d3);
}

TEST_CASE("gen validation and usage errors") {
  const std::string d = tmp_dir("genbad");
  CHECK(run_cli({"gen", "--sigma2", "0", "--out", d}) == 2);
  CHECK(run_cli({"gen", "--sigma2", "-0.1", "--out", d}) == 2);
  CHECK(run_cli({"gen"}) == 2);                                  // missing --out
  CHECK(run_cli({"gen", "--source", "bogus:3", "--out", d}) == 2);
  CHECK(run_cli({"gen", "--source", "idx:a,b", "--out", d}) == 2);
  CHECK(run_cli({"nonsense"}) == 2);
  CHECK(run_cli({"--help"}) == 0);
  // idx source with missing files is an IO failure
  CHECK(run_cli({"gen", "--source", "idx:a,b,c,d", "--out", d}) == 3);
  fs::remove_all(d);
}

TEST_CASE("train then eval round trip") {
  const std::string data = tmp_dir("data"), out1 = tmp_dir("run1"), out2 = tmp_dir("run2");
  REQUIRE(run_cli({"gen", "--sigma2", "0.02", "--seed", "5", "--source", "synthetic:8", "--out", data}) == 0);

  std::vector<std::string> targs = {"train", "--method", "ours",  "--data",   data,
                                    "--out", out1,       "--epochs", "1",     "--batch", "16",
                                    "--seed", "3"};
  CHECK(run_cli(targs) == 0);
  CHECK(fs::exists(out1 + "/params.bin"));
  CHECK(fs::exists(out1 + "/params.manifest"));
  CHECK(fs::exists(out1 + "/history.csv"));

  // identical flags -> identical metrics history
  targs[6] = out2;
  CHECK(run_cli(targs) == 0);
  CHECK(hash_file(out1 + "/history.csv") == hash_file(out2 + "/history.csv"));
  CHECK(hash_file(out1 + "/params.bin") == hash_file(out2 + "/params.bin"));

  std::ifstream hist(out1 + "/history.csv");
  std::string header;
  std::getline(hist, header);
  CHECK(header == kHistoryCsvHeader);

  const std::string evout = tmp_dir("evout");
  CHECK(run_cli({"eval", "--params", out1, "--data", data, "--recolor", "3", "--probe", "--out", evout}) ==
        0);
  CHECK(fs::exists(evout + "/summary.txt"));
  CHECK(fs::exists(evout + "/confusion_3.csv"));
  CHECK(fs::exists(evout + "/confusion_3.ppm"));

  // eval without explicit --data picks up UNLEARN_DATA_DIR
  setenv("UNLEARN_DATA_DIR", data.c_str(), 1);
  CHECK(run_cli({"eval", "--params", out1}) == 0);
  unsetenv("UNLEARN_DATA_DIR");
  CHECK(run_cli({"eval", "--params", out1}) == 2);  // no data dir at all

  CHECK(run_cli({"eval", "--params", tmp_dir("nothing"), "--data", data}) == 3);

  fs::remove_all(data);
  fs::remove_all(out1);
  fs::remove_all(out2);
  fs::remove_all(evout);
}

TEST_CASE("train warns when flags are ignored and rejects bad methods") {
  const std::string data = tmp_dir("warn_data"), out = tmp_dir("warn_out");
  REQUIRE(run_cli({"gen", "--seed", "2", "--source", "synthetic:4", "--out", data}) == 0);

  {
    CaptureCerr cap;
    CHECK(run_cli({"train", "--method", "baseline", "--lambda", "0.1", "--data", data, "--out", out,
                   "--epochs", "1", "--batch", "16"}) == 0);
    CHECK(cap.captured.str().find("ignored") != std::string::npos);
  }
  {
    CaptureCerr cap;
    CHECK(run_cli({"train", "--method", "ours", "--data", data, "--out", out, "--epochs", "1", "--batch",
                   "16"}) == 0);
    CHECK(cap.captured.str().find("ignored") == std::string::npos);
  }

  CHECK(run_cli({"train", "--method", "nope", "--data", data, "--out", out}) == 2);
  CHECK(run_cli({"train", "--method", "ours", "--data", tmp_dir("void"), "--out", out}) == 3);
  CHECK(run_cli({"train", "--method", "ours", "--data", data, "--out", out, "--batch", "1"}) == 2);

  fs::remove_all(data);
  fs::remove_all(out);
}

TEST_CASE("config file supplies defaults that flags override") {
  const std::string data = tmp_dir("cfg_data"), out = tmp_dir("cfg_out");
  REQUIRE(run_cli({"gen", "--seed", "4", "--source", "synthetic:4", "--out", data}) == 0);

  const std::string cfg_path = data + "/train.cfg";
  {
    std::ofstream os(cfg_path);
    os << "epochs=1\nbatch=16\nmethod=baseline\n";
  }
  CHECK(run_cli({"train", "--config", cfg_path, "--data", data, "--out", out}) == 0);
  {
    std::ifstream man(out + "/manifest.txt");
    std::string text((std::istreambuf_iterator<char>(man)), {});
    CHECK(text.find("method baseline") != std::string::npos);
    CHECK(text.find("epochs 1") != std::string::npos);
  }
  // flag wins over the file
  CHECK(run_cli({"train", "--config", cfg_path, "--method", "grl-only", "--data", data, "--out", out}) == 0);
  {
    std::ifstream man(out + "/manifest.txt");
    std::string text((std::istreambuf_iterator<char>(man)), {});
    CHECK(text.find("method grl-only") != std::string::npos);
  }

  fs::remove_all(data);
  fs::remove_all(out);
}

TEST_CASE("numeric failures exit with code 4") {
  const std::string data = tmp_dir("nan_data"), out = tmp_dir("nan_out");
  REQUIRE(run_cli({"gen", "--seed", "6", "--source", "synthetic:4", "--out", data}) == 0);
  // poison one pixel of the stored training set
  auto ds = load_dataset(data + "/train.bin");
  ds.images[17] = std::numeric_limits<float>::quiet_NaN();
  save_dataset(ds, data + "/train.bin");

  CHECK(run_cli({"train", "--method", "baseline", "--data", data, "--out", out, "--epochs", "1", "--batch",
                 "16"}) == 4);

  fs::remove_all(data);
  fs::remove_all(out);
}

TEST_CASE("reproduce validates its flags") {
  CHECK(run_cli({"reproduce", "--scale", "bogus", "--out", tmp_dir("rep")}) == 2);
  CHECK(run_cli({"reproduce", "--scale", "full", "--out", tmp_dir("rep")}) == 2);  // full needs idx source
  CHECK(run_cli({"reproduce", "--scale", "desk", "--seeds", "0", "--out", tmp_dir("rep")}) == 2);
}
