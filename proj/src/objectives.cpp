#include "unlearn/objectives.hpp"

namespace unlearn {

Method parse_method(const std::string& s) {
  if (s == "baseline") return Method::baseline;
  if (s == "ours") return Method::ours;
  if (s == "confusion") return Method::confusion;
  if (s == "grl-only" || s == "grl_only") return Method::grl_only;
  if (s == "grayscale") return Method::grayscale;
  throw std::invalid_argument("unknown method '" + s +
                              "' (expected baseline|ours|confusion|grl-only|grayscale)");
}

const char* method_name(Method m) {
  switch (m) {
    case Method::baseline: return "baseline";
    case Method::ours: return "ours";
    case Method::confusion: return "confusion";
    case Method::grl_only: return "grl-only";
    case Method::grayscale: return "grayscale";
  }
  return "?";
}

std::pair<ParamSetT<double>, RunReport> train(const BiasedDataset& train_set, const BiasedDataset& test_set,
                                              const TrainConfig& cfg) {
  if (cfg.use_f64) return train_impl<double>(train_set, test_set, cfg);
  auto [params32, report] = train_impl<float>(train_set, test_set, cfg);
  return {params32.cast<double>(), std::move(report)};
}

}  // namespace unlearn
