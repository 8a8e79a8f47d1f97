#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "neckface/detectors.hpp"
#include "neckface/facemap.hpp"
#include "neckface/protocols.hpp"
#include "neckface/synthetic_world.hpp"

namespace neckface {

/// Environment variable that replaces `run_root` when set.
inline constexpr const char* kRunRootEnv = "NECKFACE_RUN_ROOT";

/// Declarative run description. Every key has a default; documents may only override
/// existing keys, except below "detect.hyper" which is checked against the chosen arch.
class RunConfig {
 public:
  RunConfig();

  static nlohmann::json defaults();
  /// Defaults, then the optional file, then each "key.path=value" override in order.
  static RunConfig load(const std::optional<std::filesystem::path>& file, const std::vector<std::string>& overrides);

  void merge(const nlohmann::json& doc);
  /// Value is parsed as JSON when possible, else taken as a string.
  void set(const std::string& assignment);

  const nlohmann::json& doc() const noexcept { return doc_; }
  std::string fingerprint() const;

  std::filesystem::path data_dir() const;
  std::filesystem::path pretrain_data_dir() const;
  std::filesystem::path run_root() const;
  std::filesystem::path run_dir() const;

  CorpusOptions corpus_options() const;
  FacemapConfig facemap_config() const;
  TrainSchedule facemap_schedule(TrainStage stage) const;
  DetectorSpec detector_spec() const;
  DetectSchedule detect_schedule() const;
  WindowingOptions windowing() const;
  ExperimentOptions experiment_options() const;
  std::array<double, 3> split() const;
  std::vector<double> budgets() const;

 private:
  void validate() const;
  nlohmann::json doc_;
};

}  // namespace neckface
