#include "neckface/run_config.hpp"

#include <cstdlib>

#include "neckface/error.hpp"
#include "neckface/io_util.hpp"

namespace fs = std::filesystem;

namespace neckface {

namespace {

bool free_form(const std::string& path) { return path == "/detect/hyper"; }

// Keys of `doc` must exist in `ref` with a compatible type.
void check_keys(const nlohmann::json& ref, const nlohmann::json& doc, const std::string& path) {
  if (!doc.is_object()) throw ConfigError("config section '" + path + "' must be an object");
  for (const auto& [key, value] : doc.items()) {
    const std::string sub = path + "/" + key;
    if (!ref.contains(key)) throw ConfigError("unknown config key '" + sub.substr(1) + "'");
    const auto& r = ref.at(key);
    if (free_form(sub)) {
      if (!value.is_object()) throw ConfigError("'" + sub.substr(1) + "' must be an object");
      continue;
    }
    if (r.is_object()) {
      check_keys(r, value, sub);
      continue;
    }
    const bool ok = (r.is_number() && value.is_number()) || (r.is_boolean() && value.is_boolean()) ||
                    (r.is_string() && value.is_string()) || (r.is_array() && value.is_array());
    if (!ok) throw ConfigError("config key '" + sub.substr(1) + "' expects " + std::string(r.type_name()));
  }
}

template <class T>
T get(const nlohmann::json& doc, const char* pointer) {
  try {
    return doc.at(nlohmann::json::json_pointer(pointer)).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config key ") + pointer + ": " + e.what());
  }
}

}  // namespace

nlohmann::json RunConfig::defaults() {
  return {
      {"data_dir", "data"},
      {"pretrain_data_dir", "data-pretrain"},
      {"run_root", "runs"},
      {"run_name", "default"},
      {"seed", 7},
      {"synth",
       {{"participants", 25},
        {"calibration_duration_s", 300.0},
        {"world", "default"},
        {"frames", "none"},
        {"open_features", true}}},
      {"facemap",
       {{"depth", 18},
        {"base_width", 64},
        {"decoder_hidden", 256},
        {"input_downsample", 1},
        {"epochs", 30},
        {"lr_pretrain", 2e-4},
        {"lr_finetune", 1e-4},
        {"batch_size", 64},
        {"cosine_decay", true},
        {"augment", true},
        {"frame_stride", 1},
        {"cross_validate", true}}},
      {"detect",
       {{"dataset", "neck"},
        {"source", "truth"},
        {"arch", "gru_fcn"},
        {"hyper", nlohmann::json::object()},
        {"epochs", 500},
        {"lr", 2e-4},
        {"batch_size", 128},
        {"weight_decay", 0.0},
        {"class_weighting", false},
        {"selection", "test"},
        {"margin_ks", {1, 3}},
        {"n_folds", 5},
        {"split", {0.7, 0.2, 0.1}},
        {"single_fold", false},
        {"budgets", {0.05, 0.15, 0.25, 0.35, 0.45}},
        {"val_fraction", 0.2},
        {"parent", ""},
        {"warm_start", ""}}},
      {"windowing", {{"interval_len", 80}, {"train_stride", 3}, {"eval_stride", 5}, {"tie_label", 1}}},
      {"pca", {{"enabled", false}, {"threshold", 0.95}}},
  };
}

RunConfig::RunConfig() : doc_(defaults()) {}

RunConfig RunConfig::load(const std::optional<fs::path>& file, const std::vector<std::string>& overrides) {
  RunConfig c;
  if (file) {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(read_text(*file));
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(file->string() + ": " + e.what());
    }
    c.merge(doc);
  }
  for (const auto& o : overrides) c.set(o);
  if (const char* root = std::getenv(kRunRootEnv); root != nullptr && *root != '\0') c.doc_["run_root"] = root;
  c.validate();
  return c;
}

void RunConfig::merge(const nlohmann::json& doc) {
  check_keys(defaults(), doc, "");
  doc_.merge_patch(doc);
  // merge_patch merges objects key by key; arrays and hyper are replaced wholesale, which is intended.
}

void RunConfig::set(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  nlohmann::json patch = value;
  std::string rest = key;
  std::vector<std::string> parts;
  for (std::size_t pos; (pos = rest.find('.')) != std::string::npos; rest = rest.substr(pos + 1)) {
    parts.push_back(rest.substr(0, pos));
  }
  parts.push_back(rest);
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = nlohmann::json{{*it, patch}};
  merge(patch);
}

std::string RunConfig::fingerprint() const { return sha256_hex(doc_.dump()); }

void RunConfig::validate() const {
  const auto world = get<std::string>(doc_, "/synth/world");
  if (world != "default" && world != "high_separability") {
    throw ConfigError("synth.world must be default or high_separability");
  }
  const auto dataset = get<std::string>(doc_, "/detect/dataset");
  if (dataset != "neck" && dataset != "open") throw ConfigError("detect.dataset must be neck or open");
  const auto source = get<std::string>(doc_, "/detect/source");
  if (source != "truth" && source != "reconstruction") {
    throw ConfigError("detect.source must be truth or reconstruction");
  }
  const auto sel = get<std::string>(doc_, "/detect/selection");
  if (sel != "test" && sel != "validation") throw ConfigError("detect.selection must be test or validation");
  if (get<std::vector<double>>(doc_, "/detect/split").size() != 3) throw ConfigError("detect.split needs 3 values");
  try {
    (void)arch_from_string(get<std::string>(doc_, "/detect/arch"));
    detector_spec().validate();
    detect_schedule().validate();
    facemap_config().validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
}

fs::path RunConfig::data_dir() const { return get<std::string>(doc_, "/data_dir"); }
fs::path RunConfig::pretrain_data_dir() const { return get<std::string>(doc_, "/pretrain_data_dir"); }
fs::path RunConfig::run_root() const { return get<std::string>(doc_, "/run_root"); }
fs::path RunConfig::run_dir() const { return run_root() / get<std::string>(doc_, "/run_name"); }

CorpusOptions RunConfig::corpus_options() const {
  CorpusOptions o;
  o.n_participants = get<int>(doc_, "/synth/participants");
  o.seed = get<std::uint64_t>(doc_, "/seed");
  o.calibration_duration_s = get<double>(doc_, "/synth/calibration_duration_s");
  if (get<std::string>(doc_, "/synth/world") == "high_separability") o.world = WorldConfig::high_separability();
  return o;
}

FacemapConfig RunConfig::facemap_config() const {
  FacemapConfig c;
  c.depth = get<int>(doc_, "/facemap/depth");
  c.base_width = get<int>(doc_, "/facemap/base_width");
  c.decoder_hidden = get<int>(doc_, "/facemap/decoder_hidden");
  c.input_downsample = get<int>(doc_, "/facemap/input_downsample");
  c.seed = get<std::uint64_t>(doc_, "/seed");
  return c;
}

TrainSchedule RunConfig::facemap_schedule(TrainStage stage) const {
  auto s = TrainSchedule::for_stage(stage);
  s.epochs = get<int>(doc_, "/facemap/epochs");
  s.initial_lr = get<double>(doc_, stage == TrainStage::kPretrain ? "/facemap/lr_pretrain" : "/facemap/lr_finetune");
  s.batch_size = get<int>(doc_, "/facemap/batch_size");
  s.cosine_decay = get<bool>(doc_, "/facemap/cosine_decay");
  s.seed = get<std::uint64_t>(doc_, "/seed");
  return s;
}

DetectorSpec RunConfig::detector_spec() const {
  DetectorSpec s;
  s.arch = arch_from_string(get<std::string>(doc_, "/detect/arch"));
  s.features = get<std::string>(doc_, "/detect/dataset") == "open" ? kOpenFeatureDim : static_cast<int>(kFaceStateDim);
  s.interval_len = get<int>(doc_, "/windowing/interval_len");
  s.hyper = doc_.at("detect").at("hyper");
  s.seed = get<std::uint64_t>(doc_, "/seed");
  return s;
}

DetectSchedule RunConfig::detect_schedule() const {
  DetectSchedule s;
  s.epochs = get<int>(doc_, "/detect/epochs");
  s.lr = get<double>(doc_, "/detect/lr");
  s.batch_size = get<int>(doc_, "/detect/batch_size");
  s.weight_decay = get<double>(doc_, "/detect/weight_decay");
  s.class_weighting = get<bool>(doc_, "/detect/class_weighting");
  s.seed = get<std::uint64_t>(doc_, "/seed");
  return s;
}

WindowingOptions RunConfig::windowing() const {
  WindowingOptions w;
  w.interval_len = get<int>(doc_, "/windowing/interval_len");
  w.train_stride = get<int>(doc_, "/windowing/train_stride");
  w.eval_stride = get<int>(doc_, "/windowing/eval_stride");
  w.tie_label = get<int>(doc_, "/windowing/tie_label");
  return w;
}

ExperimentOptions RunConfig::experiment_options() const {
  ExperimentOptions o;
  o.margin_ks = get<std::vector<int>>(doc_, "/detect/margin_ks");
  o.selection = get<std::string>(doc_, "/detect/selection") == "test" ? EpochSelection::kTest : EpochSelection::kValidation;
  o.single_fold = get<bool>(doc_, "/detect/single_fold");
  o.pca = get<bool>(doc_, "/pca/enabled");
  o.pca_threshold = get<double>(doc_, "/pca/threshold");
  return o;
}

std::array<double, 3> RunConfig::split() const {
  const auto v = get<std::vector<double>>(doc_, "/detect/split");
  return {v[0], v[1], v[2]};
}

std::vector<double> RunConfig::budgets() const { return get<std::vector<double>>(doc_, "/detect/budgets"); }

}  // namespace neckface
