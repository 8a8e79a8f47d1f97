#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "neckface/reaction_dataset.hpp"

namespace neckface {

enum class Arch {
  kGruFcn,
  kGmlp,
  kInceptionTime,
  kMiniRocket,
  kMlDnn,
  kFrameResnet34,
  kLstm,
  kBiLstm,
  kTransformer,
};

std::string to_string(Arch arch);
/// Throws InvalidArgument for names outside the zoo.
Arch arch_from_string(const std::string& name);
const std::vector<Arch>& all_archs();
bool is_image_arch(Arch arch) noexcept;

/// Defaults for every hyperparameter an architecture reads.
nlohmann::json default_hyperparameters(Arch arch);

struct DetectorSpec {
  Arch arch = Arch::kGruFcn;
  int features = 55;       // F for sequence input
  int interval_len = 80;   // IL for sequence input
  nlohmann::json hyper = nlohmann::json::object();  // overrides of the defaults
  std::uint64_t seed = 0;

  /// Throws InvalidArgument on unknown keys or nonpositive shapes.
  void validate() const;
  /// Defaults with overrides applied.
  nlohmann::json resolved_hyper() const;
  /// Expected per-sample tensor shape: {F, IL} or {3, S, S}.
  std::vector<int64_t> sample_shape() const;

  nlohmann::json to_json() const;
  static DetectorSpec from_json(const nlohmann::json& j);
};

/// Model-ready samples: x is [N, F, IL] for sequences or [N, 3, S, S] for frames.
struct SampleSet {
  torch::Tensor x;
  std::vector<int> labels;
  std::vector<WindowOrigin> origins;

  std::size_t size() const noexcept { return labels.size(); }
  bool empty() const noexcept { return labels.empty(); }
  SampleSet subset(std::span<const std::size_t> indices) const;
  /// Hash of contents, folded into fingerprints.
  std::string digest() const;
};

/// Windows with label -1 are dropped.
SampleSet samples_from_windows(std::span<const LabeledWindow> windows);
SampleSet concat(std::span<const SampleSet> parts);

struct DetectSchedule {
  int epochs = 500;
  double lr = 2e-4;
  int batch_size = 128;
  double weight_decay = 0.0;
  bool class_weighting = false;  // inverse-frequency loss weights
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static DetectSchedule from_json(const nlohmann::json& j);
};

struct DetectorEpoch {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_accuracy = 0.0;
  double val_f1 = 0.0;
};

struct DetectorHistory {
  std::vector<DetectorEpoch> epochs;
  int best_epoch = 0;
  nlohmann::json to_json() const;
};

struct Prediction {
  std::vector<int> labels;
  std::vector<std::array<double, 2>> probabilities;
};

class Detector {
 public:
  virtual ~Detector() = default;

  const DetectorSpec& spec() const noexcept { return spec_; }
  bool trained() const noexcept { return trained_; }
  const std::string& fingerprint() const noexcept { return fingerprint_; }
  const std::string& parent_fingerprint() const noexcept { return parent_fingerprint_; }

  /// [B, 2] class probabilities, inference mode. Throws InvalidArgument on shape mismatch.
  virtual torch::Tensor probabilities(const torch::Tensor& x) const = 0;
  virtual int64_t parameter_count() const = 0;
  virtual std::unique_ptr<Detector> clone() const = 0;
  virtual void save(const std::filesystem::path& path) const = 0;

  /// Every learned value outside the final classification layer and any input adapter.
  virtual std::vector<std::pair<std::string, torch::Tensor>> frozen_tensors() const = 0;
  /// The final classification layer.
  virtual std::vector<std::pair<std::string, torch::Tensor>> head_tensors() const = 0;

  // Used by train_detector and finetune_last_layer.
  virtual DetectorHistory fit(const SampleSet& train, const SampleSet& val, const DetectSchedule& schedule) = 0;
  /// Freezes everything but the head; inserts an input adapter when `features` differs.
  virtual void prepare_finetune(const SampleSet& train) = 0;
  virtual DetectorHistory fit_head(const SampleSet& train, const SampleSet& val,
                                   const DetectSchedule& schedule) = 0;

  void set_lineage(bool trained, std::string fingerprint, std::string parent);
  /// Throws InvalidArgument unless x is [N, ...sample_shape].
  void check_input(const torch::Tensor& x) const;

 protected:
  explicit Detector(DetectorSpec spec);
  DetectorSpec spec_;
  bool trained_ = false;
  std::string fingerprint_;
  std::string parent_fingerprint_;
};

/// Throws InvalidArgument for unknown archs or invalid specs.
std::unique_ptr<Detector> build_detector(const DetectorSpec& spec);

struct DetectorTrainResult {
  std::unique_ptr<Detector> detector;
  DetectorHistory history;
};

/// Neural archs run schedule.epochs epochs and keep the best validation-accuracy epoch;
/// minirocket fits once. Throws DegenerateLabels when the training set has one class.
/// An empty validation set falls back to the training set for epoch selection.
DetectorTrainResult train_detector(const Detector& detector, const SampleSet& train, const SampleSet& val,
                                   const DetectSchedule& schedule);

Prediction predict(const Detector& detector, const SampleSet& samples, int batch_size = 256);
Prediction predict(const Detector& detector, const torch::Tensor& x, int batch_size = 256);

/// Copy of the parent with only the classification layer (plus a fresh input adapter when the
/// feature count changed) trainable. Throws InvalidArgument for an untrained parent.
DetectorTrainResult finetune_last_layer(const Detector& parent, const SampleSet& train, const SampleSet& val,
                                        const DetectSchedule& schedule);

std::unique_ptr<Detector> load_detector(const std::filesystem::path& path);

}  // namespace neckface
