#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "neckface/face_state.hpp"
#include "neckface/imaging.hpp"
#include "neckface/nn/resnet.hpp"

namespace neckface {

struct FacemapConfig {
  int depth = 18;          // 18 or 34
  int base_width = 64;     // stem channels; stages use 1x, 2x, 4x, 8x
  int decoder_hidden = 256;
  int input_downsample = 1;  // box-filter factor applied to the 640x240 tiled frame
  int output_dim = kFaceStateDim;
  std::uint64_t seed = 0;

  int input_width() const noexcept { return kTiledWidth / input_downsample; }
  int input_height() const noexcept { return kTiledHeight / input_downsample; }
  /// Throws InvalidArgument.
  void validate() const;

  nlohmann::json to_json() const;
  static FacemapConfig from_json(const nlohmann::json& j);
};

/// Residual encoder plus a two-layer decoder. The decoder works in normalized units;
/// a fixed per-output scale buffer maps them to blendshape units and degrees.
struct FacemapNetImpl : torch::nn::Module {
  explicit FacemapNetImpl(const FacemapConfig& config);
  /// x: [B, 1, H, W] in [0, 1]. Returns [B, 55] normalized outputs.
  torch::Tensor forward_normalized(torch::Tensor x);
  /// Same, in physical units.
  torch::Tensor forward(torch::Tensor x);

  nn::ResNetBackbone backbone{nullptr};
  torch::nn::Sequential decoder{nullptr};
  torch::Tensor output_scale;
};
TORCH_MODULE(FacemapNet);

/// [B, 1, H, W] float tensor from tiled frames, box-downsampled by `downsample`.
torch::Tensor frames_to_tensor(std::span<const TiledFrame> frames, int downsample);
/// [B, 55] in physical units.
torch::Tensor states_to_tensor(std::span<const FaceState> states);

class FacemapModel {
 public:
  explicit FacemapModel(const FacemapConfig& config);

  const FacemapConfig& config() const noexcept { return config_; }
  FacemapNet& net() noexcept { return net_; }
  const FacemapNet& net() const noexcept { return net_; }

  /// "init", "pretrain" or "finetune".
  const std::string& stage() const noexcept { return stage_; }
  const std::string& fingerprint() const noexcept { return fingerprint_; }
  const std::string& parent_fingerprint() const noexcept { return parent_fingerprint_; }
  bool trained() const noexcept { return stage_ != "init"; }

  int64_t parameter_count() const;

  /// Eval-mode forward in physical units, no clamping.
  torch::Tensor infer(const torch::Tensor& batch) const;
  /// Clamped predictions, batched internally.
  std::vector<FaceState> predict(std::span<const TiledFrame> frames, int batch_size = 32) const;

  FacemapModel clone() const;
  void save(const std::filesystem::path& path) const;
  static FacemapModel load(const std::filesystem::path& path);

  // Set by training.
  void set_lineage(std::string stage, std::string fingerprint, std::string parent);

 private:
  FacemapConfig config_;
  mutable FacemapNet net_{nullptr};
  std::string stage_ = "init";
  std::string fingerprint_;
  std::string parent_fingerprint_;
};

/// Throws InvalidArgument when output_dim != 55 or the config is otherwise invalid.
FacemapModel build_facemap(const FacemapConfig& config);

enum class TrainStage { kPretrain, kFinetune };
std::string to_string(TrainStage stage);
TrainStage train_stage_from_string(const std::string& name);

struct TrainSchedule {
  TrainStage stage = TrainStage::kPretrain;
  int epochs = 30;
  double initial_lr = 2e-4;
  int batch_size = 64;
  bool cosine_decay = true;
  std::uint64_t seed = 0;

  /// 30 epochs at 2e-4 for pretraining, 30 epochs at 1e-4 for fine-tuning.
  static TrainSchedule for_stage(TrainStage stage);
  void validate() const;
  nlohmann::json to_json() const;
};

struct FacemapSample {
  TiledFrame frame;
  FaceState truth;
};

/// Materialized samples or a loader that produces sample i on demand.
class FacemapDataset {
 public:
  using Loader = std::function<FacemapSample(std::size_t)>;

  FacemapDataset() = default;
  explicit FacemapDataset(std::vector<FacemapSample> samples);
  FacemapDataset(std::size_t size, Loader loader, std::string identity);

  std::size_t size() const noexcept { return size_; }
  bool empty() const noexcept { return size_ == 0; }
  FacemapSample get(std::size_t index) const;
  /// Stable description of the contents, folded into model fingerprints.
  const std::string& identity() const noexcept { return identity_; }

 private:
  std::vector<FacemapSample> samples_;
  Loader loader_;
  std::size_t size_ = 0;
  std::string identity_;
};

struct FacemapEpoch {
  int epoch = 0;  // 1-based
  double lr = 0.0;
  double train_loss = 0.0;  // normalized-unit MAE averaged over batches
  double val_mae_f = 0.0;
  double val_mae_o = 0.0;
};

struct FacemapHistory {
  double baseline_mae_f = 0.0;  // before the first update
  double baseline_mae_o = 0.0;
  std::vector<FacemapEpoch> epochs;
  int best_epoch = 0;
  nlohmann::json to_json() const;
};

struct FacemapTrainResult {
  FacemapModel model;
  FacemapHistory history;
};

struct FacemapEvalResult {
  double mae_f = 0.0;
  double mae_o = 0.0;
};

FacemapEvalResult evaluate_facemap(const FacemapModel& model, const FacemapDataset& data,
                                   int batch_size = 32);

using EpochCallback = std::function<void(const FacemapEpoch&)>;

/// Runs exactly schedule.epochs epochs; returns the weights of the epoch with the lowest
/// validation MAE_f. When `validation` is null the training set is evaluated instead.
/// The augment policy must be disabled or belong to the schedule's stage.
FacemapTrainResult train_facemap(const FacemapModel& model, const FacemapDataset& train,
                                 const FacemapDataset* validation, const TrainSchedule& schedule,
                                 const AugmentPolicy& policy, const EpochCallback& on_epoch = {});

struct FrameRef {
  std::size_t participant = 0;
  std::size_t frame = 0;
  bool operator==(const FrameRef&) const = default;
};

/// Cuts every participant's stream into k contiguous parts; fold i is the union of part i.
/// Part boundaries are floor(i * n / k).
std::vector<std::vector<FrameRef>> temporal_kfold(std::span<const std::size_t> frames_per_participant,
                                                  int k);
std::vector<std::vector<FrameRef>> temporal_5fold(std::span<const std::size_t> frames_per_participant);

struct FacemapFoldResult {
  int fold = 0;
  FacemapHistory history;
  FacemapEvalResult test;
};

struct FacemapCvResult {
  std::vector<FacemapFoldResult> folds;
  FacemapModel final_model;  // retrained on all folds
  FacemapHistory final_history;
};

/// Train on 4 folds and test on the fifth, five times, then retrain on everything.
/// `make_dataset` turns a list of frame references into a dataset.
FacemapCvResult cross_validate_facemap(
    const FacemapModel& init, std::span<const std::size_t> frames_per_participant,
    const std::function<FacemapDataset(const std::vector<FrameRef>&)>& make_dataset,
    const TrainSchedule& schedule, const AugmentPolicy& policy);

struct Reconstruction {
  std::vector<double> timestamps;
  std::vector<FaceState> states;
};

/// Preprocesses each pair without augmentation and predicts a clamped FaceState.
Reconstruction reconstruct(const FacemapModel& model, std::span<const FramePair> stream,
                           int batch_size = 32);
/// Streaming form: `pair_at(i)` produces pair i of `count`.
Reconstruction reconstruct(const FacemapModel& model, std::size_t count,
                           const std::function<FramePair(std::size_t)>& pair_at,
                           int batch_size = 32);

}  // namespace neckface
