#include "neckface/facemap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include "neckface/checkpoint.hpp"
#include "neckface/error.hpp"
#include "neckface/io_util.hpp"
#include "neckface/metrics.hpp"
#include "neckface/rng.hpp"

namespace neckface {

namespace {

constexpr const char* kCheckpointKind = "facemap";

void copy_state(torch::nn::Module& dst, const torch::nn::Module& src) {
  torch::NoGradGuard guard;
  auto dst_params = dst.named_parameters();
  for (const auto& p : src.named_parameters()) dst_params[p.key()].copy_(p.value());
  auto dst_buffers = dst.named_buffers();
  for (const auto& b : src.named_buffers()) dst_buffers[b.key()].copy_(b.value());
}

std::vector<torch::Tensor> snapshot(const torch::nn::Module& m) {
  std::vector<torch::Tensor> out;
  for (const auto& p : m.parameters()) out.push_back(p.detach().clone());
  for (const auto& b : m.buffers()) out.push_back(b.detach().clone());
  return out;
}

void restore(torch::nn::Module& m, const std::vector<torch::Tensor>& saved) {
  torch::NoGradGuard guard;
  std::size_t i = 0;
  for (auto& p : m.parameters()) p.copy_(saved[i++]);
  for (auto& b : m.buffers()) b.copy_(saved[i++]);
}

}  // namespace

void FacemapConfig::validate() const {
  if (output_dim != kFaceStateDim) {
    throw InvalidArgument("facemap output dimension must be " + std::to_string(kFaceStateDim) +
                          ", got " + std::to_string(output_dim));
  }
  (void)nn::resnet_stage_blocks(depth);
  if (base_width < 1) throw InvalidArgument("facemap base_width must be positive");
  if (decoder_hidden < 1) throw InvalidArgument("facemap decoder_hidden must be positive");
  if (input_downsample < 1 || kTiledWidth % input_downsample != 0 ||
      kTiledHeight % input_downsample != 0) {
    throw InvalidArgument("input_downsample must divide 640 and 240, got " +
                          std::to_string(input_downsample));
  }
  if (input_height() < 16) throw InvalidArgument("input_downsample leaves fewer than 16 rows");
}

nlohmann::json FacemapConfig::to_json() const {
  return {{"depth", depth},
          {"base_width", base_width},
          {"decoder_hidden", decoder_hidden},
          {"input_downsample", input_downsample},
          {"output_dim", output_dim},
          {"seed", seed}};
}

FacemapConfig FacemapConfig::from_json(const nlohmann::json& j) {
  FacemapConfig c;
  c.depth = j.value("depth", c.depth);
  c.base_width = j.value("base_width", c.base_width);
  c.decoder_hidden = j.value("decoder_hidden", c.decoder_hidden);
  c.input_downsample = j.value("input_downsample", c.input_downsample);
  c.output_dim = j.value("output_dim", c.output_dim);
  c.seed = j.value("seed", c.seed);
  return c;
}

FacemapNetImpl::FacemapNetImpl(const FacemapConfig& config) {
  backbone = register_module("backbone", nn::ResNetBackbone(1, config.depth, config.base_width));
  decoder = register_module(
      "decoder", torch::nn::Sequential(torch::nn::Linear(backbone->feature_dim(), config.decoder_hidden),
                                       torch::nn::ReLU(),
                                       torch::nn::Linear(config.decoder_hidden, config.output_dim)));
  std::vector<float> scale(static_cast<std::size_t>(config.output_dim),
                           static_cast<float>(kBlendshapeMax));
  for (int i = kNumBlendshapes; i < config.output_dim; ++i) {
    scale[static_cast<std::size_t>(i)] = static_cast<float>(kHeadAngleMax);
  }
  output_scale = register_buffer("output_scale", torch::tensor(scale));
}

torch::Tensor FacemapNetImpl::forward_normalized(torch::Tensor x) {
  return decoder->forward(backbone->forward(x));
}

torch::Tensor FacemapNetImpl::forward(torch::Tensor x) { return forward_normalized(x) * output_scale; }

torch::Tensor frames_to_tensor(std::span<const TiledFrame> frames, int downsample) {
  if (frames.empty()) throw InvalidArgument("frames_to_tensor needs at least one frame");
  const int w = kTiledWidth / downsample;
  const int h = kTiledHeight / downsample;
  auto out = torch::empty({static_cast<int64_t>(frames.size()), 1, h, w});
  float* dst = out.data_ptr<float>();
  for (const auto& f : frames) {
    if (f.image.width() != kTiledWidth || f.image.height() != kTiledHeight || f.image.channels() != 1) {
      throw InvalidArgument("tiled frame must be 640x240 single-channel");
    }
    const Raster small = downsample == 1 ? f.image : downsample_area(f.image, downsample);
    dst = std::copy(small.data().begin(), small.data().end(), dst);
  }
  return out;
}

torch::Tensor states_to_tensor(std::span<const FaceState> states) {
  auto out = torch::empty({static_cast<int64_t>(states.size()), kFaceStateDim});
  float* dst = out.data_ptr<float>();
  for (const auto& s : states) {
    for (double v : s.to_array()) *dst++ = static_cast<float>(v);
  }
  return out;
}

FacemapModel::FacemapModel(const FacemapConfig& config) : config_(config) {
  config_.validate();
  torch::manual_seed(config_.seed);
  net_ = FacemapNet(config_);
  fingerprint_ = sha256_hex("facemap-init:" + config_.to_json().dump());
}

int64_t FacemapModel::parameter_count() const { return nn::parameter_count(*net_); }

torch::Tensor FacemapModel::infer(const torch::Tensor& batch) const {
  torch::NoGradGuard guard;
  // Left in eval mode; training switches back per epoch.
  net_->eval();
  return net_->forward(batch);
}

std::vector<FaceState> FacemapModel::predict(std::span<const TiledFrame> frames, int batch_size) const {
  std::vector<FaceState> out;
  out.reserve(frames.size());
  const std::size_t step = static_cast<std::size_t>(std::max(1, batch_size));
  for (std::size_t start = 0; start < frames.size(); start += step) {
    const auto chunk = frames.subspan(start, std::min(step, frames.size() - start));
    auto y = infer(frames_to_tensor(chunk, config_.input_downsample)).to(torch::kDouble).contiguous();
    const double* p = y.data_ptr<double>();
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      out.push_back(FaceState::from_values(std::span<const double>(p + i * kFaceStateDim, kFaceStateDim))
                        .clamped());
    }
  }
  return out;
}

FacemapModel FacemapModel::clone() const {
  FacemapModel copy(config_);
  copy_state(*copy.net_, *net_);
  copy.stage_ = stage_;
  copy.fingerprint_ = fingerprint_;
  copy.parent_fingerprint_ = parent_fingerprint_;
  return copy;
}

void FacemapModel::set_lineage(std::string stage, std::string fingerprint, std::string parent) {
  stage_ = std::move(stage);
  fingerprint_ = std::move(fingerprint);
  parent_fingerprint_ = std::move(parent);
}

void FacemapModel::save(const std::filesystem::path& path) const {
  nlohmann::json meta = {{"config", config_.to_json()},
                         {"stage", stage_},
                         {"fingerprint", fingerprint_},
                         {"parent_fingerprint", parent_fingerprint_},
                         {"blendshape_registry", kBlendshapeRegistryVersion}};
  save_checkpoint(path, kCheckpointKind, meta, [this](torch::serialize::OutputArchive& archive) {
    torch::serialize::OutputArchive net_archive;
    net_->save(net_archive);
    archive.write("net", net_archive);
  });
}

FacemapModel FacemapModel::load(const std::filesystem::path& path) {
  auto reader = open_checkpoint(path, kCheckpointKind);
  const auto& meta = reader.meta;
  if (meta.value("blendshape_registry", "") != kBlendshapeRegistryVersion) {
    throw DataError("checkpoint " + path.string() + " uses blendshape registry '" +
                    meta.value("blendshape_registry", "") + "'");
  }
  FacemapModel model(FacemapConfig::from_json(meta.at("config")));
  try {
    torch::serialize::InputArchive net_archive;
    reader.archive.read("net", net_archive);
    model.net_->load(net_archive);
  } catch (const c10::Error& e) {
    throw DataError("checkpoint " + path.string() + " weights do not match its config: " +
                    e.what_without_backtrace());
  }
  model.set_lineage(meta.at("stage"), meta.at("fingerprint"), meta.value("parent_fingerprint", ""));
  return model;
}

FacemapModel build_facemap(const FacemapConfig& config) { return FacemapModel(config); }

std::string to_string(TrainStage stage) {
  return stage == TrainStage::kPretrain ? "pretrain" : "finetune";
}

TrainStage train_stage_from_string(const std::string& name) {
  if (name == "pretrain") return TrainStage::kPretrain;
  if (name == "finetune") return TrainStage::kFinetune;
  throw InvalidArgument("unknown training stage '" + name + "'");
}

TrainSchedule TrainSchedule::for_stage(TrainStage stage) {
  TrainSchedule s;
  s.stage = stage;
  s.epochs = 30;
  s.initial_lr = stage == TrainStage::kPretrain ? 2e-4 : 1e-4;
  return s;
}

void TrainSchedule::validate() const {
  if (epochs < 1) throw InvalidArgument("schedule needs at least one epoch");
  if (!(initial_lr > 0.0) || !std::isfinite(initial_lr)) throw InvalidArgument("learning rate must be positive");
  if (batch_size < 1) throw InvalidArgument("batch size must be positive");
}

nlohmann::json TrainSchedule::to_json() const {
  return {{"stage", to_string(stage)},     {"epochs", epochs},
          {"initial_lr", initial_lr},      {"batch_size", batch_size},
          {"cosine_decay", cosine_decay},  {"seed", seed}};
}

FacemapDataset::FacemapDataset(std::vector<FacemapSample> samples)
    : samples_(std::move(samples)), size_(samples_.size()) {
  // Identity from the truth values; frames are a deterministic function of them in every
  // producer we have, and hashing 600 KB per frame would dominate small runs.
  std::string buf;
  buf.reserve(size_ * kFaceStateDim * sizeof(double));
  for (const auto& s : samples_) {
    for (double v : s.truth.to_array()) buf.append(reinterpret_cast<const char*>(&v), sizeof v);
  }
  identity_ = "mem:" + std::to_string(size_) + ":" + sha256_hex(buf);
}

FacemapDataset::FacemapDataset(std::size_t size, Loader loader, std::string identity)
    : loader_(std::move(loader)), size_(size), identity_(std::move(identity)) {
  if (size_ > 0 && !loader_) throw InvalidArgument("dataset loader is empty");
}

FacemapSample FacemapDataset::get(std::size_t index) const {
  if (index >= size_) throw InvalidArgument("dataset index out of range");
  return loader_ ? loader_(index) : samples_[index];
}

nlohmann::json FacemapHistory::to_json() const {
  nlohmann::json epochs_json = nlohmann::json::array();
  for (const auto& e : epochs) {
    epochs_json.push_back({{"epoch", e.epoch},
                           {"lr", e.lr},
                           {"train_loss", e.train_loss},
                           {"val_mae_f", e.val_mae_f},
                           {"val_mae_o", e.val_mae_o}});
  }
  return {{"baseline_mae_f", baseline_mae_f},
          {"baseline_mae_o", baseline_mae_o},
          {"best_epoch", best_epoch},
          {"epochs", epochs_json}};
}

FacemapEvalResult evaluate_facemap(const FacemapModel& model, const FacemapDataset& data, int batch_size) {
  if (data.empty()) throw InvalidArgument("cannot evaluate on an empty dataset");
  std::vector<FaceState> predicted;
  std::vector<FaceState> truth;
  predicted.reserve(data.size());
  truth.reserve(data.size());
  const std::size_t step = static_cast<std::size_t>(std::max(1, batch_size));
  std::vector<TiledFrame> frames;
  for (std::size_t start = 0; start < data.size(); start += step) {
    frames.clear();
    for (std::size_t i = start; i < std::min(data.size(), start + step); ++i) {
      auto s = data.get(i);
      frames.push_back(std::move(s.frame));
      truth.push_back(s.truth);
    }
    auto y = model.infer(frames_to_tensor(frames, model.config().input_downsample))
                 .to(torch::kDouble)
                 .contiguous();
    const double* p = y.data_ptr<double>();
    // Raw outputs: the metric should see what the network actually emits.
    for (std::size_t i = 0; i < frames.size(); ++i) {
      FaceState st;
      for (std::size_t b = 0; b < kNumBlendshapes; ++b) st.blendshapes[b] = p[i * kFaceStateDim + b];
      st.yaw = p[i * kFaceStateDim + 52];
      st.pitch = p[i * kFaceStateDim + 53];
      st.roll = p[i * kFaceStateDim + 54];
      predicted.push_back(st);
    }
  }
  const auto err = mae_face(predicted, truth);
  return {err.mae_face, err.mae_orientation};
}

FacemapTrainResult train_facemap(const FacemapModel& model, const FacemapDataset& train,
                                 const FacemapDataset* validation, const TrainSchedule& schedule,
                                 const AugmentPolicy& policy, const EpochCallback& on_epoch) {
  if (train.empty()) throw InvalidArgument("training dataset is empty");
  schedule.validate();
  const AugmentStage expected =
      schedule.stage == TrainStage::kPretrain ? AugmentStage::kPretrain : AugmentStage::kFinetune;
  if (policy.stage != AugmentStage::kNone && policy.stage != expected) {
    throw InvalidArgument("augment policy stage '" + to_string(policy.stage) +
                          "' does not match schedule stage '" + to_string(schedule.stage) + "'");
  }
  const FacemapDataset& val = validation != nullptr && !validation->empty() ? *validation : train;

  FacemapModel work = model.clone();
  auto& net = work.net();
  torch::manual_seed(derive_seed(schedule.seed, "facemap-torch"));

  FacemapHistory history;
  {
    const auto base = evaluate_facemap(work, val);
    history.baseline_mae_f = base.mae_f;
    history.baseline_mae_o = base.mae_o;
  }
  double best_score = std::numeric_limits<double>::infinity();
  std::vector<torch::Tensor> best_state = snapshot(*net);

  torch::optim::Adam optimizer(net->parameters(), torch::optim::AdamOptions(schedule.initial_lr));
  const int ds = work.config().input_downsample;
  const std::size_t n = train.size();
  const std::size_t batch = static_cast<std::size_t>(schedule.batch_size);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 0; epoch < schedule.epochs; ++epoch) {
    const double lr = schedule.cosine_decay
                          ? 0.5 * schedule.initial_lr *
                                (1.0 + std::cos(std::numbers::pi * epoch / schedule.epochs))
                          : schedule.initial_lr;
    for (auto& group : optimizer.param_groups()) {
      static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
    }
    Rng order_rng(derive_seed(schedule.seed, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), order_rng);

    net->train();
    double loss_sum = 0.0;
    int batches = 0;
    std::vector<TiledFrame> frames;
    std::vector<FaceState> truths;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(n, start + batch);
      // A lone sample would put batch norm in a degenerate state.
      if (end - start < 2 && n >= 2) break;
      frames.clear();
      truths.clear();
      for (std::size_t k = start; k < end; ++k) {
        auto s = train.get(order[k]);
        if (policy.stage != AugmentStage::kNone) {
          Rng aug_rng(derive_seed(derive_seed(schedule.seed, "augment"),
                                  static_cast<std::uint64_t>(epoch) * n + order[k]));
          s.frame = augment(s.frame, policy, aug_rng);
        }
        frames.push_back(std::move(s.frame));
        truths.push_back(s.truth);
      }
      auto x = frames_to_tensor(frames, ds);
      auto y = states_to_tensor(truths) / net->output_scale;
      optimizer.zero_grad();
      auto loss = torch::l1_loss(net->forward_normalized(x), y);
      if (!std::isfinite(loss.item<double>())) {
        throw TrainingError("facemap loss became non-finite in epoch " + std::to_string(epoch + 1));
      }
      loss.backward();
      optimizer.step();
      loss_sum += loss.item<double>();
      ++batches;
    }

    const auto ev = evaluate_facemap(work, val);
    FacemapEpoch record{epoch + 1, lr, batches > 0 ? loss_sum / batches : 0.0, ev.mae_f, ev.mae_o};
    history.epochs.push_back(record);
    if (ev.mae_f < best_score) {
      best_score = ev.mae_f;
      history.best_epoch = epoch + 1;
      best_state = snapshot(*net);
    }
    if (on_epoch) on_epoch(record);
  }
  restore(*net, best_state);

  const nlohmann::json lineage = {{"parent", work.fingerprint()},
                                  {"config", work.config().to_json()},
                                  {"schedule", schedule.to_json()},
                                  {"augment", to_string(policy.stage)},
                                  {"train", train.identity()},
                                  {"validation", val.identity()}};
  work.set_lineage(to_string(schedule.stage), sha256_hex(lineage.dump()), model.fingerprint());
  return {std::move(work), std::move(history)};
}

std::vector<std::vector<FrameRef>> temporal_kfold(std::span<const std::size_t> frames_per_participant,
                                                  int k) {
  if (k < 1) throw InvalidArgument("fold count must be positive");
  if (frames_per_participant.empty()) throw InvalidArgument("no participants to split");
  std::vector<std::vector<FrameRef>> folds(static_cast<std::size_t>(k));
  for (std::size_t p = 0; p < frames_per_participant.size(); ++p) {
    const std::size_t n = frames_per_participant[p];
    if (n < static_cast<std::size_t>(k)) {
      throw InvalidArgument("participant " + std::to_string(p) + " has " + std::to_string(n) +
                            " frames, fewer than the " + std::to_string(k) + " folds");
    }
    for (int f = 0; f < k; ++f) {
      const std::size_t lo = static_cast<std::size_t>(f) * n / static_cast<std::size_t>(k);
      const std::size_t hi = static_cast<std::size_t>(f + 1) * n / static_cast<std::size_t>(k);
      for (std::size_t i = lo; i < hi; ++i) folds[static_cast<std::size_t>(f)].push_back({p, i});
    }
  }
  return folds;
}

std::vector<std::vector<FrameRef>> temporal_5fold(std::span<const std::size_t> frames_per_participant) {
  return temporal_kfold(frames_per_participant, 5);
}

FacemapCvResult cross_validate_facemap(
    const FacemapModel& init, std::span<const std::size_t> frames_per_participant,
    const std::function<FacemapDataset(const std::vector<FrameRef>&)>& make_dataset,
    const TrainSchedule& schedule, const AugmentPolicy& policy) {
  const auto folds = temporal_5fold(frames_per_participant);
  std::vector<FacemapFoldResult> results;
  for (std::size_t test = 0; test < folds.size(); ++test) {
    std::vector<FrameRef> train_refs;
    for (std::size_t f = 0; f < folds.size(); ++f) {
      if (f != test) train_refs.insert(train_refs.end(), folds[f].begin(), folds[f].end());
    }
    const auto train = make_dataset(train_refs);
    const auto held_out = make_dataset(folds[test]);
    auto run = train_facemap(init, train, &held_out, schedule, policy);
    FacemapFoldResult r;
    r.fold = static_cast<int>(test);
    r.test = evaluate_facemap(run.model, held_out);
    r.history = std::move(run.history);
    results.push_back(std::move(r));
  }
  std::vector<FrameRef> all;
  for (const auto& f : folds) all.insert(all.end(), f.begin(), f.end());
  const auto everything = make_dataset(all);
  auto final_run = train_facemap(init, everything, nullptr, schedule, policy);
  return {std::move(results), std::move(final_run.model), std::move(final_run.history)};
}

Reconstruction reconstruct(const FacemapModel& model, std::size_t count,
                           const std::function<FramePair(std::size_t)>& pair_at, int batch_size) {
  Reconstruction out;
  out.timestamps.reserve(count);
  out.states.reserve(count);
  const std::size_t step = static_cast<std::size_t>(std::max(1, batch_size));
  std::vector<TiledFrame> frames;
  for (std::size_t start = 0; start < count; start += step) {
    frames.clear();
    for (std::size_t i = start; i < std::min(count, start + step); ++i) {
      const FramePair pair = pair_at(i);
      out.timestamps.push_back(pair.timestamp_s);
      frames.push_back(preprocess_pair(pair));
    }
    auto states = model.predict(frames, static_cast<int>(frames.size()));
    out.states.insert(out.states.end(), states.begin(), states.end());
  }
  return out;
}

Reconstruction reconstruct(const FacemapModel& model, std::span<const FramePair> stream, int batch_size) {
  return reconstruct(
      model, stream.size(), [&](std::size_t i) { return stream[i]; }, batch_size);
}

}  // namespace neckface
