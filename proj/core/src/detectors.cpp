#include "neckface/detectors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "neckface/checkpoint.hpp"
#include "neckface/error.hpp"
#include "neckface/io_util.hpp"
#include "neckface/metrics.hpp"
#include "neckface/minirocket.hpp"
#include "neckface/nn/sequence_nets.hpp"
#include "neckface/rng.hpp"

namespace neckface {

namespace {

constexpr const char* kCheckpointKind = "detector";

const std::vector<std::pair<Arch, std::string>>& arch_names() {
  static const std::vector<std::pair<Arch, std::string>> names = {
      {Arch::kGruFcn, "gru_fcn"},         {Arch::kGmlp, "gmlp"},
      {Arch::kInceptionTime, "inception_time"}, {Arch::kMiniRocket, "minirocket"},
      {Arch::kMlDnn, "ml_dnn"},           {Arch::kFrameResnet34, "frame_resnet34"},
      {Arch::kLstm, "lstm"},              {Arch::kBiLstm, "bilstm"},
      {Arch::kTransformer, "transformer"},
  };
  return names;
}

bool same_kind(const nlohmann::json& a, const nlohmann::json& b) {
  if (a.is_number() && b.is_number()) return true;
  return a.type() == b.type();
}

void check_labels(std::span<const int> labels, const char* what) {
  for (int l : labels) {
    if (l != 0 && l != 1) throw InvalidArgument(std::string(what) + " labels must be 0 or 1");
  }
}

void check_two_class(const SampleSet& s) {
  if (s.empty()) throw InvalidArgument("training set is empty");
  check_labels(s.labels, "training");
  const bool has0 = std::find(s.labels.begin(), s.labels.end(), 0) != s.labels.end();
  const bool has1 = std::find(s.labels.begin(), s.labels.end(), 1) != s.labels.end();
  if (!has0 || !has1) throw DegenerateLabels("training set holds a single class");
}

double accuracy_of(const Detector& det, const SampleSet& s, double* f1 = nullptr) {
  const auto pred = predict(det, s);
  const auto report = macro_metrics(pred.labels, s.labels);
  if (f1 != nullptr) *f1 = report.f1;
  return report.accuracy;
}

std::vector<std::pair<std::string, torch::Tensor>> detached(
    const std::vector<std::pair<std::string, torch::Tensor>>& items) {
  std::vector<std::pair<std::string, torch::Tensor>> out;
  for (const auto& [k, v] : items) out.emplace_back(k, v.detach().clone());
  return out;
}

// ---------------------------------------------------------------------------------------------
// Neural detectors

std::shared_ptr<nn::BodyBase> make_body(Arch arch, int64_t features, int64_t seq_len,
                                        const nlohmann::json& hp) {
  switch (arch) {
    case Arch::kGruFcn:
      return std::make_shared<nn::GruFcnBody>(features, seq_len, hp);
    case Arch::kGmlp:
      return std::make_shared<nn::GmlpBody>(features, seq_len, hp);
    case Arch::kInceptionTime:
      return std::make_shared<nn::InceptionTimeBody>(features, hp);
    case Arch::kMlDnn:
      return std::make_shared<nn::MlDnnBody>(features, seq_len, hp);
    case Arch::kLstm:
      return std::make_shared<nn::LstmBody>(features, hp, false);
    case Arch::kBiLstm:
      return std::make_shared<nn::LstmBody>(features, hp, true);
    case Arch::kTransformer:
      return std::make_shared<nn::TransformerBody>(features, hp);
    case Arch::kFrameResnet34:
      return std::make_shared<nn::FrameResNetBody>(hp);
    case Arch::kMiniRocket:
      break;
  }
  throw InvalidArgument("architecture has no neural body");
}

struct DetectorNetImpl : torch::nn::Module {
  DetectorNetImpl(std::shared_ptr<nn::BodyBase> body_, int64_t features, bool normalize_) : normalize(normalize_) {
    body = register_module("body", std::move(body_));
    head = register_module("head", torch::nn::Linear(body->feature_dim, 2));
    in_mean = register_buffer("in_mean", torch::zeros({features}));
    in_std = register_buffer("in_std", torch::ones({features}));
  }

  void add_adapter(int64_t in_features, int64_t out_features) {
    adapter = register_module("adapter", torch::nn::Linear(in_features, out_features));
    adapter_mean = register_buffer("adapter_mean", torch::zeros({in_features}));
    adapter_std = register_buffer("adapter_std", torch::ones({in_features}));
  }

  torch::Tensor forward(torch::Tensor x) {
    if (adapter) {
      x = (x - adapter_mean.view({1, -1, 1})) / adapter_std.view({1, -1, 1});
      // Mixes features at every time step into the body's input space.
      x = adapter->forward(x.transpose(1, 2)).transpose(1, 2);
    } else if (normalize) {
      x = (x - in_mean.view({1, -1, 1})) / in_std.view({1, -1, 1});
    }
    return head->forward(body->forward(x));
  }

  bool normalize = true;
  std::shared_ptr<nn::BodyBase> body;
  torch::nn::Linear head{nullptr};
  torch::nn::Linear adapter{nullptr};
  torch::Tensor in_mean, in_std, adapter_mean, adapter_std;
};
TORCH_MODULE(DetectorNet);

void fit_feature_stats(const torch::Tensor& x, torch::Tensor& mean, torch::Tensor& std) {
  torch::NoGradGuard guard;
  mean.copy_(x.mean({0, 2}));
  auto s = x.std({0, 2}, /*unbiased=*/false);
  std.copy_(torch::where(s > 1e-6, s, torch::ones_like(s)));
}

bool is_trainable_name(const std::string& name) {
  return name.rfind("head.", 0) == 0 || name.rfind("adapter", 0) == 0;
}

class NeuralDetector final : public Detector {
 public:
  NeuralDetector(DetectorSpec spec, int body_features, int adapter_features)
      : Detector(std::move(spec)), body_features_(body_features) {
    const auto hp = spec_.resolved_hyper();
    torch::manual_seed(spec_.seed);
    net_ = DetectorNet(make_body(spec_.arch, body_features_, spec_.interval_len, hp), body_features_,
                       !is_image_arch(spec_.arch));
    if (adapter_features > 0) net_->add_adapter(adapter_features, body_features_);
  }

  torch::Tensor probabilities(const torch::Tensor& x) const override {
    check_input(x);
    torch::NoGradGuard guard;
    net_->eval();
    return torch::softmax(net_->forward(x.to(torch::kFloat)).to(torch::kDouble), 1);
  }

  int64_t parameter_count() const override { return nn::parameter_count(*net_, false); }

  std::unique_ptr<Detector> clone() const override {
    auto copy = std::make_unique<NeuralDetector>(spec_, body_features_, adapter_features());
    std::stringstream buffer;
    {
      torch::serialize::OutputArchive out;
      net_->save(out);
      out.save_to(buffer);
    }
    torch::serialize::InputArchive in;
    in.load_from(buffer);
    copy->net_->load(in);
    copy->set_lineage(trained_, fingerprint_, parent_fingerprint_);
    return copy;
  }

  void save(const std::filesystem::path& path) const override {
    nlohmann::json meta = {{"spec", spec_.to_json()},
                           {"body_features", body_features_},
                           {"adapter_features", adapter_features()},
                           {"trained", trained_},
                           {"fingerprint", fingerprint_},
                           {"parent_fingerprint", parent_fingerprint_}};
    save_checkpoint(path, kCheckpointKind, meta, [this](torch::serialize::OutputArchive& archive) {
      torch::serialize::OutputArchive net_archive;
      net_->save(net_archive);
      archive.write("net", net_archive);
    });
  }

  void load_weights(torch::serialize::InputArchive& archive) {
    torch::serialize::InputArchive net_archive;
    archive.read("net", net_archive);
    net_->load(net_archive);
  }

  std::vector<std::pair<std::string, torch::Tensor>> frozen_tensors() const override {
    std::vector<std::pair<std::string, torch::Tensor>> out;
    for (const auto& p : net_->named_parameters()) {
      if (!is_trainable_name(p.key())) out.emplace_back(p.key(), p.value());
    }
    for (const auto& b : net_->named_buffers()) {
      if (!is_trainable_name(b.key())) out.emplace_back(b.key(), b.value());
    }
    return detached(out);
  }

  std::vector<std::pair<std::string, torch::Tensor>> head_tensors() const override {
    return detached({{"head.weight", net_->head->weight}, {"head.bias", net_->head->bias}});
  }

  DetectorHistory fit(const SampleSet& train, const SampleSet& val, const DetectSchedule& schedule) override {
    if (net_->normalize && !net_->adapter) fit_feature_stats(train.x, net_->in_mean, net_->in_std);
    std::vector<torch::Tensor> params = net_->parameters();
    return loop(train, val, schedule, params, /*train_body=*/true);
  }

  void prepare_finetune(const SampleSet& train) override {
    const int64_t f = train.x.size(1);
    if (is_image_arch(spec_.arch)) {
      if (train.x.sizes().vec() != std::vector<int64_t>{train.x.size(0), 3, spec_.sample_shape()[1],
                                                         spec_.sample_shape()[2]}) {
        throw InvalidArgument("frame fine-tuning data must match the parent's image shape");
      }
    } else {
      if (train.x.size(2) != spec_.interval_len) {
        throw InvalidArgument("fine-tuning windows must keep the parent's interval length");
      }
      if (f != spec_.features) {
        if (net_->adapter) throw InvalidArgument("detector already carries an input adapter");
        net_->add_adapter(f, body_features_);
        fit_feature_stats(train.x, net_->adapter_mean, net_->adapter_std);
        spec_.features = static_cast<int>(f);
      }
    }
    for (auto& p : net_->named_parameters()) p.value().set_requires_grad(is_trainable_name(p.key()));
  }

  DetectorHistory fit_head(const SampleSet& train, const SampleSet& val, const DetectSchedule& schedule) override {
    std::vector<torch::Tensor> params;
    for (auto& p : net_->named_parameters()) {
      if (is_trainable_name(p.key())) params.push_back(p.value());
    }
    return loop(train, val, schedule, params, /*train_body=*/false);
  }

  int adapter_features() const { return net_->adapter ? static_cast<int>(net_->adapter->weight.size(1)) : 0; }

  DetectorNet& net() { return net_; }

 private:
  DetectorHistory loop(const SampleSet& train, const SampleSet& val, const DetectSchedule& schedule,
                       std::vector<torch::Tensor> params, bool train_body) {
    torch::manual_seed(derive_seed(schedule.seed, "detector-torch"));
    torch::optim::Adam optimizer(params, torch::optim::AdamOptions(schedule.lr).weight_decay(schedule.weight_decay));
    const SampleSet& selection = val.empty() ? train : val;

    torch::Tensor class_weight;
    if (schedule.class_weighting) {
      const double n1 = static_cast<double>(std::count(train.labels.begin(), train.labels.end(), 1));
      const double n0 = static_cast<double>(train.size()) - n1;
      const double n = static_cast<double>(train.size());
      class_weight = torch::tensor({n / (2.0 * n0), n / (2.0 * n1)}, torch::kFloat);
    }
    const auto y_all = torch::tensor(std::vector<int64_t>(train.labels.begin(), train.labels.end()), torch::kLong);
    const auto x_all = train.x.to(torch::kFloat);
    const int64_t n = static_cast<int64_t>(train.size());
    const int64_t batch = schedule.batch_size;

    DetectorHistory history;
    double best = -1.0;
    std::vector<torch::Tensor> best_state;
    auto snapshot = [this] {
      std::vector<torch::Tensor> s;
      for (const auto& p : net_->parameters()) s.push_back(p.detach().clone());
      for (const auto& b : net_->buffers()) s.push_back(b.detach().clone());
      return s;
    };
    for (int epoch = 1; epoch <= schedule.epochs; ++epoch) {
      if (train_body) {
        net_->train();
      } else {
        net_->eval();  // frozen batch-norm statistics and no dropout in the body
      }
      torch::Generator gen = at::detail::createCPUGenerator(derive_seed(schedule.seed, static_cast<std::uint64_t>(epoch)));
      const auto perm = torch::randperm(n, gen, torch::kLong);
      double loss_sum = 0.0;
      int batches = 0;
      for (int64_t start = 0; start < n; start += batch) {
        const int64_t end = std::min(n, start + batch);
        if (end - start < 2 && n >= 2) break;  // batch norm cannot use a single sample
        const auto idx = perm.slice(0, start, end);
        const auto xb = x_all.index_select(0, idx);
        const auto yb = y_all.index_select(0, idx);
        optimizer.zero_grad();
        auto logits = net_->forward(xb);
        auto opts = torch::nn::functional::CrossEntropyFuncOptions();
        if (class_weight.defined()) opts.weight(class_weight);
        auto loss = torch::nn::functional::cross_entropy(logits, yb, opts);
        const double lv = loss.item<double>();
        if (!std::isfinite(lv)) throw TrainingError("detector loss became non-finite in epoch " + std::to_string(epoch));
        loss.backward();
        optimizer.step();
        loss_sum += lv;
        ++batches;
      }
      DetectorEpoch record;
      record.epoch = epoch;
      record.train_loss = batches > 0 ? loss_sum / batches : 0.0;
      record.val_accuracy = accuracy_of(*this, selection, &record.val_f1);
      history.epochs.push_back(record);
      if (record.val_accuracy > best) {
        best = record.val_accuracy;
        history.best_epoch = epoch;
        best_state = snapshot();
      }
    }
    torch::NoGradGuard guard;
    std::size_t i = 0;
    for (auto& p : net_->parameters()) p.copy_(best_state[i++]);
    for (auto& b : net_->buffers()) b.copy_(best_state[i++]);
    net_->eval();
    return history;
  }

  int body_features_ = 0;
  mutable DetectorNet net_{nullptr};
};

// ---------------------------------------------------------------------------------------------
// MiniRocket: fixed random-kernel transform + ridge classifier

class MiniRocketDetector final : public Detector {
 public:
  explicit MiniRocketDetector(DetectorSpec spec) : Detector(std::move(spec)) {
    const auto hp = spec_.resolved_hyper();
    options_.num_features = hp.at("num_features").get<int>();
    options_.max_dilations_per_kernel = hp.at("max_dilations_per_kernel").get<int>();
    options_.seed = spec_.seed;
    for (const auto& a : hp.at("alphas")) alphas_.push_back(a.get<double>());
    dual_limit_ = hp.at("dual_limit").get<int>();
    if (alphas_.empty()) throw InvalidArgument("minirocket needs at least one ridge alpha");
    // Dilations depend only on the window length; fixing them here lets the feature count be
    // known before fitting.
    (void)minirocket_dilations(spec_.interval_len, options_.num_features, options_.max_dilations_per_kernel);
  }

  int num_features() const { return minirocket_feature_count(options_.num_features); }

  torch::Tensor probabilities(const torch::Tensor& x) const override {
    check_input(x);
    if (!trained_) throw InvalidArgument("minirocket detector is not fitted");
    const auto d = ridge_decision(ridge_, features_of(x));
    auto out = torch::empty({static_cast<int64_t>(d.size()), 2}, torch::kDouble);
    auto acc = out.accessor<double, 2>();
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      // Logistic link on the +-1 regression output.
      const double p1 = 1.0 / (1.0 + std::exp(-2.0 * d(i)));
      acc[i][1] = p1;
      acc[i][0] = 1.0 - p1;
    }
    return out;
  }

  int64_t parameter_count() const override { return ridge_.coef.size() + 1; }

  std::unique_ptr<Detector> clone() const override { return std::make_unique<MiniRocketDetector>(*this); }

  void save(const std::filesystem::path& path) const override {
    nlohmann::json meta = {{"spec", spec_.to_json()},
                           {"trained", trained_},
                           {"fingerprint", fingerprint_},
                           {"parent_fingerprint", parent_fingerprint_},
                           {"ridge_alpha", ridge_.alpha},
                           {"ridge_intercept", ridge_.intercept},
                           {"loo_errors", ridge_.loo_errors}};
    save_checkpoint(path, kCheckpointKind, meta, [this](torch::serialize::OutputArchive& archive) {
      for (const auto& [k, v] : tensors()) archive.write(k, v);
    });
  }

  void load_state(const nlohmann::json& meta, torch::serialize::InputArchive& archive) {
    auto get = [&](const char* key) {
      torch::Tensor t;
      archive.read(key, t);
      return t.contiguous();
    };
    auto ints = [&](const char* key) {
      auto t = get(key).to(torch::kLong);
      return std::vector<int>(t.data_ptr<int64_t>(), t.data_ptr<int64_t>() + t.numel());
    };
    params_.channels = spec_.features;
    params_.length = spec_.interval_len;
    params_.dilations = ints("dilations");
    params_.features_per_dilation = ints("features_per_dilation");
    params_.channels_per_combination = ints("channels_per_combination");
    params_.channel_indices = ints("channel_indices");
    auto b = get("biases");
    params_.biases.assign(b.data_ptr<float>(), b.data_ptr<float>() + b.numel());
    auto mean = get("scaler_mean");
    auto scale = get("scaler_scale");
    scaler_.mean = Eigen::Map<Eigen::VectorXf>(mean.data_ptr<float>(), mean.numel());
    scaler_.scale = Eigen::Map<Eigen::VectorXf>(scale.data_ptr<float>(), scale.numel());
    auto coef = get("ridge_coef");
    ridge_.coef = Eigen::Map<Eigen::VectorXd>(coef.data_ptr<double>(), coef.numel());
    ridge_.alpha = meta.at("ridge_alpha");
    ridge_.intercept = meta.at("ridge_intercept");
    ridge_.loo_errors = meta.at("loo_errors").get<std::vector<double>>();
  }

  std::vector<std::pair<std::string, torch::Tensor>> frozen_tensors() const override {
    auto all = tensors();
    std::vector<std::pair<std::string, torch::Tensor>> out;
    for (auto& [k, v] : all) {
      if (k.rfind("ridge_", 0) != 0) out.emplace_back(k, v);
    }
    return out;
  }

  std::vector<std::pair<std::string, torch::Tensor>> head_tensors() const override {
    return {{"ridge_coef", vec_tensor(ridge_.coef)},
            {"ridge_intercept", torch::tensor({ridge_.intercept}, torch::kDouble)}};
  }

  DetectorHistory fit(const SampleSet& train, const SampleSet& val, const DetectSchedule&) override {
    const auto x = flat(train.x);
    params_ = minirocket_fit(x, static_cast<int>(train.size()), spec_.features, spec_.interval_len, options_);
    const Eigen::MatrixXf raw = minirocket_transform(params_, x, static_cast<int>(train.size()));
    scaler_ = fit_scaler(raw);
    return fit_ridge(apply_scaler(scaler_, raw), train, val);
  }

  void prepare_finetune(const SampleSet& train) override {
    if (train.x.size(1) != spec_.features || train.x.size(2) != spec_.interval_len) {
      throw InvalidArgument("minirocket fine-tuning needs the parent's channel count and window length");
    }
  }

  DetectorHistory fit_head(const SampleSet& train, const SampleSet& val, const DetectSchedule&) override {
    return fit_ridge(apply_scaler(scaler_, raw_features(train.x)), train, val);
  }

 private:
  static std::vector<float> flat(const torch::Tensor& x) {
    auto c = x.to(torch::kFloat).contiguous();
    return {c.data_ptr<float>(), c.data_ptr<float>() + c.numel()};
  }

  Eigen::MatrixXf raw_features(const torch::Tensor& x) const {
    const auto data = flat(x);
    return minirocket_transform(params_, data, static_cast<int>(x.size(0)));
  }

  Eigen::MatrixXf features_of(const torch::Tensor& x) const { return apply_scaler(scaler_, raw_features(x)); }

  DetectorHistory fit_ridge(const Eigen::MatrixXf& features, const SampleSet& train, const SampleSet& val) {
    ridge_ = fit_ridge_classifier_cv(features, train.labels, alphas_, dual_limit_, spec_.seed);
    trained_ = true;  // provisional, so accuracy_of can run; train_detector fixes lineage
    DetectorHistory h;
    DetectorEpoch e;
    e.epoch = 1;
    const auto d = ridge_decision(ridge_, features);
    double sq = 0.0;
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      const double y = train.labels[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0;
      sq += (d(i) - y) * (d(i) - y);
    }
    e.train_loss = sq / static_cast<double>(d.size());
    e.val_accuracy = accuracy_of(*this, val.empty() ? train : val, &e.val_f1);
    h.epochs.push_back(e);
    h.best_epoch = 1;
    return h;
  }

  static torch::Tensor int_tensor(const std::vector<int>& v) {
    return torch::tensor(std::vector<int64_t>(v.begin(), v.end()), torch::kLong);
  }
  static torch::Tensor vec_tensor(const Eigen::VectorXd& v) {
    return torch::from_blob(const_cast<double*>(v.data()), {v.size()}, torch::kDouble).clone();
  }
  static torch::Tensor vecf_tensor(const Eigen::VectorXf& v) {
    return torch::from_blob(const_cast<float*>(v.data()), {v.size()}, torch::kFloat).clone();
  }

  std::vector<std::pair<std::string, torch::Tensor>> tensors() const {
    return {
        {"dilations", int_tensor(params_.dilations)},
        {"features_per_dilation", int_tensor(params_.features_per_dilation)},
        {"channels_per_combination", int_tensor(params_.channels_per_combination)},
        {"channel_indices", int_tensor(params_.channel_indices)},
        {"biases", torch::tensor(params_.biases, torch::kFloat)},
        {"scaler_mean", vecf_tensor(scaler_.mean)},
        {"scaler_scale", vecf_tensor(scaler_.scale)},
        {"ridge_coef", vec_tensor(ridge_.coef)},
    };
  }

  MiniRocketOptions options_;
  std::vector<double> alphas_;
  int dual_limit_ = 8000;
  MiniRocketParams params_;
  FeatureScaler scaler_;
  RidgeClassifier ridge_;
};

std::string lineage_hash(const Detector& parent, const char* mode, const SampleSet& train, const SampleSet& val,
                         const DetectSchedule& schedule) {
  const nlohmann::json j = {{"mode", mode},
                            {"parent", parent.fingerprint()},
                            {"spec", parent.spec().to_json()},
                            {"schedule", schedule.to_json()},
                            {"train", train.digest()},
                            {"validation", val.digest()}};
  return sha256_hex(j.dump());
}

}  // namespace

std::string to_string(Arch arch) {
  for (const auto& [a, name] : arch_names()) {
    if (a == arch) return name;
  }
  return "unknown";
}

Arch arch_from_string(const std::string& name) {
  for (const auto& [a, n] : arch_names()) {
    if (n == name) return a;
  }
  throw InvalidArgument("unknown detector architecture '" + name + "'");
}

const std::vector<Arch>& all_archs() {
  static const std::vector<Arch> archs = [] {
    std::vector<Arch> v;
    for (const auto& [a, n] : arch_names()) v.push_back(a);
    return v;
  }();
  return archs;
}

bool is_image_arch(Arch arch) noexcept { return arch == Arch::kFrameResnet34; }

nlohmann::json default_hyperparameters(Arch arch) {
  switch (arch) {
    case Arch::kGruFcn:
      return {{"hidden_size", 100}, {"rnn_layers", 1},  {"rnn_dropout", 0.8},       {"fc_dropout", 0.0},
              {"conv_layers", {128, 256, 128}},       {"kss", {7, 5, 3}},        {"shuffle", true}};
    case Arch::kGmlp:
      return {{"patch_size", 1}, {"d_model", 256}, {"d_ffn", 512}, {"depth", 6}};
    case Arch::kInceptionTime:
      return {{"nf", 32}, {"depth", 6}, {"ks", 40}, {"bottleneck", true}, {"residual", true}};
    case Arch::kMiniRocket: {
      std::vector<double> alphas;
      for (int i = 0; i < 7; ++i) alphas.push_back(std::pow(10.0, -3.0 + i));
      return {{"num_features", 10000}, {"max_dilations_per_kernel", 32}, {"alphas", alphas}, {"dual_limit", 8000}};
    }
    case Arch::kMlDnn:
      return {{"layers", {64, 128, 64}}, {"ps", {0.1, 0.2, 0.2}}, {"fc_dropout", 0.0}};
    case Arch::kFrameResnet34:
      return {{"image_size", 224}, {"base_width", 64}, {"pretrained_weights", ""}};
    case Arch::kLstm:
    case Arch::kBiLstm:
      return {{"hidden_size", 100}, {"rnn_layers", 1}, {"rnn_dropout", 0.0}, {"fc_dropout", 0.0}};
    case Arch::kTransformer:
      return {{"d_model", 64}, {"n_head", 1}, {"d_ffn", 128}, {"dropout", 0.1}, {"n_layers", 1}};
  }
  throw InvalidArgument("unknown architecture");
}

void DetectorSpec::validate() const {
  if (!is_image_arch(arch) && (features < 1 || interval_len < 1)) {
    throw InvalidArgument("detector input needs positive feature count and interval length");
  }
  (void)resolved_hyper();
}

nlohmann::json DetectorSpec::resolved_hyper() const {
  nlohmann::json out = default_hyperparameters(arch);
  if (!hyper.is_null() && !hyper.is_object()) throw InvalidArgument("hyperparameters must be a JSON object");
  if (hyper.is_object()) {
    for (const auto& [k, v] : hyper.items()) {
      if (!out.contains(k)) {
        throw InvalidArgument("unknown hyperparameter '" + k + "' for " + to_string(arch));
      }
      if (!same_kind(out[k], v)) {
        throw InvalidArgument("hyperparameter '" + k + "' has the wrong type for " + to_string(arch));
      }
      out[k] = v;
    }
  }
  return out;
}

std::vector<int64_t> DetectorSpec::sample_shape() const {
  if (is_image_arch(arch)) {
    const int64_t s = resolved_hyper().at("image_size").get<int64_t>();
    return {3, s, s};
  }
  return {features, interval_len};
}

nlohmann::json DetectorSpec::to_json() const {
  return {{"arch", to_string(arch)},
          {"features", features},
          {"interval_len", interval_len},
          {"hyper", hyper.is_null() ? nlohmann::json::object() : hyper},
          {"seed", seed}};
}

DetectorSpec DetectorSpec::from_json(const nlohmann::json& j) {
  DetectorSpec s;
  s.arch = arch_from_string(j.at("arch").get<std::string>());
  s.features = j.value("features", s.features);
  s.interval_len = j.value("interval_len", s.interval_len);
  s.hyper = j.value("hyper", nlohmann::json::object());
  s.seed = j.value("seed", s.seed);
  return s;
}

SampleSet SampleSet::subset(std::span<const std::size_t> indices) const {
  SampleSet out;
  std::vector<int64_t> idx(indices.begin(), indices.end());
  for (std::size_t i : indices) {
    if (i >= size()) throw InvalidArgument("sample index out of range");
    out.labels.push_back(labels[i]);
    if (!origins.empty()) out.origins.push_back(origins[i]);
  }
  out.x = x.index_select(0, torch::tensor(idx, torch::kLong));
  return out;
}

std::string SampleSet::digest() const {
  if (empty()) return "empty";
  auto c = x.to(torch::kFloat).contiguous();
  std::string buf(reinterpret_cast<const char*>(c.data_ptr<float>()), static_cast<std::size_t>(c.numel()) * sizeof(float));
  buf.append(reinterpret_cast<const char*>(labels.data()), labels.size() * sizeof(int));
  return sha256_hex(buf);
}

SampleSet samples_from_windows(std::span<const LabeledWindow> windows) {
  std::vector<const LabeledWindow*> kept;
  for (const auto& w : windows) {
    if (w.label == 0 || w.label == 1) kept.push_back(&w);
  }
  SampleSet out;
  if (kept.empty()) {
    out.x = torch::empty({0, 0, 0});
    return out;
  }
  const int64_t f = kept.front()->matrix.rows();
  const int64_t il = kept.front()->matrix.cols();
  out.x = torch::empty({static_cast<int64_t>(kept.size()), f, il});
  float* dst = out.x.data_ptr<float>();
  for (const auto* w : kept) {
    if (w->matrix.rows() != f || w->matrix.cols() != il) throw InvalidArgument("windows differ in shape");
    // Eigen is column-major; the tensor wants row-major F x IL.
    for (int64_t r = 0; r < f; ++r)
      for (int64_t t = 0; t < il; ++t) *dst++ = w->matrix(r, t);
    out.labels.push_back(w->label);
    out.origins.push_back(w->origin);
  }
  return out;
}

SampleSet concat(std::span<const SampleSet> parts) {
  SampleSet out;
  std::vector<torch::Tensor> xs;
  for (const auto& p : parts) {
    if (p.empty()) continue;
    xs.push_back(p.x);
    out.labels.insert(out.labels.end(), p.labels.begin(), p.labels.end());
    out.origins.insert(out.origins.end(), p.origins.begin(), p.origins.end());
  }
  out.x = xs.empty() ? torch::empty({0, 0, 0}) : torch::cat(xs, 0);
  return out;
}

void DetectSchedule::validate() const {
  if (epochs < 1) throw InvalidArgument("detector schedule needs at least one epoch");
  if (!(lr > 0.0)) throw InvalidArgument("detector learning rate must be positive");
  if (batch_size < 1) throw InvalidArgument("detector batch size must be positive");
  if (weight_decay < 0.0) throw InvalidArgument("weight decay must be nonnegative");
}

nlohmann::json DetectSchedule::to_json() const {
  return {{"epochs", epochs},         {"lr", lr},
          {"batch_size", batch_size}, {"weight_decay", weight_decay},
          {"class_weighting", class_weighting}, {"seed", seed}};
}

DetectSchedule DetectSchedule::from_json(const nlohmann::json& j) {
  DetectSchedule s;
  s.epochs = j.value("epochs", s.epochs);
  s.lr = j.value("lr", s.lr);
  s.batch_size = j.value("batch_size", s.batch_size);
  s.weight_decay = j.value("weight_decay", s.weight_decay);
  s.class_weighting = j.value("class_weighting", s.class_weighting);
  s.seed = j.value("seed", s.seed);
  return s;
}

nlohmann::json DetectorHistory::to_json() const {
  nlohmann::json e = nlohmann::json::array();
  for (const auto& r : epochs) {
    e.push_back({{"epoch", r.epoch}, {"train_loss", r.train_loss}, {"val_accuracy", r.val_accuracy}, {"val_f1", r.val_f1}});
  }
  return {{"best_epoch", best_epoch}, {"epochs", e}};
}

Detector::Detector(DetectorSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  fingerprint_ = sha256_hex("detector-init:" + spec_.to_json().dump());
}

void Detector::set_lineage(bool trained, std::string fingerprint, std::string parent) {
  trained_ = trained;
  fingerprint_ = std::move(fingerprint);
  parent_fingerprint_ = std::move(parent);
}

void Detector::check_input(const torch::Tensor& x) const {
  const auto shape = spec_.sample_shape();
  bool ok = x.defined() && x.dim() == static_cast<int64_t>(shape.size()) + 1;
  for (std::size_t i = 0; ok && i < shape.size(); ++i) ok = x.size(static_cast<int64_t>(i) + 1) == shape[i];
  if (!ok) {
    std::ostringstream msg;
    msg << "input shape " << (x.defined() ? x.sizes() : c10::IntArrayRef{}) << " does not match detector input [N";
    for (auto s : shape) msg << ", " << s;
    msg << "]";
    throw InvalidArgument(msg.str());
  }
}

std::unique_ptr<Detector> build_detector(const DetectorSpec& spec) {
  spec.validate();
  if (spec.arch == Arch::kMiniRocket) return std::make_unique<MiniRocketDetector>(spec);
  auto det = std::make_unique<NeuralDetector>(spec, spec.features, 0);
  if (spec.arch == Arch::kFrameResnet34) {
    const auto path = spec.resolved_hyper().at("pretrained_weights").get<std::string>();
    if (!path.empty()) {
      torch::serialize::InputArchive archive;
      try {
        archive.load_from(path);
        static_cast<nn::FrameResNetBody&>(*det->net()->body).backbone->load(archive);
      } catch (const c10::Error& e) {
        throw InvalidArgument("cannot load pretrained frame weights from " + path + ": " + e.what_without_backtrace());
      }
    }
  }
  return det;
}

DetectorTrainResult train_detector(const Detector& detector, const SampleSet& train, const SampleSet& val,
                                   const DetectSchedule& schedule) {
  schedule.validate();
  check_two_class(train);
  if (!val.empty()) check_labels(val.labels, "validation");
  auto work = detector.clone();
  const auto hash = lineage_hash(detector, "train", train, val, schedule);
  work->set_lineage(false, detector.fingerprint(), detector.parent_fingerprint());
  work->check_input(train.x);
  if (!val.empty()) work->check_input(val.x);
  auto history = work->fit(train, val, schedule);
  work->set_lineage(true, hash, detector.fingerprint());
  return {std::move(work), std::move(history)};
}

Prediction predict(const Detector& detector, const torch::Tensor& x, int batch_size) {
  Prediction out;
  const int64_t n = x.defined() && x.dim() > 0 ? x.size(0) : 0;
  if (n == 0) {
    (void)detector.probabilities(x);  // validates the shape
    return out;
  }
  const int64_t step = std::max(1, batch_size);
  for (int64_t start = 0; start < n; start += step) {
    auto p = detector.probabilities(x.slice(0, start, std::min(n, start + step))).contiguous();
    auto acc = p.accessor<double, 2>();
    for (int64_t i = 0; i < p.size(0); ++i) {
      out.probabilities.push_back({acc[i][0], acc[i][1]});
      out.labels.push_back(acc[i][1] > acc[i][0] ? 1 : 0);
    }
  }
  return out;
}

Prediction predict(const Detector& detector, const SampleSet& samples, int batch_size) {
  if (samples.empty()) return {};
  return predict(detector, samples.x, batch_size);
}

DetectorTrainResult finetune_last_layer(const Detector& parent, const SampleSet& train, const SampleSet& val,
                                        const DetectSchedule& schedule) {
  if (!parent.trained()) throw InvalidArgument("cannot fine-tune an untrained detector");
  schedule.validate();
  check_two_class(train);
  auto work = parent.clone();
  const auto hash = lineage_hash(parent, "finetune", train, val, schedule);
  {
    torch::manual_seed(derive_seed(schedule.seed, "adapter-init"));
    work->prepare_finetune(train);
  }
  auto history = work->fit_head(train, val, schedule);
  work->set_lineage(true, hash, parent.fingerprint());
  return {std::move(work), std::move(history)};
}

std::unique_ptr<Detector> load_detector(const std::filesystem::path& path) {
  auto reader = open_checkpoint(path, kCheckpointKind);
  const auto& meta = reader.meta;
  auto spec = DetectorSpec::from_json(meta.at("spec"));
  std::unique_ptr<Detector> det;
  try {
    if (spec.arch == Arch::kMiniRocket) {
      auto mr = std::make_unique<MiniRocketDetector>(spec);
      mr->load_state(meta, reader.archive);
      det = std::move(mr);
    } else {
      const int body = meta.at("body_features");
      const int adapter = meta.value("adapter_features", 0);
      auto nd = std::make_unique<NeuralDetector>(spec, body, adapter);
      nd->load_weights(reader.archive);
      det = std::move(nd);
    }
  } catch (const c10::Error& e) {
    throw DataError("checkpoint " + path.string() + " weights do not match its spec: " + e.what_without_backtrace());
  }
  det->set_lineage(meta.at("trained"), meta.at("fingerprint"), meta.value("parent_fingerprint", ""));
  return det;
}

}  // namespace neckface
