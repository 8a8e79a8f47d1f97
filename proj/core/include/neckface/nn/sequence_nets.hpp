#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "neckface/nn/resnet.hpp"

namespace neckface::nn {

/// Feature extractor shared by the neural detectors: [B, F, L] (or [B, 3, S, S]) -> [B, D].
struct BodyBase : torch::nn::Module {
  virtual torch::Tensor forward(torch::Tensor x) = 0;
  int64_t feature_dim = 0;
};

/// Conv1d with "same" padding for odd kernels followed by batch norm and an optional ReLU.
struct ConvBlock1dImpl : torch::nn::Module {
  ConvBlock1dImpl(int64_t in, int64_t out, int64_t kernel, bool relu = true);
  torch::Tensor forward(torch::Tensor x);
  torch::nn::Conv1d conv{nullptr};
  torch::nn::BatchNorm1d bn{nullptr};
  bool relu = true;
};
TORCH_MODULE(ConvBlock1d);

/// Gated-recurrent branch over the feature axis (each variable is one step whose input is
/// the whole window) in parallel with a three-block convolutional branch.
struct GruFcnBody : BodyBase {
  GruFcnBody(int64_t features, int64_t seq_len, const nlohmann::json& hp);
  torch::Tensor forward(torch::Tensor x) override;

  bool shuffle = true;
  torch::nn::GRU rnn{nullptr};
  torch::nn::Dropout rnn_dropout{nullptr};
  torch::nn::Sequential convs{nullptr};
  torch::nn::Dropout fc_dropout{nullptr};
  int64_t hidden_size = 0;
  int64_t conv_out = 0;
};

struct GmlpBlockImpl : torch::nn::Module {
  GmlpBlockImpl(int64_t d_model, int64_t d_ffn, int64_t seq_len);
  torch::Tensor forward(torch::Tensor x);  // [B, L, d_model]
  torch::nn::LayerNorm norm{nullptr}, sgu_norm{nullptr};
  torch::nn::Linear proj_in{nullptr}, proj_out{nullptr};
  torch::nn::Conv1d spatial{nullptr};
};
TORCH_MODULE(GmlpBlock);

struct GmlpBody : BodyBase {
  GmlpBody(int64_t features, int64_t seq_len, const nlohmann::json& hp);
  torch::Tensor forward(torch::Tensor x) override;
  torch::nn::Conv1d patcher{nullptr};
  torch::nn::Sequential blocks{nullptr};
};

struct InceptionModuleImpl : torch::nn::Module {
  InceptionModuleImpl(int64_t in, int64_t nf, int64_t ks, bool bottleneck);
  torch::Tensor forward(torch::Tensor x);
  torch::nn::Conv1d bottleneck{nullptr};
  torch::nn::ModuleList convs{nullptr};
  torch::nn::Conv1d pool_conv{nullptr};
  torch::nn::BatchNorm1d bn{nullptr};
};
TORCH_MODULE(InceptionModule);

struct InceptionTimeBody : BodyBase {
  InceptionTimeBody(int64_t features, const nlohmann::json& hp);
  torch::Tensor forward(torch::Tensor x) override;
  torch::nn::ModuleList modules_list{nullptr};
  torch::nn::ModuleList shortcuts{nullptr};
  bool residual = true;
  int depth = 6;
};

/// Flattened window through dropout + linear + ReLU stages.
struct MlDnnBody : BodyBase {
  MlDnnBody(int64_t features, int64_t seq_len, const nlohmann::json& hp);
  torch::Tensor forward(torch::Tensor x) override;
  torch::nn::Sequential layers{nullptr};
  std::vector<int64_t> hidden;
};

/// Recurrent over time; last step's output. `bidirectional` selects the bilstm variant.
struct LstmBody : BodyBase {
  LstmBody(int64_t features, const nlohmann::json& hp, bool bidirectional);
  torch::Tensor forward(torch::Tensor x) override;
  torch::nn::LSTM rnn{nullptr};
  torch::nn::Dropout fc_dropout{nullptr};
};

struct TransformerBody : BodyBase {
  TransformerBody(int64_t features, const nlohmann::json& hp);
  torch::Tensor forward(torch::Tensor x) override;
  torch::nn::Linear in_linear{nullptr};
  torch::nn::TransformerEncoder encoder{nullptr};
};

struct FrameResNetBody : BodyBase {
  explicit FrameResNetBody(const nlohmann::json& hp);
  torch::Tensor forward(torch::Tensor x) override;
  ResNetBackbone backbone{nullptr};
};

}  // namespace neckface::nn
