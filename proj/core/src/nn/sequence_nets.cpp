#include "neckface/nn/sequence_nets.hpp"

#include <string>

#include "neckface/error.hpp"

namespace neckface::nn {

namespace F = torch::nn::functional;

namespace {

std::vector<int64_t> int_list(const nlohmann::json& hp, const char* key) {
  std::vector<int64_t> out;
  for (const auto& v : hp.at(key)) out.push_back(v.get<int64_t>());
  return out;
}

}  // namespace

ConvBlock1dImpl::ConvBlock1dImpl(int64_t in, int64_t out, int64_t kernel, bool relu_) : relu(relu_) {
  if (kernel % 2 == 0) throw InvalidArgument("conv kernel sizes must be odd");
  conv = register_module(
      "conv", torch::nn::Conv1d(torch::nn::Conv1dOptions(in, out, kernel).padding(kernel / 2).bias(false)));
  bn = register_module("bn", torch::nn::BatchNorm1d(out));
}

torch::Tensor ConvBlock1dImpl::forward(torch::Tensor x) {
  x = bn->forward(conv->forward(x));
  return relu ? torch::relu(x) : x;
}

GruFcnBody::GruFcnBody(int64_t features, int64_t seq_len, const nlohmann::json& hp) {
  shuffle = hp.at("shuffle").get<bool>();
  hidden_size = hp.at("hidden_size").get<int64_t>();
  const auto conv_layers = int_list(hp, "conv_layers");
  const auto kss = int_list(hp, "kss");
  if (conv_layers.size() != kss.size() || conv_layers.empty()) {
    throw InvalidArgument("gru_fcn conv_layers and kss must be nonempty and equal length");
  }
  rnn = register_module("rnn", torch::nn::GRU(torch::nn::GRUOptions(shuffle ? seq_len : features, hidden_size)
                                                  .num_layers(hp.at("rnn_layers").get<int64_t>())
                                                  .batch_first(true)));
  rnn_dropout = register_module("rnn_dropout", torch::nn::Dropout(hp.at("rnn_dropout").get<double>()));
  torch::nn::Sequential seq;
  int64_t in = features;
  for (std::size_t i = 0; i < conv_layers.size(); ++i) {
    seq->push_back(ConvBlock1d(in, conv_layers[i], kss[i]));
    in = conv_layers[i];
  }
  convs = register_module("convs", seq);
  conv_out = in;
  fc_dropout = register_module("fc_dropout", torch::nn::Dropout(hp.at("fc_dropout").get<double>()));
  feature_dim = hidden_size + conv_out;
}

torch::Tensor GruFcnBody::forward(torch::Tensor x) {
  // With shuffle the sequence axis is the variable axis, as in the reference implementation.
  auto rnn_in = shuffle ? x : x.transpose(1, 2);
  auto out = std::get<0>(rnn->forward(rnn_in));
  auto last = rnn_dropout->forward(out.select(1, out.size(1) - 1));
  auto c = convs->forward(x).mean(2);
  return fc_dropout->forward(torch::cat({last, c}, 1));
}

GmlpBlockImpl::GmlpBlockImpl(int64_t d_model, int64_t d_ffn, int64_t seq_len) {
  norm = register_module("norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({d_model})));
  proj_in = register_module("proj_in", torch::nn::Linear(d_model, 2 * d_ffn));
  sgu_norm = register_module("sgu_norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({d_ffn})));
  spatial = register_module("spatial", torch::nn::Conv1d(torch::nn::Conv1dOptions(seq_len, seq_len, 1)));
  torch::NoGradGuard guard;
  spatial->bias.fill_(1.0);
  proj_out = register_module("proj_out", torch::nn::Linear(d_ffn, d_model));
}

torch::Tensor GmlpBlockImpl::forward(torch::Tensor x) {
  auto residual = x;
  x = F::gelu(proj_in->forward(norm->forward(x)));
  auto parts = x.chunk(2, -1);
  // Token mixing: the conv's channel axis is the sequence axis.
  auto v = spatial->forward(sgu_norm->forward(parts[1]));
  return residual + proj_out->forward(parts[0] * v);
}

GmlpBody::GmlpBody(int64_t features, int64_t seq_len, const nlohmann::json& hp) {
  const int64_t patch = hp.at("patch_size").get<int64_t>();
  const int64_t d_model = hp.at("d_model").get<int64_t>();
  const int64_t d_ffn = hp.at("d_ffn").get<int64_t>();
  const int64_t depth = hp.at("depth").get<int64_t>();
  if (patch < 1 || seq_len % patch != 0) throw InvalidArgument("gmlp patch_size must divide the window length");
  patcher = register_module("patcher",
                            torch::nn::Conv1d(torch::nn::Conv1dOptions(features, d_model, patch).stride(patch)));
  torch::nn::Sequential seq;
  for (int64_t i = 0; i < depth; ++i) seq->push_back(GmlpBlock(d_model, d_ffn, seq_len / patch));
  blocks = register_module("blocks", seq);
  feature_dim = d_model;
}

torch::Tensor GmlpBody::forward(torch::Tensor x) {
  auto tokens = patcher->forward(x).permute({0, 2, 1}).contiguous();
  return blocks->forward(tokens).mean(1);
}

InceptionModuleImpl::InceptionModuleImpl(int64_t in, int64_t nf, int64_t ks, bool use_bottleneck) {
  use_bottleneck = use_bottleneck && in > 1;
  if (use_bottleneck) {
    bottleneck = register_module("bottleneck",
                                 torch::nn::Conv1d(torch::nn::Conv1dOptions(in, nf, 1).bias(false)));
  }
  convs = register_module("convs", torch::nn::ModuleList());
  const int64_t conv_in = use_bottleneck ? nf : in;
  for (int i = 0; i < 3; ++i) {
    int64_t k = ks >> i;
    if (k % 2 == 0) k -= 1;
    if (k < 1) k = 1;
    convs->push_back(torch::nn::Conv1d(torch::nn::Conv1dOptions(conv_in, nf, k).padding(k / 2).bias(false)));
  }
  pool_conv = register_module("pool_conv", torch::nn::Conv1d(torch::nn::Conv1dOptions(in, nf, 1).bias(false)));
  bn = register_module("bn", torch::nn::BatchNorm1d(4 * nf));
}

torch::Tensor InceptionModuleImpl::forward(torch::Tensor x) {
  auto b = bottleneck ? bottleneck->forward(x) : x;
  std::vector<torch::Tensor> outs;
  for (const auto& m : *convs) outs.push_back(m->as<torch::nn::Conv1d>()->forward(b));
  outs.push_back(pool_conv->forward(F::max_pool1d(x, F::MaxPool1dFuncOptions(3).stride(1).padding(1))));
  return torch::relu(bn->forward(torch::cat(outs, 1)));
}

InceptionTimeBody::InceptionTimeBody(int64_t features, const nlohmann::json& hp) {
  const int64_t nf = hp.at("nf").get<int64_t>();
  const int64_t ks = hp.at("ks").get<int64_t>();
  depth = hp.at("depth").get<int>();
  residual = hp.at("residual").get<bool>();
  const bool bottleneck = hp.at("bottleneck").get<bool>();
  modules_list = register_module("inception", torch::nn::ModuleList());
  shortcuts = register_module("shortcuts", torch::nn::ModuleList());
  for (int d = 0; d < depth; ++d) {
    modules_list->push_back(InceptionModule(d == 0 ? features : 4 * nf, nf, ks, bottleneck));
    if (residual && d % 3 == 2) {
      const int64_t n_in = d == 2 ? features : 4 * nf;
      const int64_t n_out = 4 * nf;
      if (n_in == n_out) {
        shortcuts->push_back(torch::nn::Sequential(torch::nn::BatchNorm1d(n_in)));
      } else {
        shortcuts->push_back(torch::nn::Sequential(ConvBlock1d(n_in, n_out, 1, false)));
      }
    }
  }
  feature_dim = 4 * nf;
}

torch::Tensor InceptionTimeBody::forward(torch::Tensor x) {
  auto res = x;
  for (int d = 0; d < depth; ++d) {
    x = modules_list->ptr<InceptionModuleImpl>(static_cast<std::size_t>(d))->forward(x);
    if (residual && d % 3 == 2) {
      auto sc = shortcuts->ptr<torch::nn::SequentialImpl>(static_cast<std::size_t>(d / 3))->forward(res);
      res = x = torch::relu(x + sc);
    }
  }
  return x.mean(2);
}

MlDnnBody::MlDnnBody(int64_t features, int64_t seq_len, const nlohmann::json& hp) {
  hidden = int_list(hp, "layers");
  std::vector<double> ps;
  for (const auto& v : hp.at("ps")) ps.push_back(v.get<double>());
  if (hidden.empty() || ps.size() != hidden.size()) {
    throw InvalidArgument("ml_dnn layers and ps must be nonempty and equal length");
  }
  torch::nn::Sequential seq;
  int64_t in = features * seq_len;
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    seq->push_back(torch::nn::Dropout(ps[i]));
    seq->push_back(torch::nn::Linear(in, hidden[i]));
    seq->push_back(torch::nn::ReLU());
    in = hidden[i];
  }
  seq->push_back(torch::nn::Dropout(hp.at("fc_dropout").get<double>()));
  layers = register_module("layers", seq);
  feature_dim = in;
}

torch::Tensor MlDnnBody::forward(torch::Tensor x) { return layers->forward(x.flatten(1)); }

LstmBody::LstmBody(int64_t features, const nlohmann::json& hp, bool bidirectional) {
  const int64_t hidden = hp.at("hidden_size").get<int64_t>();
  const int64_t layers = hp.at("rnn_layers").get<int64_t>();
  rnn = register_module("rnn", torch::nn::LSTM(torch::nn::LSTMOptions(features, hidden)
                                                   .num_layers(layers)
                                                   .batch_first(true)
                                                   .dropout(layers > 1 ? hp.at("rnn_dropout").get<double>() : 0.0)
                                                   .bidirectional(bidirectional)));
  fc_dropout = register_module("fc_dropout", torch::nn::Dropout(hp.at("fc_dropout").get<double>()));
  feature_dim = hidden * (bidirectional ? 2 : 1);
}

torch::Tensor LstmBody::forward(torch::Tensor x) {
  auto out = std::get<0>(rnn->forward(x.transpose(1, 2)));
  return fc_dropout->forward(out.select(1, out.size(1) - 1));
}

TransformerBody::TransformerBody(int64_t features, const nlohmann::json& hp) {
  const int64_t d_model = hp.at("d_model").get<int64_t>();
  in_linear = register_module("in_linear", torch::nn::Linear(features, d_model));
  torch::nn::TransformerEncoderLayerOptions layer(d_model, hp.at("n_head").get<int64_t>());
  layer.dim_feedforward(hp.at("d_ffn").get<int64_t>()).dropout(hp.at("dropout").get<double>());
  encoder = register_module(
      "encoder",
      torch::nn::TransformerEncoder(
          torch::nn::TransformerEncoderOptions(layer, hp.at("n_layers").get<int64_t>())
              .norm(torch::nn::AnyModule(torch::nn::LayerNorm(torch::nn::LayerNormOptions({d_model}))))));
  feature_dim = d_model;
}

torch::Tensor TransformerBody::forward(torch::Tensor x) {
  auto seq = torch::relu(in_linear->forward(x.permute({2, 0, 1})));  // [L, B, d]
  auto enc = encoder->forward(seq);
  return std::get<0>(enc.max(0));
}

FrameResNetBody::FrameResNetBody(const nlohmann::json& hp) {
  backbone = register_module("backbone",
                             ResNetBackbone(3, 34, hp.at("base_width").get<int64_t>()));
  feature_dim = backbone->feature_dim();
}

torch::Tensor FrameResNetBody::forward(torch::Tensor x) { return backbone->forward(x); }

}  // namespace neckface::nn
