#include "neckface/nn/resnet.hpp"

#include "neckface/error.hpp"

namespace neckface::nn {

namespace F = torch::nn::functional;

BasicBlockImpl::BasicBlockImpl(int64_t in_channels, int64_t out_channels, int64_t stride) {
  conv1 = register_module("conv1", torch::nn::Conv2d(torch::nn::Conv2dOptions(in_channels, out_channels, 3)
                                                         .stride(stride)
                                                         .padding(1)
                                                         .bias(false)));
  bn1 = register_module("bn1", torch::nn::BatchNorm2d(out_channels));
  conv2 = register_module("conv2", torch::nn::Conv2d(torch::nn::Conv2dOptions(out_channels, out_channels, 3)
                                                         .stride(1)
                                                         .padding(1)
                                                         .bias(false)));
  bn2 = register_module("bn2", torch::nn::BatchNorm2d(out_channels));
  if (stride != 1 || in_channels != out_channels) {
    downsample = register_module(
        "downsample",
        torch::nn::Sequential(torch::nn::Conv2d(
                                  torch::nn::Conv2dOptions(in_channels, out_channels, 1).stride(stride).bias(false)),
                              torch::nn::BatchNorm2d(out_channels)));
  }
}

torch::Tensor BasicBlockImpl::forward(torch::Tensor x) {
  torch::Tensor shortcut = downsample ? downsample->forward(x) : x;
  x = torch::relu(bn1->forward(conv1->forward(x)));
  x = bn2->forward(conv2->forward(x));
  return torch::relu(x + shortcut);
}

std::array<int, 4> resnet_stage_blocks(int depth) {
  switch (depth) {
    case 18:
      return {2, 2, 2, 2};
    case 34:
      return {3, 4, 6, 3};
    default:
      throw InvalidArgument("resnet depth must be 18 or 34, got " + std::to_string(depth));
  }
}

ResNetBackboneImpl::ResNetBackboneImpl(int64_t in_channels, int depth, int64_t base_width) {
  if (base_width < 1) throw InvalidArgument("resnet base width must be positive");
  const auto blocks = resnet_stage_blocks(depth);
  stem = register_module("stem", torch::nn::Conv2d(torch::nn::Conv2dOptions(in_channels, base_width, 7)
                                                       .stride(2)
                                                       .padding(3)
                                                       .bias(false)));
  stem_bn = register_module("stem_bn", torch::nn::BatchNorm2d(base_width));
  torch::nn::Sequential seq;
  int64_t channels = base_width;
  for (int stage = 0; stage < 4; ++stage) {
    const int64_t out = base_width << stage;
    for (int b = 0; b < blocks[stage]; ++b) {
      const int64_t stride = (b == 0 && stage > 0) ? 2 : 1;
      seq->push_back(BasicBlock(channels, out, stride));
      channels = out;
    }
  }
  stages = register_module("stages", seq);
  feature_dim_ = channels;

  for (auto& m : modules(/*include_self=*/false)) {
    if (auto* conv = m->as<torch::nn::Conv2d>()) {
      torch::nn::init::kaiming_normal_(conv->weight, 0.0, torch::kFanOut, torch::kReLU);
    }
  }
}

torch::Tensor ResNetBackboneImpl::forward(torch::Tensor x) {
  x = torch::relu(stem_bn->forward(stem->forward(x)));
  x = F::max_pool2d(x, F::MaxPool2dFuncOptions(3).stride(2).padding(1));
  x = stages->forward(x);
  return F::adaptive_avg_pool2d(x, F::AdaptiveAvgPool2dFuncOptions(1)).flatten(1);
}

int64_t parameter_count(const torch::nn::Module& module, bool trainable_only) {
  int64_t n = 0;
  for (const auto& p : module.parameters()) {
    if (!trainable_only || p.requires_grad()) n += p.numel();
  }
  return n;
}

}  // namespace neckface::nn
