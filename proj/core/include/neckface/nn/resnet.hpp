#pragma once

#include <array>
#include <cstdint>

#include <torch/torch.h>

namespace neckface::nn {

/// Two 3x3 convolutions with batch norm and an identity (or 1x1 projection) shortcut.
struct BasicBlockImpl : torch::nn::Module {
  BasicBlockImpl(int64_t in_channels, int64_t out_channels, int64_t stride);
  torch::Tensor forward(torch::Tensor x);

  torch::nn::Conv2d conv1{nullptr}, conv2{nullptr};
  torch::nn::BatchNorm2d bn1{nullptr}, bn2{nullptr};
  torch::nn::Sequential downsample{nullptr};
};
TORCH_MODULE(BasicBlock);

/// Residual block counts per stage for the 18- and 34-layer variants.
std::array<int, 4> resnet_stage_blocks(int depth);

/// Stem + four residual stages + global average pool. Output [B, 8 * base_width].
struct ResNetBackboneImpl : torch::nn::Module {
  ResNetBackboneImpl(int64_t in_channels, int depth, int64_t base_width);
  torch::Tensor forward(torch::Tensor x);
  int64_t feature_dim() const noexcept { return feature_dim_; }

  torch::nn::Conv2d stem{nullptr};
  torch::nn::BatchNorm2d stem_bn{nullptr};
  torch::nn::Sequential stages{nullptr};

 private:
  int64_t feature_dim_ = 0;
};
TORCH_MODULE(ResNetBackbone);

int64_t parameter_count(const torch::nn::Module& module, bool trainable_only = true);

}  // namespace neckface::nn
