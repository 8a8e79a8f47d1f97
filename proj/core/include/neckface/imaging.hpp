#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "neckface/raster.hpp"
#include "neckface/rng.hpp"

namespace neckface {

inline constexpr int kCameraWidth = 640;
inline constexpr int kCameraHeight = 480;
inline constexpr int kHalfWidth = 320;
inline constexpr int kTiledWidth = 640;
inline constexpr int kTiledHeight = 240;

/// Left and right camera images, each 320x240, tiled side by side.
struct TiledFrame {
  Raster image;  // 640x240, one channel
  double timestamp_s = 0.0;
  std::string participant_id;
  std::string session_id;
};

enum class AugmentStage { kNone, kPretrain, kFinetune };

std::string to_string(AugmentStage stage);
AugmentStage augment_stage_from_string(const std::string& name);

struct AugmentPolicy {
  AugmentStage stage = AugmentStage::kNone;
  double p_scale = 0.5;
  double p_rotate = 0.5;
  double p_translate = 0.5;
  std::array<double, 2> scale_range{0.9, 1.1};
  std::array<double, 2> rotate_range_deg{-30.0, 30.0};
  std::array<double, 2> translate_range_px{-6.0, 6.0};

  /// Ranges fixed per stage: rotation is +-30 deg for pretraining, +-8 deg for fine-tuning.
  static AugmentPolicy for_stage(AugmentStage stage);
};

/// One sampled transform, shared by both halves of a tiled frame.
struct AugmentParams {
  double scale = 1.0;
  double rotate_deg = 0.0;
  double translate_x = 0.0;
  double translate_y = 0.0;

  bool is_identity() const noexcept {
    return scale == 1.0 && rotate_deg == 0.0 && translate_x == 0.0 && translate_y == 0.0;
  }
};

Raster to_grayscale(const Raster& image);

/// Bilinear resize with pixel-center alignment and edge clamping.
Raster resize_bilinear(const Raster& image, int width, int height);

/// Integer box-filter downsampling; factor 1 is a copy.
Raster downsample_area(const Raster& image, int factor);

/// Grayscale both camera images, resize each to 320x240, tile left|right.
TiledFrame preprocess_pair(const FramePair& pair);

AugmentParams sample_augment(const AugmentPolicy& policy, Rng& rng);

/// Applies params to each 320-wide half independently, zero fill outside the canvas.
TiledFrame apply_augment(const TiledFrame& frame, const AugmentParams& params);

TiledFrame augment(const TiledFrame& frame, const AugmentPolicy& policy, Rng& rng);

/// Affine warp of a single-channel canvas about its center. Exposed for tests.
Raster warp_canvas(const Raster& canvas, const AugmentParams& params);

inline constexpr std::array<float, 3> kImageNetMean{0.485F, 0.456F, 0.406F};
inline constexpr std::array<float, 3> kImageNetStd{0.229F, 0.224F, 0.225F};

/// Channel-major 3 x size x size tensor data.
struct CnnImage {
  int size = 0;
  std::vector<float> chw;
  float at(int c, int y, int x) const noexcept {
    return chw[(static_cast<std::size_t>(c) * size + y) * size + x];
  }
};

/// Resize to size x size, replicate gray to 3 channels, standardize with ImageNet statistics.
CnnImage normalize_for_cnn(const Raster& image, int size = 224);

/// Reads 8-bit gray or RGB PNG to [0,1] floats.
Raster read_png(const std::filesystem::path& path);
/// Writes an 8-bit PNG (gray or RGB) after clamping to [0,1].
void write_png(const std::filesystem::path& path, const Raster& image);

}  // namespace neckface
