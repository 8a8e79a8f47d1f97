#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace neckface {

/// Row-major float image, channels interleaved. Intensities nominally in [0,1].
class Raster {
 public:
  Raster() = default;
  Raster(int width, int height, int channels = 1, float fill = 0.0F);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  bool empty() const noexcept { return data_.empty(); }
  std::size_t size() const noexcept { return data_.size(); }

  float& at(int x, int y, int c = 0) noexcept {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  float at(int x, int y, int c = 0) const noexcept {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }

  std::vector<float>& data() noexcept { return data_; }
  const std::vector<float>& data() const noexcept { return data_; }

  bool operator==(const Raster&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

/// Two single-channel IR images from the left and right neckband cameras.
struct FramePair {
  Raster left;
  Raster right;
  double timestamp_s = 0.0;
  std::string participant_id;
  std::string session_id;
};

}  // namespace neckface
