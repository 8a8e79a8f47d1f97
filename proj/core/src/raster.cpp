#include "neckface/raster.hpp"

#include "neckface/error.hpp"

namespace neckface {

Raster::Raster(int width, int height, int channels, float fill)
    : width_(width), height_(height), channels_(channels) {
  if (width <= 0 || height <= 0 || channels <= 0) {
    throw InvalidArgument("raster dimensions must be positive");
  }
  data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

}  // namespace neckface
