#include "neckface/face_state.hpp"

#include <algorithm>
#include <cmath>

#include "neckface/error.hpp"

namespace neckface {

int blendshape_index(std::string_view name) noexcept {
  for (std::size_t i = 0; i < kBlendshapeNames.size(); ++i) {
    if (kBlendshapeNames[i] == name) return static_cast<int>(i);
  }
  return -1;
}

std::array<double, kFaceStateDim> FaceState::to_array() const noexcept {
  std::array<double, kFaceStateDim> out{};
  std::copy(blendshapes.begin(), blendshapes.end(), out.begin());
  out[kNumBlendshapes] = yaw;
  out[kNumBlendshapes + 1] = pitch;
  out[kNumBlendshapes + 2] = roll;
  return out;
}

FaceState FaceState::from_values(std::span<const double> values) {
  if (values.size() != kFaceStateDim) {
    throw InvalidArgument("FaceState needs 55 values, got " + std::to_string(values.size()));
  }
  FaceState s;
  std::copy_n(values.begin(), kNumBlendshapes, s.blendshapes.begin());
  s.yaw = values[kNumBlendshapes];
  s.pitch = values[kNumBlendshapes + 1];
  s.roll = values[kNumBlendshapes + 2];
  return s;
}

bool FaceState::valid() const noexcept {
  for (double b : blendshapes) {
    if (!std::isfinite(b) || b < 0.0 || b > kBlendshapeMax) return false;
  }
  for (double a : {yaw, pitch, roll}) {
    if (!std::isfinite(a) || a < -kHeadAngleMax || a > kHeadAngleMax) return false;
  }
  return true;
}

FaceState FaceState::clamped() const noexcept {
  auto clamp_or_zero = [](double v, double lo, double hi) {
    return std::isfinite(v) ? std::clamp(v, lo, hi) : 0.0;
  };
  FaceState s;
  for (std::size_t i = 0; i < kNumBlendshapes; ++i) {
    s.blendshapes[i] = clamp_or_zero(blendshapes[i], 0.0, kBlendshapeMax);
  }
  s.yaw = clamp_or_zero(yaw, -kHeadAngleMax, kHeadAngleMax);
  s.pitch = clamp_or_zero(pitch, -kHeadAngleMax, kHeadAngleMax);
  s.roll = clamp_or_zero(roll, -kHeadAngleMax, kHeadAngleMax);
  return s;
}

std::array<double, kFaceStateDim> FaceState::normalized() const noexcept {
  auto out = to_array();
  for (std::size_t i = 0; i < kNumBlendshapes; ++i) out[i] /= kBlendshapeMax;
  for (std::size_t i = kNumBlendshapes; i < kFaceStateDim; ++i) out[i] /= kHeadAngleMax;
  return out;
}

}  // namespace neckface
