#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string_view>

namespace neckface {

inline constexpr std::size_t kNumBlendshapes = 52;
inline constexpr std::size_t kNumHeadAngles = 3;
inline constexpr std::size_t kFaceStateDim = kNumBlendshapes + kNumHeadAngles;

inline constexpr double kBlendshapeMax = 1000.0;
inline constexpr double kHeadAngleMax = 90.0;

/// Registry version stamped into checkpoints and window files. Bump when the
/// name order below changes.
inline constexpr std::string_view kBlendshapeRegistryVersion = "arkit52-v1";

/// ARKit blendshape order. Index i here is column b<i> in truth CSVs.
inline constexpr std::array<std::string_view, kNumBlendshapes> kBlendshapeNames = {
    "eyeBlinkLeft",      "eyeLookDownLeft",  "eyeLookInLeft",      "eyeLookOutLeft",
    "eyeLookUpLeft",     "eyeSquintLeft",    "eyeWideLeft",        "eyeBlinkRight",
    "eyeLookDownRight",  "eyeLookInRight",   "eyeLookOutRight",    "eyeLookUpRight",
    "eyeSquintRight",    "eyeWideRight",     "jawForward",         "jawLeft",
    "jawRight",          "jawOpen",          "mouthClose",         "mouthFunnel",
    "mouthPucker",       "mouthLeft",        "mouthRight",         "mouthSmileLeft",
    "mouthSmileRight",   "mouthFrownLeft",   "mouthFrownRight",    "mouthDimpleLeft",
    "mouthDimpleRight",  "mouthStretchLeft", "mouthStretchRight",  "mouthRollLower",
    "mouthRollUpper",    "mouthShrugLower",  "mouthShrugUpper",    "mouthPressLeft",
    "mouthPressRight",   "mouthLowerDownLeft", "mouthLowerDownRight", "mouthUpperUpLeft",
    "mouthUpperUpRight", "browDownLeft",     "browDownRight",      "browInnerUp",
    "browOuterUpLeft",   "browOuterUpRight", "cheekPuff",          "cheekSquintLeft",
    "cheekSquintRight",  "noseSneerLeft",    "noseSneerRight",     "tongueOut",
};

inline constexpr std::array<std::string_view, kNumHeadAngles> kHeadAngleNames = {"yaw", "pitch",
                                                                                  "roll"};

/// Returns the registry index of a blendshape name, or -1.
int blendshape_index(std::string_view name) noexcept;

/// 52 blendshape activations on a 0..1000 scale plus head yaw/pitch/roll in degrees.
struct FaceState {
  std::array<double, kNumBlendshapes> blendshapes{};
  double yaw = 0.0;
  double pitch = 0.0;
  double roll = 0.0;

  std::array<double, kFaceStateDim> to_array() const noexcept;
  static FaceState from_values(std::span<const double> values);

  /// All values in their documented ranges and finite.
  bool valid() const noexcept;
  FaceState clamped() const noexcept;

  /// Blendshapes divided by 1000, angles by 90.
  std::array<double, kFaceStateDim> normalized() const noexcept;

  bool operator==(const FaceState&) const = default;
};

}  // namespace neckface
