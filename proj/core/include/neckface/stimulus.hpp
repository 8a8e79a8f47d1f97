#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace neckface {

enum class StimulusKind { kControl, kHumanError, kRobotError };

std::string to_string(StimulusKind kind);
StimulusKind stimulus_kind_from_string(const std::string& name);

/// Per-frame label. Pre-onset frames of error videos are generated but never used.
enum class FrameLabel : std::int8_t { kDiscard = -1, kNeutral = 0, kError = 1 };

struct StimulusSpec {
  std::string stimulus_id;
  StimulusKind kind = StimulusKind::kControl;
  double duration_s = 0.0;
  std::optional<double> failure_onset_s;
  int fps = 12;

  bool is_error() const noexcept { return kind != StimulusKind::kControl; }
  /// round(duration * fps)
  std::size_t frame_count() const;
  /// First frame index whose timestamp is at or after the failure onset.
  std::size_t onset_frame() const;
  /// Throws InvalidArgument when kind/onset/duration are inconsistent.
  void validate() const;
};

/// Labels for every generated frame of a stimulus session.
std::vector<FrameLabel> frame_labels(const StimulusSpec& spec);

/// Default stimulus set: ten videos of each kind.
struct StimulusSetOptions {
  double mean_duration_s = 13.69;
  double sd_duration_s = 7.77;
  double min_duration_s = 4.0;
  double max_duration_s = 40.0;
  /// Failure onset as a fraction of duration, stratified over this range.
  double onset_fraction_lo = 0.35;
  double onset_fraction_hi = 0.65;
  int fps = 12;
  int per_kind = 10;
};

/// Durations are stratified Gaussian quantiles, clipped to [min, max]. Ranked by
/// length, odd ranks among the 2*per_kind longest become controls, which makes
/// controls longer than error videos as the reference class counts require.
std::vector<StimulusSpec> default_stimulus_set(std::uint64_t seed,
                                               const StimulusSetOptions& options = {});

}  // namespace neckface
