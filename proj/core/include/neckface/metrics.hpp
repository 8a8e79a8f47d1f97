#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "neckface/face_state.hpp"

namespace neckface {

struct FaceErrors {
  double mae_face = 0.0;         // mean over frames of the per-frame mean |error| over 52 blendshapes
  double mae_orientation = 0.0;  // same over yaw/pitch/roll
};

FaceErrors mae_face(std::span<const FaceState> predicted, std::span<const FaceState> truth);

/// Binary confusion counts. Index [truth][prediction].
struct Confusion {
  std::array<std::array<std::size_t, 2>, 2> counts{};
  std::size_t total() const noexcept {
    return counts[0][0] + counts[0][1] + counts[1][0] + counts[1][1];
  }
};

struct MetricReport {
  double accuracy = 0.0;
  double precision = 0.0;  // macro over both classes
  double recall = 0.0;
  double f1 = 0.0;
  Confusion confusion;
  std::array<std::size_t, 2> support{};  // true-class counts
  /// Margin-tolerant variants keyed by k.
  std::map<int, MetricReport> margin;
};

MetricReport macro_metrics(std::span<const int> predicted, std::span<const int> truth);

/// Prediction i counts as correct when it equals some truth label within
/// [i-k, i+k] of the same segment. `segments` tags each sample with its
/// (participant, stimulus) group; an empty span means one segment.
MetricReport margin_metrics(std::span<const int> predicted, std::span<const int> truth, int k,
                            std::span<const std::size_t> segments = {});

/// Predictions after margin correction; exposed for report diagnostics.
std::vector<int> margin_corrected(std::span<const int> predicted, std::span<const int> truth, int k,
                                  std::span<const std::size_t> segments = {});

/// Sample mean and sample standard deviation (n-1); SD is 0 for n < 2.
struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;
  std::size_t n = 0;
};
MeanSd mean_sd(std::span<const double> values);

}  // namespace neckface
