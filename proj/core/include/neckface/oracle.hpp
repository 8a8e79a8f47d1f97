#pragma once

#include <span>

#include "neckface/metrics.hpp"
#include "neckface/reaction_dataset.hpp"

namespace neckface {

/// "label 1 iff features[channel] > threshold"
struct ThresholdRule {
  int channel = 0;
  double threshold = 0.0;

  int predict(const Eigen::RowVectorXd& frame) const { return frame(channel) > threshold ? 1 : 0; }
};

struct OracleReport {
  ThresholdRule rule;
  MetricReport train;
  MetricReport test;
};

/// Exhaustive (channel, threshold) search maximizing frame-level training accuracy.
/// Thresholds form a fixed grid of `grid_points` evenly spaced values between each
/// channel's training min and max. Ties keep the lowest channel, then lowest threshold.
OracleReport oracle_threshold_detector(std::span<const ReactionSequence> train,
                                       std::span<const ReactionSequence> test,
                                       int grid_points = 256);

/// Applies a rule to every frame of every sequence.
MetricReport evaluate_rule(const ThresholdRule& rule, std::span<const ReactionSequence> sequences);

}  // namespace neckface
