#include "neckface/oracle.hpp"

#include <algorithm>
#include <numeric>

#include "neckface/error.hpp"

namespace neckface {

namespace {

struct Stacked {
  Eigen::MatrixXd features;
  std::vector<int> labels;
};

Stacked stack(std::span<const ReactionSequence> sequences) {
  Stacked s;
  Eigen::Index rows = 0;
  Eigen::Index cols = -1;
  for (const auto& seq : sequences) {
    rows += seq.features.rows();
    if (cols < 0) cols = seq.features.cols();
    if (seq.features.cols() != cols) throw InvalidArgument("sequences differ in feature count");
  }
  s.features.resize(rows, std::max<Eigen::Index>(cols, 0));
  Eigen::Index r = 0;
  for (const auto& seq : sequences) {
    s.features.middleRows(r, seq.features.rows()) = seq.features;
    r += seq.features.rows();
    s.labels.insert(s.labels.end(), seq.labels.begin(), seq.labels.end());
  }
  return s;
}

}  // namespace

MetricReport evaluate_rule(const ThresholdRule& rule, std::span<const ReactionSequence> sequences) {
  std::vector<int> pred;
  std::vector<int> truth;
  for (const auto& seq : sequences) {
    for (Eigen::Index i = 0; i < seq.features.rows(); ++i) {
      pred.push_back(seq.features(i, rule.channel) > rule.threshold ? 1 : 0);
    }
    truth.insert(truth.end(), seq.labels.begin(), seq.labels.end());
  }
  return macro_metrics(pred, truth);
}

OracleReport oracle_threshold_detector(std::span<const ReactionSequence> train,
                                       std::span<const ReactionSequence> test, int grid_points) {
  if (train.empty()) throw InvalidArgument("oracle needs training sequences");
  if (grid_points < 2) throw InvalidArgument("oracle grid needs at least 2 points");
  const Stacked data = stack(train);
  const auto n = static_cast<std::size_t>(data.labels.size());
  const auto positives = static_cast<std::size_t>(std::count(data.labels.begin(), data.labels.end(), 1));
  if (positives == 0 || positives == n) {
    throw DegenerateLabels("oracle training data holds a single class");
  }

  OracleReport best;
  std::size_t best_correct = 0;
  bool have_best = false;
  std::vector<std::size_t> order(n);
  std::vector<std::size_t> ones_prefix(n + 1);
  for (Eigen::Index c = 0; c < data.features.cols(); ++c) {
    const auto col = data.features.col(c);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return col(a) < col(b); });
    for (std::size_t i = 0; i < n; ++i) ones_prefix[i + 1] = ones_prefix[i] + data.labels[order[i]];
    const double lo = col.minCoeff();
    const double hi = col.maxCoeff();
    for (int g = 0; g < grid_points; ++g) {
      const double thr = lo + (hi - lo) * g / (grid_points - 1);
      // Frames at or below thr are predicted 0.
      const auto below = static_cast<std::size_t>(
          std::upper_bound(order.begin(), order.end(), thr,
                           [&](double t, std::size_t idx) { return t < col(idx); }) -
          order.begin());
      const std::size_t ones_below = ones_prefix[below];
      const std::size_t correct = (below - ones_below) + (positives - ones_below);
      if (!have_best || correct > best_correct) {
        have_best = true;
        best_correct = correct;
        best.rule = {static_cast<int>(c), thr};
      }
    }
  }
  best.train = evaluate_rule(best.rule, train);
  if (!test.empty()) best.test = evaluate_rule(best.rule, test);
  return best;
}

}  // namespace neckface
