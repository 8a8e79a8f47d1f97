#include "neckface/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "neckface/error.hpp"

namespace neckface {

FaceErrors mae_face(std::span<const FaceState> predicted, std::span<const FaceState> truth) {
  if (predicted.size() != truth.size()) {
    throw InvalidArgument("mae_face: " + std::to_string(predicted.size()) + " predictions vs " +
                          std::to_string(truth.size()) + " truth frames");
  }
  FaceErrors e;
  if (truth.empty()) return e;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    double face = 0.0;
    for (std::size_t j = 0; j < kNumBlendshapes; ++j) {
      face += std::abs(truth[i].blendshapes[j] - predicted[i].blendshapes[j]);
    }
    e.mae_face += face / kNumBlendshapes;
    e.mae_orientation += (std::abs(truth[i].yaw - predicted[i].yaw) +
                          std::abs(truth[i].pitch - predicted[i].pitch) +
                          std::abs(truth[i].roll - predicted[i].roll)) /
                         3.0;
  }
  e.mae_face /= static_cast<double>(truth.size());
  e.mae_orientation /= static_cast<double>(truth.size());
  return e;
}

namespace {

void check_labels(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) {
    throw InvalidArgument("label length mismatch: " + std::to_string(predicted.size()) + " vs " +
                          std::to_string(truth.size()));
  }
  const auto bad = [](int v) { return v != 0 && v != 1; };
  if (std::any_of(predicted.begin(), predicted.end(), bad) ||
      std::any_of(truth.begin(), truth.end(), bad)) {
    throw InvalidArgument("labels must be 0 or 1");
  }
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

MetricReport macro_metrics(std::span<const int> predicted, std::span<const int> truth) {
  check_labels(predicted, truth);
  MetricReport r;
  for (std::size_t i = 0; i < truth.size(); ++i) ++r.confusion.counts[truth[i]][predicted[i]];
  const auto& c = r.confusion.counts;
  r.support = {c[0][0] + c[0][1], c[1][0] + c[1][1]};
  r.accuracy = ratio(c[0][0] + c[1][1], r.confusion.total());
  double p_sum = 0.0, r_sum = 0.0, f_sum = 0.0;
  for (int cls = 0; cls < 2; ++cls) {
    const std::size_t tp = c[cls][cls];
    const std::size_t predicted_pos = c[0][cls] + c[1][cls];
    const std::size_t actual_pos = c[cls][0] + c[cls][1];
    const double p = ratio(tp, predicted_pos);
    const double rc = ratio(tp, actual_pos);
    p_sum += p;
    r_sum += rc;
    f_sum += (p + rc) > 0.0 ? 2.0 * p * rc / (p + rc) : 0.0;
  }
  r.precision = p_sum / 2.0;
  r.recall = r_sum / 2.0;
  r.f1 = f_sum / 2.0;
  return r;
}

std::vector<int> margin_corrected(std::span<const int> predicted, std::span<const int> truth, int k,
                                  std::span<const std::size_t> segments) {
  check_labels(predicted, truth);
  if (k < 0) throw InvalidArgument("margin k must be non-negative");
  if (!segments.empty() && segments.size() != truth.size()) {
    throw InvalidArgument("segment tags must match label length");
  }
  const std::size_t n = truth.size();
  const auto seg = [&](std::size_t i) { return segments.empty() ? 0 : segments[i]; };
  std::vector<int> out(predicted.begin(), predicted.end());
  for (std::size_t i = 0; i < n; ++i) {
    if (predicted[i] == truth[i]) continue;
    const std::size_t lo = i >= static_cast<std::size_t>(k) ? i - k : 0;
    const std::size_t hi = std::min(n - 1, i + static_cast<std::size_t>(k));
    for (std::size_t j = lo; j <= hi; ++j) {
      if (seg(j) == seg(i) && truth[j] == predicted[i]) {
        out[i] = truth[i];
        break;
      }
    }
  }
  return out;
}

MetricReport margin_metrics(std::span<const int> predicted, std::span<const int> truth, int k,
                            std::span<const std::size_t> segments) {
  const auto corrected = margin_corrected(predicted, truth, k, segments);
  return macro_metrics(corrected, truth);
}

MeanSd mean_sd(std::span<const double> values) {
  MeanSd out;
  out.n = values.size();
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  if (values.size() < 2) return out;
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  return out;
}

}  // namespace neckface
