#pragma once

// Slow, obviously-correct reference implementations. Written without calling into the
// library so the tests compare two independent derivations.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "neckface/face_state.hpp"

namespace oracle {

struct Mae {
  double face = 0.0, orient = 0.0;
};

inline Mae mae(const std::vector<neckface::FaceState>& pred, const std::vector<neckface::FaceState>& truth) {
  Mae m;
  if (truth.empty()) return m;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto a = pred[i].to_array();
    const auto b = truth[i].to_array();
    double f = 0.0, o = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) (j < 52 ? f : o) += std::fabs(a[j] - b[j]);
    m.face += f / 52.0;
    m.orient += o / 3.0;
  }
  m.face /= static_cast<double>(truth.size());
  m.orient /= static_cast<double>(truth.size());
  return m;
}

struct Macro {
  double accuracy = 0.0, precision = 0.0, recall = 0.0, f1 = 0.0;
};

inline Macro macro(const std::vector<int>& pred, const std::vector<int>& truth) {
  Macro m;
  const double n = static_cast<double>(truth.size());
  double hits = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += pred[i] == truth[i];
  m.accuracy = n > 0 ? hits / n : 0.0;
  for (int c : {0, 1}) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      tp += pred[i] == c && truth[i] == c;
      fp += pred[i] == c && truth[i] != c;
      fn += pred[i] != c && truth[i] == c;
    }
    const double p = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double r = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    m.precision += p / 2.0;
    m.recall += r / 2.0;
    m.f1 += (p + r > 0 ? 2.0 * p * r / (p + r) : 0.0) / 2.0;
  }
  return m;
}

// Prediction i is forgiven when any truth label within k steps of the same segment matches it.
inline std::vector<int> forgive(const std::vector<int>& pred, const std::vector<int>& truth, int k,
                                const std::vector<std::size_t>& seg) {
  std::vector<int> out = pred;
  const long n = static_cast<long>(truth.size());
  for (long i = 0; i < n; ++i) {
    for (long j = i - k; j <= i + k; ++j) {
      if (j < 0 || j >= n) continue;
      const bool same = seg.empty() || seg[static_cast<std::size_t>(j)] == seg[static_cast<std::size_t>(i)];
      if (same && truth[static_cast<std::size_t>(j)] == pred[static_cast<std::size_t>(i)]) {
        out[static_cast<std::size_t>(i)] = truth[static_cast<std::size_t>(i)];
      }
    }
  }
  return out;
}

struct Window {
  std::size_t start;
  int label;
};

// Every start s with s % stride == 0 whose window fits, labeled by majority with ties to `tie`.
inline std::vector<Window> windows(const std::vector<int>& labels, std::size_t il, std::size_t stride, int tie) {
  std::vector<Window> out;
  for (std::size_t s = 0; s + il <= labels.size(); ++s) {
    if (s % stride != 0) continue;
    std::size_t ones = 0;
    for (std::size_t t = s; t < s + il; ++t) ones += labels[t] == 1;
    const std::size_t zeros = il - ones;
    out.push_back({s, ones > zeros ? 1 : (zeros > ones ? 0 : tie)});
  }
  return out;
}

// Cyclic Jacobi sweeps on a symmetric matrix; returns eigenvalues sorted descending.
inline std::vector<double> jacobi_eigenvalues(std::vector<std::vector<double>> a) {
  const std::size_t n = a.size();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::fabs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = a[i][i];
  std::sort(ev.rbegin(), ev.rend());
  return ev;
}

inline int components_for(const std::vector<double>& ev_desc, double threshold) {
  double total = 0.0;
  for (double v : ev_desc) total += std::max(v, 0.0);
  double acc = 0.0;
  for (std::size_t m = 0; m < ev_desc.size(); ++m) {
    acc += std::max(ev_desc[m], 0.0);
    if (acc >= threshold * total) return static_cast<int>(m + 1);
  }
  return static_cast<int>(ev_desc.size());
}

// Sample covariance (n - 1) of row-major data.
inline std::vector<std::vector<double>> covariance(const std::vector<std::vector<double>>& rows) {
  const std::size_t n = rows.size(), f = rows[0].size();
  std::vector<double> mean(f, 0.0);
  for (const auto& r : rows)
    for (std::size_t j = 0; j < f; ++j) mean[j] += r[j] / static_cast<double>(n);
  std::vector<std::vector<double>> c(f, std::vector<double>(f, 0.0));
  for (const auto& r : rows)
    for (std::size_t i = 0; i < f; ++i)
      for (std::size_t j = 0; j < f; ++j) c[i][j] += (r[i] - mean[i]) * (r[j] - mean[j]) / static_cast<double>(n - 1);
  return c;
}

// Nearest source frame for each target tick k / target_fps, ties to the earlier frame.
inline std::vector<std::size_t> nearest_frames(std::size_t n_src, int src_fps, int target_fps) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0;; ++k) {
    const double t = static_cast<double>(k) / target_fps;
    if (t >= static_cast<double>(n_src) / src_fps - 1e-12) break;
    std::size_t best = 0;
    double best_d = 1e300;
    for (std::size_t i = 0; i < n_src; ++i) {
      const double d = std::fabs(static_cast<double>(i) / src_fps - t);
      if (d < best_d - 1e-12) {
        best_d = d;
        best = i;
      }
    }
    out.push_back(best);
  }
  return out;
}

}  // namespace oracle
