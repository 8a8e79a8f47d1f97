#include "neckface/reaction_dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <tuple>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include "neckface/error.hpp"
#include "neckface/io_util.hpp"

namespace neckface {

ReactionSequence label_frames(const Eigen::MatrixXd& features, std::span<const double> timestamps,
                              const StimulusSpec& spec, const std::string& participant_id) {
  if (static_cast<std::size_t>(features.rows()) != timestamps.size()) {
    throw InvalidArgument("label_frames: feature rows and timestamps differ in length");
  }
  if (spec.is_error() && !spec.failure_onset_s) {
    throw InvalidArgument("label_frames: error stimulus " + spec.stimulus_id + " has no onset");
  }
  ReactionSequence seq;
  seq.participant_id = participant_id;
  seq.stimulus_id = spec.stimulus_id;
  seq.kind = spec.kind;
  seq.fps = spec.fps;

  std::vector<Eigen::Index> keep;
  keep.reserve(timestamps.size());
  for (std::size_t i = 0; i < timestamps.size(); ++i) {
    if (!spec.is_error() || timestamps[i] >= *spec.failure_onset_s - 1e-9) {
      keep.push_back(static_cast<Eigen::Index>(i));
    }
  }
  seq.features.resize(static_cast<Eigen::Index>(keep.size()), features.cols());
  seq.timestamps.reserve(keep.size());
  seq.labels.assign(keep.size(), spec.is_error() ? 1 : 0);
  for (std::size_t r = 0; r < keep.size(); ++r) {
    seq.features.row(static_cast<Eigen::Index>(r)) = features.row(keep[r]);
    seq.timestamps.push_back(timestamps[keep[r]]);
  }
  return seq;
}

ReactionSequence label_frames(std::span<const FaceState> states, std::span<const double> timestamps,
                              const StimulusSpec& spec, const std::string& participant_id) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(states.size()), kFaceStateDim);
  for (std::size_t i = 0; i < states.size(); ++i) {
    const auto v = states[i].to_array();
    for (std::size_t j = 0; j < kFaceStateDim; ++j) m(static_cast<Eigen::Index>(i), j) = v[j];
  }
  return label_frames(m, timestamps, spec, participant_id);
}

AlignedStream align_stream(const Eigen::MatrixXd& features, int src_fps, int target_fps) {
  if (target_fps <= 0 || src_fps <= 0) throw InvalidArgument("fps must be positive");
  if (src_fps < target_fps) {
    throw InvalidArgument("align_stream does not upsample (" + std::to_string(src_fps) + " < " +
                          std::to_string(target_fps) + " fps)");
  }
  AlignedStream out;
  const auto n = static_cast<long long>(features.rows());
  if (n == 0) {
    out.features.resize(0, features.cols());
    return out;
  }
  // Grid points k / target strictly inside the stream span n / src.
  for (long long k = 0; k * src_fps < n * target_fps; ++k) {
    // Exact integer comparison of |j/src - k/target| for the two candidates.
    const long long num = k * src_fps;
    long long j = num / target_fps;
    if (j + 1 < n) {
      const long long d0 = num - j * target_fps;
      const long long d1 = (j + 1) * target_fps - num;
      if (d1 < d0) ++j;
    }
    j = std::min(j, n - 1);
    out.source_index.push_back(static_cast<std::size_t>(j));
    out.timestamps.push_back(static_cast<double>(k) / target_fps);
  }
  out.features.resize(static_cast<Eigen::Index>(out.source_index.size()), features.cols());
  for (std::size_t r = 0; r < out.source_index.size(); ++r) {
    out.features.row(static_cast<Eigen::Index>(r)) =
        features.row(static_cast<Eigen::Index>(out.source_index[r]));
  }
  return out;
}

std::vector<std::size_t> window_offsets(std::size_t length, std::size_t interval_len,
                                        std::size_t stride) {
  if (interval_len < 1 || stride < 1) throw InvalidArgument("interval length and stride must be >= 1");
  std::vector<std::size_t> out;
  if (length < interval_len) return out;
  out.reserve((length - interval_len) / stride + 1);
  for (std::size_t s = 0; s + interval_len <= length; s += stride) out.push_back(s);
  return out;
}

int mode_label(std::span<const int> labels, int tie_label) {
  const auto ones = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  const std::size_t zeros = labels.size() - ones;
  if (ones == zeros) return tie_label;
  return ones > zeros ? 1 : 0;
}

std::vector<LabeledWindow> make_windows(const ReactionSequence& seq, int interval_len, int stride,
                                        int tie_label) {
  if (interval_len < 1 || stride < 1) throw InvalidArgument("interval length and stride must be >= 1");
  const auto offsets = window_offsets(seq.length(), static_cast<std::size_t>(interval_len),
                                      static_cast<std::size_t>(stride));
  std::vector<LabeledWindow> out;
  out.reserve(offsets.size());
  for (std::size_t start : offsets) {
    LabeledWindow w;
    w.matrix = seq.features.block(static_cast<Eigen::Index>(start), 0, interval_len,
                                  seq.features.cols())
                   .transpose()
                   .cast<float>();
    w.label = mode_label(std::span<const int>(seq.labels).subspan(start, interval_len), tie_label);
    w.origin = {seq.participant_id, seq.stimulus_id, start};
    out.push_back(std::move(w));
  }
  return out;
}

int retained_components(std::span<const double> eigenvalues_desc, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) throw InvalidArgument("threshold must be in (0, 1]");
  double total = 0.0;
  for (double v : eigenvalues_desc) total += std::max(v, 0.0);
  if (eigenvalues_desc.empty()) return 0;
  if (total <= 0.0) return 1;
  double cum = 0.0;
  for (std::size_t i = 0; i < eigenvalues_desc.size(); ++i) {
    cum += std::max(eigenvalues_desc[i], 0.0);
    if (cum / total >= threshold) return static_cast<int>(i + 1);
  }
  return static_cast<int>(eigenvalues_desc.size());
}

Projector fit_projector(const Eigen::MatrixXd& rows, double var_threshold, bool standardize) {
  if (rows.rows() < 2) throw InvalidArgument("fit_projector needs at least 2 rows");
  if (!(var_threshold > 0.0 && var_threshold <= 1.0)) {
    throw InvalidArgument("variance threshold must be in (0, 1]");
  }
  Projector p;
  p.standardize = standardize;
  p.threshold = var_threshold;
  p.mean = rows.colwise().mean().transpose();
  const Eigen::MatrixXd centered = rows.rowwise() - p.mean.transpose();
  const double denom = static_cast<double>(rows.rows() - 1);
  p.scale = Eigen::VectorXd::Ones(rows.cols());
  if (standardize) {
    for (Eigen::Index c = 0; c < rows.cols(); ++c) {
      const double sd = std::sqrt(centered.col(c).squaredNorm() / denom);
      p.scale(c) = sd > 1e-12 ? sd : 1.0;
    }
  }
  const Eigen::MatrixXd z = centered * p.scale.cwiseInverse().asDiagonal();
  const Eigen::MatrixXd cov = (z.transpose() * z) / denom;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw TrainingError("PCA eigendecomposition failed");
  // Eigen returns ascending order.
  p.eigenvalues = solver.eigenvalues().reverse();
  const Eigen::MatrixXd vectors = solver.eigenvectors().rowwise().reverse();
  p.components = retained_components(
      std::span<const double>(p.eigenvalues.data(), static_cast<std::size_t>(p.eigenvalues.size())),
      var_threshold);
  p.axes = vectors.leftCols(p.components);
  return p;
}

Eigen::MatrixXd apply_projector(const Projector& projector, const Eigen::MatrixXd& rows) {
  if (rows.cols() != projector.mean.size()) {
    throw InvalidArgument("apply_projector: expected " + std::to_string(projector.mean.size()) +
                          " features, got " + std::to_string(rows.cols()));
  }
  const Eigen::MatrixXd z =
      (rows.rowwise() - projector.mean.transpose()) * projector.scale.cwiseInverse().asDiagonal();
  return z * projector.axes;
}

Eigen::MatrixXd window_rows(std::span<const LabeledWindow> windows) {
  if (windows.empty()) return {};
  const Eigen::Index f = windows.front().matrix.rows();
  Eigen::Index total = 0;
  for (const auto& w : windows) total += w.matrix.cols();
  Eigen::MatrixXd out(total, f);
  Eigen::Index r = 0;
  for (const auto& w : windows) {
    out.middleRows(r, w.matrix.cols()) = w.matrix.transpose().cast<double>();
    r += w.matrix.cols();
  }
  return out;
}

std::vector<LabeledWindow> project_windows(const Projector& projector,
                                           std::span<const LabeledWindow> windows) {
  std::vector<LabeledWindow> out;
  out.reserve(windows.size());
  for (const auto& w : windows) {
    LabeledWindow p;
    p.label = w.label;
    p.origin = w.origin;
    p.matrix = apply_projector(projector, w.matrix.transpose().cast<double>()).transpose().cast<float>();
    out.push_back(std::move(p));
  }
  return out;
}

void WindowDataset::sort() {
  std::stable_sort(windows.begin(), windows.end(), [](const LabeledWindow& a, const LabeledWindow& b) {
    return std::tie(a.origin.participant_id, a.origin.stimulus_id, a.origin.start) <
           std::tie(b.origin.participant_id, b.origin.stimulus_id, b.origin.start);
  });
}

void write_window_file(const std::filesystem::path& path, const WindowDataset& dataset) {
  WindowDataset sorted = dataset;
  sorted.sort();
  std::string out;
  out += fmt::format("# neckface-windows F={} IL={} S={} registry={} count={}\n", dataset.features,
                     dataset.interval_len, dataset.stride, dataset.registry,
                     dataset.windows.size());
  out += "participant,stimulus,offset,label";
  for (int f = 0; f < dataset.features; ++f) {
    for (int t = 0; t < dataset.interval_len; ++t) out += fmt::format(",f{}_t{}", f, t);
  }
  out += '\n';
  for (const auto& w : sorted.windows) {
    if (w.matrix.rows() != dataset.features || w.matrix.cols() != dataset.interval_len) {
      throw InvalidArgument("window shape does not match dataset header");
    }
    out += fmt::format("{},{},{},{}", w.origin.participant_id, w.origin.stimulus_id,
                       w.origin.start, w.label);
    for (int f = 0; f < dataset.features; ++f) {
      for (int t = 0; t < dataset.interval_len; ++t) out += fmt::format(",{}", w.matrix(f, t));
    }
    out += '\n';
  }
  atomic_write_text(path, out);
}

WindowDataset read_window_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string(), "cannot open window file");
  std::string header;
  std::getline(in, header);
  WindowDataset ds;
  char registry[64] = {0};
  std::size_t count = 0;
  if (std::sscanf(header.c_str(), "# neckface-windows F=%d IL=%d S=%d registry=%63s count=%zu",
                  &ds.features, &ds.interval_len, &ds.stride, registry, &count) != 5) {
    throw DataError(path.string() + ": malformed window file header");
  }
  ds.registry = registry;
  std::string line;
  std::getline(in, line);  // column names
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string_view> cells;
    std::string_view sv(line);
    std::size_t pos = 0;
    while (true) {
      const std::size_t next = sv.find(',', pos);
      cells.push_back(sv.substr(pos, next == std::string_view::npos ? next : next - pos));
      if (next == std::string_view::npos) break;
      pos = next + 1;
    }
    const std::size_t expected = 4 + static_cast<std::size_t>(ds.features) * ds.interval_len;
    if (cells.size() != expected) throw DataError(path.string() + ": wrong column count");
    LabeledWindow w;
    w.origin.participant_id = std::string(cells[0]);
    w.origin.stimulus_id = std::string(cells[1]);
    w.origin.start = std::stoull(std::string(cells[2]));
    w.label = std::stoi(std::string(cells[3]));
    w.matrix.resize(ds.features, ds.interval_len);
    std::size_t c = 4;
    for (int f = 0; f < ds.features; ++f) {
      for (int t = 0; t < ds.interval_len; ++t) w.matrix(f, t) = std::stof(std::string(cells[c++]));
    }
    ds.windows.push_back(std::move(w));
  }
  if (ds.windows.size() != count) throw DataError(path.string() + ": window count mismatch");
  return ds;
}

}  // namespace neckface
