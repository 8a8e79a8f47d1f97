#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "neckface/face_state.hpp"
#include "neckface/stimulus.hpp"

namespace neckface {

inline constexpr int kReactionFps = 12;

/// Kept frames of one (participant, stimulus) viewing with binary labels.
struct ReactionSequence {
  std::string participant_id;
  std::string stimulus_id;
  StimulusKind kind = StimulusKind::kControl;
  int fps = kReactionFps;
  Eigen::MatrixXd features;  // T x F
  std::vector<double> timestamps;
  std::vector<int> labels;

  std::size_t length() const noexcept { return labels.size(); }
  std::size_t feature_count() const noexcept { return static_cast<std::size_t>(features.cols()); }
};

/// Controls keep every frame as 0; error videos keep frames at/after the onset as 1.
ReactionSequence label_frames(const Eigen::MatrixXd& features, std::span<const double> timestamps,
                              const StimulusSpec& spec, const std::string& participant_id);
ReactionSequence label_frames(std::span<const FaceState> states, std::span<const double> timestamps,
                              const StimulusSpec& spec, const std::string& participant_id);

struct AlignedStream {
  Eigen::MatrixXd features;
  std::vector<std::size_t> source_index;
  std::vector<double> timestamps;  // target grid k / target_fps
};

/// Nearest-timestamp undersampling from src_fps to target_fps. Ties pick the earlier frame.
AlignedStream align_stream(const Eigen::MatrixXd& features, int src_fps,
                           int target_fps = kReactionFps);

struct WindowOrigin {
  std::string participant_id;
  std::string stimulus_id;
  std::size_t start = 0;

  bool operator==(const WindowOrigin&) const = default;
};

struct LabeledWindow {
  Eigen::MatrixXf matrix;  // F x IL
  int label = 0;
  WindowOrigin origin;
};

/// Start offsets 0, S, 2S, ... with start + IL <= T.
std::vector<std::size_t> window_offsets(std::size_t length, std::size_t interval_len,
                                        std::size_t stride);

/// Most frequent label; ties resolve to tie_label.
int mode_label(std::span<const int> labels, int tie_label = 1);

std::vector<LabeledWindow> make_windows(const ReactionSequence& seq, int interval_len, int stride,
                                        int tie_label = 1);

/// z-score statistics and principal axes fitted on training rows only.
struct Projector {
  bool standardize = true;
  double threshold = 0.95;
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;       // std, or 1 for zero-variance features
  Eigen::VectorXd eigenvalues;  // all, descending
  Eigen::MatrixXd axes;         // F x m
  int components = 0;

  int input_dim() const noexcept { return static_cast<int>(mean.size()); }
};

/// Smallest m whose cumulative eigenvalue share reaches `threshold`.
int retained_components(std::span<const double> eigenvalues_desc, double threshold);

/// `rows` is N x F with N >= 2.
Projector fit_projector(const Eigen::MatrixXd& rows, double var_threshold = 0.95,
                        bool standardize = true);
/// N x F -> N x m.
Eigen::MatrixXd apply_projector(const Projector& projector, const Eigen::MatrixXd& rows);

/// Stacks every time step of every window as an (N*IL) x F row matrix.
Eigen::MatrixXd window_rows(std::span<const LabeledWindow> windows);
std::vector<LabeledWindow> project_windows(const Projector& projector,
                                           std::span<const LabeledWindow> windows);

struct WindowDataset {
  int features = 0;
  int interval_len = 0;
  int stride = 0;
  std::string registry{kBlendshapeRegistryVersion};
  std::vector<LabeledWindow> windows;

  /// Orders windows by (participant, stimulus, offset).
  void sort();
};

void write_window_file(const std::filesystem::path& path, const WindowDataset& dataset);
WindowDataset read_window_file(const std::filesystem::path& path);

}  // namespace neckface
