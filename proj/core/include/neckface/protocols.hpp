#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "neckface/detectors.hpp"
#include "neckface/metrics.hpp"
#include "neckface/reaction_dataset.hpp"
#include "neckface/synthetic_world.hpp"

namespace neckface {

/// One participant's windows. Training uses `train` (dense stride); validation and test use
/// `eval` (sparser stride). Both may hold the same windows.
struct ParticipantWindows {
  std::string participant_id;
  SampleSet train;
  SampleSet eval;
};

struct WindowedDataset {
  std::string name;  // e.g. "neck", "open"
  int features = 0;
  int interval_len = 0;
  std::vector<ParticipantWindows> participants;

  std::vector<std::string> participant_ids() const;
  const ParticipantWindows& at(const std::string& participant_id) const;
  std::string digest() const;
};

struct WindowingOptions {
  int interval_len = 80;
  int train_stride = 3;
  int eval_stride = 5;
  int tie_label = 1;
};

/// Ground-truth face states of every stimulus session, labeled. Stands in for a perfect facemap.
std::vector<ReactionSequence> truth_sequences(const Corpus& corpus);
/// The 49-channel stream of every stimulus session, captured at its own rate and resampled.
std::vector<ReactionSequence> open_feature_sequences(const Corpus& corpus);

/// Labels and windows every sequence, grouping by participant in first-seen order.
WindowedDataset build_windowed_dataset(std::string name, std::span<const ReactionSequence> sequences,
                                       const WindowingOptions& options);

struct FoldAssignment {
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;
};

struct FoldPlan {
  int n_folds = 0;
  std::uint64_t seed = 0;
  std::vector<FoldAssignment> folds;

  /// Throws InvalidArgument when a fold reuses a participant or test sets overlap.
  void validate() const;
  nlohmann::json to_json() const;
};

/// Test group size round(split[2] * N) (at least 1), validation round(split[1] * N) (at least 1),
/// the rest train. Test groups are consecutive blocks of a seeded shuffle, so they never overlap.
FoldPlan make_participant_folds(std::span<const std::string> participants, int n_folds = 5,
                                std::array<double, 3> split = {0.7, 0.2, 0.1}, std::uint64_t seed = 0);

/// Leave-one-participant-out: N folds, each with one test participant.
FoldPlan make_leave_one_out_folds(std::span<const std::string> participants, double val_fraction = 0.2,
                                  std::uint64_t seed = 0);

struct GridPoint {
  std::string name;
  DetectorSpec spec;
  DetectSchedule schedule;
};

enum class EpochSelection { kTest, kValidation };

struct ExperimentOptions {
  std::vector<int> margin_ks{1, 3};
  /// The epoch (and grid point) is chosen on test accuracy by default; kValidation gives an
  /// unbiased estimate instead.
  EpochSelection selection = EpochSelection::kTest;
  /// Only the first fold is run (frame models are selected on a single fold).
  bool single_fold = false;
  /// Fit a 95%-variance PCA projector on each fold's training frames.
  bool pca = false;
  double pca_threshold = 0.95;
  /// When set, every fold writes fold-<k>/{checkpoint, metrics.json, curves.csv} here.
  std::filesystem::path run_dir;
};

struct FoldEntry {
  std::string config;
  int fold = 0;
  std::string group;        // budget label in sweeps
  std::string participant;  // sweeps only
  std::vector<std::string> train_participants;  // read back from window origins
  std::vector<std::string> val_participants;
  std::vector<std::string> test_participants;
  std::size_t n_train = 0, n_val = 0, n_test = 0;
  MetricReport test;
  std::optional<double> before_accuracy;  // transfer: accuracy before head training
  double majority_accuracy = 0.0;         // accuracy of always predicting the training majority
  DetectorHistory history;
  std::string fingerprint;
  bool skipped = false;
  std::string warning;
};

struct ConfigSummary {
  std::string config;
  std::string group;
  std::size_t folds = 0;
  std::map<std::string, MeanSd> metrics;  // accuracy, precision, recall, f1, margin_k<k>_accuracy ...
};

struct ExperimentReport {
  std::string protocol;  // cross_participant, transfer, single_participant
  std::string dataset;
  std::string data_fingerprint;
  std::string parent_fingerprint;
  nlohmann::json config = nlohmann::json::object();
  std::vector<FoldEntry> folds;
  std::vector<ConfigSummary> summaries;
  std::string best_config;
  std::vector<std::string> warnings;

  const ConfigSummary& summary(const std::string& config, const std::string& group = "") const;
  nlohmann::json to_json() const;
};

/// Fold entries whose recorded train/val participants intersect their test participants.
std::vector<std::string> leakage_violations(const ExperimentReport& report);

/// Per grid point: train on each fold's train participants, evaluate its test participants,
/// summarize M +- SD across folds; the grid point with the best mean test accuracy wins.
ExperimentReport run_cross_participant(const WindowedDataset& dataset, std::span<const GridPoint> grid,
                                       const FoldPlan& plan, const ExperimentOptions& options = {});

/// Fine-tunes the parent's last layer on each fold of the destination dataset.
/// Throws InvalidArgument when the parent is missing or untrained.
ExperimentReport run_transfer(const Detector* parent, const WindowedDataset& destination,
                              const FoldPlan& plan, const DetectSchedule& schedule,
                              const ExperimentOptions& options = {});

struct SweepOptions {
  std::vector<double> budgets{0.05, 0.15, 0.25, 0.35, 0.45};
  double val_fraction = 0.20;
  std::uint64_t seed = 0;
  /// Start each participant from this detector's weights instead of a fresh build.
  const Detector* warm_start = nullptr;
};

/// Per participant and budget b: train on a random b share of the participant's windows,
/// validate on 20%, test on the remainder. Budgets whose training share lacks a class are
/// skipped with a warning.
ExperimentReport run_single_participant_sweep(const WindowedDataset& dataset, const GridPoint& point,
                                              const SweepOptions& sweep, const ExperimentOptions& options = {});

/// Macro metrics plus margin metrics at each k. Windows must be in time order within each
/// (participant, stimulus) run, which is how the windowed datasets are built.
MetricReport evaluate_detector(const Detector& detector, const SampleSet& samples, std::span<const int> margin_ks);
nlohmann::json metric_report_json(const MetricReport& report);

/// Frames of the given samples as rows, for projector fitting.
Eigen::MatrixXd sample_rows(const SampleSet& samples);
SampleSet project_samples(const Projector& projector, const SampleSet& samples);

std::string budget_label(double budget);

}  // namespace neckface
