#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "neckface/reaction_dataset.hpp"
#include "neckface/synthetic_world.hpp"

namespace neckface {

nlohmann::json world_to_json(const WorldConfig& config);
WorldConfig world_from_json(const nlohmann::json& j);
nlohmann::json profile_to_json(const ParticipantProfile& profile);
ParticipantProfile profile_from_json(const nlohmann::json& j);
nlohmann::json stimulus_to_json(const StimulusSpec& spec);
StimulusSpec stimulus_from_json(const nlohmann::json& j);

/// Which sessions get their IR frames materialized as PNG files. Sessions without PNGs
/// are re-rendered from truth.csv and the recorded frame seed, which is exact.
enum class FrameExport { kNone, kCalibration, kAll };
FrameExport frame_export_from_string(const std::string& name);

struct CorpusWriteOptions {
  FrameExport frames = FrameExport::kNone;
  /// Also write the 49-channel open.csv next to each stimulus truth.csv.
  bool open_features = true;
};

struct ManifestSession {
  std::string participant_id;
  std::string session_id;  // "calibration" or the stimulus id
  std::size_t frames = 0;
  int fps = 0;
  std::map<std::string, std::string> checksums;  // path relative to the root -> sha256
};

struct DatasetManifest {
  int format_version = 1;
  std::uint64_t seed = 0;
  nlohmann::json options = nlohmann::json::object();
  std::vector<std::string> participants;
  std::vector<ManifestSession> sessions;
  std::size_t neutral_frames = 0;
  std::size_t error_frames = 0;

  std::size_t total_frames() const noexcept { return neutral_frames + error_frames; }
  nlohmann::json to_json() const;
  static DatasetManifest from_json(const nlohmann::json& j);
  /// Digest of every checksum, usable as the data fingerprint of a run.
  std::string digest() const;
};

/// Writes the dataset layout under `root` and returns the manifest written to root/manifest.json.
DatasetManifest write_corpus(const Corpus& corpus, const std::filesystem::path& root,
                             const CorpusWriteOptions& options = {});

DatasetManifest read_manifest(const std::filesystem::path& root);
/// Recomputes every file checksum; DataError names the first file that differs or is missing.
void verify_manifest(const std::filesystem::path& root, const DatasetManifest& manifest);

/// Reads the corpus back. Checksums are verified first unless `verify` is false.
Corpus load_corpus(const std::filesystem::path& root, bool verify = true);

/// Frame `index` of a loaded session: the PNG pair when it exists, else the deterministic render.
FramePair session_frame(const std::filesystem::path& root, const SyntheticSession& session, std::size_t index);

std::filesystem::path session_dir(const std::filesystem::path& root, const std::string& participant_id,
                                  const std::string& session_id);

/// Truth CSV: timestamp_s, b00..b51, yaw, pitch, roll[, label].
std::string truth_csv(std::span<const double> timestamps, std::span<const FaceState> states,
                      std::span<const FrameLabel> labels);
struct TruthTable {
  std::vector<double> timestamps;
  std::vector<FaceState> states;
  std::vector<FrameLabel> labels;  // empty when the file has no label column
};
TruthTable parse_truth_csv(const std::string& text, const std::string& source);

/// Matrix CSV with a header row; the first column is timestamp_s.
std::string matrix_csv(std::span<const double> timestamps, const Eigen::MatrixXd& values,
                       const std::vector<std::string>& names);
std::pair<std::vector<double>, Eigen::MatrixXd> parse_matrix_csv(const std::string& text, const std::string& source);

/// Reconstructed streams written by `facemap reconstruct`: root/P<id>/<vid>.csv.
void write_reconstruction(const std::filesystem::path& root, const std::string& participant_id,
                          const std::string& stimulus_id, std::span<const FaceState> states,
                          std::span<const double> timestamps);

enum class SequenceSource { kTruth, kOpen, kReconstruction };

/// Labeled stimulus sequences of a written dataset. kReconstruction reads `reconstruction_dir`
/// and takes labels and onsets from the dataset's stimulus metadata.
std::vector<ReactionSequence> load_sequences(const std::filesystem::path& root, SequenceSource source,
                                             const std::filesystem::path& reconstruction_dir = {});

}  // namespace neckface
