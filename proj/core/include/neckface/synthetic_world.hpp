#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "neckface/face_state.hpp"
#include "neckface/raster.hpp"
#include "neckface/rng.hpp"
#include "neckface/stimulus.hpp"

namespace neckface {

/// Burst-and-decay reaction: (1 - e^{-t/rise}) * (plateau + (1 - plateau) e^{-t/decay}).
struct ReactionShape {
  double rise_s = 0.25;
  double decay_s = 2.0;
  double plateau = 0.6;
  /// Reactions are not held still: a zero-mean oscillation rides on the envelope while the
  /// expression lasts. Keep tremor < plateau so the response stays positive.
  double tremor = 0.35;
  double tremor_hz = 1.5;

  double operator()(double t_since_onset) const noexcept { return at(t_since_onset, tremor_hz); }
  double at(double t_since_onset, double oscillation_hz) const noexcept;
};

/// Knobs of the synthetic cohort. Defaults model a heterogeneous cohort where
/// people react on different channels with different strength.
struct WorldConfig {
  double gain_min = 50.0;
  /// max/min gain over the cohort; gains are log-spaced on a Weyl sequence.
  double gain_ratio = 8.0;
  double noise_sigma = 6.0;
  /// Image noise sigma per unit of noise_sigma.
  double image_noise_per_unit = 1e-3;
  int min_channels = 3;
  int max_channels = 8;
  /// All participants react on the same channels when true.
  bool shared_channels = false;
  /// Each participant's resting blendshape level deviates from the cohort base by N(0, spread).
  double rest_spread = 60.0;
  double micro_amplitude = 15.0;
  double head_drift_deg = 4.0;
  /// Per-participant tremor frequency is shape.tremor_hz * 2^u with u ~ U(-spread, spread).
  double tremor_octave_spread = 0.6;
  ReactionShape shape{};

  /// Everyone reacts strongly on the same channels from tight resting levels, without noise.
  static WorldConfig high_separability();
};

/// Channels that can carry the reaction signature.
std::vector<int> reaction_channel_pool();

struct ParticipantProfile {
  std::string participant_id;
  std::uint64_t anatomy_seed = 0;
  double reaction_gain = 1.0;
  std::vector<int> reaction_channels;
  std::vector<double> reaction_weights;  // parallel to reaction_channels
  double noise_sigma = 0.0;
  std::array<double, kNumBlendshapes> rest_levels{};
  double tremor_hz = 1.5;
};

/// Profile is a pure function of (participant_id, seed, config).
ParticipantProfile make_profile(const std::string& participant_id, std::uint64_t seed,
                                const WorldConfig& config = {});

/// Profiles "P01".."Pnn". With n >= 3 the gains span at least gain_ratio^0.618.
std::vector<ParticipantProfile> gen_profiles(int n, std::uint64_t seed,
                                             const WorldConfig& config = {});

/// Renders both camera images as anatomy-seeded Gaussian blobs whose
/// intensities and positions are affine in the normalized state.
FramePair render_frame_pair(const FaceState& state, const ParticipantProfile& profile, Rng& rng,
                            const WorldConfig& config = {});
/// Same as render_frame_pair with zero noise and the zero state.
FramePair canonical_rest_pair(const ParticipantProfile& profile);

/// Either a calibration sweep or a stimulus viewing.
struct SyntheticSession {
  ParticipantProfile profile;
  StimulusSpec stimulus;
  std::vector<double> timestamps;
  std::vector<FaceState> truth_states;
  std::vector<FrameLabel> labels;
  std::uint64_t frame_seed = 0;
  WorldConfig config{};

  std::size_t size() const noexcept { return truth_states.size(); }
  /// Frames are rendered on demand; the same index always yields the same pair.
  FramePair frame_pair(std::size_t index) const;
  /// Truth states as a T x 55 matrix.
  Eigen::MatrixXd state_matrix() const;
};

/// Scripted head rotations and per-channel excursions; every label 0.
SyntheticSession gen_calibration_session(const ParticipantProfile& profile, double duration_s,
                                         int fps, std::uint64_t seed,
                                         const WorldConfig& config = {});

SyntheticSession gen_stimulus_session(const ParticipantProfile& profile, const StimulusSpec& spec,
                                      std::uint64_t seed, const WorldConfig& config = {});

/// 49-channel facial-feature stream (AU/gaze/pose analog) sampled at `fps`, derived
/// from the same latent face trajectory through a fixed linear map plus noise.
Eigen::MatrixXd gen_open_features(const ParticipantProfile& profile, const StimulusSpec& spec,
                                  std::uint64_t seed, int fps, const WorldConfig& config = {});

inline constexpr int kOpenFeatureDim = 49;
inline constexpr int kOpenFeatureFps = 30;

struct ParticipantData {
  ParticipantProfile profile;
  SyntheticSession calibration;
  std::vector<SyntheticSession> stimuli;
};

struct CorpusOptions {
  int n_participants = 25;
  std::uint64_t seed = 7;
  double calibration_duration_s = 300.0;
  int fps = 12;
  WorldConfig world{};
  StimulusSetOptions stimulus{};
};

struct Corpus {
  CorpusOptions options;
  std::vector<StimulusSpec> stimulus_set;
  std::vector<ParticipantData> participants;
};

/// Frame totals after the labeling rule (pre-onset frames are discarded).
struct FrameCounts {
  std::size_t neutral = 0;
  std::size_t error = 0;
  std::size_t discarded = 0;
  std::size_t kept() const noexcept { return neutral + error; }
};

FrameCounts count_frames(const Corpus& corpus);

/// Generates every participant in memory. Stimulus sets must hold 10 videos of each kind.
Corpus gen_corpus(const CorpusOptions& options);
Corpus gen_corpus(const CorpusOptions& options, std::vector<StimulusSpec> stimulus_set);

}  // namespace neckface
