#include "neckface/synthetic_world.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <numeric>

#include "neckface/error.hpp"
#include "neckface/imaging.hpp"

namespace neckface {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kGolden = 0.6180339887498949;
constexpr int kBlobsPerCamera = 64;
constexpr float kBackground = 0.08F;
constexpr double kPixelsPerDegree = 2.0;
constexpr double kIntensityGain = 0.3;
constexpr double kDisplacementPx = 20.0;

double frac(double x) { return x - std::floor(x); }

double seed_unit(std::uint64_t seed) {
  return static_cast<double>(mix64(seed) >> 11) * 0x1.0p-53;
}

/// Trailing digits of an id such as "P07"; falls back to a hash for other ids.
std::uint64_t id_index(const std::string& id) {
  std::size_t pos = id.size();
  while (pos > 0 && std::isdigit(static_cast<unsigned char>(id[pos - 1]))) --pos;
  if (pos == id.size()) return hash_tag(id) % 100003;
  return std::stoull(id.substr(pos));
}

struct Blob {
  double cx, cy;
  double sigma;
  double base_amp;
  int intensity_dim;
  double intensity_coef;
  int position_dim;
  double dir_x, dir_y;
};

struct Anatomy {
  std::array<std::vector<Blob>, 2> cameras;
};

Anatomy make_anatomy(std::uint64_t anatomy_seed) {
  Anatomy anatomy;
  for (int cam = 0; cam < 2; ++cam) {
    Rng rng(derive_seed(anatomy_seed, static_cast<std::uint64_t>(cam)));
    auto& blobs = anatomy.cameras[cam];
    blobs.reserve(kBlobsPerCamera);
    for (int b = 0; b < kBlobsPerCamera; ++b) {
      Blob blob{};
      blob.cx = uniform(rng, 20.0, static_cast<double>(kCameraWidth) - 20.0);
      blob.cy = uniform(rng, 20.0, static_cast<double>(kCameraHeight) - 20.0);
      blob.sigma = uniform(rng, 14.0, 32.0);
      blob.base_amp = uniform(rng, 0.10, 0.20);
      // Every state dimension drives at least one blob on each camera.
      blob.intensity_dim = b < static_cast<int>(kFaceStateDim)
                               ? (b + cam * 27) % static_cast<int>(kFaceStateDim)
                               : static_cast<int>(rng() % kFaceStateDim);
      blob.intensity_coef = uniform(rng, 0.5, 1.0);
      blob.position_dim = static_cast<int>(rng() % kFaceStateDim);
      const double angle = uniform(rng, 0.0, kTwoPi);
      const double mag = uniform(rng, -1.0, 1.0);
      blob.dir_x = std::cos(angle) * mag;
      blob.dir_y = std::sin(angle) * mag;
      blobs.push_back(blob);
    }
  }
  return anatomy;
}

void check_state(const FaceState& state) {
  if (!state.valid()) throw InvalidArgument("face state outside valid ranges");
}

Raster render_camera(const std::vector<Blob>& blobs, const FaceState& state, int camera) {
  const auto s = state.normalized();
  Raster img(kCameraWidth, kCameraHeight, 1, kBackground);
  // Cameras sit on opposite sides of the neck, so yaw and roll mirror.
  const double side = camera == 0 ? 1.0 : -1.0;
  const double dx = side * kPixelsPerDegree * state.yaw;
  const double dy = kPixelsPerDegree * state.pitch;
  const double roll = side * state.roll * std::numbers::pi / 180.0;
  const double cr = std::cos(roll);
  const double sr = std::sin(roll);
  const double ox = kCameraWidth / 2.0;
  const double oy = kCameraHeight / 2.0;

  for (const Blob& blob : blobs) {
    const double amp =
        std::max(0.0, blob.base_amp + kIntensityGain * blob.intensity_coef * s[blob.intensity_dim]);
    if (amp == 0.0) continue;
    const double disp = kDisplacementPx * s[blob.position_dim];
    const double px = blob.cx + blob.dir_x * disp - ox;
    const double py = blob.cy + blob.dir_y * disp - oy;
    const double cx = ox + cr * px - sr * py + dx;
    const double cy = oy + sr * px + cr * py + dy;
    const double radius = 4.0 * blob.sigma;
    const int x0 = std::max(0, static_cast<int>(std::floor(cx - radius)));
    const int x1 = std::min(kCameraWidth - 1, static_cast<int>(std::ceil(cx + radius)));
    const int y0 = std::max(0, static_cast<int>(std::floor(cy - radius)));
    const int y1 = std::min(kCameraHeight - 1, static_cast<int>(std::ceil(cy + radius)));
    const double inv = -1.0 / (2.0 * blob.sigma * blob.sigma);
    for (int y = y0; y <= y1; ++y) {
      const double ddy = (y - cy) * (y - cy);
      for (int x = x0; x <= x1; ++x) {
        const double ddx = (x - cx) * (x - cx);
        img.at(x, y) += static_cast<float>(amp * std::exp((ddx + ddy) * inv));
      }
    }
  }
  return img;
}

void add_noise_and_clamp(Raster& img, double sigma, Rng& rng) {
  std::normal_distribution<float> noise(0.0F, static_cast<float>(sigma));
  for (float& v : img.data()) {
    if (sigma > 0.0) v += noise(rng);
    v = std::clamp(v, 0.0F, 1.0F);
  }
}

double clamp_blend(double v) { return std::clamp(v, 0.0, kBlendshapeMax); }

/// Continuous-time face trajectory during a stimulus video.
class StimulusProgram {
 public:
  StimulusProgram(const ParticipantProfile& profile, const StimulusSpec& spec, std::uint64_t seed,
                  const WorldConfig& config)
      : profile_(profile), spec_(spec), config_(config) {
    Rng rng(derive_seed(seed, "micro-motion"));
    for (std::size_t j = 0; j < kNumBlendshapes; ++j) {
      Channel& ch = channels_[j];
      ch.amplitude = config.micro_amplitude * uniform(rng, 0.5, 1.0);
      ch.f1 = uniform(rng, 0.05, 0.4);
      ch.f2 = uniform(rng, 0.05, 0.4);
      ch.p1 = uniform(rng, 0.0, kTwoPi);
      ch.p2 = uniform(rng, 0.0, kTwoPi);
    }
    for (auto& h : head_) {
      h.amplitude = config.head_drift_deg * uniform(rng, 0.5, 1.0);
      h.f1 = uniform(rng, 0.03, 0.2);
      h.f2 = uniform(rng, 0.03, 0.2);
      h.p1 = uniform(rng, 0.0, kTwoPi);
      h.p2 = uniform(rng, 0.0, kTwoPi);
    }
  }

  /// Noise-free state at time t.
  std::array<double, kFaceStateDim> mean_at(double t) const {
    std::array<double, kFaceStateDim> v{};
    for (std::size_t j = 0; j < kNumBlendshapes; ++j) {
      v[j] = profile_.rest_levels[j] + channels_[j].eval(t);
    }
    if (spec_.failure_onset_s && t >= *spec_.failure_onset_s - 1e-9) {
      const double r = config_.shape.at(t - *spec_.failure_onset_s, profile_.tremor_hz);
      for (std::size_t k = 0; k < profile_.reaction_channels.size(); ++k) {
        v[profile_.reaction_channels[k]] += profile_.reaction_gain * profile_.reaction_weights[k] * r;
      }
    }
    for (std::size_t a = 0; a < kNumHeadAngles; ++a) v[kNumBlendshapes + a] = head_[a].eval(t);
    return v;
  }

  FaceState state_at(double t, Rng& noise_rng) const {
    auto v = mean_at(t);
    const double sigma = profile_.noise_sigma;
    FaceState s;
    for (std::size_t j = 0; j < kNumBlendshapes; ++j) {
      const double n = sigma > 0.0 ? normal(noise_rng, 0.0, sigma) : 0.0;
      s.blendshapes[j] = clamp_blend(v[j] + n);
    }
    const double angle_sigma = sigma / 20.0;
    auto angle = [&](double x) {
      const double n = angle_sigma > 0.0 ? normal(noise_rng, 0.0, angle_sigma) : 0.0;
      return std::clamp(x + n, -kHeadAngleMax, kHeadAngleMax);
    };
    s.yaw = angle(v[kNumBlendshapes]);
    s.pitch = angle(v[kNumBlendshapes + 1]);
    s.roll = angle(v[kNumBlendshapes + 2]);
    return s;
  }

 private:
  struct Channel {
    double amplitude = 0, f1 = 0, f2 = 0, p1 = 0, p2 = 0;
    double eval(double t) const {
      return amplitude * (0.6 * std::sin(kTwoPi * f1 * t + p1) + 0.4 * std::sin(kTwoPi * f2 * t + p2));
    }
  };
  const ParticipantProfile& profile_;
  const StimulusSpec& spec_;
  const WorldConfig& config_;
  std::array<Channel, kNumBlendshapes> channels_{};
  std::array<Channel, kNumHeadAngles> head_{};
};

Eigen::MatrixXd open_feature_map() {
  // Fixed for every corpus: the map is a property of the feature extractor, not the cohort.
  Rng rng(derive_seed(0x0fe11face, "open-feature-map"));
  Eigen::MatrixXd m(kOpenFeatureDim, kFaceStateDim);
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) m(r, c) = normal(rng, 0.0, 1.0 / std::sqrt(55.0));
  }
  return m;
}

}  // namespace

double ReactionShape::at(double t, double oscillation_hz) const noexcept {
  if (t < 0.0) return 0.0;
  const double rise = rise_s > 0.0 ? 1.0 - std::exp(-t / rise_s) : 1.0;
  const double decay = decay_s > 0.0 ? std::exp(-t / decay_s) : 0.0;
  const double flutter = tremor * std::sin(kTwoPi * oscillation_hz * t);
  return rise * (plateau + (1.0 - plateau) * decay + flutter);
}

WorldConfig WorldConfig::high_separability() {
  WorldConfig c;
  c.gain_min = 300.0;
  c.gain_ratio = 3.0;
  c.noise_sigma = 0.0;
  c.shared_channels = true;
  c.rest_spread = 5.0;
  c.micro_amplitude = 10.0;
  c.tremor_octave_spread = 0.0;
  return c;
}

std::vector<int> reaction_channel_pool() {
  static const std::vector<int> pool = [] {
    const char* names[] = {"browInnerUp",      "browDownLeft",      "browDownRight",
                           "browOuterUpLeft",  "browOuterUpRight",  "eyeWideLeft",
                           "eyeWideRight",     "jawOpen",           "mouthFrownLeft",
                           "mouthFrownRight",  "mouthStretchLeft",  "mouthStretchRight",
                           "noseSneerLeft",    "noseSneerRight",    "mouthPressLeft",
                           "mouthPressRight",  "cheekSquintLeft",   "cheekSquintRight",
                           "mouthSmileLeft",   "mouthSmileRight"};
    std::vector<int> out;
    for (const char* n : names) out.push_back(blendshape_index(n));
    return out;
  }();
  return pool;
}

ParticipantProfile make_profile(const std::string& participant_id, std::uint64_t seed,
                                const WorldConfig& config) {
  if (participant_id.empty()) throw InvalidArgument("participant id must be nonempty");
  if (config.gain_min <= 0.0 || config.gain_ratio < 1.0) {
    throw InvalidArgument("gain_min must be > 0 and gain_ratio >= 1");
  }
  if (config.min_channels < 1 || config.max_channels < config.min_channels) {
    throw InvalidArgument("reaction channel count range invalid");
  }
  ParticipantProfile p;
  p.participant_id = participant_id;
  p.anatomy_seed = derive_seed(seed, "anatomy:" + participant_id);
  p.noise_sigma = config.noise_sigma;

  const double offset = seed_unit(derive_seed(seed, "gain-offset"));
  const double u = frac(offset + kGolden * static_cast<double>(id_index(participant_id)));
  p.reaction_gain = config.gain_min * std::pow(config.gain_ratio, u);

  Rng rng(derive_seed(seed, "profile:" + participant_id));
  auto pool = reaction_channel_pool();
  const int pool_size = static_cast<int>(pool.size());
  int k = 0;
  if (config.shared_channels) {
    Rng shared(derive_seed(seed, "shared-channels"));
    std::shuffle(pool.begin(), pool.end(), shared);
    k = std::min((config.min_channels + config.max_channels) / 2, pool_size);
  } else {
    std::shuffle(pool.begin(), pool.end(), rng);
    const int span = config.max_channels - config.min_channels + 1;
    k = std::min(config.min_channels + static_cast<int>(rng() % span), pool_size);
  }
  p.reaction_channels.assign(pool.begin(), pool.begin() + k);
  std::sort(p.reaction_channels.begin(), p.reaction_channels.end());
  for (int i = 0; i < k; ++i) p.reaction_weights.push_back(uniform(rng, 0.8, 1.2));

  Rng base_rng(derive_seed(seed, "rest-base"));
  for (std::size_t j = 0; j < kNumBlendshapes; ++j) {
    const double base = uniform(base_rng, 40.0, 160.0);
    p.rest_levels[j] = std::clamp(base + normal(rng, 0.0, config.rest_spread), 0.0, 400.0);
  }
  const double spread = std::max(0.0, config.tremor_octave_spread);
  p.tremor_hz = config.shape.tremor_hz * std::pow(2.0, spread > 0.0 ? uniform(rng, -spread, spread) : 0.0);
  return p;
}

std::vector<ParticipantProfile> gen_profiles(int n, std::uint64_t seed, const WorldConfig& config) {
  if (n < 1) throw InvalidArgument("gen_profiles needs n >= 1");
  std::vector<ParticipantProfile> out;
  out.reserve(n);
  for (int i = 1; i <= n; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "P%02d", i);
    out.push_back(make_profile(id, seed, config));
  }
  return out;
}

FramePair render_frame_pair(const FaceState& state, const ParticipantProfile& profile, Rng& rng,
                            const WorldConfig& config) {
  check_state(state);
  const Anatomy anatomy = make_anatomy(profile.anatomy_seed);
  FramePair pair;
  pair.participant_id = profile.participant_id;
  pair.left = render_camera(anatomy.cameras[0], state, 0);
  pair.right = render_camera(anatomy.cameras[1], state, 1);
  const double sigma = profile.noise_sigma * config.image_noise_per_unit;
  add_noise_and_clamp(pair.left, sigma, rng);
  add_noise_and_clamp(pair.right, sigma, rng);
  return pair;
}

FramePair canonical_rest_pair(const ParticipantProfile& profile) {
  ParticipantProfile quiet = profile;
  quiet.noise_sigma = 0.0;
  Rng rng(0);
  return render_frame_pair(FaceState{}, quiet, rng);
}

FramePair SyntheticSession::frame_pair(std::size_t index) const {
  if (index >= truth_states.size()) throw InvalidArgument("frame index out of range");
  Rng rng(derive_seed(frame_seed, static_cast<std::uint64_t>(index)));
  FramePair pair = render_frame_pair(truth_states[index], profile, rng, config);
  pair.timestamp_s = timestamps[index];
  pair.session_id = stimulus.stimulus_id;
  return pair;
}

Eigen::MatrixXd SyntheticSession::state_matrix() const {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(truth_states.size()), kFaceStateDim);
  for (std::size_t i = 0; i < truth_states.size(); ++i) {
    const auto v = truth_states[i].to_array();
    for (std::size_t j = 0; j < kFaceStateDim; ++j) m(static_cast<Eigen::Index>(i), j) = v[j];
  }
  return m;
}

SyntheticSession gen_calibration_session(const ParticipantProfile& profile, double duration_s,
                                         int fps, std::uint64_t seed, const WorldConfig& config) {
  if (!(duration_s > 0.0)) throw InvalidArgument("calibration duration must be positive");
  if (fps <= 0) throw InvalidArgument("fps must be positive");
  SyntheticSession session;
  session.profile = profile;
  session.config = config;
  session.stimulus.stimulus_id = "calibration";
  session.stimulus.kind = StimulusKind::kControl;
  session.stimulus.duration_s = duration_s;
  session.stimulus.fps = fps;
  session.frame_seed = derive_seed(seed, "calibration-frames:" + profile.participant_id);

  Rng rng(derive_seed(seed, "calibration:" + profile.participant_id));
  struct Excursion {
    double low, peak, cycles, phase;
  };
  std::array<Excursion, kNumBlendshapes> ex{};
  for (std::size_t j = 0; j < kNumBlendshapes; ++j) {
    ex[j].low = 0.3 * profile.rest_levels[j];
    ex[j].peak = uniform(rng, 650.0, 950.0);
    ex[j].cycles = static_cast<double>(2 + rng() % 5);
    ex[j].phase = uniform(rng, 0.0, 1.0);
  }
  const std::array<double, 3> head_amp{35.0, 25.0, 15.0};
  const std::array<double, 3> head_cycles{2.0, 3.0, 5.0};
  std::array<double, 3> head_phase{};
  for (double& p : head_phase) p = uniform(rng, 0.0, kTwoPi);

  const auto n = static_cast<std::size_t>(std::llround(duration_s * fps));
  Rng noise(derive_seed(seed, "calibration-noise:" + profile.participant_id));
  session.timestamps.resize(n);
  session.truth_states.resize(n);
  session.labels.assign(n, FrameLabel::kNeutral);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fps;
    const double phase_t = t / duration_s;
    session.timestamps[i] = t;
    FaceState& s = session.truth_states[i];
    for (std::size_t j = 0; j < kNumBlendshapes; ++j) {
      const double bump = 0.5 * (1.0 - std::cos(kTwoPi * (ex[j].cycles * phase_t + ex[j].phase)));
      double v = ex[j].low + (ex[j].peak - ex[j].low) * bump * bump;
      if (profile.noise_sigma > 0.0) v += normal(noise, 0.0, profile.noise_sigma);
      s.blendshapes[j] = clamp_blend(v);
    }
    std::array<double, 3> angles{};
    for (int a = 0; a < 3; ++a) {
      angles[a] = head_amp[a] * std::sin(kTwoPi * head_cycles[a] * phase_t + head_phase[a]);
      if (profile.noise_sigma > 0.0) angles[a] += normal(noise, 0.0, profile.noise_sigma / 20.0);
      angles[a] = std::clamp(angles[a], -kHeadAngleMax, kHeadAngleMax);
    }
    s.yaw = angles[0];
    s.pitch = angles[1];
    s.roll = angles[2];
  }
  return session;
}

SyntheticSession gen_stimulus_session(const ParticipantProfile& profile, const StimulusSpec& spec,
                                      std::uint64_t seed, const WorldConfig& config) {
  spec.validate();
  SyntheticSession session;
  session.profile = profile;
  session.stimulus = spec;
  session.config = config;
  const std::string tag = profile.participant_id + "/" + spec.stimulus_id;
  session.frame_seed = derive_seed(seed, "stimulus-frames:" + tag);
  const std::uint64_t program_seed = derive_seed(seed, "stimulus:" + tag);
  const StimulusProgram program(profile, spec, program_seed, config);
  Rng noise(derive_seed(program_seed, static_cast<std::uint64_t>(spec.fps)));

  const std::size_t n = spec.frame_count();
  session.timestamps.resize(n);
  session.truth_states.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / spec.fps;
    session.timestamps[i] = t;
    session.truth_states[i] = program.state_at(t, noise);
  }
  session.labels = frame_labels(spec);
  return session;
}

Eigen::MatrixXd gen_open_features(const ParticipantProfile& profile, const StimulusSpec& spec,
                                  std::uint64_t seed, int fps, const WorldConfig& config) {
  spec.validate();
  if (fps <= 0) throw InvalidArgument("fps must be positive");
  static const Eigen::MatrixXd map = open_feature_map();
  const std::string tag = profile.participant_id + "/" + spec.stimulus_id;
  const std::uint64_t program_seed = derive_seed(seed, "stimulus:" + tag);
  const StimulusProgram program(profile, spec, program_seed, config);
  Rng noise(derive_seed(program_seed, "open:" + std::to_string(fps)));

  const auto n = static_cast<Eigen::Index>(std::llround(spec.duration_s * fps));
  Eigen::MatrixXd out(n, kOpenFeatureDim);
  const double sigma = profile.noise_sigma * 0.005;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fps;
    const FaceState s = program.state_at(t, noise);
    const auto norm = s.normalized();
    const Eigen::Map<const Eigen::VectorXd> v(norm.data(), kFaceStateDim);
    Eigen::VectorXd f = 5.0 * (map * v);
    if (sigma > 0.0) {
      for (Eigen::Index c = 0; c < f.size(); ++c) f(c) += normal(noise, 0.0, sigma);
    }
    out.row(i) = f.transpose();
  }
  return out;
}

FrameCounts count_frames(const Corpus& corpus) {
  FrameCounts counts;
  for (const auto& p : corpus.participants) {
    for (const auto& s : p.stimuli) {
      for (FrameLabel l : s.labels) {
        if (l == FrameLabel::kNeutral) ++counts.neutral;
        else if (l == FrameLabel::kError) ++counts.error;
        else ++counts.discarded;
      }
    }
  }
  return counts;
}

Corpus gen_corpus(const CorpusOptions& options) {
  return gen_corpus(options, default_stimulus_set(options.seed, options.stimulus));
}

Corpus gen_corpus(const CorpusOptions& options, std::vector<StimulusSpec> stimulus_set) {
  if (options.n_participants < 1) throw InvalidArgument("corpus needs at least one participant");
  int n_ctl = 0, n_hum = 0, n_rob = 0;
  for (const auto& s : stimulus_set) {
    s.validate();
    if (s.kind == StimulusKind::kControl) ++n_ctl;
    else if (s.kind == StimulusKind::kHumanError) ++n_hum;
    else ++n_rob;
  }
  if (n_ctl != n_hum || n_hum != n_rob || n_ctl == 0) {
    throw InvalidArgument("stimulus set must hold equal numbers of control, human-error and "
                          "robot-error videos");
  }
  Corpus corpus;
  corpus.options = options;
  corpus.stimulus_set = std::move(stimulus_set);
  const auto profiles = gen_profiles(options.n_participants, options.seed, options.world);
  corpus.participants.reserve(profiles.size());
  for (const auto& profile : profiles) {
    ParticipantData data;
    data.profile = profile;
    data.calibration = gen_calibration_session(profile, options.calibration_duration_s,
                                               options.fps, options.seed, options.world);
    for (const auto& spec : corpus.stimulus_set) {
      data.stimuli.push_back(gen_stimulus_session(profile, spec, options.seed, options.world));
    }
    corpus.participants.push_back(std::move(data));
  }
  return corpus;
}

}  // namespace neckface
