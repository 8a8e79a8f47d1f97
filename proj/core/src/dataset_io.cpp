#include "neckface/dataset_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "neckface/error.hpp"
#include "neckface/imaging.hpp"
#include "neckface/io_util.hpp"

namespace fs = std::filesystem;

namespace neckface {

namespace {

constexpr const char* kManifestName = "manifest.json";

std::string png_name(const char* side, std::size_t i) { return fmt::format("ir_{}_{:06d}.png", side, i); }

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_double(const std::string& field, const std::string& source, std::size_t line) {
  double v = 0.0;
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc{} || ptr != end) {
    throw DataError(fmt::format("{}:{}: '{}' is not a number", source, line, field));
  }
  return v;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(std::move(line));
  }
  return lines;
}

std::vector<std::string> truth_header(bool with_label) {
  std::vector<std::string> h = {"timestamp_s"};
  for (std::size_t b = 0; b < kNumBlendshapes; ++b) h.push_back(fmt::format("b{:02d}", b));
  for (auto name : kHeadAngleNames) h.emplace_back(name);
  if (with_label) h.emplace_back("label");
  return h;
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
  return out;
}

nlohmann::json session_meta(const SyntheticSession& s, bool pngs) {
  return {{"stimulus", stimulus_to_json(s.stimulus)},
          {"frame_seed", s.frame_seed},
          {"frames", s.size()},
          {"png", pngs}};
}

// Writes one file and records its checksum relative to the root.
void put(const fs::path& root, const fs::path& rel, const std::string& content, ManifestSession& entry) {
  atomic_write_text(root / rel, content);
  entry.checksums[rel.generic_string()] = sha256_hex(content);
}

void write_session(const fs::path& root, const fs::path& rel_dir, const SyntheticSession& s, bool pngs,
                   const std::string& open_csv, ManifestSession& entry) {
  ensure_directory(root / rel_dir);
  put(root, rel_dir / "truth.csv", truth_csv(s.timestamps, s.truth_states, s.labels), entry);
  put(root, rel_dir / "meta.json", session_meta(s, pngs).dump(2), entry);
  if (!open_csv.empty()) put(root, rel_dir / "open.csv", open_csv, entry);
  if (pngs) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      const auto pair = s.frame_pair(i);
      for (const auto& [side, img] : {std::pair{"left", &pair.left}, std::pair{"right", &pair.right}}) {
        const auto rel = rel_dir / png_name(side, i);
        write_png(root / rel, *img);
        entry.checksums[rel.generic_string()] = sha256_file(root / rel);
      }
    }
  }
}

SyntheticSession read_session(const fs::path& dir, const ParticipantProfile& profile, const WorldConfig& world) {
  const auto meta = nlohmann::json::parse(read_text(dir / "meta.json"));
  const auto table = parse_truth_csv(read_text(dir / "truth.csv"), (dir / "truth.csv").string());
  SyntheticSession s;
  s.profile = profile;
  s.stimulus = stimulus_from_json(meta.at("stimulus"));
  s.frame_seed = meta.at("frame_seed").get<std::uint64_t>();
  s.config = world;
  s.timestamps = table.timestamps;
  s.truth_states = table.states;
  s.labels = table.labels;
  if (s.size() != meta.at("frames").get<std::size_t>()) {
    throw DataError((dir / "truth.csv").string() + ": row count differs from meta.json");
  }
  return s;
}

}  // namespace

nlohmann::json world_to_json(const WorldConfig& c) {
  return {{"gain_min", c.gain_min},
          {"gain_ratio", c.gain_ratio},
          {"noise_sigma", c.noise_sigma},
          {"image_noise_per_unit", c.image_noise_per_unit},
          {"min_channels", c.min_channels},
          {"max_channels", c.max_channels},
          {"shared_channels", c.shared_channels},
          {"rest_spread", c.rest_spread},
          {"micro_amplitude", c.micro_amplitude},
          {"head_drift_deg", c.head_drift_deg},
          {"tremor_octave_spread", c.tremor_octave_spread},
          {"shape",
           {{"rise_s", c.shape.rise_s},
            {"decay_s", c.shape.decay_s},
            {"plateau", c.shape.plateau},
            {"tremor", c.shape.tremor},
            {"tremor_hz", c.shape.tremor_hz}}}};
}

WorldConfig world_from_json(const nlohmann::json& j) {
  WorldConfig c;
  c.gain_min = j.at("gain_min");
  c.gain_ratio = j.at("gain_ratio");
  c.noise_sigma = j.at("noise_sigma");
  c.image_noise_per_unit = j.at("image_noise_per_unit");
  c.min_channels = j.at("min_channels");
  c.max_channels = j.at("max_channels");
  c.shared_channels = j.at("shared_channels");
  c.rest_spread = j.at("rest_spread");
  c.micro_amplitude = j.at("micro_amplitude");
  c.head_drift_deg = j.at("head_drift_deg");
  c.tremor_octave_spread = j.at("tremor_octave_spread");
  const auto& s = j.at("shape");
  c.shape.rise_s = s.at("rise_s");
  c.shape.decay_s = s.at("decay_s");
  c.shape.plateau = s.at("plateau");
  c.shape.tremor = s.at("tremor");
  c.shape.tremor_hz = s.at("tremor_hz");
  return c;
}

nlohmann::json profile_to_json(const ParticipantProfile& p) {
  return {{"participant_id", p.participant_id},
          {"anatomy_seed", p.anatomy_seed},
          {"reaction_gain", p.reaction_gain},
          {"reaction_channels", p.reaction_channels},
          {"reaction_weights", p.reaction_weights},
          {"noise_sigma", p.noise_sigma},
          {"rest_levels", p.rest_levels},
          {"tremor_hz", p.tremor_hz}};
}

ParticipantProfile profile_from_json(const nlohmann::json& j) {
  ParticipantProfile p;
  p.participant_id = j.at("participant_id");
  p.anatomy_seed = j.at("anatomy_seed");
  p.reaction_gain = j.at("reaction_gain");
  p.reaction_channels = j.at("reaction_channels").get<std::vector<int>>();
  p.reaction_weights = j.at("reaction_weights").get<std::vector<double>>();
  p.noise_sigma = j.at("noise_sigma");
  p.rest_levels = j.at("rest_levels").get<std::array<double, kNumBlendshapes>>();
  p.tremor_hz = j.at("tremor_hz");
  if (p.reaction_channels.size() != p.reaction_weights.size()) {
    throw DataError("profile " + p.participant_id + ": channels and weights differ in length");
  }
  return p;
}

nlohmann::json stimulus_to_json(const StimulusSpec& s) {
  nlohmann::json j = {{"stimulus_id", s.stimulus_id},
                      {"kind", to_string(s.kind)},
                      {"duration_s", s.duration_s},
                      {"fps", s.fps}};
  j["failure_onset_s"] = s.failure_onset_s ? nlohmann::json(*s.failure_onset_s) : nlohmann::json(nullptr);
  return j;
}

StimulusSpec stimulus_from_json(const nlohmann::json& j) {
  StimulusSpec s;
  s.stimulus_id = j.at("stimulus_id");
  s.kind = stimulus_kind_from_string(j.at("kind"));
  s.duration_s = j.at("duration_s");
  s.fps = j.at("fps");
  if (!j.at("failure_onset_s").is_null()) s.failure_onset_s = j.at("failure_onset_s").get<double>();
  s.validate();
  return s;
}

FrameExport frame_export_from_string(const std::string& name) {
  if (name == "none") return FrameExport::kNone;
  if (name == "calibration") return FrameExport::kCalibration;
  if (name == "all") return FrameExport::kAll;
  throw ConfigError("frames must be none, calibration or all (got '" + name + "')");
}

nlohmann::json DatasetManifest::to_json() const {
  nlohmann::json sessions_json = nlohmann::json::array();
  for (const auto& s : sessions) {
    sessions_json.push_back({{"participant_id", s.participant_id},
                             {"session_id", s.session_id},
                             {"frames", s.frames},
                             {"fps", s.fps},
                             {"checksums", s.checksums}});
  }
  return {{"format_version", format_version},
          {"seed", seed},
          {"options", options},
          {"participants", participants},
          {"totals", {{"neutral", neutral_frames}, {"error", error_frames}, {"total", total_frames()}}},
          {"sessions", sessions_json}};
}

DatasetManifest DatasetManifest::from_json(const nlohmann::json& j) {
  DatasetManifest m;
  m.format_version = j.at("format_version");
  if (m.format_version != 1) throw DataError("unsupported manifest format " + std::to_string(m.format_version));
  m.seed = j.at("seed");
  m.options = j.at("options");
  m.participants = j.at("participants").get<std::vector<std::string>>();
  m.neutral_frames = j.at("totals").at("neutral");
  m.error_frames = j.at("totals").at("error");
  for (const auto& s : j.at("sessions")) {
    m.sessions.push_back({s.at("participant_id"), s.at("session_id"), s.at("frames"), s.at("fps"),
                          s.at("checksums").get<std::map<std::string, std::string>>()});
  }
  return m;
}

std::string DatasetManifest::digest() const {
  std::string buf;
  for (const auto& s : sessions) {
    for (const auto& [path, sum] : s.checksums) buf += path + "=" + sum + "\n";
  }
  return sha256_hex(buf);
}

fs::path session_dir(const fs::path& root, const std::string& participant_id, const std::string& session_id) {
  if (session_id == "calibration") return root / participant_id / "calibration";
  return root / participant_id / "stimulus" / session_id;
}

std::string truth_csv(std::span<const double> timestamps, std::span<const FaceState> states,
                      std::span<const FrameLabel> labels) {
  if (timestamps.size() != states.size() || (!labels.empty() && labels.size() != states.size())) {
    throw InvalidArgument("truth_csv: column lengths differ");
  }
  std::string out = join(truth_header(!labels.empty())) + "\n";
  for (std::size_t i = 0; i < states.size(); ++i) {
    out += fmt::format("{}", timestamps[i]);
    for (double v : states[i].to_array()) out += fmt::format(",{}", v);
    if (!labels.empty()) out += fmt::format(",{}", static_cast<int>(labels[i]));
    out += '\n';
  }
  return out;
}

TruthTable parse_truth_csv(const std::string& text, const std::string& source) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw DataError(source + ": empty truth file");
  const auto header = split_csv_line(lines[0]);
  const bool with_label = header == truth_header(true);
  if (!with_label && header != truth_header(false)) throw DataError(source + ": unexpected truth header");
  TruthTable t;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto f = split_csv_line(lines[r]);
    if (f.size() != header.size()) throw DataError(fmt::format("{}:{}: expected {} fields", source, r + 1, header.size()));
    t.timestamps.push_back(parse_double(f[0], source, r + 1));
    std::array<double, kFaceStateDim> v{};
    for (std::size_t c = 0; c < kFaceStateDim; ++c) v[c] = parse_double(f[c + 1], source, r + 1);
    t.states.push_back(FaceState::from_values(v));
    if (with_label) {
      const int l = static_cast<int>(parse_double(f.back(), source, r + 1));
      if (l < -1 || l > 1) throw DataError(fmt::format("{}:{}: label {} out of range", source, r + 1, l));
      t.labels.push_back(static_cast<FrameLabel>(l));
    }
  }
  return t;
}

std::string matrix_csv(std::span<const double> timestamps, const Eigen::MatrixXd& values,
                       const std::vector<std::string>& names) {
  if (static_cast<Eigen::Index>(timestamps.size()) != values.rows() ||
      static_cast<Eigen::Index>(names.size()) != values.cols()) {
    throw InvalidArgument("matrix_csv: shape mismatch");
  }
  std::string out = "timestamp_s," + join(names) + "\n";
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    out += fmt::format("{}", timestamps[static_cast<std::size_t>(r)]);
    for (Eigen::Index c = 0; c < values.cols(); ++c) out += fmt::format(",{}", values(r, c));
    out += '\n';
  }
  return out;
}

std::pair<std::vector<double>, Eigen::MatrixXd> parse_matrix_csv(const std::string& text, const std::string& source) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw DataError(source + ": empty file");
  const auto header = split_csv_line(lines[0]);
  if (header.empty() || header[0] != "timestamp_s") throw DataError(source + ": first column must be timestamp_s");
  const auto cols = static_cast<Eigen::Index>(header.size() - 1);
  std::vector<double> ts;
  Eigen::MatrixXd m(static_cast<Eigen::Index>(lines.size() - 1), cols);
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto f = split_csv_line(lines[r]);
    if (f.size() != header.size()) throw DataError(fmt::format("{}:{}: expected {} fields", source, r + 1, header.size()));
    ts.push_back(parse_double(f[0], source, r + 1));
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(r - 1), c) = parse_double(f[static_cast<std::size_t>(c + 1)], source, r + 1);
    }
  }
  return {ts, m};
}

DatasetManifest write_corpus(const Corpus& corpus, const fs::path& root, const CorpusWriteOptions& options) {
  ensure_directory(root);
  DatasetManifest m;
  m.seed = corpus.options.seed;
  m.options = {{"n_participants", corpus.options.n_participants},
               {"calibration_duration_s", corpus.options.calibration_duration_s},
               {"fps", corpus.options.fps},
               {"world", world_to_json(corpus.options.world)},
               {"stimuli", nlohmann::json::array()}};
  for (const auto& spec : corpus.stimulus_set) m.options["stimuli"].push_back(stimulus_to_json(spec));
  const auto counts = count_frames(corpus);
  m.neutral_frames = counts.neutral;
  m.error_frames = counts.error;

  std::vector<std::string> open_names;
  for (int c = 0; c < kOpenFeatureDim; ++c) open_names.push_back(fmt::format("o{:02d}", c));

  for (const auto& p : corpus.participants) {
    const auto& id = p.profile.participant_id;
    m.participants.push_back(id);
    ManifestSession profile_entry{id, "profile", 0, 0, {}};
    ensure_directory(root / id);
    put(root, fs::path(id) / "profile.json", profile_to_json(p.profile).dump(2), profile_entry);
    m.sessions.push_back(std::move(profile_entry));

    ManifestSession cal{id, "calibration", p.calibration.size(), p.calibration.stimulus.fps, {}};
    write_session(root, fs::path(id) / "calibration", p.calibration, options.frames != FrameExport::kNone, "", cal);
    m.sessions.push_back(std::move(cal));

    for (const auto& s : p.stimuli) {
      std::string open;
      if (options.open_features) {
        const auto feats = gen_open_features(p.profile, s.stimulus, corpus.options.seed, kOpenFeatureFps,
                                             corpus.options.world);
        std::vector<double> ts;
        for (Eigen::Index i = 0; i < feats.rows(); ++i) ts.push_back(static_cast<double>(i) / kOpenFeatureFps);
        open = matrix_csv(ts, feats, open_names);
      }
      ManifestSession e{id, s.stimulus.stimulus_id, s.size(), s.stimulus.fps, {}};
      write_session(root, fs::path(id) / "stimulus" / s.stimulus.stimulus_id, s,
                    options.frames == FrameExport::kAll, open, e);
      m.sessions.push_back(std::move(e));
    }
  }
  atomic_write_text(root / kManifestName, m.to_json().dump(2));
  return m;
}

DatasetManifest read_manifest(const fs::path& root) {
  const auto path = root / kManifestName;
  if (!fs::exists(path)) throw IoError(path.string(), "no dataset manifest (run `synth` first)");
  try {
    return DatasetManifest::from_json(nlohmann::json::parse(read_text(path)));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void verify_manifest(const fs::path& root, const DatasetManifest& manifest) {
  for (const auto& s : manifest.sessions) {
    for (const auto& [rel, sum] : s.checksums) {
      const auto path = root / rel;
      if (!fs::exists(path)) throw DataError(path.string() + ": listed in the manifest but missing");
      if (sha256_file(path) != sum) throw DataError(path.string() + ": checksum mismatch");
    }
  }
}

Corpus load_corpus(const fs::path& root, bool verify) {
  const auto m = read_manifest(root);
  if (verify) verify_manifest(root, m);
  Corpus c;
  try {
    c.options.seed = m.seed;
    c.options.n_participants = m.options.at("n_participants");
    c.options.calibration_duration_s = m.options.at("calibration_duration_s");
    c.options.fps = m.options.at("fps");
    c.options.world = world_from_json(m.options.at("world"));
    for (const auto& s : m.options.at("stimuli")) c.stimulus_set.push_back(stimulus_from_json(s));
    for (const auto& id : m.participants) {
      ParticipantData p;
      p.profile = profile_from_json(nlohmann::json::parse(read_text(root / id / "profile.json")));
      p.calibration = read_session(session_dir(root, id, "calibration"), p.profile, c.options.world);
      for (const auto& spec : c.stimulus_set) {
        p.stimuli.push_back(read_session(session_dir(root, id, spec.stimulus_id), p.profile, c.options.world));
      }
      c.participants.push_back(std::move(p));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(root.string() + ": " + e.what());
  }
  return c;
}

FramePair session_frame(const fs::path& root, const SyntheticSession& s, std::size_t index) {
  const auto dir = session_dir(root, s.profile.participant_id, s.stimulus.stimulus_id);
  const auto left = dir / png_name("left", index);
  if (!fs::exists(left)) return s.frame_pair(index);
  FramePair pair;
  pair.left = read_png(left);
  pair.right = read_png(dir / png_name("right", index));
  pair.timestamp_s = s.timestamps.at(index);
  pair.participant_id = s.profile.participant_id;
  pair.session_id = s.stimulus.stimulus_id;
  return pair;
}

void write_reconstruction(const fs::path& root, const std::string& participant_id, const std::string& stimulus_id,
                          std::span<const FaceState> states, std::span<const double> timestamps) {
  ensure_directory(root / participant_id);
  atomic_write_text(root / participant_id / (stimulus_id + ".csv"), truth_csv(timestamps, states, {}));
}

std::vector<ReactionSequence> load_sequences(const fs::path& root, SequenceSource source,
                                             const fs::path& reconstruction_dir) {
  const auto corpus = load_corpus(root, true);
  std::vector<ReactionSequence> out;
  for (const auto& p : corpus.participants) {
    const auto& id = p.profile.participant_id;
    for (const auto& s : p.stimuli) {
      const auto dir = session_dir(root, id, s.stimulus.stimulus_id);
      switch (source) {
        case SequenceSource::kTruth:
          out.push_back(label_frames(s.state_matrix(), s.timestamps, s.stimulus, id));
          break;
        case SequenceSource::kOpen: {
          const auto path = dir / "open.csv";
          if (!fs::exists(path)) throw DataError(path.string() + ": dataset was written without open features");
          const auto [ts, raw] = parse_matrix_csv(read_text(path), path.string());
          const auto aligned = align_stream(raw, kOpenFeatureFps, s.stimulus.fps);
          out.push_back(label_frames(aligned.features, aligned.timestamps, s.stimulus, id));
          break;
        }
        case SequenceSource::kReconstruction: {
          const auto path = reconstruction_dir / id / (s.stimulus.stimulus_id + ".csv");
          if (!fs::exists(path)) throw DataError(path.string() + ": missing reconstruction (run `facemap reconstruct`)");
          const auto t = parse_truth_csv(read_text(path), path.string());
          out.push_back(label_frames(std::span<const FaceState>(t.states), t.timestamps, s.stimulus, id));
          break;
        }
      }
    }
  }
  return out;
}

}  // namespace neckface
