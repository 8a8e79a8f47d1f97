#include "neckface/stimulus.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

#include "neckface/error.hpp"
#include "neckface/rng.hpp"

namespace neckface {

std::string to_string(StimulusKind kind) {
  switch (kind) {
    case StimulusKind::kControl:
      return "control";
    case StimulusKind::kHumanError:
      return "human_error";
    case StimulusKind::kRobotError:
      return "robot_error";
  }
  return "control";
}

StimulusKind stimulus_kind_from_string(const std::string& name) {
  if (name == "control") return StimulusKind::kControl;
  if (name == "human_error") return StimulusKind::kHumanError;
  if (name == "robot_error") return StimulusKind::kRobotError;
  throw InvalidArgument("unknown stimulus kind '" + name + "'");
}

std::size_t StimulusSpec::frame_count() const {
  return static_cast<std::size_t>(std::llround(duration_s * fps));
}

std::size_t StimulusSpec::onset_frame() const {
  if (!failure_onset_s) throw InvalidArgument("stimulus " + stimulus_id + " has no failure onset");
  // Smallest i with i / fps >= onset, tolerant to representation error.
  const double exact = *failure_onset_s * fps;
  auto idx = static_cast<std::size_t>(std::ceil(exact - 1e-9));
  return std::min(idx, frame_count());
}

void StimulusSpec::validate() const {
  if (fps <= 0) throw InvalidArgument("stimulus fps must be positive");
  if (!(duration_s > 0.0)) throw InvalidArgument("stimulus duration must be positive");
  if (kind == StimulusKind::kControl && failure_onset_s) {
    throw InvalidArgument("control stimulus " + stimulus_id + " must not have a failure onset");
  }
  if (is_error()) {
    if (!failure_onset_s) {
      throw InvalidArgument("error stimulus " + stimulus_id + " requires a failure onset");
    }
    if (*failure_onset_s < 0.0 || *failure_onset_s >= duration_s) {
      throw InvalidArgument("failure onset outside [0, duration) for " + stimulus_id);
    }
  }
}

std::vector<FrameLabel> frame_labels(const StimulusSpec& spec) {
  spec.validate();
  const std::size_t n = spec.frame_count();
  if (!spec.is_error()) return std::vector<FrameLabel>(n, FrameLabel::kNeutral);
  std::vector<FrameLabel> labels(n, FrameLabel::kDiscard);
  for (std::size_t i = spec.onset_frame(); i < n; ++i) labels[i] = FrameLabel::kError;
  return labels;
}

std::vector<StimulusSpec> default_stimulus_set(std::uint64_t seed,
                                               const StimulusSetOptions& options) {
  const int total = 3 * options.per_kind;
  const boost::math::normal_distribution<double> gauss(options.mean_duration_s,
                                                       options.sd_duration_s);
  std::vector<double> durations(total);
  for (int i = 0; i < total; ++i) {
    const double q = boost::math::quantile(gauss, (i + 0.5) / total);
    durations[i] = std::clamp(q, options.min_duration_s, options.max_duration_s);
  }
  std::sort(durations.begin(), durations.end(), std::greater<>());

  std::vector<bool> is_control(total, false);
  for (int r = 1, placed = 0; placed < options.per_kind && r < total; r += 2, ++placed) {
    is_control[r] = true;
  }

  const int n_error = total - options.per_kind;
  std::vector<double> onset_fraction(n_error);
  for (int k = 0; k < n_error; ++k) {
    onset_fraction[k] = options.onset_fraction_lo +
                        (options.onset_fraction_hi - options.onset_fraction_lo) * (k + 0.5) / n_error;
  }
  Rng rng(derive_seed(seed, "stimulus-onsets"));
  std::shuffle(onset_fraction.begin(), onset_fraction.end(), rng);

  std::vector<StimulusSpec> set;
  set.reserve(total);
  int n_ctl = 0;
  int n_err = 0;
  for (int r = 0; r < total; ++r) {
    StimulusSpec spec;
    spec.fps = options.fps;
    // Quantize so that duration * fps is an integer frame count.
    spec.duration_s = std::round(durations[r] * options.fps) / options.fps;
    char id[16];
    if (is_control[r]) {
      spec.kind = StimulusKind::kControl;
      std::snprintf(id, sizeof id, "ctl_%02d", ++n_ctl);
    } else {
      const bool human = (n_err % 2) == 0;
      spec.kind = human ? StimulusKind::kHumanError : StimulusKind::kRobotError;
      const int onset_frame =
          static_cast<int>(std::round(onset_fraction[n_err] * spec.duration_s * options.fps));
      spec.failure_onset_s = static_cast<double>(onset_frame) / options.fps;
      std::snprintf(id, sizeof id, "%s_%02d", human ? "hum" : "rob", n_err / 2 + 1);
      ++n_err;
    }
    spec.stimulus_id = id;
    spec.validate();
    set.push_back(std::move(spec));
  }
  std::sort(set.begin(), set.end(),
            [](const StimulusSpec& a, const StimulusSpec& b) { return a.stimulus_id < b.stimulus_id; });
  return set;
}

}  // namespace neckface
