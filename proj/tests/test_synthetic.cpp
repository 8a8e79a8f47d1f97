#include "testing.hpp"

#include <cmath>
#include <filesystem>
#include <random>
#include <set>

#include "neckface/error.hpp"
#include "neckface/imaging.hpp"
#include "neckface/stimulus.hpp"
#include "neckface/synthetic_world.hpp"

using namespace neckface;

namespace {

Raster smooth_canvas(int w, int h) {
  Raster r(w, h, 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double dx = (x - w / 2.0) / 40.0, dy = (y - h / 2.0) / 30.0;
      r.at(x, y) = static_cast<float>(0.2 + 0.7 * std::exp(-(dx * dx + dy * dy)));
    }
  return r;
}

}  // namespace

TEST_SUITE("synthetic") {
  TEST_CASE("stimulus set has ten videos of each kind with onsets inside") {
    const auto set = default_stimulus_set(7);
    REQUIRE(set.size() == 30);
    int counts[3] = {0, 0, 0};
    std::set<std::string> ids;
    for (const auto& s : set) {
      ++counts[static_cast<int>(s.kind)];
      ids.insert(s.stimulus_id);
      CHECK_NOTHROW(s.validate());
      if (s.is_error()) {
        REQUIRE(s.failure_onset_s.has_value());
        CHECK(*s.failure_onset_s >= 0.35 * s.duration_s - 1.0 / s.fps);
        CHECK(*s.failure_onset_s <= 0.65 * s.duration_s + 1.0 / s.fps);
      } else {
        CHECK_FALSE(s.failure_onset_s.has_value());
      }
    }
    CHECK(counts[0] == 10);
    CHECK(counts[1] == 10);
    CHECK(counts[2] == 10);
    CHECK(ids.size() == 30);
  }

  TEST_CASE("stimulus validation rejects inconsistent specs") {
    StimulusSpec s{"ctl_99", StimulusKind::kControl, 5.0, 2.0, 12};
    CHECK_THROWS_AS(s.validate(), InvalidArgument);
    StimulusSpec e{"hum_99", StimulusKind::kHumanError, 5.0, std::nullopt, 12};
    CHECK_THROWS_AS(e.validate(), InvalidArgument);
    StimulusSpec late{"hum_98", StimulusKind::kHumanError, 5.0, 6.0, 12};
    CHECK_THROWS_AS(late.validate(), InvalidArgument);
  }

  TEST_CASE("frame labels discard pre-onset frames") {
    StimulusSpec s{"rob_01", StimulusKind::kRobotError, 2.0, 0.5, 12};
    const auto l = frame_labels(s);
    REQUIRE(l.size() == 24);
    CHECK(l[5] == FrameLabel::kDiscard);
    CHECK(l[6] == FrameLabel::kError);
    CHECK(s.onset_frame() == 6);
  }

  TEST_CASE("profiles are pure functions of id and seed") {
    const auto a = make_profile("P03", 7);
    const auto b = make_profile("P03", 7);
    const auto c = make_profile("P04", 7);
    CHECK(a.reaction_channels == b.reaction_channels);
    CHECK(a.reaction_gain == b.reaction_gain);
    CHECK(a.rest_levels == b.rest_levels);
    CHECK(a.anatomy_seed != c.anatomy_seed);
    CHECK(a.reaction_channels.size() >= 3);
    CHECK(a.reaction_channels.size() <= 8);
  }

  TEST_CASE("cohort gains span the configured ratio") {
    const auto ps = gen_profiles(25, 7);
    double lo = 1e300, hi = 0;
    for (const auto& p : ps) {
      lo = std::min(lo, p.reaction_gain);
      hi = std::max(hi, p.reaction_gain);
    }
    CHECK(hi / lo > 4.0);
    CHECK(hi / lo <= 8.0 + 1e-9);
    CHECK(ps.front().participant_id == "P01");
  }

  TEST_CASE("high separability shares channels across participants") {
    const auto ps = gen_profiles(5, 7, WorldConfig::high_separability());
    for (const auto& p : ps) CHECK(p.reaction_channels == ps.front().reaction_channels);
  }

  TEST_CASE("sessions are deterministic and labeled by the stimulus") {
    const auto profile = make_profile("P01", 3);
    StimulusSpec s{"hum_01", StimulusKind::kHumanError, 4.0, 2.0, 12};
    const auto a = gen_stimulus_session(profile, s, 3);
    const auto b = gen_stimulus_session(profile, s, 3);
    REQUIRE(a.size() == 48);
    CHECK((a.truth_states == b.truth_states));
    for (const auto& st : a.truth_states) CHECK(st.valid());
    CHECK(a.labels[23] == FrameLabel::kDiscard);
    CHECK(a.labels[24] == FrameLabel::kError);
    const auto f1 = a.frame_pair(10);
    const auto f2 = b.frame_pair(10);
    CHECK(f1.left == f2.left);
    CHECK(f1.left.width() == kCameraWidth);
    CHECK(f1.left.height() == kCameraHeight);
  }

  TEST_CASE("reactions raise the participant's reaction channels") {
    WorldConfig quiet = WorldConfig::high_separability();
    const auto profile = make_profile("P01", 3, quiet);
    StimulusSpec s{"rob_01", StimulusKind::kRobotError, 8.0, 3.0, 12};
    const auto sess = gen_stimulus_session(profile, s, 3, quiet);
    const int ch = profile.reaction_channels.front();
    double before = 0, after = 0;
    for (int i = 24; i < 36; ++i) before += sess.truth_states[i].blendshapes[ch] / 12.0;
    for (int i = 40; i < 52; ++i) after += sess.truth_states[i].blendshapes[ch] / 12.0;
    CHECK(after > before + 50.0);
  }

  TEST_CASE("open features are 49 channels and depend on the same trajectory") {
    const auto profile = make_profile("P02", 5);
    StimulusSpec s{"ctl_01", StimulusKind::kControl, 3.0, std::nullopt, 12};
    const auto f = gen_open_features(profile, s, 5, kOpenFeatureFps);
    CHECK(f.rows() == 90);
    CHECK(f.cols() == kOpenFeatureDim);
    CHECK(f.isApprox(gen_open_features(profile, s, 5, kOpenFeatureFps)));
  }

  TEST_CASE("small corpus keeps neutral frames ahead of error frames") {
    CorpusOptions o;
    o.n_participants = 2;
    o.calibration_duration_s = 2.0;
    const auto c = gen_corpus(o);
    REQUIRE(c.participants.size() == 2);
    const auto counts = count_frames(c);
    CHECK(counts.neutral > counts.error);
    CHECK(counts.discarded > 0);
    CHECK(c.participants[0].calibration.size() == 24);
  }

  TEST_CASE("preprocess tiles both cameras at 640x240") {
    const auto profile = make_profile("P01", 1);
    const auto pair = canonical_rest_pair(profile);
    const auto t = preprocess_pair(pair);
    CHECK(t.image.width() == kTiledWidth);
    CHECK(t.image.height() == kTiledHeight);
    CHECK(t.image.channels() == 1);
    FramePair bad = pair;
    bad.right = Raster(320, 240, 1);
    CHECK_THROWS_AS(preprocess_pair(bad), InvalidArgument);
  }

  TEST_CASE("integer translation shifts pixels exactly") {
    std::mt19937_64 rng(31);
    Raster r(32, 24, 1);
    for (auto& v : r.data()) v = static_cast<float>((rng() % 1000) / 1000.0);
    for (int tx = -4; tx <= 4; tx += 2) {
      for (int ty = -3; ty <= 3; ty += 3) {
        AugmentParams p;
        p.translate_x = tx;
        p.translate_y = ty;
        const auto w = warp_canvas(r, p);
        for (int y = 0; y < 24; ++y)
          for (int x = 0; x < 32; ++x) {
            const int sx = x - tx, sy = y - ty;
            const float want = (sx >= 0 && sx < 32 && sy >= 0 && sy < 24) ? r.at(sx, sy) : 0.0F;
            CHECK(w.at(x, y) == doctest::Approx(want).epsilon(1e-6));
          }
      }
    }
  }

  TEST_CASE("rotation followed by its inverse returns the image") {
    const auto img = smooth_canvas(320, 240);
    AugmentParams fwd, back;
    fwd.rotate_deg = 20.0;
    back.rotate_deg = -20.0;
    const auto round = warp_canvas(warp_canvas(img, fwd), back);
    double worst = 0.0;
    for (int y = 60; y < 180; ++y)
      for (int x = 100; x < 220; ++x) worst = std::max(worst, double(std::fabs(round.at(x, y) - img.at(x, y))));
    CHECK(worst < 0.02);
  }

  TEST_CASE("augment ranges follow the stage") {
    std::mt19937_64 rng(32);
    const auto pre = AugmentPolicy::for_stage(AugmentStage::kPretrain);
    const auto fine = AugmentPolicy::for_stage(AugmentStage::kFinetune);
    for (int i = 0; i < 500; ++i) {
      const auto a = sample_augment(pre, rng);
      CHECK(std::fabs(a.rotate_deg) <= 30.0);
      CHECK(a.scale >= 0.9);
      CHECK(a.scale <= 1.1);
      CHECK(std::fabs(a.translate_x) <= 6.0);
      const auto b = sample_augment(fine, rng);
      CHECK(std::fabs(b.rotate_deg) <= 8.0);
    }
    CHECK(sample_augment(AugmentPolicy{}, rng).is_identity());
  }

  TEST_CASE("png round trip within quantization") {
    Raster r(16, 8, 1);
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 16; ++x) r.at(x, y) = static_cast<float>((x + 16 * y) / 127.0);
    const auto path = std::filesystem::temp_directory_path() / "neckface_png_test.png";
    write_png(path, r);
    const auto back = read_png(path);
    REQUIRE(back.width() == 16);
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 16; ++x) CHECK(std::fabs(back.at(x, y) - r.at(x, y)) <= 0.5F / 255.0F + 1e-6F);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(read_png(path), IoError);
  }
}
