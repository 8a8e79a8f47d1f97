#include "testing.hpp"

#include <filesystem>
#include <set>

#include "neckface/error.hpp"
#include "neckface/facemap.hpp"
#include "neckface/imaging.hpp"
#include "neckface/nn/resnet.hpp"
#include "neckface/synthetic_world.hpp"

using namespace neckface;

namespace {

FacemapConfig tiny() {
  FacemapConfig c;
  c.base_width = 8;
  c.decoder_hidden = 32;
  c.input_downsample = 8;
  c.seed = 5;
  return c;
}

std::vector<FacemapSample> calibration_samples(std::size_t n) {
  WorldConfig quiet = WorldConfig::high_separability();
  const auto profile = make_profile("P01", 9, quiet);
  const auto session = gen_calibration_session(profile, 60.0, 12, 9, quiet);
  std::vector<FacemapSample> out;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t idx = i * session.size() / n;
    out.push_back({preprocess_pair(session.frame_pair(idx)), session.truth_states[idx]});
  }
  return out;
}

}  // namespace

TEST_SUITE("facemap") {
  TEST_CASE("forward maps a batch to 55 outputs") {
    auto m = build_facemap(tiny());
    const auto x = torch::rand({4, 1, 30, 80});
    CHECK(m.infer(x).sizes() == torch::IntArrayRef{4, 55});
  }

  TEST_CASE("invalid configs are rejected") {
    auto c = tiny();
    c.output_dim = 54;
    CHECK_THROWS_AS(build_facemap(c), InvalidArgument);
    c = tiny();
    c.input_downsample = 7;
    CHECK_THROWS_AS(build_facemap(c), InvalidArgument);
    c = tiny();
    c.depth = 50;
    CHECK_THROWS_AS(build_facemap(c), InvalidArgument);
  }

  TEST_CASE("18-layer encoder has about half the parameters of 34") {
    FacemapConfig a;
    FacemapConfig b;
    b.depth = 34;
    const auto pa = build_facemap(a).parameter_count();
    const auto pb = build_facemap(b).parameter_count();
    CHECK(pa < pb);
    const double ratio = static_cast<double>(pa) / static_cast<double>(pb);
    CHECK(ratio > 0.4);
    CHECK(ratio < 0.65);
  }

  TEST_CASE("same seed gives the same initial weights") {
    auto a = build_facemap(tiny());
    auto b = build_facemap(tiny());
    const auto pa = a.net()->parameters();
    const auto pb = b.net()->parameters();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) CHECK(torch::equal(pa[i], pb[i]));
  }

  TEST_CASE("schedules carry the staged epochs and rates") {
    const auto pre = TrainSchedule::for_stage(TrainStage::kPretrain);
    const auto fine = TrainSchedule::for_stage(TrainStage::kFinetune);
    CHECK(pre.epochs == 30);
    CHECK(fine.epochs == 30);
    CHECK(pre.initial_lr == doctest::Approx(2e-4));
    CHECK(fine.initial_lr == doctest::Approx(1e-4));
  }

  TEST_CASE("training runs every epoch, improves, and records lineage") {
    const FacemapDataset data(calibration_samples(24));
    auto s = TrainSchedule::for_stage(TrainStage::kPretrain);
    s.epochs = 4;
    s.initial_lr = 2e-3;
    s.batch_size = 8;
    const auto init = build_facemap(tiny());
    const auto r = train_facemap(init, data, nullptr, s, AugmentPolicy{});
    REQUIRE(r.history.epochs.size() == 4);
    CHECK(r.history.epochs.front().train_loss > 0.0);
    CHECK(std::isfinite(r.history.epochs.front().train_loss));
    const auto& best = r.history.epochs.at(static_cast<std::size_t>(r.history.best_epoch - 1));
    CHECK(best.val_mae_f < r.history.baseline_mae_f);
    CHECK(r.model.stage() == "pretrain");
    CHECK_FALSE(r.model.fingerprint().empty());

    auto f = TrainSchedule::for_stage(TrainStage::kFinetune);
    f.epochs = 1;
    f.batch_size = 8;
    const auto tuned = train_facemap(r.model, data, nullptr, f, AugmentPolicy::for_stage(AugmentStage::kFinetune));
    CHECK(tuned.model.stage() == "finetune");
    CHECK(tuned.model.parent_fingerprint() == r.model.fingerprint());

    CHECK_THROWS_AS(train_facemap(init, data, nullptr, s, AugmentPolicy::for_stage(AugmentStage::kFinetune)),
                    InvalidArgument);
    CHECK_THROWS_AS(train_facemap(init, FacemapDataset{}, nullptr, s, AugmentPolicy{}), InvalidArgument);
  }

  TEST_CASE("checkpoints round-trip weights and lineage") {
    auto m = build_facemap(tiny());
    m.set_lineage("pretrain", "abc", "");
    const auto path = std::filesystem::temp_directory_path() / "neckface_facemap_test.ckpt";
    m.save(path);
    const auto back = FacemapModel::load(path);
    CHECK(back.stage() == "pretrain");
    CHECK(back.fingerprint() == "abc");
    CHECK(back.config().base_width == 8);
    const auto x = torch::rand({2, 1, 30, 80});
    CHECK(torch::allclose(m.infer(x), back.infer(x)));
    std::filesystem::remove(path);
    CHECK_THROWS_AS(FacemapModel::load(path), IoError);
  }

  TEST_CASE("temporal folds are contiguous, disjoint and cover everyone") {
    const std::vector<std::size_t> counts = {100, 37, 5};
    const auto folds = temporal_5fold(counts);
    REQUIRE(folds.size() == 5);
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (const auto& f : folds) {
      std::set<std::size_t> people;
      for (const auto& r : f) {
        CHECK(seen.insert({r.participant, r.frame}).second);
        people.insert(r.participant);
      }
      CHECK(people.size() == counts.size());
    }
    CHECK(seen.size() == 142);
    std::vector<std::size_t> p0;
    for (const auto& r : folds[2])
      if (r.participant == 0) p0.push_back(r.frame);
    REQUIRE(p0.size() == 20);
    CHECK(p0.front() == 40);
    CHECK(p0.back() == 59);
    CHECK_THROWS_AS(temporal_5fold(std::vector<std::size_t>{4}), InvalidArgument);
  }

  TEST_CASE("reconstruct keeps length, timestamps and valid ranges") {
    const auto m = build_facemap(tiny());
    const auto profile = make_profile("P01", 2);
    StimulusSpec s{"ctl_01", StimulusKind::kControl, 1.0, std::nullopt, 12};
    const auto session = gen_stimulus_session(profile, s, 2);
    std::vector<FramePair> stream;
    for (std::size_t i = 0; i < session.size(); ++i) {
      stream.push_back(session.frame_pair(i));
      stream.back().timestamp_s = session.timestamps[i];
    }
    const auto r = reconstruct(m, stream, 5);
    REQUIRE(r.states.size() == stream.size());
    for (std::size_t i = 0; i < stream.size(); ++i) {
      CHECK(r.timestamps[i] == stream[i].timestamp_s);
      CHECK(r.states[i].valid());
    }
  }
}
