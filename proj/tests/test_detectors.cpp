#include "testing.hpp"

#include <cmath>
#include <filesystem>
#include <numeric>

#include "neckface/detectors.hpp"
#include "neckface/error.hpp"
#include "neckface/minirocket.hpp"

using namespace neckface;

namespace {

// Positives carry a burst on a few channels; negatives are noise.
SampleSet toy(int n, int f, int l, std::uint64_t seed) {
  torch::manual_seed(seed);
  auto x = torch::randn({n, f, l});
  std::vector<int> y(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    y[static_cast<std::size_t>(i)] = i % 2;
    if (i % 2) x[i].slice(0, 1, 4) += 2.0 * torch::sin(torch::linspace(0, 6.28, l));
  }
  return {x, y, {}};
}

std::vector<std::size_t> range(std::size_t a, std::size_t b) {
  std::vector<std::size_t> v(b - a);
  std::iota(v.begin(), v.end(), a);
  return v;
}

// Reference dilation assignment, numpy style: linspace endpoint pinned, unique with counts,
// proportional share, remainder round robin.
std::pair<std::vector<int>, std::vector<int>> reference_dilations(int length, int features, int max_per_kernel) {
  const int per_kernel = features / 84;
  const int true_max = std::min(per_kernel, max_per_kernel);
  const double multiplier = static_cast<double>(per_kernel) / true_max;
  const double max_exponent = std::log2((length - 1) / 8.0);
  std::vector<int> d, c;
  for (int i = 0; i < true_max; ++i) {
    const double step = true_max == 1 ? 0.0 : max_exponent / (true_max - 1);
    const double e = (i == true_max - 1 && true_max > 1) ? max_exponent : i * step;
    const int v = static_cast<int>(std::floor(std::pow(2.0, e)));
    if (!d.empty() && d.back() == v) ++c.back();
    else {
      d.push_back(v);
      c.push_back(1);
    }
  }
  int total = 0;
  for (auto& x : c) total += (x = static_cast<int>(x * multiplier));
  for (std::size_t i = 0; total < per_kernel; i = (i + 1) % c.size(), ++total) ++c[i];
  return {d, c};
}

}  // namespace

TEST_SUITE("detectors") {
  TEST_CASE("arch names round-trip and unknown names fail") {
    for (auto a : all_archs()) CHECK(arch_from_string(to_string(a)) == a);
    CHECK(all_archs().size() == 9);
    CHECK_THROWS_AS(arch_from_string("resnet9000"), InvalidArgument);
    CHECK(is_image_arch(Arch::kFrameResnet34));
    CHECK_FALSE(is_image_arch(Arch::kGruFcn));
  }

  TEST_CASE("minirocket keeps a whole number of features per kernel") {
    CHECK(minirocket_feature_count(10000) == 9996);
    CHECK(minirocket_feature_count(84) == 84);
    CHECK(minirocket_kernel_indices().size() == 84);
    for (int length : {9, 24, 80, 200, 1000}) {
      const auto [d, c] = minirocket_dilations(length, 9996, 32);
      const auto [rd, rc] = reference_dilations(length, 9996, 32);
      CHECK(d == rd);
      CHECK(c == rc);
      CHECK(std::accumulate(c.begin(), c.end(), 0) == 119);
    }
    // values from the reference numpy routine
    const auto [d80, c80] = minirocket_dilations(80, 9996, 32);
    CHECK(d80 == std::vector<int>{1, 2, 3, 4, 5, 6, 7, 8, 9});
    CHECK(c80 == std::vector<int>{38, 19, 15, 12, 11, 7, 7, 3, 7});
  }

  TEST_CASE("ml_dnn stacks 64/128/64 hidden units") {
    const auto hp = default_hyperparameters(Arch::kMlDnn);
    CHECK(hp.at("layers") == nlohmann::json({64, 128, 64}));
    DetectorSpec s;
    s.arch = Arch::kMlDnn;
    s.features = 5;
    s.interval_len = 8;
    const auto d = build_detector(s);
    const int64_t want = (40 * 64 + 64) + (64 * 128 + 128) + (128 * 64 + 64) + (64 * 2 + 2);
    CHECK(d->parameter_count() == want);
  }

  TEST_CASE("unknown or mistyped hyperparameters are rejected") {
    DetectorSpec s;
    s.hyper = {{"not_a_key", 3}};
    CHECK_THROWS_AS(s.validate(), InvalidArgument);
    s.hyper = {{"hidden_size", "wide"}};
    CHECK_THROWS_AS(s.validate(), InvalidArgument);
    s.hyper = {{"hidden_size", 16}};
    CHECK_NOTHROW(s.validate());
    s.features = 0;
    CHECK_THROWS_AS(s.validate(), InvalidArgument);
  }

  TEST_CASE("every sequence arch emits two probabilities per sample") {
    const auto data = toy(6, 4, 24, 1);
    for (auto a : all_archs()) {
      if (is_image_arch(a) || a == Arch::kMiniRocket) continue;
      DetectorSpec s;
      s.arch = a;
      s.features = 4;
      s.interval_len = 24;
      const auto d = build_detector(s);
      const auto p = d->probabilities(data.x);
      CHECK(p.sizes() == torch::IntArrayRef{6, 2});
      CHECK(torch::allclose(p.sum(1), torch::ones({6}, p.options())));
      CHECK_THROWS_AS(d->probabilities(torch::zeros({2, 5, 24})), InvalidArgument);
    }
  }

  TEST_CASE("frame arch takes square 3-channel images") {
    DetectorSpec s;
    s.arch = Arch::kFrameResnet34;
    s.hyper = {{"image_size", 32}, {"base_width", 8}};
    const auto d = build_detector(s);
    CHECK(d->spec().sample_shape() == std::vector<int64_t>{3, 32, 32});
    CHECK(d->probabilities(torch::rand({2, 3, 32, 32})).sizes() == torch::IntArrayRef{2, 2});
  }

  TEST_CASE("training separates the toy task and refuses one class") {
    const auto data = toy(200, 4, 24, 2);
    const auto train = data.subset(range(0, 150));
    const auto val = data.subset(range(150, 200));
    DetectSchedule sch;
    sch.epochs = 8;
    sch.lr = 3e-3;
    sch.batch_size = 32;
    for (auto a : {Arch::kGruFcn, Arch::kMiniRocket}) {
      DetectorSpec s;
      s.arch = a;
      s.features = 4;
      s.interval_len = 24;
      if (a == Arch::kMiniRocket) s.hyper = {{"num_features", 840}};
      const auto r = train_detector(*build_detector(s), train, val, sch);
      CHECK(r.detector->trained());
      const auto pred = predict(*r.detector, val);
      int hits = 0;
      for (std::size_t i = 0; i < val.size(); ++i) hits += pred.labels[i] == val.labels[i];
      CHECK(hits >= 45);
    }
    std::vector<int> ones(150, 1);
    SampleSet single{train.x, ones, {}};
    DetectorSpec s;
    s.features = 4;
    s.interval_len = 24;
    CHECK_THROWS_AS(train_detector(*build_detector(s), single, val, sch), DegenerateLabels);
  }

  TEST_CASE("last-layer fine-tuning leaves frozen tensors bit-identical") {
    const auto data = toy(120, 4, 24, 3);
    DetectSchedule sch;
    sch.epochs = 2;
    sch.batch_size = 32;
    for (auto a : {Arch::kGruFcn, Arch::kInceptionTime, Arch::kMlDnn, Arch::kTransformer, Arch::kMiniRocket}) {
      DetectorSpec s;
      s.arch = a;
      s.features = 4;
      s.interval_len = 24;
      if (a == Arch::kMiniRocket) s.hyper = {{"num_features", 168}};
      const auto parent = train_detector(*build_detector(s), data, data, sch);
      for (int f : {4, 3}) {
        SampleSet dst{data.x.slice(1, 0, f).contiguous(), data.labels, {}};
        if (a == Arch::kMiniRocket && f != 4) {
          CHECK_THROWS_AS(finetune_last_layer(*parent.detector, dst, dst, sch), InvalidArgument);
          continue;
        }
        const auto before = parent.detector->frozen_tensors();
        const auto child = finetune_last_layer(*parent.detector, dst, dst, sch);
        const auto after = child.detector->frozen_tensors();
        REQUIRE(before.size() == after.size());
        for (std::size_t i = 0; i < before.size(); ++i) {
          CHECK(before[i].first == after[i].first);
          CHECK(torch::equal(before[i].second, after[i].second));
        }
        CHECK(child.detector->parent_fingerprint() == parent.detector->fingerprint());
        CHECK(child.detector->spec().features == f);
      }
    }
    DetectorSpec s;
    s.features = 4;
    s.interval_len = 24;
    CHECK_THROWS_AS(finetune_last_layer(*build_detector(s), data, data, sch), InvalidArgument);
  }

  TEST_CASE("detector checkpoints reload to identical outputs") {
    const auto data = toy(64, 4, 24, 4);
    DetectSchedule sch;
    sch.epochs = 1;
    const auto dir = std::filesystem::temp_directory_path();
    for (auto a : {Arch::kGmlp, Arch::kMiniRocket, Arch::kBiLstm}) {
      DetectorSpec s;
      s.arch = a;
      s.features = 4;
      s.interval_len = 24;
      if (a == Arch::kMiniRocket) s.hyper = {{"num_features", 168}};
      const auto r = train_detector(*build_detector(s), data, data, sch);
      const auto path = dir / ("neckface_det_" + to_string(a) + ".ckpt");
      r.detector->save(path);
      const auto back = load_detector(path);
      CHECK(back->spec().arch == a);
      CHECK(back->fingerprint() == r.detector->fingerprint());
      CHECK(torch::allclose(back->probabilities(data.x), r.detector->probabilities(data.x)));
      std::filesystem::remove(path);
    }
  }

  TEST_CASE("same seed, same data, same fingerprint and weights") {
    const auto data = toy(64, 4, 24, 5);
    DetectSchedule sch;
    sch.epochs = 2;
    DetectorSpec s;
    s.features = 4;
    s.interval_len = 24;
    const auto a = train_detector(*build_detector(s), data, data, sch);
    const auto b = train_detector(*build_detector(s), data, data, sch);
    CHECK(a.detector->fingerprint() == b.detector->fingerprint());
    CHECK(torch::equal(a.detector->probabilities(data.x), b.detector->probabilities(data.x)));
  }
}
