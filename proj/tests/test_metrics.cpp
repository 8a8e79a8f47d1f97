#include "testing.hpp"

#include <random>

#include "neckface/error.hpp"
#include "neckface/face_state.hpp"
#include "neckface/metrics.hpp"
#include "generators.hpp"
#include "oracles.hpp"

using namespace neckface;

TEST_SUITE("metrics") {
  TEST_CASE("registry holds 52 unique names") {
    CHECK(kBlendshapeNames.size() == 52);
    CHECK(blendshape_index("jawOpen") == 17);
    CHECK(blendshape_index("mouthClose") == 18);
    CHECK(blendshape_index("notAShape") == -1);
    for (std::size_t i = 0; i < kBlendshapeNames.size(); ++i) CHECK(blendshape_index(kBlendshapeNames[i]) == int(i));
  }

  TEST_CASE("clamping restores the value ranges") {
    FaceState s;
    s.blendshapes[0] = 1500;
    s.blendshapes[1] = -3;
    s.yaw = 120;
    CHECK_FALSE(s.valid());
    const auto c = s.clamped();
    CHECK(c.valid());
    CHECK(c.blendshapes[0] == 1000);
    CHECK(c.blendshapes[1] == 0);
    CHECK(c.yaw == 90);
  }

  TEST_CASE("mae_face against the brute-force oracle") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t n = 1 + rng() % 30;
      std::vector<FaceState> a, b;
      for (std::size_t i = 0; i < n; ++i) {
        a.push_back(gen::state(rng));
        b.push_back(gen::state(rng));
      }
      const auto got = mae_face(a, b);
      const auto want = oracle::mae(a, b);
      CHECK(got.mae_face == doctest::Approx(want.face).epsilon(1e-12));
      CHECK(got.mae_orientation == doctest::Approx(want.orient).epsilon(1e-12));
    }
    CHECK_THROWS_AS(mae_face(std::vector<FaceState>(2), std::vector<FaceState>(3)), InvalidArgument);
  }

  TEST_CASE("macro metrics against the brute-force oracle") {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 500; ++trial) {
      const std::size_t n = rng() % 40;
      const auto t = gen::labels(rng, n, 0.4);
      const auto p = gen::labels(rng, n, 0.6);
      const auto got = macro_metrics(p, t);
      const auto want = oracle::macro(p, t);
      CHECK(std::abs(got.accuracy - want.accuracy) < 1e-12);
      CHECK(std::abs(got.precision - want.precision) < 1e-12);
      CHECK(std::abs(got.recall - want.recall) < 1e-12);
      CHECK(std::abs(got.f1 - want.f1) < 1e-12);
      CHECK(got.confusion.total() == n);
    }
  }

  TEST_CASE("confusion matrix is indexed truth then prediction") {
    const std::vector<int> t = {0, 0, 1, 1, 1};
    const std::vector<int> p = {0, 1, 1, 1, 0};
    const auto r = macro_metrics(p, t);
    CHECK(r.confusion.counts[0][0] == 1);
    CHECK(r.confusion.counts[0][1] == 1);
    CHECK(r.confusion.counts[1][0] == 1);
    CHECK(r.confusion.counts[1][1] == 2);
    CHECK(r.support[0] == 2);
    CHECK(r.support[1] == 3);
    CHECK(r.accuracy == doctest::Approx(0.6));
  }

  TEST_CASE("all one class gives zero for the absent class") {
    const std::vector<int> t = {1, 1, 1};
    const auto r = macro_metrics(t, t);
    CHECK(r.accuracy == 1.0);
    CHECK(r.precision == doctest::Approx(0.5));
    CHECK(r.f1 == doctest::Approx(0.5));
  }

  TEST_CASE("labels outside {0,1} are rejected") {
    const std::vector<int> t = {0, 2};
    CHECK_THROWS_AS(macro_metrics(t, t), InvalidArgument);
    CHECK_THROWS_AS(margin_metrics(std::vector<int>{0}, std::vector<int>{0}, -1), InvalidArgument);
  }

  TEST_CASE("margin metrics: oracle, monotone in k, equal to plain at k=0") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 300; ++trial) {
      const std::size_t n = 1 + rng() % 50;
      const auto t = gen::labels(rng, n, 0.5);
      const auto p = gen::labels(rng, n, 0.5);
      const auto seg = gen::segments(rng, n);
      const auto plain = macro_metrics(p, t);
      CHECK(margin_metrics(p, t, 0, seg).accuracy == plain.accuracy);
      double prev = plain.accuracy;
      for (int k = 1; k <= 4; ++k) {
        const auto got = margin_metrics(p, t, k, seg);
        const auto want = oracle::macro(oracle::forgive(p, t, k, seg), t);
        CHECK(std::abs(got.accuracy - want.accuracy) < 1e-12);
        CHECK(std::abs(got.f1 - want.f1) < 1e-12);
        CHECK(got.accuracy >= prev);
        prev = got.accuracy;
      }
    }
  }

  TEST_CASE("margin never crosses a segment boundary") {
    const std::vector<int> t = {0, 1};
    const std::vector<int> p = {1, 0};
    CHECK(margin_metrics(p, t, 1).accuracy == 1.0);
    const std::vector<std::size_t> seg = {0, 1};
    CHECK(margin_metrics(p, t, 1, seg).accuracy == 0.0);
  }

  TEST_CASE("mean_sd uses the sample standard deviation") {
    const std::vector<double> v = {2, 4, 4, 4, 5, 5, 7, 9};
    const auto m = mean_sd(v);
    CHECK(m.mean == doctest::Approx(5.0));
    CHECK(m.sd == doctest::Approx(std::sqrt(32.0 / 7.0)));
    CHECK(mean_sd(std::vector<double>{3.0}).sd == 0.0);
  }
}
