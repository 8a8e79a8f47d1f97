#include "testing.hpp"

#include <filesystem>
#include <random>

#include "neckface/error.hpp"
#include "neckface/reaction_dataset.hpp"
#include "generators.hpp"
#include "oracles.hpp"

using namespace neckface;

TEST_SUITE("reaction_dataset") {
  TEST_CASE("labeling drops pre-onset frames of error videos") {
    StimulusSpec spec{"rob_01", StimulusKind::kRobotError, 2.0, 1.0, 12};
    std::vector<double> ts;
    for (int i = 0; i < 24; ++i) ts.push_back(i / 12.0);
    const auto seq = label_frames(Eigen::MatrixXd::Zero(24, 3), ts, spec, "P02");
    CHECK(seq.length() == 12);
    CHECK(seq.timestamps.front() == doctest::Approx(1.0));
    for (int l : seq.labels) CHECK(l == 1);

    StimulusSpec ctl{"ctl_01", StimulusKind::kControl, 2.0, std::nullopt, 12};
    const auto c = label_frames(Eigen::MatrixXd::Zero(24, 3), ts, ctl, "P02");
    CHECK(c.length() == 24);
    for (int l : c.labels) CHECK(l == 0);
  }

  TEST_CASE("make_windows matches exhaustive enumeration") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 300; ++trial) {
      const std::size_t t = rng() % 60;
      const int il = 1 + static_cast<int>(rng() % 20);
      const int stride = 1 + static_cast<int>(rng() % 7);
      const int tie = static_cast<int>(rng() % 2);
      const auto seq = gen::sequence(rng, t, 2);
      const auto got = make_windows(seq, il, stride, tie);
      const auto want = oracle::windows(seq.labels, static_cast<std::size_t>(il), static_cast<std::size_t>(stride), tie);
      REQUIRE(got.size() == want.size());
      for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i].origin.start == want[i].start);
        CHECK(got[i].label == want[i].label);
        CHECK(got[i].matrix.rows() == 2);
        CHECK(got[i].matrix.cols() == il);
        CHECK(got[i].matrix(1, 0) == static_cast<float>(seq.features(static_cast<Eigen::Index>(want[i].start), 1)));
      }
    }
  }

  TEST_CASE("mode label breaks ties to the tie label") {
    const std::vector<int> l = {0, 1, 0, 1};
    CHECK(mode_label(l, 1) == 1);
    CHECK(mode_label(l, 0) == 0);
    CHECK(mode_label(std::vector<int>{0, 0, 1}, 1) == 0);
  }

  TEST_CASE("align_stream picks the nearest earlier-on-tie frame") {
    std::mt19937_64 rng(22);
    const std::vector<std::pair<int, int>> rates = {{30, 12}, {60, 12}, {12, 12}, {25, 10}, {30, 7}};
    for (int trial = 0; trial < 100; ++trial) {
      const auto [src, dst] = rates[rng() % rates.size()];
      const std::size_t n = 1 + rng() % 200;
      Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 1);
      for (std::size_t i = 0; i < n; ++i) x(static_cast<Eigen::Index>(i), 0) = static_cast<double>(i);
      const auto a = align_stream(x, src, dst);
      const auto want = oracle::nearest_frames(n, src, dst);
      REQUIRE(a.source_index.size() == want.size());
      for (std::size_t k = 0; k < want.size(); ++k) {
        CHECK(a.source_index[k] == want[k]);
        CHECK(a.features(static_cast<Eigen::Index>(k), 0) == static_cast<double>(want[k]));
        CHECK(a.timestamps[k] == doctest::Approx(static_cast<double>(k) / dst));
      }
    }
    CHECK_THROWS_AS(align_stream(Eigen::MatrixXd::Zero(4, 1), 10, 12), InvalidArgument);
  }

  TEST_CASE("retained component count matches a Jacobi eigen-spectrum") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 50; ++trial) {
      const int f = 2 + static_cast<int>(rng() % 6);
      const int n = 40;
      const Eigen::MatrixXd rows = gen::mixed_rows(rng, n, f);
      std::vector<std::vector<double>> oracle_rows(n, std::vector<double>(f));
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < f; ++c) oracle_rows[r][c] = rows(r, c);
      const auto ev = oracle::jacobi_eigenvalues(oracle::covariance(oracle_rows));
      const auto p = fit_projector(rows, 0.95, false);
      CHECK(p.components == oracle::components_for(ev, 0.95));
      // Tolerance is relative to the spectrum scale; tiny trailing eigenvalues carry absolute rounding error.
      for (int i = 0; i < f; ++i) CHECK(std::abs(p.eigenvalues(i) - ev[i]) <= 1e-9 * ev[0]);
      CHECK(apply_projector(p, rows).cols() == p.components);
    }
  }

  TEST_CASE("one dominant variance keeps one component") {
    // Orthogonal zero-sum columns give an exactly diagonal sample covariance.
    const double h[4][3] = {{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}};
    const double var[3] = {100.0, 1e-6, 1e-6};
    Eigen::MatrixXd rows(4, 3);
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 3; ++c) rows(r, c) = h[r][c] * std::sqrt(var[c] * 3.0 / 4.0);
    const auto p = fit_projector(rows, 0.95, false);
    CHECK(p.components == 1);
    CHECK(p.eigenvalues(0) == doctest::Approx(100.0));
  }

  TEST_CASE("projector fitted on training rows applies unchanged elsewhere") {
    Eigen::MatrixXd train = Eigen::MatrixXd::Random(30, 4);
    train.col(3) = train.col(0) * 2.0;
    const auto p = fit_projector(train, 0.99, true);
    CHECK(p.components <= 3);
    Eigen::MatrixXd other = Eigen::MatrixXd::Random(5, 4);
    const auto once = apply_projector(p, other);
    const auto twice = apply_projector(p, other);
    CHECK(once.isApprox(twice));
    CHECK_THROWS_AS(apply_projector(p, Eigen::MatrixXd::Zero(2, 3)), InvalidArgument);
  }

  TEST_CASE("window files round-trip") {
    std::mt19937_64 rng(24);
    const auto seq = gen::sequence(rng, 40, 3);
    WindowDataset d;
    d.features = 3;
    d.interval_len = 8;
    d.stride = 4;
    d.windows = make_windows(seq, 8, 4);
    const auto path = std::filesystem::temp_directory_path() / "neckface_windows_test.csv";
    write_window_file(path, d);
    const auto back = read_window_file(path);
    REQUIRE(back.windows.size() == d.windows.size());
    for (std::size_t i = 0; i < d.windows.size(); ++i) {
      CHECK(back.windows[i].origin == d.windows[i].origin);
      CHECK(back.windows[i].label == d.windows[i].label);
      CHECK(back.windows[i].matrix.isApprox(d.windows[i].matrix));
    }
    std::filesystem::remove(path);
  }
}
