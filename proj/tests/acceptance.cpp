// Acceptance checks. One line per criterion: "criterion N: PASS|FAIL <details> (<seconds> s)".
// Usage: neckface_acceptance [--criterion N]...   (no flag runs all ten)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "generators.hpp"
#include "neckface/detectors.hpp"
#include "neckface/facemap.hpp"
#include "neckface/metrics.hpp"
#include "neckface/oracle.hpp"
#include "neckface/protocols.hpp"
#include "neckface/reaction_dataset.hpp"
#include "neckface/synthetic_world.hpp"
#include "oracles.hpp"

using namespace neckface;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  double limit_s;
  std::function<Outcome()> run;
};

std::string fixed(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << std::fixed << v;
  return s.str();
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

bool contains(const std::vector<std::string>& v, const std::string& x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

// ---- 1: metric oracles
Outcome metric_oracles() {
  std::mt19937_64 rng(101);
  double worst = 0.0;
  bool monotone = true, k0_plain = true;
  constexpr int kInstances = 10000;
  for (int i = 0; i < kInstances; ++i) {
    const std::size_t n = 1 + rng() % 30;
    std::vector<FaceState> a, b;
    for (std::size_t j = 0; j < n; ++j) {
      a.push_back(gen::state(rng));
      b.push_back(gen::state(rng));
    }
    const auto got = mae_face(a, b);
    const auto want = oracle::mae(a, b);
    worst = std::max({worst, std::abs(got.mae_face - want.face), std::abs(got.mae_orientation - want.orient)});
  }
  auto diff = [](const MetricReport& g, const oracle::Macro& w) {
    return std::max({std::abs(g.accuracy - w.accuracy), std::abs(g.precision - w.precision),
                     std::abs(g.recall - w.recall), std::abs(g.f1 - w.f1)});
  };
  for (int i = 0; i < kInstances; ++i) {
    const std::size_t n = rng() % 60;
    const auto t = gen::labels(rng, n, 0.4);
    const auto p = gen::labels(rng, n, 0.5);
    worst = std::max(worst, diff(macro_metrics(p, t), oracle::macro(p, t)));
  }
  for (int i = 0; i < kInstances; ++i) {
    const std::size_t n = 1 + rng() % 60;
    const auto t = gen::labels(rng, n, 0.5);
    const auto p = gen::labels(rng, n, 0.5);
    const auto seg = gen::segments(rng, n);
    const double plain = macro_metrics(p, t).accuracy;
    k0_plain = k0_plain && margin_metrics(p, t, 0, seg).accuracy == plain;
    double prev = plain;
    for (int k = 1; k <= 5; ++k) {
      const auto got = margin_metrics(p, t, k, seg);
      worst = std::max(worst, diff(got, oracle::macro(oracle::forgive(p, t, k, seg), t)));
      monotone = monotone && got.accuracy >= prev;
      prev = got.accuracy;
    }
  }
  return {worst < 1e-9 && monotone && k0_plain,
          "3x10000 instances, max |diff| " + sci(worst) + ", monotone " + (monotone ? "yes" : "no") +
              ", k=0 equals plain " + (k0_plain ? "yes" : "no")};
}

// ---- 2: windowing oracle
Outcome windowing_oracle() {
  std::mt19937_64 rng(202);
  int mismatches = 0;
  std::size_t windows = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t t = rng() % 400;
    const int il = 1 + static_cast<int>(rng() % 100);
    const int stride = 1 + static_cast<int>(rng() % 20);
    const auto seq = gen::sequence(rng, t, 1);
    const auto got = make_windows(seq, il, stride);
    const auto want = oracle::windows(seq.labels, static_cast<std::size_t>(il), static_cast<std::size_t>(stride), 1);
    const auto offsets = window_offsets(t, static_cast<std::size_t>(il), static_cast<std::size_t>(stride));
    bool ok = got.size() == want.size() && offsets.size() == want.size();
    for (std::size_t j = 0; ok && j < want.size(); ++j) {
      ok = got[j].origin.start == want[j].start && offsets[j] == want[j].start && got[j].label == want[j].label;
    }
    mismatches += !ok;
    windows += want.size();
  }
  return {mismatches == 0, "1000 triples, " + std::to_string(windows) + " windows, " + std::to_string(mismatches) +
                               " mismatching triples"};
}

// ---- 3: PCA component count
Outcome pca_oracle() {
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> decay(0.05, 0.95);
  int mismatches = 0;
  std::set<int> seen_m;
  for (int i = 0; i < 100; ++i) {
    const int f = 2 + static_cast<int>(rng() % 11);
    const int n = 10 * f + static_cast<int>(rng() % 50);
    const Eigen::MatrixXd rows = gen::mixed_rows(rng, n, f, decay(rng));
    std::vector<std::vector<double>> r(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(f)));
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < f; ++b) r[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = rows(a, b);
    const int want = oracle::components_for(oracle::jacobi_eigenvalues(oracle::covariance(r)), 0.95);
    const auto p = fit_projector(rows, 0.95, false);
    mismatches += p.components != want;
    seen_m.insert(want);
  }
  // Hadamard rows give an exactly diagonal sample covariance diag(100, 1e-6, 1e-6).
  const double h[4][3] = {{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}};
  const double var[3] = {100.0, 1e-6, 1e-6};
  Eigen::MatrixXd d(4, 3);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 3; ++b) d(a, b) = h[a][b] * std::sqrt(var[b] * 3.0 / 4.0);
  const int m_diag = fit_projector(d, 0.95, false).components;
  return {mismatches == 0 && m_diag == 1, "100 covariances (" + std::to_string(seen_m.size()) +
                                              " distinct m), mismatches " + std::to_string(mismatches) +
                                              ", diag case m=" + std::to_string(m_diag)};
}

// ---- 4: facemap learnability
Outcome facemap_learnability() {
  WorldConfig quiet;
  quiet.noise_sigma = 0.0;
  const auto profile = make_profile("P01", 41, quiet);
  const auto session = gen_calibration_session(profile, 60.0, 12, 41, quiet);
  std::vector<FacemapSample> samples;
  constexpr std::size_t kFrames = 200;
  for (std::size_t i = 0; i < kFrames; ++i) {
    const std::size_t idx = i * session.size() / kFrames;
    samples.push_back({preprocess_pair(session.frame_pair(idx)), session.truth_states[idx]});
  }
  const FacemapDataset data(std::move(samples));
  FacemapConfig config;  // ResNet-18 at full width
  config.input_downsample = 4;
  config.seed = 41;
  auto schedule = TrainSchedule::for_stage(TrainStage::kFinetune);
  schedule.batch_size = 16;
  schedule.seed = 41;
  const auto init = build_facemap(config);
  const auto r = train_facemap(init, data, nullptr, schedule, AugmentPolicy{});
  const double base = r.history.baseline_mae_f;
  const double after = evaluate_facemap(r.model, data).mae_f;
  const bool ok = after < 0.10 * base && r.history.epochs.size() == 30;
  return {ok, "MAE_f " + fixed(base, 2) + " -> " + fixed(after, 2) + " (" + fixed(100.0 * after / base, 1) +
                  "% of baseline), history " + std::to_string(r.history.epochs.size()) + " epochs, input " +
                  std::to_string(config.input_width()) + "x" + std::to_string(config.input_height())};
}

// ---- 5: temporal 5-fold
bool temporal_fold_ok(const std::vector<std::size_t>& frames) {
  const auto folds = temporal_5fold(frames);
  if (folds.size() != 5) return false;
  std::vector<std::vector<int>> hits(frames.size());
  for (std::size_t p = 0; p < frames.size(); ++p) hits[p].assign(frames[p], 0);
  for (const auto& fold : folds) {
    std::set<std::size_t> people;
    for (const auto& ref : fold) {
      if (ref.participant >= frames.size() || ref.frame >= frames[ref.participant]) return false;
      ++hits[ref.participant][ref.frame];
      people.insert(ref.participant);
    }
    if (people.size() != frames.size()) return false;
  }
  for (const auto& h : hits)
    for (int c : h)
      if (c != 1) return false;
  return true;
}

Outcome temporal_folds() {
  std::mt19937_64 rng(505);
  int bad = 0;
  for (int i = 0; i < 500; ++i) {
    std::vector<std::size_t> frames(1 + rng() % 30);
    for (auto& f : frames) f = 5 + rng() % 4000;
    bad += !temporal_fold_ok(frames);
  }
  // The real calibration layout: 25 participants of 300 s at 12 fps.
  CorpusOptions co;
  co.n_participants = 25;
  const std::vector<std::size_t> real(25, static_cast<std::size_t>(co.calibration_duration_s * co.fps));
  const bool real_ok = temporal_fold_ok(real);
  return {bad == 0 && real_ok, "500 random layouts, " + std::to_string(bad) + " violations; 25x3600 layout " +
                                   (real_ok ? "ok" : "violates")};
}

// ---- detection corpora
WindowedDataset neck_dataset(const Corpus& corpus) {
  const auto seqs = truth_sequences(corpus);
  return build_windowed_dataset("neck", seqs, {});
}

DetectSchedule detection_schedule(int epochs) {
  DetectSchedule s;
  s.epochs = epochs;
  s.lr = 1e-3;
  s.batch_size = 64;
  s.seed = 3;
  return s;
}

CorpusOptions reduced_corpus(int participants) {
  CorpusOptions co;
  co.n_participants = participants;
  co.calibration_duration_s = 1;  // detection never reads calibration sessions
  return co;
}

// ---- 6: detection floor
Outcome detection_floor() {
  auto co = reduced_corpus(5);
  co.world = WorldConfig::high_separability();
  const auto corpus = gen_corpus(co);
  const auto seqs = truth_sequences(corpus);
  const auto data = build_windowed_dataset("neck", seqs, {});
  const auto plan = make_participant_folds(data.participant_ids(), 5, {0.7, 0.2, 0.1}, 1);

  double oracle_acc = 0.0;
  for (const auto& f : plan.folds) {
    std::vector<ReactionSequence> train, test;
    for (const auto& s : seqs) {
      if (contains(f.test, s.participant_id)) test.push_back(s);
      else if (contains(f.train, s.participant_id)) train.push_back(s);
    }
    oracle_acc += oracle_threshold_detector(train, test).test.accuracy / static_cast<double>(plan.folds.size());
  }
  bool ok = true;
  std::string detail = "oracle " + fixed(oracle_acc);
  for (Arch a : {Arch::kGruFcn, Arch::kMiniRocket}) {
    GridPoint g{to_string(a), {}, detection_schedule(20)};
    g.spec.arch = a;
    const auto r = run_cross_participant(data, std::span(&g, 1), plan, {});
    const double acc = r.summary(g.name).metrics.at("accuracy").mean;
    ok = ok && acc >= 0.90 && acc >= oracle_acc - 0.02;
    detail += ", " + g.name + " " + fixed(acc);
  }
  return {ok, detail};
}

// ---- 7: single participant beats zero-shot
Outcome single_vs_zero_shot() {
  const auto corpus = gen_corpus(reduced_corpus(8));
  const auto data = neck_dataset(corpus);
  const auto plan = make_leave_one_out_folds(data.participant_ids(), 0.2, 1);
  const GridPoint g{"gru_fcn", {}, detection_schedule(10)};
  const auto zero = run_cross_participant(data, std::span(&g, 1), plan, {});
  const double zero_acc = zero.summary(g.name).metrics.at("accuracy").mean;
  SweepOptions sweep;
  sweep.budgets = {0.05};
  sweep.seed = 1;
  const auto single = run_single_participant_sweep(data, g, sweep, {});
  const auto& s = single.summary(g.name, budget_label(0.05));
  const double single_acc = s.metrics.at("accuracy").mean;
  return {single_acc - zero_acc >= 0.05 && s.folds == 8,
          "8 participants, zero-shot " + fixed(zero_acc) + ", single b=0.05 " + fixed(single_acc) + " over " +
              std::to_string(s.folds) + " participants, gap " + fixed(single_acc - zero_acc)};
}

// ---- 8: transfer contract
// Both streams come from one latent face trajectory. The high-separability world is used
// because on the default world a cross-participant parent does not beat majority to begin with.
Outcome transfer_contract() {
  auto co = reduced_corpus(5);
  co.world = WorldConfig::high_separability();
  const auto corpus = gen_corpus(co);
  const auto neck = neck_dataset(corpus);
  const auto open = build_windowed_dataset("open", open_feature_sequences(corpus), {});
  std::vector<SampleSet> parts;
  for (const auto& p : neck.participants) parts.push_back(p.train);
  const auto all = concat(parts);
  const auto sched = detection_schedule(8);
  DetectorSpec spec;
  spec.features = neck.features;
  spec.interval_len = neck.interval_len;
  const auto parent = train_detector(*build_detector(spec), all, all, sched);
  const auto frozen_before = parent.detector->frozen_tensors();

  const auto dir = fs::temp_directory_path() / "neckface_acceptance_transfer";
  fs::remove_all(dir);
  ExperimentOptions options;
  options.run_dir = dir;
  const auto plan = make_participant_folds(open.participant_ids(), 5, {0.7, 0.2, 0.1}, 1);
  const auto r = run_transfer(parent.detector.get(), open, plan, sched, options);

  // Every fold's saved child and the parent itself must still hold the original frozen values.
  bool identical = true;
  auto same = [&](const std::vector<std::pair<std::string, torch::Tensor>>& t) {
    if (t.size() != frozen_before.size()) return false;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (t[i].first != frozen_before[i].first || !torch::equal(t[i].second, frozen_before[i].second)) return false;
    }
    return true;
  };
  identical = same(parent.detector->frozen_tensors());
  int children = 0;
  for (std::size_t k = 0; k < r.folds.size(); ++k) {
    const auto child = load_detector(dir / ("fold-" + std::to_string(k)) / "checkpoint");
    identical = identical && same(child->frozen_tensors()) && child->spec().features == kOpenFeatureDim;
    ++children;
  }
  fs::remove_all(dir);
  const auto& s = r.summary(r.best_config);
  const double acc = s.metrics.at("accuracy").mean;
  const double majority = s.metrics.at("majority_accuracy").mean;
  return {identical && children == 5 && acc >= majority + 0.10,
          std::to_string(frozen_before.size()) + " frozen tensors " + (identical ? "bit-identical" : "CHANGED") +
              " across parent and " + std::to_string(children) + " children; 55->49 accuracy " + fixed(acc) +
              " vs majority " + fixed(majority)};
}

// ---- 9: leakage guard
ParticipantWindows toy_participant(const std::string& id, int seed) {
  torch::manual_seed(seed);
  constexpr int n = 24, f = 3, l = 8;
  auto x = torch::randn({n, f, l});
  std::vector<int> y;
  std::vector<WindowOrigin> o;
  for (int i = 0; i < n; ++i) {
    y.push_back(i % 2);
    o.push_back({id, i % 2 ? "hum_01" : "ctl_01", static_cast<std::size_t>(i)});
  }
  SampleSet s{x, y, o};
  return {id, s, s};
}

Outcome leakage_guard() {
  std::mt19937_64 rng(909);
  int experiments = 0, entries = 0, violations = 0, role_errors = 0;
  GridPoint g{"ml_dnn", {}, {}};
  g.spec.arch = Arch::kMlDnn;
  g.schedule.epochs = 1;
  g.schedule.batch_size = 64;
  for (int trial = 0; trial < 24; ++trial) {
    const int n = 3 + static_cast<int>(rng() % 10);
    WindowedDataset d;
    d.name = "toy";
    d.features = 3;
    d.interval_len = 8;
    for (int p = 0; p < n; ++p) d.participants.push_back(toy_participant("P" + std::to_string(p), trial * 100 + p));
    const auto plan = trial % 3 == 0 ? make_leave_one_out_folds(d.participant_ids(), 0.2, trial)
                                     : make_participant_folds(d.participant_ids(), std::min(n / 2, 5),
                                                              {0.6, 0.2, 0.2}, trial);
    plan.validate();
    const auto r = run_cross_participant(d, std::span(&g, 1), plan, {});
    ++experiments;
    violations += static_cast<int>(leakage_violations(r).size());
    for (std::size_t k = 0; k < r.folds.size(); ++k) {
      ++entries;
      const auto& e = r.folds[k];
      for (const auto& t : e.test_participants) {
        role_errors += contains(e.train_participants, t) || contains(e.val_participants, t);
      }
      // Recorded lists come back sorted from the window origins.
      auto test = plan.folds[k].test, train = plan.folds[k].train;
      std::sort(test.begin(), test.end());
      std::sort(train.begin(), train.end());
      role_errors += e.test_participants != test || e.train_participants != train;
    }
  }
  // The scan must also see a planted leak.
  ExperimentReport planted;
  planted.protocol = "cross_participant";
  FoldEntry e;
  e.train_participants = {"P1", "P2"};
  e.test_participants = {"P2"};
  planted.folds = {e};
  const bool catches = leakage_violations(planted).size() == 1;
  return {violations == 0 && role_errors == 0 && catches,
          std::to_string(experiments) + " experiments, " + std::to_string(entries) + " fold entries, " +
              std::to_string(violations) + " scan hits, " + std::to_string(role_errors) + " role mismatches; planted leak " +
              (catches ? "caught" : "missed")};
}

// ---- 10: corpus scale
Outcome corpus_scale() {
  const auto corpus = gen_corpus(CorpusOptions{});
  const auto c = count_frames(corpus);
  constexpr double kTotal = 89560.0;
  const double total = static_cast<double>(c.kept());
  const bool ok = c.neutral > c.error && std::abs(total - kTotal) <= 0.10 * kTotal;
  return {ok, std::to_string(corpus.participants.size()) + " participants, " + std::to_string(c.neutral) +
                  " neutral / " + std::to_string(c.error) + " error = " + std::to_string(c.kept()) + " (" +
                  fixed(100.0 * (total - kTotal) / kTotal, 2) + "% vs 89560)"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, 60, metric_oracles},         {2, 60, windowing_oracle},    {3, 60, pca_oracle},
      {4, 600, facemap_learnability},  {5, 60, temporal_folds},      {6, 1200, detection_floor},
      {7, 1800, single_vs_zero_shot},  {8, 600, transfer_contract},  {9, 60, leakage_guard},
      {10, 300, corpus_scale},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--criterion" && i + 1 < argc) wanted.insert(std::atoi(argv[++i]));
    else {
      std::cerr << "usage: " << argv[0] << " [--criterion N]...\n";
      return 2;
    }
  }
  int failed = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.limit_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::cout << "criterion " << c.id << ": " << (pass ? "PASS" : "FAIL") << " " << o.detail << " ("
              << fixed(secs, 1) << " s";
    if (!in_time) std::cout << ", over the " << fixed(c.limit_s, 0) << " s limit";
    std::cout << ")" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
