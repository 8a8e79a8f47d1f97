#include "neckface/protocols.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "neckface/error.hpp"
#include "neckface/io_util.hpp"
#include "neckface/rng.hpp"

namespace neckface {

namespace {

std::vector<std::string> participants_of(const SampleSet& s) {
  std::set<std::string> ids;
  for (const auto& o : s.origins) ids.insert(o.participant_id);
  return {ids.begin(), ids.end()};
}

SampleSet gather(const WindowedDataset& data, const std::vector<std::string>& ids, bool eval) {
  std::vector<SampleSet> parts;
  for (const auto& id : ids) {
    const auto& p = data.at(id);
    parts.push_back(eval ? p.eval : p.train);
  }
  return concat(parts);
}

std::vector<std::size_t> segment_ids(const SampleSet& s) {
  std::vector<std::size_t> seg(s.size(), 0);
  std::size_t id = 0;
  for (std::size_t i = 1; i < s.size(); ++i) {
    const auto& a = s.origins[i - 1];
    const auto& b = s.origins[i];
    if (a.participant_id != b.participant_id || a.stimulus_id != b.stimulus_id || b.start < a.start) ++id;
    seg[i] = id;
  }
  return seg;
}

MetricReport evaluate(const Detector& det, const SampleSet& test, std::span<const int> ks) {
  const auto pred = predict(det, test);
  MetricReport report = macro_metrics(pred.labels, test.labels);
  const auto seg = test.origins.size() == test.size() ? segment_ids(test) : std::vector<std::size_t>{};
  for (int k : ks) report.margin[k] = margin_metrics(pred.labels, test.labels, k, seg);
  return report;
}

double majority_accuracy(const SampleSet& train, const SampleSet& test) {
  if (test.empty()) return 0.0;
  const auto ones_train = std::count(train.labels.begin(), train.labels.end(), 1);
  const int majority = 2 * ones_train > static_cast<long>(train.size()) ? 1 : 0;
  const auto hits = std::count(test.labels.begin(), test.labels.end(), majority);
  return static_cast<double>(hits) / static_cast<double>(test.size());
}

void add_metric(std::map<std::string, std::vector<double>>& acc, const MetricReport& r) {
  acc["accuracy"].push_back(r.accuracy);
  acc["precision"].push_back(r.precision);
  acc["recall"].push_back(r.recall);
  acc["f1"].push_back(r.f1);
  for (const auto& [k, m] : r.margin) {
    acc["margin_k" + std::to_string(k) + "_accuracy"].push_back(m.accuracy);
    acc["margin_k" + std::to_string(k) + "_f1"].push_back(m.f1);
  }
}

void summarize(ExperimentReport& report) {
  std::map<std::pair<std::string, std::string>, std::map<std::string, std::vector<double>>> by;
  std::map<std::pair<std::string, std::string>, std::size_t> counts;
  std::vector<std::pair<std::string, std::string>> order;
  for (const auto& f : report.folds) {
    const auto key = std::make_pair(f.config, f.group);
    if (!counts.contains(key)) {
      order.push_back(key);
      counts[key] = 0;
    }
    if (f.skipped) continue;
    ++counts[key];
    add_metric(by[key], f.test);
    if (f.before_accuracy) by[key]["before_accuracy"].push_back(*f.before_accuracy);
    by[key]["majority_accuracy"].push_back(f.majority_accuracy);
  }
  report.summaries.clear();
  for (const auto& key : order) {
    ConfigSummary s;
    s.config = key.first;
    s.group = key.second;
    s.folds = counts[key];
    for (const auto& [name, values] : by[key]) s.metrics[name] = mean_sd(values);
    report.summaries.push_back(std::move(s));
  }
}

nlohmann::json metric_json(const MetricReport& r) {
  nlohmann::json j = {{"accuracy", r.accuracy},
                      {"precision", r.precision},
                      {"recall", r.recall},
                      {"f1", r.f1},
                      {"confusion", {{r.confusion.counts[0][0], r.confusion.counts[0][1]},
                                     {r.confusion.counts[1][0], r.confusion.counts[1][1]}}},
                      {"support", {r.support[0], r.support[1]}}};
  nlohmann::json margin = nlohmann::json::object();
  for (const auto& [k, m] : r.margin) margin[std::to_string(k)] = metric_json(m);
  j["margin"] = margin;
  return j;
}

nlohmann::json fold_json(const FoldEntry& f) {
  nlohmann::json j = {{"config", f.config},
                      {"fold", f.fold},
                      {"group", f.group},
                      {"participant", f.participant},
                      {"train_participants", f.train_participants},
                      {"val_participants", f.val_participants},
                      {"test_participants", f.test_participants},
                      {"n_train", f.n_train},
                      {"n_val", f.n_val},
                      {"n_test", f.n_test},
                      {"test", metric_json(f.test)},
                      {"majority_accuracy", f.majority_accuracy},
                      {"history", f.history.to_json()},
                      {"fingerprint", f.fingerprint},
                      {"skipped", f.skipped},
                      {"warning", f.warning}};
  if (f.before_accuracy) j["before_accuracy"] = *f.before_accuracy;
  return j;
}

std::string curves_csv(const DetectorHistory& h) {
  std::ostringstream out;
  out << "epoch,train_loss,val_accuracy,val_f1\n";
  for (const auto& e : h.epochs) {
    out << e.epoch << ',' << fmt::format("{:.9g}", e.train_loss) << ',' << fmt::format("{:.9g}", e.val_accuracy)
        << ',' << fmt::format("{:.9g}", e.val_f1) << '\n';
  }
  return out.str();
}

void write_fold(const ExperimentOptions& options, bool multi_config, std::size_t index, const FoldEntry& entry,
                const Detector* det) {
  if (options.run_dir.empty()) return;
  auto dir = options.run_dir;
  if (multi_config) dir /= entry.config;
  dir /= "fold-" + std::to_string(index);
  ensure_directory(dir);
  if (det != nullptr) det->save(dir / "checkpoint");
  atomic_write_text(dir / "metrics.json", fold_json(entry).dump(2));
  atomic_write_text(dir / "curves.csv", curves_csv(entry.history));
}

struct FoldData {
  SampleSet train, val, test;
};

FoldData fold_data(const WindowedDataset& data, const FoldAssignment& a, const ExperimentOptions& options) {
  FoldData d{gather(data, a.train, false), gather(data, a.val, true), gather(data, a.test, true)};
  if (options.pca) {
    const auto proj = fit_projector(sample_rows(d.train), options.pca_threshold);
    d.train = project_samples(proj, d.train);
    if (!d.val.empty()) d.val = project_samples(proj, d.val);
    d.test = project_samples(proj, d.test);
  }
  return d;
}

void check_no_leak(const FoldEntry& e) {
  for (const auto& t : e.test_participants) {
    const bool in_train = std::find(e.train_participants.begin(), e.train_participants.end(), t) != e.train_participants.end();
    const bool in_val = std::find(e.val_participants.begin(), e.val_participants.end(), t) != e.val_participants.end();
    if (in_train || in_val) {
      throw TrainingError("participant " + t + " appears in both training and test of fold " + std::to_string(e.fold));
    }
  }
}

}  // namespace

std::vector<ReactionSequence> truth_sequences(const Corpus& corpus) {
  std::vector<ReactionSequence> out;
  for (const auto& p : corpus.participants) {
    for (const auto& s : p.stimuli) {
      out.push_back(label_frames(s.state_matrix(), s.timestamps, s.stimulus, p.profile.participant_id));
    }
  }
  return out;
}

std::vector<ReactionSequence> open_feature_sequences(const Corpus& corpus) {
  std::vector<ReactionSequence> out;
  for (const auto& p : corpus.participants) {
    for (const auto& s : p.stimuli) {
      const auto raw = gen_open_features(p.profile, s.stimulus, corpus.options.seed, kOpenFeatureFps,
                                         corpus.options.world);
      const auto aligned = align_stream(raw, kOpenFeatureFps, s.stimulus.fps);
      out.push_back(label_frames(aligned.features, aligned.timestamps, s.stimulus, p.profile.participant_id));
    }
  }
  return out;
}

std::vector<std::string> WindowedDataset::participant_ids() const {
  std::vector<std::string> ids;
  for (const auto& p : participants) ids.push_back(p.participant_id);
  return ids;
}

const ParticipantWindows& WindowedDataset::at(const std::string& id) const {
  for (const auto& p : participants) {
    if (p.participant_id == id) return p;
  }
  throw InvalidArgument("participant " + id + " not in dataset " + name);
}

std::string WindowedDataset::digest() const {
  std::string buf = name + ":" + std::to_string(features) + "x" + std::to_string(interval_len);
  for (const auto& p : participants) buf += "|" + p.participant_id + ":" + p.train.digest() + ":" + p.eval.digest();
  return sha256_hex(buf);
}

WindowedDataset build_windowed_dataset(std::string name, std::span<const ReactionSequence> sequences,
                                       const WindowingOptions& options) {
  WindowedDataset out;
  out.name = std::move(name);
  out.interval_len = options.interval_len;
  std::vector<std::string> order;
  std::map<std::string, std::pair<std::vector<LabeledWindow>, std::vector<LabeledWindow>>> groups;
  for (const auto& seq : sequences) {
    if (out.features == 0) out.features = static_cast<int>(seq.feature_count());
    if (static_cast<int>(seq.feature_count()) != out.features) {
      throw InvalidArgument("sequences differ in feature count");
    }
    if (!groups.contains(seq.participant_id)) order.push_back(seq.participant_id);
    auto& g = groups[seq.participant_id];
    auto tw = make_windows(seq, options.interval_len, options.train_stride, options.tie_label);
    auto ew = make_windows(seq, options.interval_len, options.eval_stride, options.tie_label);
    g.first.insert(g.first.end(), std::make_move_iterator(tw.begin()), std::make_move_iterator(tw.end()));
    g.second.insert(g.second.end(), std::make_move_iterator(ew.begin()), std::make_move_iterator(ew.end()));
  }
  for (const auto& id : order) {
    auto& g = groups[id];
    out.participants.push_back({id, samples_from_windows(g.first), samples_from_windows(g.second)});
  }
  return out;
}

void FoldPlan::validate() const {
  if (static_cast<int>(folds.size()) != n_folds) throw InvalidArgument("fold plan size does not match n_folds");
  std::set<std::string> tested;
  for (std::size_t k = 0; k < folds.size(); ++k) {
    std::set<std::string> seen;
    for (const auto* group : {&folds[k].train, &folds[k].val, &folds[k].test}) {
      for (const auto& id : *group) {
        if (!seen.insert(id).second) {
          throw InvalidArgument("participant " + id + " has two roles in fold " + std::to_string(k));
        }
      }
    }
    for (const auto& id : folds[k].test) {
      if (!tested.insert(id).second) throw InvalidArgument("participant " + id + " is tested in two folds");
    }
  }
}

nlohmann::json FoldPlan::to_json() const {
  nlohmann::json f = nlohmann::json::array();
  for (const auto& a : folds) f.push_back({{"train", a.train}, {"val", a.val}, {"test", a.test}});
  return {{"n_folds", n_folds}, {"seed", seed}, {"folds", f}};
}

FoldPlan make_participant_folds(std::span<const std::string> participants, int n_folds,
                                std::array<double, 3> split, std::uint64_t seed) {
  const int n = static_cast<int>(participants.size());
  if (n_folds < 1) throw InvalidArgument("n_folds must be positive");
  if (n < n_folds) {
    throw InvalidArgument(fmt::format("{} participants cannot fill {} folds", n, n_folds));
  }
  for (double s : split) {
    if (!(s >= 0.0)) throw InvalidArgument("split fractions must be nonnegative");
  }
  const int n_test = std::max(1, static_cast<int>(std::lround(split[2] * n)));
  const int n_val = split[1] > 0.0 ? std::max(1, static_cast<int>(std::lround(split[1] * n))) : 0;
  if (n_test * n_folds > n) {
    throw InvalidArgument(fmt::format("{} folds of {} test participants need more than {} participants",
                                      n_folds, n_test, n));
  }
  if (n - n_test - n_val < 1) throw InvalidArgument("split leaves no training participants");

  std::vector<std::string> shuffled(participants.begin(), participants.end());
  Rng rng(derive_seed(seed, "participant-folds"));
  std::shuffle(shuffled.begin(), shuffled.end(), rng);

  FoldPlan plan;
  plan.n_folds = n_folds;
  plan.seed = seed;
  for (int k = 0; k < n_folds; ++k) {
    FoldAssignment a;
    const int t0 = k * n_test;
    for (int i = 0; i < n_test; ++i) a.test.push_back(shuffled[static_cast<std::size_t>(t0 + i)]);
    // Remaining participants, starting right after the test block and wrapping around.
    for (int i = 0; i < n - n_test; ++i) {
      const auto& id = shuffled[static_cast<std::size_t>((t0 + n_test + i) % n)];
      (i < n_val ? a.val : a.train).push_back(id);
    }
    plan.folds.push_back(std::move(a));
  }
  plan.validate();
  return plan;
}

FoldPlan make_leave_one_out_folds(std::span<const std::string> participants, double val_fraction,
                                  std::uint64_t seed) {
  const int n = static_cast<int>(participants.size());
  if (n < 2) throw InvalidArgument("leave-one-out needs at least two participants");
  return make_participant_folds(participants, n, {0.0, val_fraction, 1.0 / n}, seed);
}

const ConfigSummary& ExperimentReport::summary(const std::string& config, const std::string& group) const {
  for (const auto& s : summaries) {
    if (s.config == config && s.group == group) return s;
  }
  throw InvalidArgument("no summary for config '" + config + "' group '" + group + "'");
}

nlohmann::json ExperimentReport::to_json() const {
  nlohmann::json folds_json = nlohmann::json::array();
  for (const auto& f : folds) folds_json.push_back(fold_json(f));
  nlohmann::json sums = nlohmann::json::array();
  for (const auto& s : summaries) {
    nlohmann::json m = nlohmann::json::object();
    for (const auto& [k, v] : s.metrics) m[k] = {{"mean", v.mean}, {"sd", v.sd}, {"n", v.n}};
    sums.push_back({{"config", s.config}, {"group", s.group}, {"folds", s.folds}, {"metrics", m}});
  }
  return {{"protocol", protocol},
          {"dataset", dataset},
          {"data_fingerprint", data_fingerprint},
          {"parent_fingerprint", parent_fingerprint},
          {"config", config},
          {"best_config", best_config},
          {"warnings", warnings},
          {"summaries", sums},
          {"folds", folds_json}};
}

std::vector<std::string> leakage_violations(const ExperimentReport& report) {
  std::vector<std::string> out;
  for (const auto& f : report.folds) {
    if (f.skipped || report.protocol == "single_participant") continue;
    for (const auto& t : f.test_participants) {
      const bool leak =
          std::find(f.train_participants.begin(), f.train_participants.end(), t) != f.train_participants.end() ||
          std::find(f.val_participants.begin(), f.val_participants.end(), t) != f.val_participants.end();
      if (leak) out.push_back(fmt::format("{} fold {}: participant {}", f.config, f.fold, t));
    }
  }
  return out;
}

ExperimentReport run_cross_participant(const WindowedDataset& dataset, std::span<const GridPoint> grid,
                                       const FoldPlan& plan, const ExperimentOptions& options) {
  if (grid.empty()) throw InvalidArgument("hyperparameter grid is empty");
  plan.validate();
  ExperimentReport report;
  report.protocol = "cross_participant";
  report.dataset = dataset.name;
  report.data_fingerprint = dataset.digest();
  report.config["plan"] = plan.to_json();
  report.config["selection"] = options.selection == EpochSelection::kTest ? "test" : "validation";
  report.config["pca"] = options.pca;
  nlohmann::json grid_json = nlohmann::json::array();
  for (const auto& g : grid) grid_json.push_back({{"name", g.name}, {"spec", g.spec.to_json()}, {"schedule", g.schedule.to_json()}});
  report.config["grid"] = grid_json;

  const int n_run = options.single_fold ? 1 : plan.n_folds;
  std::vector<FoldData> folds;
  for (int k = 0; k < n_run; ++k) folds.push_back(fold_data(dataset, plan.folds[static_cast<std::size_t>(k)], options));

  for (const auto& point : grid) {
    for (int k = 0; k < n_run; ++k) {
      const auto& d = folds[static_cast<std::size_t>(k)];
      FoldEntry e;
      e.config = point.name;
      e.fold = k;
      e.train_participants = participants_of(d.train);
      e.val_participants = participants_of(d.val);
      e.test_participants = participants_of(d.test);
      e.n_train = d.train.size();
      e.n_val = d.val.size();
      e.n_test = d.test.size();
      check_no_leak(e);

      DetectorSpec spec = point.spec;
      spec.features = static_cast<int>(d.train.x.size(1));
      spec.interval_len = static_cast<int>(d.train.x.size(2));
      auto det = build_detector(spec);
      const SampleSet& selection = options.selection == EpochSelection::kTest ? d.test : d.val;
      auto trained = train_detector(*det, d.train, selection, point.schedule);
      e.history = std::move(trained.history);
      e.test = evaluate(*trained.detector, d.test, options.margin_ks);
      e.majority_accuracy = majority_accuracy(d.train, d.test);
      e.fingerprint = trained.detector->fingerprint();
      write_fold(options, grid.size() > 1, static_cast<std::size_t>(k), e, trained.detector.get());
      report.folds.push_back(std::move(e));
    }
  }
  summarize(report);
  double best = -1.0;
  for (const auto& s : report.summaries) {
    const double acc = s.metrics.at("accuracy").mean;
    if (acc > best) {
      best = acc;
      report.best_config = s.config;
    }
  }
  return report;
}

ExperimentReport run_transfer(const Detector* parent, const WindowedDataset& destination, const FoldPlan& plan,
                              const DetectSchedule& schedule, const ExperimentOptions& options) {
  if (parent == nullptr) throw InvalidArgument("transfer needs a parent checkpoint trained on the source dataset");
  if (!parent->trained()) throw InvalidArgument("transfer parent detector is untrained");
  plan.validate();
  ExperimentReport report;
  report.protocol = "transfer";
  report.dataset = destination.name;
  report.data_fingerprint = destination.digest();
  report.parent_fingerprint = parent->fingerprint();
  report.config["plan"] = plan.to_json();
  report.config["schedule"] = schedule.to_json();
  report.config["parent_spec"] = parent->spec().to_json();
  const std::string name = to_string(parent->spec().arch) + "-finetune";
  report.best_config = name;

  const int n_run = options.single_fold ? 1 : plan.n_folds;
  for (int k = 0; k < n_run; ++k) {
    // The projector would change the feature space under a frozen body; transfer uses raw features.
    ExperimentOptions raw = options;
    raw.pca = false;
    const auto d = fold_data(destination, plan.folds[static_cast<std::size_t>(k)], raw);
    FoldEntry e;
    e.config = name;
    e.fold = k;
    e.train_participants = participants_of(d.train);
    e.val_participants = participants_of(d.val);
    e.test_participants = participants_of(d.test);
    e.n_train = d.train.size();
    e.n_val = d.val.size();
    e.n_test = d.test.size();
    check_no_leak(e);

    const SampleSet& selection = options.selection == EpochSelection::kTest ? d.test : d.val;
    {
      // Same adapter initialization as the fine-tuned copy: its starting accuracy.
      auto probe = parent->clone();
      torch::manual_seed(derive_seed(schedule.seed, "adapter-init"));
      probe->prepare_finetune(d.train);
      e.before_accuracy = macro_metrics(predict(*probe, d.test).labels, d.test.labels).accuracy;
    }
    auto tuned = finetune_last_layer(*parent, d.train, selection, schedule);
    e.history = std::move(tuned.history);
    e.test = evaluate(*tuned.detector, d.test, options.margin_ks);
    e.majority_accuracy = majority_accuracy(d.train, d.test);
    e.fingerprint = tuned.detector->fingerprint();
    write_fold(options, false, static_cast<std::size_t>(k), e, tuned.detector.get());
    report.folds.push_back(std::move(e));
  }
  summarize(report);
  return report;
}

MetricReport evaluate_detector(const Detector& detector, const SampleSet& samples, std::span<const int> margin_ks) {
  return evaluate(detector, samples, margin_ks);
}

nlohmann::json metric_report_json(const MetricReport& report) { return metric_json(report); }

std::string budget_label(double budget) { return fmt::format("b={:.2f}", budget); }

ExperimentReport run_single_participant_sweep(const WindowedDataset& dataset, const GridPoint& point,
                                              const SweepOptions& sweep, const ExperimentOptions& options) {
  if (sweep.budgets.empty()) throw InvalidArgument("sweep needs at least one budget");
  for (double b : sweep.budgets) {
    if (!(b > 0.0) || b + sweep.val_fraction >= 1.0) {
      throw InvalidArgument(fmt::format("budget {} plus validation {} must stay below 1", b, sweep.val_fraction));
    }
  }
  if (sweep.warm_start != nullptr && !sweep.warm_start->trained()) {
    throw InvalidArgument("warm-start detector is untrained");
  }
  ExperimentReport report;
  report.protocol = "single_participant";
  report.dataset = dataset.name;
  report.data_fingerprint = dataset.digest();
  report.config["budgets"] = sweep.budgets;
  report.config["val_fraction"] = sweep.val_fraction;
  report.config["seed"] = sweep.seed;
  report.config["spec"] = point.spec.to_json();
  report.config["schedule"] = point.schedule.to_json();
  report.config["warm_start"] = sweep.warm_start != nullptr ? sweep.warm_start->fingerprint() : "";
  report.best_config = point.name;
  if (sweep.warm_start != nullptr) report.parent_fingerprint = sweep.warm_start->fingerprint();

  std::size_t index = 0;
  for (std::size_t pi = 0; pi < dataset.participants.size(); ++pi) {
    const auto& pw = dataset.participants[pi];
    const SampleSet& pool = pw.eval;
    const std::size_t n = pool.size();
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(derive_seed(sweep.seed, "sweep:" + pw.participant_id));
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto n_val = static_cast<std::size_t>(std::lround(sweep.val_fraction * static_cast<double>(n)));

    for (double b : sweep.budgets) {
      FoldEntry e;
      e.config = point.name;
      e.fold = static_cast<int>(pi);
      e.group = budget_label(b);
      e.participant = pw.participant_id;
      const auto n_train = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(b * static_cast<double>(n))));
      if (n_val + n_train >= n) {
        e.skipped = true;
        e.warning = fmt::format("participant {} has {} windows, too few for budget {}", pw.participant_id, n, b);
      } else {
        const std::span<const std::size_t> all(perm);
        auto val = pool.subset(all.subspan(0, n_val));
        auto train = pool.subset(all.subspan(n_val, n_train));
        auto test = pool.subset(all.subspan(n_val + n_train));
        std::vector<std::size_t> ordered(all.begin() + static_cast<long>(n_val + n_train), all.end());
        std::sort(ordered.begin(), ordered.end());  // time order for margin metrics
        test = pool.subset(ordered);
        const bool two_class = std::count(train.labels.begin(), train.labels.end(), 1) > 0 &&
                               std::count(train.labels.begin(), train.labels.end(), 0) > 0;
        e.n_train = train.size();
        e.n_val = val.size();
        e.n_test = test.size();
        e.train_participants = e.val_participants = e.test_participants = {pw.participant_id};
        if (!two_class) {
          e.skipped = true;
          e.warning = fmt::format("participant {} budget {}: training share holds one class", pw.participant_id, b);
        } else {
          const SampleSet& selection = options.selection == EpochSelection::kTest ? test : val;
          DetectorTrainResult trained;
          if (sweep.warm_start != nullptr) {
            auto start = sweep.warm_start->clone();
            trained = train_detector(*start, train, selection, point.schedule);
          } else {
            DetectorSpec spec = point.spec;
            spec.features = static_cast<int>(pool.x.size(1));
            spec.interval_len = static_cast<int>(pool.x.size(2));
            trained = train_detector(*build_detector(spec), train, selection, point.schedule);
          }
          e.history = std::move(trained.history);
          e.test = evaluate(*trained.detector, test, options.margin_ks);
          e.majority_accuracy = majority_accuracy(train, test);
          e.fingerprint = trained.detector->fingerprint();
          write_fold(options, false, index, e, trained.detector.get());
        }
      }
      if (e.skipped) report.warnings.push_back(e.warning);
      report.folds.push_back(std::move(e));
      ++index;
    }
  }
  summarize(report);
  return report;
}

Eigen::MatrixXd sample_rows(const SampleSet& s) {
  if (s.empty()) throw InvalidArgument("no samples to stack");
  const int64_t f = s.x.size(1);
  auto rows = s.x.permute({0, 2, 1}).reshape({-1, f}).to(torch::kDouble).contiguous();
  Eigen::MatrixXd out(rows.size(0), f);
  const double* p = rows.data_ptr<double>();
  for (int64_t r = 0; r < rows.size(0); ++r)
    for (int64_t c = 0; c < f; ++c) out(r, c) = p[r * f + c];
  return out;
}

SampleSet project_samples(const Projector& projector, const SampleSet& s) {
  const int64_t n = s.x.size(0);
  const int64_t l = s.x.size(2);
  const Eigen::MatrixXd projected = apply_projector(projector, sample_rows(s));
  const int64_t m = projected.cols();
  auto t = torch::empty({n * l, m}, torch::kFloat);
  auto acc = t.accessor<float, 2>();
  for (int64_t r = 0; r < n * l; ++r)
    for (int64_t c = 0; c < m; ++c) acc[r][c] = static_cast<float>(projected(r, c));
  SampleSet out = s;
  out.x = t.reshape({n, l, m}).permute({0, 2, 1}).contiguous();
  return out;
}

}  // namespace neckface
