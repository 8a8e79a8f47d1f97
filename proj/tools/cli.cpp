#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "neckface/dataset_io.hpp"
#include "neckface/detectors.hpp"
#include "neckface/error.hpp"
#include "neckface/facemap.hpp"
#include "neckface/imaging.hpp"
#include "neckface/io_util.hpp"
#include "neckface/protocols.hpp"
#include "neckface/reporting.hpp"
#include "neckface/run_config.hpp"

namespace fs = std::filesystem;

namespace neckface::cli {

namespace {

struct Common {
  std::string config_file;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_file, "JSON run config")->check(CLI::ExistingFile);
  cmd->add_option("--set", c.sets, "override a config key, e.g. detect.epochs=50")->take_all();
}

// Shortcut flags land as --set entries so they go through the same validation.
void shortcut(CLI::App* cmd, const std::string& flag, const std::string& key, std::vector<std::string>& into,
              const std::string& help) {
  cmd->add_option_function<std::string>(
      flag, [&into, key](const std::string& v) { into.push_back(key + "=" + v); }, help);
}

RunConfig resolve(const Common& c) {
  std::optional<fs::path> file;
  if (!c.config_file.empty()) file = c.config_file;
  return RunConfig::load(file, c.sets);
}

fs::path facemap_dir(const RunConfig& cfg) { return cfg.run_dir() / "facemap"; }

FacemapModel require_facemap(const fs::path& path, const std::string& stage, const std::string& needed_by) {
  if (!fs::exists(path)) {
    throw DataError(fmt::format("{} needs the {} checkpoint {}; run `neckface facemap {}` first", needed_by, stage,
                                path.string(), stage));
  }
  auto model = FacemapModel::load(path);
  if (model.stage() != stage) {
    throw DataError(fmt::format("{} holds a '{}' model, expected {}", path.string(), model.stage(), stage));
  }
  return model;
}

// Calibration frames of a dataset on disk, optionally strided.
struct Calibration {
  fs::path root;
  Corpus corpus;
  std::vector<std::vector<std::size_t>> frames;
  std::string digest;

  Calibration(const fs::path& dir, int stride) : root(dir), corpus(load_corpus(dir)) {
    if (stride < 1) throw ConfigError("facemap.frame_stride must be >= 1");
    digest = read_manifest(dir).digest() + ":stride" + std::to_string(stride);
    for (const auto& p : corpus.participants) {
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < p.calibration.size(); i += static_cast<std::size_t>(stride)) idx.push_back(i);
      frames.push_back(std::move(idx));
    }
  }

  std::vector<std::size_t> counts() const {
    std::vector<std::size_t> c;
    for (const auto& f : frames) c.push_back(f.size());
    return c;
  }

  FacemapSample sample(const FrameRef& r) const {
    const auto& s = corpus.participants.at(r.participant).calibration;
    const auto i = frames.at(r.participant).at(r.frame);
    return {preprocess_pair(session_frame(root, s, i)), s.truth_states[i]};
  }

  FacemapDataset dataset(std::vector<FrameRef> refs) const {
    std::string id = digest;
    for (const auto& r : refs) id += fmt::format(";{}:{}", r.participant, r.frame);
    const auto n = refs.size();
    return FacemapDataset(n, [this, refs = std::move(refs)](std::size_t i) { return sample(refs[i]); }, sha256_hex(id));
  }

  FacemapDataset all() const {
    std::vector<FrameRef> refs;
    for (std::size_t p = 0; p < frames.size(); ++p)
      for (std::size_t f = 0; f < frames[p].size(); ++f) refs.push_back({p, f});
    return dataset(std::move(refs));
  }
};

EpochCallback epoch_printer(std::ostream& out, int total) {
  return [&out, total](const FacemapEpoch& e) {
    out << fmt::format("epoch {}/{} lr={:.2e} loss={:.5f} val MAE_f={:.3f} MAE_o={:.3f}\n", e.epoch, total, e.lr,
                       e.train_loss, e.val_mae_f, e.val_mae_o)
        << std::flush;
  };
}

AugmentPolicy augment_for(const RunConfig& cfg, AugmentStage stage) {
  return cfg.doc().at("facemap").at("augment").get<bool>() ? AugmentPolicy::for_stage(stage) : AugmentPolicy{};
}

int cmd_synth(const RunConfig& cfg, std::ostream& out) {
  const auto options = cfg.corpus_options();
  const auto corpus = gen_corpus(options);
  CorpusWriteOptions w;
  w.frames = frame_export_from_string(cfg.doc().at("synth").at("frames"));
  w.open_features = cfg.doc().at("synth").at("open_features");
  const auto m = write_corpus(corpus, cfg.data_dir(), w);
  out << fmt::format("wrote {} participants to {}\n", m.participants.size(), cfg.data_dir().string());
  out << fmt::format("frames: {} neutral, {} error, {} total\n", m.neutral_frames, m.error_frames, m.total_frames());
  out << "manifest digest " << m.digest() << "\n";
  return kExitOk;
}

int cmd_facemap_pretrain(const RunConfig& cfg, std::ostream& out) {
  const Calibration cal(cfg.pretrain_data_dir(), cfg.doc().at("facemap").at("frame_stride"));
  const auto schedule = cfg.facemap_schedule(TrainStage::kPretrain);
  const auto data = cal.all();
  out << fmt::format("pretraining on {} frames from {}\n", data.size(), cfg.pretrain_data_dir().string());
  auto result = train_facemap(build_facemap(cfg.facemap_config()), data, nullptr, schedule,
                              augment_for(cfg, AugmentStage::kPretrain), epoch_printer(out, schedule.epochs));
  ensure_directory(facemap_dir(cfg));
  result.model.save(facemap_dir(cfg) / "pretrain.ckpt");
  atomic_write_text(facemap_dir(cfg) / "pretrain_history.json",
                    nlohmann::json{{"history", result.history.to_json()}, {"run_config", cfg.doc()}}.dump(2));
  out << "saved " << (facemap_dir(cfg) / "pretrain.ckpt").string() << "\n";
  return kExitOk;
}

int cmd_facemap_finetune(const RunConfig& cfg, std::ostream& out) {
  const auto parent = require_facemap(facemap_dir(cfg) / "pretrain.ckpt", "pretrain", "facemap finetune");
  const Calibration cal(cfg.data_dir(), cfg.doc().at("facemap").at("frame_stride"));
  const auto schedule = cfg.facemap_schedule(TrainStage::kFinetune);
  const auto policy = augment_for(cfg, AugmentStage::kFinetune);
  nlohmann::json record = {{"run_config", cfg.doc()}, {"parent_fingerprint", parent.fingerprint()}};
  std::optional<FacemapModel> final_model;
  if (cfg.doc().at("facemap").at("cross_validate").get<bool>()) {
    const auto counts = cal.counts();
    auto cv = cross_validate_facemap(
        parent, counts, [&cal](const std::vector<FrameRef>& refs) { return cal.dataset(refs); }, schedule, policy);
    nlohmann::json folds = nlohmann::json::array();
    std::vector<double> maes;
    for (const auto& f : cv.folds) {
      out << fmt::format("fold {}: MAE_f={:.3f} MAE_o={:.3f}\n", f.fold, f.test.mae_f, f.test.mae_o);
      maes.push_back(f.test.mae_f);
      folds.push_back({{"fold", f.fold}, {"mae_f", f.test.mae_f}, {"mae_o", f.test.mae_o}, {"history", f.history.to_json()}});
    }
    const auto m = mean_sd(maes);
    out << fmt::format("cross-validated MAE_f = {:.3f} ± {:.3f}\n", m.mean, m.sd);
    record["folds"] = folds;
    record["final_history"] = cv.final_history.to_json();
    final_model = std::move(cv.final_model);
  } else {
    auto r = train_facemap(parent, cal.all(), nullptr, schedule, policy, epoch_printer(out, schedule.epochs));
    record["final_history"] = r.history.to_json();
    final_model = std::move(r.model);
  }
  final_model->save(facemap_dir(cfg) / "finetune.ckpt");
  atomic_write_text(facemap_dir(cfg) / "finetune.json", record.dump(2));
  out << "saved " << (facemap_dir(cfg) / "finetune.ckpt").string() << "\n";
  return kExitOk;
}

int cmd_facemap_eval(const RunConfig& cfg, const std::string& checkpoint, std::ostream& out) {
  const fs::path path = checkpoint.empty() ? facemap_dir(cfg) / "finetune.ckpt" : fs::path(checkpoint);
  const auto model = checkpoint.empty() ? require_facemap(path, "finetune", "facemap eval") : FacemapModel::load(path);
  const Calibration cal(cfg.data_dir(), cfg.doc().at("facemap").at("frame_stride"));
  const auto r = evaluate_facemap(model, cal.all());
  out << fmt::format("MAE_f {:.4f}\nMAE_o {:.4f}\n", r.mae_f, r.mae_o);
  ensure_directory(facemap_dir(cfg));
  atomic_write_text(facemap_dir(cfg) / "eval.json",
                    nlohmann::json{{"checkpoint", path.string()}, {"model_fingerprint", model.fingerprint()},
                                   {"data", cal.digest}, {"mae_f", r.mae_f}, {"mae_o", r.mae_o},
                                   {"run_config", cfg.doc()}}
                        .dump(2));
  return kExitOk;
}

int cmd_facemap_reconstruct(const RunConfig& cfg, std::ostream& out) {
  const auto model = require_facemap(facemap_dir(cfg) / "finetune.ckpt", "finetune", "facemap reconstruct");
  const auto root = cfg.data_dir();
  const auto corpus = load_corpus(root);
  const auto dest = cfg.run_dir() / "reconstruction";
  std::size_t rows = 0;
  for (const auto& p : corpus.participants) {
    for (const auto& s : p.stimuli) {
      const auto r = reconstruct(model, s.size(), [&](std::size_t i) { return session_frame(root, s, i); });
      write_reconstruction(dest, p.profile.participant_id, s.stimulus.stimulus_id, r.states, r.timestamps);
      rows += r.states.size();
    }
    out << fmt::format("{}: {} sessions\n", p.profile.participant_id, p.stimuli.size()) << std::flush;
  }
  out << fmt::format("reconstructed {} frames into {}\n", rows, dest.string());
  return kExitOk;
}

WindowedDataset detect_dataset(const RunConfig& cfg) {
  const std::string name = cfg.doc().at("detect").at("dataset");
  std::vector<ReactionSequence> seqs;
  if (name == "open") {
    seqs = load_sequences(cfg.data_dir(), SequenceSource::kOpen);
  } else if (cfg.doc().at("detect").at("source") == "reconstruction") {
    seqs = load_sequences(cfg.data_dir(), SequenceSource::kReconstruction, cfg.run_dir() / "reconstruction");
  } else {
    seqs = load_sequences(cfg.data_dir(), SequenceSource::kTruth);
  }
  return build_windowed_dataset(name, seqs, cfg.windowing());
}

std::vector<GridPoint> detect_grid(const RunConfig& cfg, const std::string& archs) {
  std::vector<std::string> names;
  if (archs.empty()) {
    names.push_back(cfg.doc().at("detect").at("arch"));
  } else {
    std::stringstream ss(archs);
    for (std::string a; std::getline(ss, a, ',');) names.push_back(a);
  }
  if (names.size() > 1 && !cfg.doc().at("detect").at("hyper").empty()) {
    throw ConfigError("detect.hyper applies to a single arch; run archs separately to override hyperparameters");
  }
  std::vector<GridPoint> grid;
  for (const auto& n : names) {
    GridPoint g;
    g.name = n;
    g.spec = cfg.detector_spec();
    g.spec.arch = arch_from_string(n);
    g.schedule = cfg.detect_schedule();
    g.spec.validate();
    grid.push_back(std::move(g));
  }
  return grid;
}

int finish_report(const RunConfig& cfg, const fs::path& dir, const ExperimentReport& report, std::ostream& out) {
  const auto leaks = leakage_violations(report);
  if (!leaks.empty()) throw TrainingError("participant leakage: " + leaks.front());
  for (const auto& p : write_report(dir, report, cfg.doc())) out << "wrote " << p.string() << "\n";
  out << format_summary(report);
  return kExitOk;
}

FoldPlan plan_for(const RunConfig& cfg, const WindowedDataset& data) {
  return make_participant_folds(data.participant_ids(), cfg.doc().at("detect").at("n_folds"), cfg.split(),
                                cfg.doc().at("seed"));
}

int cmd_detect_train(const RunConfig& cfg, const std::string& archs, std::ostream& out) {
  const auto data = detect_dataset(cfg);
  const auto grid = detect_grid(cfg, archs);
  auto options = cfg.experiment_options();
  const auto dir = cfg.run_dir() / "detect" / "train";
  options.run_dir = dir;
  const auto report = run_cross_participant(data, grid, plan_for(cfg, data), options);
  return finish_report(cfg, dir, report, out);
}

fs::path default_parent(const RunConfig& cfg) {
  const std::string explicit_path = cfg.doc().at("detect").at("parent");
  if (!explicit_path.empty()) return explicit_path;
  return cfg.run_dir() / "detect" / "train" / "fold-0" / "checkpoint";
}

int cmd_detect_transfer(const RunConfig& cfg, std::ostream& out) {
  const auto parent_path = default_parent(cfg);
  if (!fs::exists(parent_path)) {
    throw DataError("detect transfer needs a parent detector at " + parent_path.string() +
                    "; run `neckface detect train` on the source dataset or set detect.parent");
  }
  const auto parent = load_detector(parent_path);
  const auto data = detect_dataset(cfg);
  if (parent->spec().interval_len != data.interval_len) {
    throw ConfigError(fmt::format("parent uses IL={} but windowing.interval_len={}", parent->spec().interval_len,
                                  data.interval_len));
  }
  auto options = cfg.experiment_options();
  const auto dir = cfg.run_dir() / "detect" / "transfer";
  options.run_dir = dir;
  const auto report = run_transfer(parent.get(), data, plan_for(cfg, data), cfg.detect_schedule(), options);
  return finish_report(cfg, dir, report, out);
}

int cmd_detect_sweep(const RunConfig& cfg, std::ostream& out) {
  const auto data = detect_dataset(cfg);
  auto grid = detect_grid(cfg, "");
  SweepOptions sweep;
  sweep.budgets = cfg.budgets();
  sweep.val_fraction = cfg.doc().at("detect").at("val_fraction");
  sweep.seed = cfg.doc().at("seed");
  std::unique_ptr<Detector> warm;
  const std::string warm_path = cfg.doc().at("detect").at("warm_start");
  if (!warm_path.empty()) {
    warm = load_detector(warm_path);
    sweep.warm_start = warm.get();
  }
  auto options = cfg.experiment_options();
  const auto dir = cfg.run_dir() / "detect" / "sweep";
  options.run_dir = dir;
  const auto report = run_single_participant_sweep(data, grid.front(), sweep, options);
  return finish_report(cfg, dir, report, out);
}

int cmd_detect_eval(const RunConfig& cfg, const std::string& checkpoint, std::ostream& out) {
  const fs::path path = checkpoint.empty() ? default_parent(cfg) : fs::path(checkpoint);
  if (!fs::exists(path)) throw DataError("no detector checkpoint at " + path.string());
  const auto det = load_detector(path);
  const auto data = detect_dataset(cfg);
  std::vector<SampleSet> parts;
  for (const auto& p : data.participants) parts.push_back(p.eval);
  const auto all = concat(parts);
  const auto margin_ks = cfg.experiment_options().margin_ks;
  const auto r = evaluate_detector(*det, all, margin_ks);
  out << fmt::format("{} windows: accuracy {:.4f} precision {:.4f} recall {:.4f} f1 {:.4f}\n", all.size(), r.accuracy,
                     r.precision, r.recall, r.f1);
  for (const auto& [k, m] : r.margin) out << fmt::format("margin k={}: accuracy {:.4f} f1 {:.4f}\n", k, m.accuracy, m.f1);
  const auto dir = cfg.run_dir() / "detect" / "eval";
  ensure_directory(dir);
  atomic_write_text(dir / "eval.json", nlohmann::json{{"checkpoint", path.string()},
                                                      {"fingerprint", det->fingerprint()},
                                                      {"data_fingerprint", data.digest()},
                                                      {"metrics", metric_report_json(r)},
                                                      {"run_config", cfg.doc()}}
                                           .dump(2));
  return kExitOk;
}

int cmd_report_summarize(const RunConfig& cfg, const std::vector<std::string>& paths, std::ostream& out) {
  std::vector<fs::path> reports;
  auto collect = [&reports](const fs::path& p) {
    if (fs::is_regular_file(p)) {
      reports.push_back(p);
    } else if (fs::is_directory(p)) {
      for (const auto& e : fs::recursive_directory_iterator(p)) {
        if (e.is_regular_file() && e.path().filename() == "report.json") reports.push_back(e.path());
      }
    } else {
      throw IoError(p.string(), "no such report or directory");
    }
  };
  if (paths.empty()) collect(cfg.run_dir());
  for (const auto& p : paths) collect(p);
  std::sort(reports.begin(), reports.end());
  if (reports.empty()) throw DataError("no report.json found");
  for (const auto& r : reports) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_text(r));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(r.string() + ": " + e.what());
    }
    out << r.string() << "\n" << format_summary(j);
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"neckface: synthetic neck-camera facial reconstruction and reaction detection"};
  app.require_subcommand(1);
  std::function<int(const RunConfig&)> action;
  Common common;
  std::string checkpoint, archs;
  std::vector<std::string> report_paths;

  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus on disk");
  add_common(synth, common);
  shortcut(synth, "--participants", "synth.participants", common.sets, "cohort size");
  shortcut(synth, "--seed", "seed", common.sets, "corpus seed");
  shortcut(synth, "--out", "data_dir", common.sets, "output directory");
  shortcut(synth, "--world", "synth.world", common.sets, "default or high_separability");
  shortcut(synth, "--frames", "synth.frames", common.sets, "none, calibration or all");
  synth->callback([&] { action = [&](const RunConfig& c) { return cmd_synth(c, out); }; });

  auto* facemap = app.add_subcommand("facemap", "train and apply the frame-to-face-state model");
  facemap->require_subcommand(1);
  auto* pretrain = facemap->add_subcommand("pretrain", "train on the pretraining cohort");
  auto* finetune = facemap->add_subcommand("finetune", "fine-tune the pretrained model on the target cohort");
  auto* fm_eval = facemap->add_subcommand("eval", "report MAE_f and MAE_o on calibration frames");
  auto* recon = facemap->add_subcommand("reconstruct", "write per-session face-state CSVs for every stimulus");
  for (auto* c : {pretrain, finetune, fm_eval, recon}) {
    add_common(c, common);
    shortcut(c, "--data", "data_dir", common.sets, "dataset directory");
    shortcut(c, "--run", "run_name", common.sets, "run name under the run root");
  }
  fm_eval->add_option("--checkpoint", checkpoint, "model to evaluate (default: the run's finetune checkpoint)");
  pretrain->callback([&] { action = [&](const RunConfig& c) { return cmd_facemap_pretrain(c, out); }; });
  finetune->callback([&] { action = [&](const RunConfig& c) { return cmd_facemap_finetune(c, out); }; });
  fm_eval->callback([&] { action = [&](const RunConfig& c) { return cmd_facemap_eval(c, checkpoint, out); }; });
  recon->callback([&] { action = [&](const RunConfig& c) { return cmd_facemap_reconstruct(c, out); }; });

  auto* detect = app.add_subcommand("detect", "reaction detection experiments");
  detect->require_subcommand(1);
  auto* train = detect->add_subcommand("train", "cross-participant folds");
  auto* transfer = detect->add_subcommand("transfer", "last-layer fine-tuning of a trained detector");
  auto* sweep = detect->add_subcommand("sweep", "single-participant training budgets");
  auto* d_eval = detect->add_subcommand("eval", "score a detector checkpoint on every participant");
  for (auto* c : {train, transfer, sweep, d_eval}) {
    add_common(c, common);
    shortcut(c, "--data", "data_dir", common.sets, "dataset directory");
    shortcut(c, "--run", "run_name", common.sets, "run name under the run root");
    shortcut(c, "--dataset", "detect.dataset", common.sets, "neck or open");
    shortcut(c, "--epochs", "detect.epochs", common.sets, "training epochs");
  }
  train->add_option("--arch", archs, "architecture, or a comma-separated list");
  shortcut(sweep, "--arch", "detect.arch", common.sets, "architecture");
  shortcut(transfer, "--parent", "detect.parent", common.sets, "parent detector checkpoint");
  sweep->add_option_function<std::string>(
      "--budgets", [&common](const std::string& v) { common.sets.push_back("detect.budgets=[" + v + "]"); },
      "comma-separated training fractions");
  d_eval->add_option("--checkpoint", checkpoint, "detector to evaluate");
  train->callback([&] { action = [&](const RunConfig& c) { return cmd_detect_train(c, archs, out); }; });
  transfer->callback([&] { action = [&](const RunConfig& c) { return cmd_detect_transfer(c, out); }; });
  sweep->callback([&] { action = [&](const RunConfig& c) { return cmd_detect_sweep(c, out); }; });
  d_eval->callback([&] { action = [&](const RunConfig& c) { return cmd_detect_eval(c, checkpoint, out); }; });

  auto* report = app.add_subcommand("report", "inspect finished runs");
  report->require_subcommand(1);
  auto* summarize = report->add_subcommand("summarize", "print M±SD tables of report.json files");
  add_common(summarize, common);
  shortcut(summarize, "--run", "run_name", common.sets, "run name under the run root");
  summarize->add_option("paths", report_paths, "report files or directories (default: the run dir)");
  summarize->callback([&] { action = [&](const RunConfig& c) { return cmd_report_summarize(c, report_paths, out); }; });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  std::string context;
  try {
    const auto cfg = resolve(common);
    context = cfg.run_dir().string();
    return action(cfg);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InvalidArgument& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const nlohmann::json::exception& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const DegenerateLabels& e) {
    err << "training failure (run dir " << context << "): " << e.what() << "\n";
    return kExitTraining;
  } catch (const std::exception& e) {
    err << "training failure (run dir " << context << "): " << e.what() << "\n";
    return kExitTraining;
  }
}

}  // namespace neckface::cli
