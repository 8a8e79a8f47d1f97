#include "testing.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "neckface/dataset_io.hpp"
#include "neckface/error.hpp"
#include "neckface/reporting.hpp"
#include "neckface/run_config.hpp"

using namespace neckface;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("neckface_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Corpus small_corpus(std::uint64_t seed, int n = 1) {
  CorpusOptions co;
  co.n_participants = n;
  co.seed = seed;
  co.calibration_duration_s = 1;
  return gen_corpus(co);
}

struct Cli {
  int code = 0;
  std::string out, err;
};

Cli invoke(std::vector<std::string> args) {
  std::ostringstream o, e;
  Cli r;
  r.code = cli::run(args, o, e);
  r.out = o.str();
  r.err = e.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_SUITE("cli_io") {
  TEST_CASE("run config rejects unknown keys and wrong types") {
    RunConfig c;
    CHECK(c.detect_schedule().epochs == 500);
    CHECK(c.corpus_options().n_participants == 25);
    CHECK_THROWS_AS(c.set("detect.epoch=3"), ConfigError);
    CHECK_THROWS_AS(c.set("detect.epochs=\"many\""), ConfigError);
    c.set("detect.epochs=3");
    c.set("detect.arch=minirocket");
    c.set("detect.hyper={\"num_features\": 168}");
    CHECK(c.detect_schedule().epochs == 3);
    CHECK(c.detector_spec().arch == Arch::kMiniRocket);
    CHECK(c.detector_spec().resolved_hyper().at("num_features") == 168);
    c.set("detect.dataset=open");
    CHECK(c.detector_spec().features == 49);
  }

  TEST_CASE("run config layering and fingerprint") {
    const auto dir = scratch("config");
    std::ofstream(dir / "run.json") << R"({"run_name": "alpha", "detect": {"epochs": 9}})";
    unsetenv(kRunRootEnv);
    const auto a = RunConfig::load(dir / "run.json", {"detect.epochs=4"});
    CHECK(a.detect_schedule().epochs == 4);
    CHECK(a.run_dir() == fs::path("runs") / "alpha");
    const auto b = RunConfig::load(dir / "run.json", {});
    CHECK(a.fingerprint() != b.fingerprint());
    setenv(kRunRootEnv, "/elsewhere", 1);
    CHECK(RunConfig::load(dir / "run.json", {}).run_dir() == fs::path("/elsewhere/alpha"));
    unsetenv(kRunRootEnv);
    CHECK_THROWS(RunConfig::load(dir / "missing.json", {}));
  }

  TEST_CASE("written corpora are deterministic in the seed") {
    const auto root = scratch("det");
    const auto a = write_corpus(small_corpus(3), root / "a");
    const auto b = write_corpus(small_corpus(3), root / "b");
    const auto c = write_corpus(small_corpus(4), root / "c");
    CHECK(a.digest() == b.digest());
    CHECK(a.digest() != c.digest());
    CHECK(a.sessions.size() == 32);  // profile, calibration, 30 stimuli
    const auto counts = count_frames(small_corpus(3));
    CHECK(a.neutral_frames == counts.neutral);
    CHECK(a.error_frames == counts.error);
  }

  TEST_CASE("loading round-trips and tampering is caught") {
    const auto root = scratch("load");
    const auto corpus = small_corpus(5);
    write_corpus(corpus, root);
    const auto back = load_corpus(root);
    CHECK(back.participants.size() == 1);
    CHECK(count_frames(back).kept() == count_frames(corpus).kept());
    const auto& s0 = corpus.participants[0].stimuli[3];
    const auto& s1 = back.participants[0].stimuli[3];
    REQUIRE(s0.truth_states.size() == s1.truth_states.size());
    CHECK(s0.truth_states[10].blendshapes[17] == doctest::Approx(s1.truth_states[10].blendshapes[17]).epsilon(1e-9));
    const auto a = s0.frame_pair(2);
    const auto b = session_frame(root, s1, 2);
    CHECK(a.left == b.left);

    const auto truth = session_dir(root, "P01", s0.stimulus.stimulus_id) / "truth.csv";
    CHECK(slurp(truth).rfind("timestamp_s,b00,b01,", 0) == 0);
    // Flip one digit of the first data row; the file still parses but no longer matches.
    auto text = slurp(truth);
    const auto cell = text.find(',', text.find('\n')) + 1;
    text[cell] = text[cell] == '1' ? '2' : '1';
    std::ofstream(truth, std::ios::trunc) << text;
    CHECK_THROWS_AS(verify_manifest(root, read_manifest(root)), DataError);
    CHECK_THROWS_AS(load_corpus(root), DataError);
    CHECK_NOTHROW(load_corpus(root, false));
    CHECK_THROWS_AS(read_manifest(root / "nothing"), IoError);
  }

  TEST_CASE("calibration frames can be exported as png") {
    const auto root = scratch("png");
    CorpusWriteOptions w;
    w.frames = FrameExport::kCalibration;
    write_corpus(small_corpus(2), root, w);
    const auto dir = session_dir(root, "P01", "calibration");
    CHECK(fs::exists(dir / "ir_left_000000.png"));
    CHECK(fs::exists(dir / "ir_right_000011.png"));
    const auto back = load_corpus(root);
    const auto f = session_frame(root, back.participants[0].calibration, 0);
    const auto r = back.participants[0].calibration.frame_pair(0);
    CHECK(f.left.width() == r.left.width());
    double worst = 0;
    for (std::size_t i = 0; i < r.left.data().size(); ++i)
      worst = std::max(worst, static_cast<double>(std::abs(r.left.data()[i] - f.left.data()[i])));
    CHECK(worst <= 1.0 / 255.0 + 1e-6);
    CHECK(frame_export_from_string("all") == FrameExport::kAll);
    CHECK_THROWS_AS(frame_export_from_string("some"), ConfigError);
  }

  TEST_CASE("truth csv round trip") {
    const auto corpus = small_corpus(6);
    const auto& s = corpus.participants[0].stimuli[12];
    const auto text = truth_csv(s.timestamps, s.truth_states, s.labels);
    const auto t = parse_truth_csv(text, "mem");
    REQUIRE(t.states.size() == s.truth_states.size());
    CHECK((t.labels == s.labels));
    CHECK(t.states.back().pitch == doctest::Approx(s.truth_states.back().pitch).epsilon(1e-9));
    CHECK_THROWS_AS(parse_truth_csv("time,x\n1,2\n", "bad"), DataError);
  }

  TEST_CASE("cli exit codes and stage hints") {
    const auto root = scratch("cli");
    CHECK(invoke({"synth", "--nope"}).code == cli::kExitConfig);
    CHECK(invoke({"synth", "--set", "synth.nope=1"}).code == cli::kExitConfig);
    const auto data = (root / "d").string();
    const auto runs = (root / "runs").string();
    setenv(kRunRootEnv, runs.c_str(), 1);
    const auto s = invoke({"synth", "--participants", "5", "--set", "synth.calibration_duration_s=1", "--out", data});
    REQUIRE(s.code == cli::kExitOk);
    CHECK(fs::exists(root / "d" / "manifest.json"));

    const auto f = invoke({"facemap", "finetune", "--data", data});
    CHECK(f.code == cli::kExitData);
    CHECK(f.err.find("pretrain") != std::string::npos);
    const auto t = invoke({"detect", "transfer", "--data", data});
    CHECK(t.code == cli::kExitData);
    CHECK(invoke({"detect", "train", "--data", (root / "absent").string()}).code == cli::kExitData);

    const auto train = invoke({"detect", "train", "--data", data, "--arch", "ml_dnn", "--epochs", "1"});
    REQUIRE(train.code == cli::kExitOk);
    const auto dir = root / "runs" / "default" / "detect" / "train";
    const auto report = nlohmann::json::parse(slurp(dir / "report.json"));
    CHECK(report.at("folds").size() == 5);
    CHECK(report.contains("run_config"));
    // header plus one row per fold
    const auto csv = slurp(dir / "summary.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);
    CHECK(fs::exists(dir / "fold-4" / "checkpoint"));

    const auto summary = invoke({"report", "summarize", runs});
    CHECK(summary.code == cli::kExitOk);
    CHECK(summary.out.find("ml_dnn") != std::string::npos);
    unsetenv(kRunRootEnv);
  }

  TEST_CASE("summary csv marks skipped entries") {
    ExperimentReport r;
    r.protocol = "single_participant";
    FoldEntry a;
    a.config = "x";
    a.group = "b=0.05";
    a.test.accuracy = 0.5;
    FoldEntry b = a;
    b.skipped = true;
    b.warning = "one class";
    r.folds = {a, b};
    const auto csv = summary_csv(r);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
    CHECK(budget_curve_svg(r).find("<svg") != std::string::npos);
  }
}
