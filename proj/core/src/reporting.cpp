#include "neckface/reporting.hpp"

#include <algorithm>
#include <map>

#include <fmt/format.h>

#include "neckface/io_util.hpp"

namespace fs = std::filesystem;

namespace neckface {

namespace {

constexpr std::array<const char*, 8> kPalette = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                                 "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string svg_open(int w, int h) {
  return fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
      "font-family=\"sans-serif\" font-size=\"11\">\n<rect width=\"{0}\" height=\"{1}\" fill=\"white\"/>\n",
      w, h);
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

// Unit-interval y axis with gridlines every 0.2.
std::string y_axis(int left, int top, int height, int width) {
  std::string out;
  for (int i = 0; i <= 5; ++i) {
    const double v = i * 0.2;
    const double y = top + height * (1.0 - v);
    out += fmt::format("<line x1=\"{}\" y1=\"{:.1f}\" x2=\"{}\" y2=\"{:.1f}\" stroke=\"#ddd\"/>\n", left, y,
                       left + width, y);
    out += fmt::format("<text x=\"{}\" y=\"{:.1f}\" text-anchor=\"end\">{:.1f}</text>\n", left - 4, y + 4, v);
  }
  out += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n", left, top, top + height);
  return out;
}

std::string fmt_metric(double v) { return fmt::format("{:.6f}", v); }

}  // namespace

std::string summary_csv(const ExperimentReport& report) {
  std::vector<int> ks;
  for (const auto& f : report.folds) {
    for (const auto& [k, m] : f.test.margin) {
      if (std::find(ks.begin(), ks.end(), k) == ks.end()) ks.push_back(k);
    }
  }
  std::sort(ks.begin(), ks.end());
  std::string out = "config,group,fold,participant,n_train,n_val,n_test,accuracy,precision,recall,f1";
  for (int k : ks) out += fmt::format(",margin_k{0}_accuracy,margin_k{0}_f1", k);
  out += ",majority_accuracy,before_accuracy,best_epoch,skipped\n";
  for (const auto& f : report.folds) {
    out += fmt::format("{},{},{},{},{},{},{}", f.config, f.group, f.fold, f.participant, f.n_train, f.n_val, f.n_test);
    if (f.skipped) {
      out += ",,,,";
      for (std::size_t i = 0; i < ks.size(); ++i) out += ",,";
      out += ",,,,1\n";
      continue;
    }
    out += "," + fmt_metric(f.test.accuracy) + "," + fmt_metric(f.test.precision) + "," + fmt_metric(f.test.recall) +
           "," + fmt_metric(f.test.f1);
    for (int k : ks) {
      const auto it = f.test.margin.find(k);
      if (it == f.test.margin.end()) out += ",,";
      else out += "," + fmt_metric(it->second.accuracy) + "," + fmt_metric(it->second.f1);
    }
    out += "," + fmt_metric(f.majority_accuracy) + "," + (f.before_accuracy ? fmt_metric(*f.before_accuracy) : "") +
           "," + std::to_string(f.history.best_epoch) + ",0\n";
  }
  return out;
}

std::string fold_bars_svg(const ExperimentReport& report) {
  std::vector<std::string> configs;
  std::vector<std::string> slots;  // fold labels along x
  std::map<std::pair<std::string, std::string>, double> value;
  for (const auto& f : report.folds) {
    if (f.skipped) continue;
    const std::string slot = f.group.empty() ? fmt::format("fold {}", f.fold) : f.participant + " " + f.group;
    if (std::find(configs.begin(), configs.end(), f.config) == configs.end()) configs.push_back(f.config);
    if (std::find(slots.begin(), slots.end(), slot) == slots.end()) slots.push_back(slot);
    value[{f.config, slot}] = f.test.accuracy;
  }
  const int left = 50, top = 30, plot_h = 220;
  const int group_w = std::max(24, 14 * static_cast<int>(configs.size()) + 10);
  const int plot_w = std::max(200, group_w * static_cast<int>(slots.size()));
  const int width = left + plot_w + 20, height = top + plot_h + 90;
  std::string out = svg_open(width, height);
  out += fmt::format("<text x=\"{}\" y=\"18\" font-size=\"13\">{}: test accuracy per fold</text>\n", left,
                     escape(report.protocol));
  out += y_axis(left, top, plot_h, plot_w);
  const double bar_w = static_cast<double>(group_w - 10) / std::max<std::size_t>(1, configs.size());
  for (std::size_t s = 0; s < slots.size(); ++s) {
    const double x0 = left + static_cast<double>(s * group_w) + 5;
    for (std::size_t c = 0; c < configs.size(); ++c) {
      const auto it = value.find({configs[c], slots[s]});
      if (it == value.end()) continue;
      const double h = plot_h * std::clamp(it->second, 0.0, 1.0);
      out += fmt::format("<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"{:.1f}\" height=\"{:.1f}\" fill=\"{}\"/>\n",
                         x0 + c * bar_w, top + plot_h - h, bar_w, h, kPalette[c % kPalette.size()]);
    }
    const double cx = x0 + (group_w - 10) / 2.0;
    out += fmt::format(
        "<text x=\"{0:.1f}\" y=\"{1}\" transform=\"rotate(45 {0:.1f} {1})\">{2}</text>\n", cx, top + plot_h + 12,
        escape(slots[s]));
  }
  for (std::size_t c = 0; c < configs.size(); ++c) {
    const int y = height - 12 - 14 * static_cast<int>(configs.size() - 1 - c);
    out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"{}\"/>", width - 160, y - 9,
                       kPalette[c % kPalette.size()]);
    out += fmt::format("<text x=\"{}\" y=\"{}\">{}</text>\n", width - 145, y, escape(configs[c]));
  }
  return out + "</svg>\n";
}

std::string budget_curve_svg(const ExperimentReport& report) {
  struct Point {
    double budget, mean, sd;
  };
  std::vector<Point> pts;
  const auto budgets = report.config.value("budgets", std::vector<double>{});
  for (double b : budgets) {
    for (const auto& s : report.summaries) {
      if (s.group != budget_label(b) || !s.metrics.contains("accuracy")) continue;
      pts.push_back({b, s.metrics.at("accuracy").mean, s.metrics.at("accuracy").sd});
    }
  }
  const int left = 50, top = 30, plot_w = 320, plot_h = 220;
  std::string out = svg_open(left + plot_w + 30, top + plot_h + 50);
  out += fmt::format("<text x=\"{}\" y=\"18\" font-size=\"13\">accuracy vs training budget</text>\n", left);
  out += y_axis(left, top, plot_h, plot_w);
  const double bmax = budgets.empty() ? 1.0 : *std::max_element(budgets.begin(), budgets.end());
  auto px = [&](double b) { return left + plot_w * (b / (bmax * 1.1)); };
  auto py = [&](double v) { return top + plot_h * (1.0 - std::clamp(v, 0.0, 1.0)); };
  for (double b : budgets) {
    out += fmt::format("<text x=\"{:.1f}\" y=\"{}\" text-anchor=\"middle\">{:.2f}</text>\n", px(b), top + plot_h + 16, b);
  }
  std::string path;
  for (const auto& p : pts) {
    path += fmt::format("{}{:.1f},{:.1f}", path.empty() ? "M" : " L", px(p.budget), py(p.mean));
    out += fmt::format("<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{0:.1f}\" y2=\"{2:.1f}\" stroke=\"#1f77b4\"/>\n",
                       px(p.budget), py(p.mean - p.sd), py(p.mean + p.sd));
    out += fmt::format("<circle cx=\"{:.1f}\" cy=\"{:.1f}\" r=\"3\" fill=\"#1f77b4\"/>\n", px(p.budget), py(p.mean));
  }
  if (!path.empty()) out += "<path d=\"" + path + "\" fill=\"none\" stroke=\"#1f77b4\"/>\n";
  out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">budget (fraction of windows)</text>\n",
                     left + plot_w / 2, top + plot_h + 36);
  return out + "</svg>\n";
}

std::vector<fs::path> write_report(const fs::path& dir, const ExperimentReport& report,
                                   const nlohmann::json& run_config) {
  ensure_directory(dir);
  auto j = report.to_json();
  j["run_config"] = run_config;
  j["run_fingerprint"] = sha256_hex(run_config.dump() + report.data_fingerprint + report.parent_fingerprint);
  std::vector<fs::path> written = {dir / "report.json", dir / "summary.csv", dir / "fold_accuracy.svg"};
  atomic_write_text(written[0], j.dump(2));
  atomic_write_text(written[1], summary_csv(report));
  atomic_write_text(written[2], fold_bars_svg(report));
  if (report.protocol == "single_participant") {
    written.push_back(dir / "budget_curve.svg");
    atomic_write_text(written.back(), budget_curve_svg(report));
  }
  return written;
}

std::string format_summary(const nlohmann::json& r) {
  std::string out = fmt::format("{} on {} (data {})\n", r.at("protocol").get<std::string>(),
                                r.at("dataset").get<std::string>(), r.at("data_fingerprint").get<std::string>().substr(0, 12));
  for (const auto& s : r.at("summaries")) {
    const std::string group = s.at("group");
    out += fmt::format("  {}{} ({} folds):", s.at("config").get<std::string>(), group.empty() ? "" : " " + group,
                       s.at("folds").get<std::size_t>());
    for (const char* key : {"accuracy", "f1", "margin_k1_accuracy", "margin_k3_accuracy", "before_accuracy",
                            "majority_accuracy"}) {
      if (!s.at("metrics").contains(key)) continue;
      const auto& m = s.at("metrics").at(key);
      out += fmt::format(" {}={:.3f}±{:.3f}", key, m.at("mean").get<double>(), m.at("sd").get<double>());
    }
    out += "\n";
  }
  for (const auto& w : r.at("warnings")) out += "  warning: " + w.get<std::string>() + "\n";
  return out;
}

std::string format_summary(const ExperimentReport& report) { return format_summary(report.to_json()); }

}  // namespace neckface
