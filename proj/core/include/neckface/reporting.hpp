#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "neckface/protocols.hpp"

namespace neckface {

/// One row per fold entry: config, group, fold, participant, counts, metrics, skip state.
std::string summary_csv(const ExperimentReport& report);

/// Grouped bar chart of per-fold test accuracy, one color per config.
std::string fold_bars_svg(const ExperimentReport& report);
/// Mean accuracy (with SD whiskers) against training budget; only for sweep reports.
std::string budget_curve_svg(const ExperimentReport& report);

/// Writes report.json (with `run_config` embedded), summary.csv and the plots into `dir`.
/// Returns the paths written.
std::vector<std::filesystem::path> write_report(const std::filesystem::path& dir, const ExperimentReport& report,
                                                const nlohmann::json& run_config);

/// Human-readable M±SD table of every summary in the report.
std::string format_summary(const ExperimentReport& report);
/// Same table from a parsed report.json.
std::string format_summary(const nlohmann::json& report_json);

}  // namespace neckface
