#pragma once

// Named studies built on the bundled scenarios. Each returns an analysis
// report with pass/fail checks plus the raw metrics behind them, and writes
// its CSV and report files under <out_dir>/<name>/ when out_dir is set.

#include "cimpc/analysis.hpp"
#include "cimpc/scenario.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace cimpc::experiments {

struct ExperimentOptions {
    std::string out_dir;  // empty: no files
    std::optional<double> dt;
    std::optional<double> duration;
    std::optional<std::size_t> decimation;
};

struct ExperimentResult {
    analysis::AnalysisReport report;
    std::map<std::string, double> metrics;
    std::vector<std::string> files;
    double runtime_s = 0.0;
};

const std::vector<std::string>& experiment_names();
bool is_experiment(const std::string& name);

ExperimentResult run_experiment(const std::string& name, const ExperimentOptions& options = {});

/// Runs any scenario file and produces the generic summary report.
ExperimentResult run_scenario_file(const std::string& path, const ExperimentOptions& options = {});

/// Applies command-line overrides to a loaded scenario.
void apply_overrides(scenario::ScenarioConfig& config, const ExperimentOptions& options);

}  // namespace cimpc::experiments
