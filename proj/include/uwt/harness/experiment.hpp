#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "uwt/harness/scenario.hpp"
#include "uwt/harness/simulation.hpp"

namespace uwt {

class ExperimentError : public std::runtime_error {
 public:
  ExperimentError(const std::string& what, Mode mode, std::uint64_t seed)
      : std::runtime_error(what), mode(mode), seed(seed) {}
  Mode mode;
  std::uint64_t seed;
};

/// 99th percentile of per-interval transmission counts of non-gateway agents
/// in an adversary-free static run at the scenario's calibration seed.
double calibrate_norm_volume(const ScenarioConfig& cfg);

/// Fills norm_volume (calibrated) and norm_churn (N/10) when left at 0.
ScenarioConfig resolve_norms(ScenarioConfig cfg);

using ProgressLog = std::function<void(const std::string&)>;

struct ExperimentOptions {
  std::size_t runs{10};
  std::vector<Mode> modes{Mode::Interrogator, Mode::Bayesian, Mode::Static};
  std::uint64_t base_seed{1};
  std::filesystem::path out_dir;  // empty: nothing written
  // Overrides the scenario's model_path when set.
  const Scorer<float>* scorer{nullptr};
  SimulationOptions sim;
  ProgressLog log;
};

struct ExperimentResult {
  ScenarioConfig resolved;
  std::map<Mode, std::vector<RunOutput>> runs;  // in seed order
  nlohmann::json aggregate;
};

/// Runs seeds base_seed .. base_seed+runs-1 in every requested mode. Writes
/// <out>/<mode>/seed_<n>/{metrics.csv,ledger.jsonl,manifest.json} and
/// <out>/aggregate.json.
ExperimentResult run_experiment(const ScenarioConfig& scenario, const ExperimentOptions& options);

/// Mean and sample std of each per-run total, per mode; energy overhead is
/// taken against static runs on the same seeds when present.
nlohmann::json aggregate_runs(const std::map<Mode, std::vector<RunOutput>>& runs);

/// Writes one run's metrics CSV, ledger export and manifest into `dir`.
void write_run(const RunOutput& run, const std::filesystem::path& dir);

struct TraceGenOptions {
  std::size_t runs{20};
  std::uint64_t base_seed{1000};
  std::filesystem::path out_dir;
  // Keep the reputation baseline's tiered response active, so the traces also
  // show benign agents under exclusion and their rerouted neighbours.
  bool enforcement{false};
  ProgressLog log;
};

/// Bayesian-mode runs exporting labelled feature rows, one
/// traces_seed_<n>.csv per run. Returns the number of rows written.
std::size_t gen_traces(const ScenarioConfig& scenario, const TraceGenOptions& options);

/// Per (mode, interval) mean and sample std of every MetricsRow metric over
/// the runs found under `in_dir`.
void write_report(const std::filesystem::path& in_dir, std::ostream& out);

inline constexpr const char* kReportMetrics[] = {
    "accuracy",      "precision",      "recall",         "mean_residual_energy_J",
    "pdr_cumulative", "flagged_count", "excluded_count", "isolated_count",
    "false_positive_count"};

}  // namespace uwt
