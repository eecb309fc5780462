#include "uwt/harness/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <optional>
#include <regex>

#include "uwt/governance/ledger.hpp"
#include "uwt/trust/training.hpp"

namespace uwt {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

json stat_json(const std::vector<double>& v) {
  if (v.empty()) return {{"mean", nullptr}, {"std", nullptr}, {"n", 0}};
  const MeanStd s = mean_std(v);
  json j;
  j["mean"] = s.mean;
  j["std"] = s.std ? json(*s.std) : json(nullptr);
  j["n"] = s.n;
  return j;
}

}  // namespace

double calibrate_norm_volume(const ScenarioConfig& cfg) {
  ScenarioConfig c = cfg;
  c.mode = Mode::Static;
  c.adversary.fraction = 0.0;
  c.monitoring.norm_volume = 1.0;  // placeholder; static runs never read features
  Simulation sim(c, c.calibration_seed, nullptr);
  sim.run();
  const auto counts = transmit_counts(sim.network().log(), c.deployment.n_agents,
                                      c.monitoring.interval_s, c.intervals());
  std::vector<std::uint32_t> benign;
  for (const auto& st : sim.network().agents()) {
    if (st.kind == AgentKind::SurfaceGateway) continue;
    for (std::uint32_t x : counts[st.id]) benign.push_back(x);
  }
  if (benign.empty()) return 1.0;
  std::sort(benign.begin(), benign.end());
  // nearest-rank percentile
  const std::size_t rank = static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(benign.size())));
  return std::max(1.0, static_cast<double>(benign[std::max<std::size_t>(rank, 1) - 1]));
}

ScenarioConfig resolve_norms(ScenarioConfig cfg) {
  if (cfg.monitoring.norm_volume <= 0) cfg.monitoring.norm_volume = calibrate_norm_volume(cfg);
  if (cfg.monitoring.norm_churn <= 0)
    cfg.monitoring.norm_churn = static_cast<double>(cfg.deployment.n_agents) / 10.0;
  return cfg;
}

void write_run(const RunOutput& run, const fs::path& dir) {
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "metrics.csv", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (dir / "metrics.csv").string());
    write_metrics_csv(out, run.rows);
  }
  write_text(dir / "ledger.jsonl", export_jsonl(run.ledger));
  json m = run.manifest;
  const auto& t = run.totals;
  json totals;
  totals["accuracy"] = t.classification.accuracy();
  totals["precision"] = t.classification.precision();
  totals["recall"] = t.classification.recall();
  totals["pdr"] = t.pdr ? json(*t.pdr) : json(nullptr);
  totals["final_mean_residual_energy_J"] = t.final_mean_residual_energy_J;
  totals["median_detection_latency_s"] =
      t.median_detection_latency_s ? json(*t.median_detection_latency_s) : json(nullptr);
  totals["detected"] = t.detected;
  totals["compromised"] = t.compromised;
  totals["max_exclusion_latency_s"] =
      t.max_exclusion_latency_s ? json(*t.max_exclusion_latency_s) : json(nullptr);
  totals["tier2_entries"] = t.tier2_entries;
  totals["tier2_false_positives"] = t.tier2_false_positives;
  totals["escalations_deferred"] = t.escalations_deferred;
  totals["isolations"] = t.isolations;
  totals["isolations_without_commit"] = t.isolations_without_commit;
  totals["scorings"] = t.scorings;
  totals["mission_originated"] = t.mission_originated;
  totals["mission_delivered"] = t.mission_delivered;
  totals["blocks"] = t.blocks;
  totals["view_changes"] = t.view_changes;
  totals["events_processed"] = t.events_processed;
  m["totals"] = std::move(totals);
  json outcomes = json::array();
  for (const auto& o : run.outcomes) {
    if (!o.compromised) continue;
    outcomes.push_back({{"agent", o.agent},
                        {"attack", o.attack},
                        {"attack_activation_s", *o.attack_activation},
                        {"first_flag_time_s", o.first_flag_time ? json(*o.first_flag_time) : json(nullptr)},
                        {"detection_latency_s",
                         o.detection_latency ? json(*o.detection_latency) : json(nullptr)}});
  }
  m["detection_outcomes"] = std::move(outcomes);
  write_text(dir / "manifest.json", m.dump(2) + "\n");
}

json aggregate_runs(const std::map<Mode, std::vector<RunOutput>>& runs) {
  json agg;
  agg["modes"] = json::object();
  std::map<std::uint64_t, double> static_energy;
  if (auto it = runs.find(Mode::Static); it != runs.end())
    for (const auto& r : it->second) static_energy[r.seed] = r.totals.final_mean_residual_energy_J;

  for (const auto& [mode, list] : runs) {
    std::map<std::string, std::vector<double>> m;
    std::vector<std::uint64_t> seeds;
    for (const auto& r : list) {
      const auto& t = r.totals;
      seeds.push_back(r.seed);
      m["accuracy"].push_back(t.classification.accuracy());
      m["precision"].push_back(t.classification.precision());
      m["recall"].push_back(t.classification.recall());
      m["final_mean_residual_energy_J"].push_back(t.final_mean_residual_energy_J);
      if (t.pdr) m["pdr"].push_back(*t.pdr);
      if (t.median_detection_latency_s) m["median_detection_latency_s"].push_back(*t.median_detection_latency_s);
      m["detected"].push_back(static_cast<double>(t.detected));
      m["compromised"].push_back(static_cast<double>(t.compromised));
      m["tier2_entries"].push_back(static_cast<double>(t.tier2_entries));
      m["tier2_false_positives"].push_back(static_cast<double>(t.tier2_false_positives));
      m["isolations"].push_back(static_cast<double>(t.isolations));
      m["scorings"].push_back(static_cast<double>(t.scorings));
      m["blocks"].push_back(static_cast<double>(t.blocks));
      if (t.max_exclusion_latency_s) m["max_exclusion_latency_s"].push_back(*t.max_exclusion_latency_s);
      if (auto s = static_energy.find(r.seed); s != static_energy.end() && s->second > 0)
        m["energy_overhead"].push_back(1.0 - t.final_mean_residual_energy_J / s->second);
    }
    json jm;
    jm["runs"] = list.size();
    jm["seeds"] = seeds;
    for (const auto& [name, values] : m) jm[name] = stat_json(values);
    agg["modes"][std::string(to_string(mode))] = std::move(jm);
  }
  return agg;
}

ExperimentResult run_experiment(const ScenarioConfig& scenario, const ExperimentOptions& opt) {
  if (opt.runs == 0) throw ConfigError("runs must be positive");
  ExperimentResult res;
  res.resolved = resolve_norms(scenario);
  if (opt.log)
    opt.log("norm_volume " + format_real(res.resolved.monitoring.norm_volume) + ", norm_churn " +
            format_real(res.resolved.monitoring.norm_churn));

  std::unique_ptr<Scorer<float>> owned;
  const Scorer<float>* scorer = opt.scorer;
  const bool need_model =
      std::find(opt.modes.begin(), opt.modes.end(), Mode::Interrogator) != opt.modes.end();
  if (need_model && !scorer) {
    if (scenario.model_path.empty()) throw ConfigError("interrogator mode requires model_path");
    owned = std::make_unique<Scorer<float>>(load_model(scenario.model_path));
    scorer = owned.get();
  }

  for (Mode mode : opt.modes) {
    ScenarioConfig cfg = res.resolved;
    cfg.mode = mode;
    auto& list = res.runs[mode];
    for (std::size_t i = 0; i < opt.runs; ++i) {
      const std::uint64_t seed = opt.base_seed + i;
      try {
        Simulation sim(cfg, seed, mode == Mode::Interrogator ? scorer : nullptr, opt.sim);
        list.push_back(sim.run());
        if (!opt.out_dir.empty())
          write_run(list.back(), opt.out_dir / std::string(to_string(mode)) /
                                     ("seed_" + std::to_string(seed)));
      } catch (const std::exception& e) {
        throw ExperimentError(std::string(to_string(mode)) + " run with seed " +
                                  std::to_string(seed) + " failed: " + e.what(),
                              mode, seed);
      }
      if (opt.log) {
        const auto& t = list.back().totals;
        char buf[200];
        std::snprintf(buf, sizeof buf, "%s seed %llu: accuracy %.4f pdr %.4f energy %.2f J",
                      std::string(to_string(mode)).c_str(), static_cast<unsigned long long>(seed),
                      t.classification.accuracy(), t.pdr.value_or(NAN),
                      t.final_mean_residual_energy_J);
        opt.log(buf);
      }
    }
  }
  res.aggregate = aggregate_runs(res.runs);
  res.aggregate["base_seed"] = opt.base_seed;
  res.aggregate["runs"] = opt.runs;
  if (!opt.out_dir.empty()) write_text(opt.out_dir / "aggregate.json", res.aggregate.dump(2) + "\n");
  return res;
}

std::size_t gen_traces(const ScenarioConfig& scenario, const TraceGenOptions& opt) {
  if (!(scenario.adversary.fraction > 0))
    throw ConfigError("trace generation needs an adversary fraction above 0 (single class otherwise)");
  ScenarioConfig cfg = resolve_norms(scenario);
  cfg.mode = Mode::Bayesian;
  cfg.monitoring.enforcement = opt.enforcement;
  if (!opt.out_dir.empty()) fs::create_directories(opt.out_dir);
  std::size_t total = 0;
  for (std::size_t i = 0; i < opt.runs; ++i) {
    const std::uint64_t seed = opt.base_seed + i;
    SimulationOptions so;
    so.record_traces = true;
    RunOutput out;
    try {
      Simulation sim(cfg, seed, nullptr, so);
      out = sim.run();
    } catch (const std::exception& e) {
      throw ExperimentError("trace run with seed " + std::to_string(seed) + " failed: " + e.what(),
                            cfg.mode, seed);
    }
    total += out.traces.size();
    if (!opt.out_dir.empty()) {
      std::ofstream f(opt.out_dir / ("traces_seed_" + std::to_string(seed) + ".csv"), std::ios::binary);
      write_trace_csv(f, out.traces);
    }
    if (opt.log) opt.log("seed " + std::to_string(seed) + ": " + std::to_string(out.traces.size()) + " rows");
  }
  if (!opt.out_dir.empty()) {
    json m;
    m["scenario"] = scenario_json(cfg);
    m["base_seed"] = opt.base_seed;
    m["runs"] = opt.runs;
    m["enforcement"] = opt.enforcement;
    m["rows"] = total;
    write_text(opt.out_dir / "traces_manifest.json", m.dump(2) + "\n");
  }
  return total;
}

void write_report(const fs::path& in_dir, std::ostream& out) {
  const std::regex seed_dir(R"(seed_(\d+))");
  // mode -> interval -> metric -> values
  std::map<std::string, std::map<long, std::map<std::string, std::vector<double>>>> acc;
  std::map<std::string, std::map<long, std::size_t>> counts;
  std::size_t files = 0;
  for (Mode mode : {Mode::Interrogator, Mode::Bayesian, Mode::Static}) {
    const fs::path mdir = in_dir / std::string(to_string(mode));
    if (!fs::is_directory(mdir)) continue;
    std::vector<std::pair<std::uint64_t, fs::path>> dirs;
    for (const auto& e : fs::directory_iterator(mdir)) {
      std::smatch mm;
      const std::string name = e.path().filename().string();
      if (e.is_directory() && std::regex_match(name, mm, seed_dir))
        dirs.emplace_back(std::stoull(mm[1]), e.path());
    }
    std::sort(dirs.begin(), dirs.end());
    for (const auto& [seed, dir] : dirs) {
      std::ifstream f(dir / "metrics.csv");
      if (!f) throw std::runtime_error("missing " + (dir / "metrics.csv").string());
      ++files;
      for (const auto& r : read_metrics_csv(f)) {
        auto& slot = acc[r.mode][r.interval_index];
        ++counts[r.mode][r.interval_index];
        auto put = [&](const char* k, std::optional<double> v) {
          if (v) slot[k].push_back(*v);
        };
        put("accuracy", r.accuracy);
        put("precision", r.precision);
        put("recall", r.recall);
        put("mean_residual_energy_J", r.mean_residual_energy_J);
        put("pdr_cumulative", r.pdr_cumulative);
        put("flagged_count", static_cast<double>(r.flagged_count));
        put("excluded_count", static_cast<double>(r.excluded_count));
        put("isolated_count", static_cast<double>(r.isolated_count));
        put("false_positive_count", static_cast<double>(r.false_positive_count));
      }
    }
  }
  if (files == 0) throw std::runtime_error("no run metrics found under " + in_dir.string());

  out << "mode,interval_index,runs";
  for (const char* k : kReportMetrics) out << ',' << k << "_mean," << k << "_std";
  out << '\n';
  for (Mode mode : {Mode::Interrogator, Mode::Bayesian, Mode::Static}) {
    const std::string name(to_string(mode));
    auto it = acc.find(name);
    if (it == acc.end()) continue;
    for (const auto& [k, metrics] : it->second) {
      out << name << ',' << k << ',' << counts[name][k];
      for (const char* key : kReportMetrics) {
        auto m = metrics.find(key);
        if (m == metrics.end() || m->second.empty()) {
          out << ",,";
          continue;
        }
        const MeanStd s = mean_std(m->second);
        out << ',' << format_real(s.mean) << ',' << (s.std ? format_real(*s.std) : std::string());
      }
      out << '\n';
    }
  }
}

}  // namespace uwt
