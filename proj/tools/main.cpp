#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#ifdef __GLIBC__
#include <malloc.h>
#endif

#include "CLI11.hpp"
#include "uwt/governance/ledger.hpp"
#include "uwt/harness/experiment.hpp"
#include "uwt/trust/training.hpp"

namespace {

uwt::Mode mode_arg(const std::string& s) {
  auto m = uwt::parse_mode(s);
  if (!m) throw uwt::ConfigError("unknown mode '" + s + "' (interrogator, bayesian, static)");
  return *m;
}

void say(const std::string& s) { std::cerr << s << '\n'; }

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
#ifdef __GLIBC__
  // Large scorer temporaries are reused from the heap rather than mmapped.
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 256 << 20);
#endif
  CLI::App app{"Interrogator trust framework simulator"};
  app.require_subcommand(1);

  std::string scenario, out, mode = "interrogator", modes = "all", traces, input, model;
  std::uint64_t seed = 1;
  std::size_t runs = 10;
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Suppress progress output");

  auto* run = app.add_subcommand("run", "One seeded mission");
  run->add_option("--scenario", scenario, "Scenario file")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "Run seed")->required();
  run->add_option("--mode", mode, "interrogator, bayesian or static");
  run->add_option("--model", model, "Scorer model (overrides model_path)");
  run->add_option("--out", out, "Output directory")->required();

  auto* exp = app.add_subcommand("experiment", "Seeded runs across modes");
  exp->add_option("--scenario", scenario, "Scenario file")->required()->check(CLI::ExistingFile);
  exp->add_option("--runs", runs, "Number of seeds");
  exp->add_option("--seed", seed, "Base seed");
  exp->add_option("--modes", modes, "all or a comma list");
  exp->add_option("--model", model, "Scorer model (overrides model_path)");
  exp->add_option("--out", out, "Output directory")->required();

  auto* gen = app.add_subcommand("gen-traces", "Labelled feature traces for training");
  std::uint64_t trace_seed = 1000;
  std::size_t trace_runs = 20;
  gen->add_option("--scenario", scenario, "Scenario file")->required()->check(CLI::ExistingFile);
  gen->add_option("--runs", trace_runs, "Number of seeds");
  gen->add_option("--seed", trace_seed, "Base seed");
  bool trace_enforced = false;
  gen->add_flag("--enforced", trace_enforced, "Keep the baseline's enforcement active");
  gen->add_option("--out", out, "Output directory")->required();

  auto* train = app.add_subcommand("train", "Train the sequence scorer");
  uwt::TrainParams tp;
  train->add_option("--traces", traces, "Trace CSV file or directory")->required()->check(CLI::ExistingPath);
  train->add_option("--out", out, "Model file")->required();
  train->add_option("--epochs", tp.epochs, "Epochs");
  train->add_option("--lr", tp.lr, "Peak learning rate");
  train->add_option("--batch", tp.batch, "Batch size");
  train->add_option("--samples", tp.samples_per_epoch, "Sequences per epoch");
  train->add_option("--seed", tp.seed, "Initialization and batch-order seed");
  train->add_option("--val-fraction", tp.val_fraction, "Share of seeds held out");
  train->add_flag("--balanced", tp.balanced_batches, "Draw classes equally in each batch");

  auto* ledger = app.add_subcommand("ledger", "Ledger export tools");
  ledger->require_subcommand(1);
  auto* verify = ledger->add_subcommand("verify", "Verify an exported chain");
  verify->add_option("--file", input, "Ledger JSONL export")->required()->check(CLI::ExistingFile);

  auto* report = app.add_subcommand("report", "Per-interval aggregate table");
  report->add_option("--in", input, "Experiment output directory")->required()->check(CLI::ExistingDirectory);
  report->add_option("--out", out, "CSV file")->required();

  CLI11_PARSE(app, argc, argv);
  const uwt::ProgressLog log = quiet ? uwt::ProgressLog{} : uwt::ProgressLog{say};

  try {
    if (*run) {
      auto cfg = uwt::load_scenario(scenario);
      if (!model.empty()) cfg.model_path = model;
      uwt::ExperimentOptions o;
      o.runs = 1;
      o.base_seed = seed;
      o.modes = {mode_arg(mode)};
      o.log = log;
      auto res = uwt::run_experiment(cfg, o);
      uwt::write_run(res.runs.begin()->second.front(), out);
      return 0;
    }
    if (*exp) {
      auto cfg = uwt::load_scenario(scenario);
      if (!model.empty()) cfg.model_path = model;
      uwt::ExperimentOptions o;
      o.runs = runs;
      o.base_seed = seed;
      o.out_dir = out;
      o.log = log;
      if (modes != "all") {
        o.modes.clear();
        std::stringstream ss(modes);
        for (std::string m; std::getline(ss, m, ',');) o.modes.push_back(mode_arg(m));
      }
      uwt::run_experiment(cfg, o);
      return 0;
    }
    if (*gen) {
      uwt::TraceGenOptions o;
      o.runs = trace_runs;
      o.base_seed = trace_seed;
      o.enforcement = trace_enforced;
      o.out_dir = out;
      o.log = log;
      const std::size_t rows = uwt::gen_traces(uwt::load_scenario(scenario), o);
      if (log) log(std::to_string(rows) + " trace rows written");
      return 0;
    }
    if (*train) {
      const auto set = uwt::TraceSet::from_rows(uwt::load_traces(traces));
      uwt::TrainingReport rep;
      const auto m = uwt::train_scorer(set, tp, rep, log);
      uwt::save_model(m, out);
      std::ofstream(out + ".report.json") << rep.to_json() << '\n';
      const auto& c = rep.validation.classification;
      std::printf("validation accuracy %.4f precision %.4f recall %.4f (%zu sequences)\n",
                  c.accuracy(), c.precision(), c.recall(), rep.validation.sequences);
      return 0;
    }
    if (*verify) {
      const auto check = uwt::verify_export(slurp(input));
      if (check.valid) {
        std::printf("valid: %zu blocks\n", check.blocks);
        return 0;
      }
      std::printf("tampered at height %llu: %s\n", static_cast<unsigned long long>(check.bad_height),
                  check.reason.c_str());
      return 1;
    }
    if (*report) {
      std::ofstream f(out, std::ios::binary);
      if (!f) throw std::runtime_error("cannot write " + out);
      uwt::write_report(input, f);
      return 0;
    }
  } catch (const uwt::ExperimentError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
