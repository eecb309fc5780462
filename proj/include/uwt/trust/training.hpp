#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "uwt/features/features.hpp"
#include "uwt/harness/metrics.hpp"
#include "uwt/trust/scorer.hpp"

namespace uwt {

struct TraceRow;

/// Consecutive labelled vectors of one agent in one run.
struct TraceSeries {
  std::uint64_t seed{0};
  AgentId agent{0};
  long first_interval{0};
  std::vector<FeatureVector> vectors;
  std::vector<bool> compromised;
};

class TraceSet {
 public:
  TraceSet() = default;
  /// Groups rows by (seed, agent); intervals of a group must be contiguous.
  static TraceSet from_rows(const std::vector<TraceRow>& rows);

  const std::vector<TraceSeries>& series() const { return series_; }
  std::vector<std::uint64_t> seeds() const;
  std::size_t rows() const;
  bool empty() const { return series_.empty(); }

  /// The sequence a scorer would see after interval `end` of series `s`.
  FeatureSequence sequence(std::size_t s, std::size_t end, std::size_t k = kSequenceLen) const;

  /// Keeps the series whose seed satisfies `keep`.
  TraceSet filter(const std::function<bool(std::uint64_t)>& keep) const;

 private:
  std::vector<TraceSeries> series_;
};

inline constexpr const char* kTraceHeader =
    "seed,agent,interval_index,pkt_count,gap_mean,gap_var,retx_rate,routing_stability,"
    "neighbor_churn,protocol_deviation,label";

/// Floats are written with 17 significant digits so a reload is exact.
void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& rows);
std::vector<TraceRow> read_trace_csv(std::istream& in);
/// A single CSV file, or every *.csv in a directory in name order.
std::vector<TraceRow> load_traces(const std::filesystem::path& path);

/// Held-out split by run seed: the last ceil(fraction * seeds) seeds validate.
std::pair<TraceSet, TraceSet> split_by_seed(const TraceSet& all, double val_fraction);

Standardizer fit_standardizer(const TraceSet& set);

struct TrainParams {
  ScorerConfig config;
  int epochs{4};
  std::size_t samples_per_epoch{16384};
  std::size_t batch{32};
  double lr{5e-4};
  std::size_t warmup_steps{100};
  double final_lr_frac{0.1};
  double clip_norm{1.0};
  double beta1{0.9}, beta2{0.999}, eps{1e-8};
  // Alternate compromised and benign rows within each batch instead of drawing
  // rows at their natural rate. Shifts the scores toward the compromised class.
  bool balanced_batches{false};
  std::uint64_t seed{1};
  double val_fraction{0.2};
  // Validation scores every stride-th interval after `val_warmup`.
  std::size_t val_stride{2};
  long val_warmup{10};
  double threshold{0.65};  // predicted compromised iff score < threshold
};

struct EvalMetrics {
  Classification classification;
  double loss{0.0};
  std::size_t sequences{0};
};

struct TrainingReport {
  std::vector<double> epoch_loss;
  std::vector<std::uint64_t> train_seeds, val_seeds;
  std::size_t train_rows{0}, val_rows{0};
  std::size_t positives{0}, negatives{0};
  EvalMetrics validation;
  Standardizer standardizer;

  std::string to_json() const;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using TrainLog = std::function<void(const std::string&)>;

/// Adam on mean binary cross-entropy. Batch order and initialization are
/// fixed by `params.seed`.
ScorerModel train_scorer(const TraceSet& train, const TraceSet& validation,
                         const TrainParams& params, TrainingReport& report,
                         const TrainLog& log = {});

/// Splits `all` by seed, trains, and evaluates on the held-out seeds.
ScorerModel train_scorer(const TraceSet& all, const TrainParams& params, TrainingReport& report,
                         const TrainLog& log = {});

EvalMetrics evaluate_scorer(const Scorer<float>& scorer, const TraceSet& set, std::size_t stride,
                            long warmup, double threshold);

}  // namespace uwt
