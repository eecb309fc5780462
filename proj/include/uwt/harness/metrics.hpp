#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "uwt/world/types.hpp"

namespace uwt {

struct Classification {
  std::uint64_t tp{0}, fp{0}, tn{0}, fn{0};

  std::uint64_t total() const { return tp + fp + tn + fn; }
  double accuracy() const;
  /// 1.0 when nothing was predicted positive and nothing is positive.
  double precision() const;
  double recall() const;
  Classification& operator+=(const Classification& o);
};

/// Confusion counts for one interval: predicted[i] means the agent's trust is
/// below threshold, actual[i] that it is compromised with an active attack.
Classification classify_interval(const std::vector<bool>& predicted,
                                 const std::vector<bool>& actual);

/// Delivered / originated; absent when nothing was originated.
std::optional<double> compute_pdr(std::uint64_t originated, std::uint64_t delivered);

/// From a packet log: distinct non-replay SensorData messages that reached
/// their final destination over distinct ones that left their origin.
std::optional<double> compute_pdr(const std::vector<PacketRecord>& log);

struct MetricsRow {
  std::string run_id;
  std::uint64_t seed{0};
  long interval_index{0};
  std::string mode;
  // Absent during warm-up.
  std::optional<double> accuracy, precision, recall;
  double mean_residual_energy_J{0.0};
  std::optional<double> pdr_cumulative;
  std::uint64_t flagged_count{0};
  std::uint64_t excluded_count{0};
  std::uint64_t isolated_count{0};
  std::uint64_t false_positive_count{0};
};

inline constexpr const char* kMetricsHeader =
    "run_id,seed,interval_index,mode,accuracy,precision,recall,mean_residual_energy_J,"
    "pdr_cumulative,flagged_count,excluded_count,isolated_count,false_positive_count";

/// 9 significant digits, shortest form.
std::string format_real(double v);

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> read_metrics_csv(std::istream& in);

double median(std::vector<double> v);

struct MeanStd {
  double mean{0.0};
  std::optional<double> std;  // sample std, absent for a single value
  std::size_t n{0};
};
MeanStd mean_std(const std::vector<double>& v);

}  // namespace uwt
