#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "json.hpp"
#include "uwt/adversary/adversary.hpp"
#include "uwt/governance/consortium.hpp"
#include "uwt/governance/enforcement.hpp"
#include "uwt/trust/trust.hpp"
#include "uwt/world/physics.hpp"

namespace uwt {

enum class Mode : std::uint8_t { Interrogator, Bayesian, Static };
std::string_view to_string(Mode mode);
std::optional<Mode> parse_mode(std::string_view s);

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DeploymentParams {
  std::size_t n_agents{50};
  std::size_t n_gateways{2};
  std::size_t n_auvs{10};
  std::size_t n_interrogator_hosts{4};
  double sensor_depth_min_m{50.0};
  double sensor_depth_max_m{200.0};
};

struct TrafficParams {
  double sensor_period_s{30.0};
  std::uint32_t sensor_bits{2000};
  // Agent-to-agent coordination messages; 0 disables them.
  double coordination_period_s{60.0};
  std::uint32_t coordination_bits{512};
  std::uint32_t summary_bits{1024};
  double slot_s{3.0};
};

struct MonitoringParams {
  double interval_s{30.0};
  int warmup_intervals{10};
  // Normal-tier agents off mission-critical routes are scored every stride-th interval.
  int normal_stride{4};
  double secondary_range_m{800.0};
  double secondary_miss_prob{0.15};
  double consensus_period_s{60.0};
  double delta_commit_threshold{0.01};
  double mobility_tick_s{10.0};
  // 0 means derive: norm_volume from a calibration run, norm_churn = N/10.
  double norm_volume{0.0};
  double norm_churn{0.0};
  double duty_floor{0.25};
  bool enforcement{true};
};

struct ScenarioConfig {
  DeploymentParams deployment;
  MobilityParams mobility;
  ChannelParams channel;
  EnergyParams energy;
  TrustParams trust;
  AdversaryParams adversary;
  EnforcementParams enforcement;
  ConsortiumParams consortium;
  TrafficParams traffic;
  MonitoringParams monitoring;
  Mode mode{Mode::Interrogator};
  double mission_duration_s{7200.0};
  std::string model_path;
  std::uint64_t calibration_seed{0xCA11B};

  long intervals() const;
  void validate() const;
};

/// Parses a scenario document. Every key must be known; missing keys keep
/// their defaults.
ScenarioConfig parse_scenario(std::string_view text);
ScenarioConfig load_scenario(const std::filesystem::path& path);
nlohmann::json scenario_json(const ScenarioConfig& cfg);

}  // namespace uwt
