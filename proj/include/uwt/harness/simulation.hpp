#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "uwt/adversary/adversary.hpp"
#include "uwt/features/features.hpp"
#include "uwt/governance/consortium.hpp"
#include "uwt/governance/enforcement.hpp"
#include "uwt/harness/metrics.hpp"
#include "uwt/harness/scenario.hpp"
#include "uwt/sim/engine.hpp"
#include "uwt/trust/scorer.hpp"
#include "uwt/trust/trust.hpp"
#include "uwt/world/network.hpp"

namespace uwt {

struct DetectionOutcome {
  AgentId agent{0};
  bool compromised{false};
  std::string attack;
  std::optional<double> first_flag_time;
  std::optional<double> attack_activation;
  std::optional<double> detection_latency;
};

/// One labelled feature vector, as exported for scorer training.
struct TraceRow {
  std::uint64_t seed{0};
  AgentId agent{0};
  long interval_index{0};
  FeatureVector features;
  bool compromised{false};
};

struct EnforcementEvent {
  AgentId agent{0};
  long interval_index{0};
  double time{0.0};
  Tier from{Tier::Normal};
  Tier to{Tier::Normal};
  bool compromised{false};
  // Tier-2 entries: seconds from the start of the triggering interval until
  // the agent was excluded from routing.
  std::optional<double> exclusion_latency;
  // Isolation entries: ledger height holding the matching Isolated commit.
  std::optional<std::uint64_t> ledger_height;
};

struct RunTotals {
  Classification classification;  // pooled over post-warm-up intervals
  std::optional<double> pdr;
  double final_mean_residual_energy_J{0.0};
  std::optional<double> median_detection_latency_s;
  std::size_t detected{0};
  std::size_t compromised{0};
  std::optional<double> max_exclusion_latency_s;
  std::uint64_t tier2_entries{0};
  std::uint64_t tier2_false_positives{0};
  std::uint64_t escalations_deferred{0};
  std::uint64_t isolations{0};
  std::uint64_t isolations_without_commit{0};
  std::uint64_t scorings{0};
  std::uint64_t mission_originated{0};
  std::uint64_t mission_delivered{0};
  std::uint64_t blocks{0};
  std::uint64_t view_changes{0};
  std::uint64_t events_processed{0};
};

struct SimulationOptions {
  bool record_traces{false};
  bool record_features{false};  // keep every streamed primary FeatureVector
};

struct RunOutput {
  std::string run_id;
  std::uint64_t seed{0};
  Mode mode{Mode::Static};
  std::vector<MetricsRow> rows;
  std::vector<DetectionOutcome> outcomes;
  std::vector<EnforcementEvent> transitions;
  std::vector<LedgerBlock> ledger;
  RunTotals totals;
  nlohmann::json manifest;
  std::vector<TraceRow> traces;
  std::vector<std::vector<FeatureVector>> features;  // [interval][agent]
};

std::string make_run_id(Mode mode, std::uint64_t seed);

/// Places gateways on the surface along the northern edge, then AUVs and
/// sensors uniformly in the footprint. Interrogator hosts are the gateways
/// followed by the first AUVs.
std::vector<AgentState> deploy_agents(const ScenarioConfig& cfg, RngStream& rng);

/// One seeded mission. The scenario must have resolved feature norms.
class Simulation final : private NetworkHooks {
 public:
  Simulation(const ScenarioConfig& cfg, std::uint64_t seed, const Scorer<float>* scorer,
             SimulationOptions options = {});
  ~Simulation() override;

  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;

  RunOutput run();

  const Network& network() const { return *network_; }
  const Consortium& consortium() const { return *consortium_; }
  const CompromiseAssignment& assignment() const { return adversary_->assignment(); }

 private:
  bool drop_relay(AgentId holder, const Transit& t) override;
  std::optional<AgentId> choose_next_hop(AgentId holder, const Transit& t,
                                         std::optional<AgentId> greedy) override;
  void on_transmit(const PacketRecord& r) override;
  void on_arrival(const PacketRecord& r) override;
  void on_relay_outcome(AgentId relay, bool positive) override;

  void schedule_all();
  void traffic_slot(long slot);
  void mobility_tick(long i);
  bool admit(AgentId a);
  void close_interval(long k);
  void trust_step(long k);
  void enforce(long k);
  void record_metrics(long k);
  void consensus_tick(long i);
  void on_block(const LedgerBlock& b);
  std::optional<AgentId> host_for(AgentId a, std::optional<AgentId> skip = std::nullopt) const;
  bool label(AgentId a, long k) const;
  nlohmann::json manifest() const;

  ScenarioConfig cfg_;
  std::uint64_t seed_;
  const Scorer<float>* scorer_;
  SimulationOptions opt_;
  Engine engine_;
  std::size_t n_;
  std::vector<AgentId> monitored_;
  std::vector<AgentId> hosts_;
  std::vector<AgentId> gateways_;

  std::unique_ptr<Adversary> adversary_;
  std::unique_ptr<Network> network_;
  std::unique_ptr<Consortium> consortium_;
  std::unique_ptr<FeatureExtractor> primary_, secondary_;
  std::unique_ptr<SequenceBuffer> seq_primary_, seq_secondary_;
  RngStream traffic_rng_, mobility_rng_;
  std::uint64_t outcome_key_{0};
  std::uint64_t outcome_counter_{0};

  std::vector<long> sensor_phase_, coord_phase_;
  std::vector<double> credit_;
  std::vector<TrustRecord> records_;
  std::vector<EnforcementState> enf_;
  std::vector<BetaReputation> beta_primary_, beta_secondary_;
  std::vector<double> committed_tau_;
  std::vector<std::optional<double>> secondary_raw_;
  std::vector<bool> relayed_;
  std::vector<bool> awaiting_isolation_, isolation_ready_;
  std::vector<bool> awaiting_reinstatement_, reinstatement_ready_;
  std::vector<std::optional<std::uint64_t>> isolation_height_;
  std::vector<std::optional<double>> first_flag_;
  std::vector<bool> mission_msg_, mission_done_;
  std::uint64_t mission_originated_{0}, mission_delivered_{0};
  long last_closed_{-1};

  RunOutput out_;
};

}  // namespace uwt
