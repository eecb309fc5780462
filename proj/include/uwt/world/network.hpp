#pragma once

#include <deque>
#include <optional>
#include <unordered_set>
#include <vector>

#include "uwt/sim/engine.hpp"
#include "uwt/world/physics.hpp"
#include "uwt/world/types.hpp"

namespace uwt {

/// One copy of a message moving through the network. Replays create new
/// copies that carry a stale message id.
struct Transit {
  MessageId message_id{0};
  AgentId origin{0};
  AgentId final_dst{0};
  PacketKind kind{PacketKind::SensorData};
  std::uint32_t size_bits{0};
  SimTime created;
  int hops{0};
  bool replay{false};
  std::vector<AgentId> path;  // holders so far, origin first
  AgentId holder{0};
  std::optional<SimTime> entrusted_at;  // set while a relay owes a forwarding outcome
  bool finished{false};
};

/// Callbacks the simulation plugs into the packet machinery. Defaults model a
/// benign, unobserved network.
class NetworkHooks {
 public:
  virtual ~NetworkHooks() = default;

  /// Relay-side drop decision; only consulted when holder != origin.
  virtual bool drop_relay(AgentId /*holder*/, const Transit& /*t*/) { return false; }
  /// May replace the greedy choice (route manipulation, collusion).
  virtual std::optional<AgentId> choose_next_hop(AgentId /*holder*/, const Transit& /*t*/,
                                                 std::optional<AgentId> greedy) {
    return greedy;
  }
  virtual void on_transmit(const PacketRecord& /*r*/) {}
  virtual void on_arrival(const PacketRecord& /*r*/) {}
  /// Forwarding outcome for an entrusted copy (consumed by beta reputation).
  virtual void on_relay_outcome(AgentId /*relay*/, bool /*positive*/) {}
};

struct NetworkCounters {
  std::uint64_t originated{0};
  std::uint64_t delivered{0};
  std::uint64_t duplicates_discarded{0};
  std::uint64_t buffered_now{0};
};

class Network {
 public:
  Network(Engine& engine, std::vector<AgentState> agents, ChannelParams channel,
          EnergyParams energy, NetworkHooks& hooks);

  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;

  /// Creates a message at `origin` and routes its first hop (or buffers it).
  MessageId originate(AgentId origin, AgentId final_dst, PacketKind kind, std::uint32_t size_bits);

  /// Re-sends a copy of a message `agent` transmitted earlier, keeping its id.
  /// Returns false when the agent has nothing cached.
  bool replay(AgentId agent, RngStream& rng);

  /// Sends one hop directly. Exposed for tests of the transmit contract.
  PacketId transmit(std::size_t transit_index, AgentId src, AgentId dst,
                    std::optional<PacketId> retransmission_of = std::nullopt);

  /// Moves AUVs, rebuilds neighbor tables, retries or expires buffered copies.
  void mobility_step(double dt, const MobilityParams& params, RngStream& rng);
  void refresh_topology();

  void set_excluded(AgentId id, bool value) { excluded_[id] = value; }
  void set_isolated(AgentId id, bool value);
  bool isolated(AgentId id) const { return isolated_[id]; }
  const std::vector<bool>& excluded() const { return excluded_; }

  /// Charges energy to an agent and returns what was drawn.
  double charge(AgentId id, const EnergyComponents& c) { return step_energy(agents_[id], c); }

  const std::vector<AgentState>& agents() const { return agents_; }
  std::vector<AgentState>& agents() { return agents_; }
  const std::vector<PacketRecord>& log() const { return log_; }
  const std::vector<Transit>& transits() const { return transits_; }
  const NetworkCounters& counters() const { return counters_; }
  const ChannelParams& channel() const { return channel_; }
  const EnergyParams& energy() const { return energy_; }
  std::size_t buffered() const;

  /// Deadline used for relay outcomes: 3x the expected one-hop delay.
  double outcome_window(std::uint32_t size_bits) const;

  AgentId nearest_gateway(AgentId from) const;

 private:
  struct Buffered {
    std::size_t transit;
    SimTime since;
  };

  void hold(std::size_t ti);
  void arrive(PacketId pid, std::size_t ti);
  void local_drop(std::size_t ti, DropReason reason);
  void settle_outcome(std::size_t ti, bool positive);
  void remember_sent(AgentId agent, std::size_t ti);
  PacketRecord& new_record(std::size_t ti, AgentId src, AgentId dst,
                           std::optional<PacketId> retransmission_of);

  Engine& engine_;
  std::vector<AgentState> agents_;
  ChannelParams channel_;
  EnergyParams energy_;
  NetworkHooks& hooks_;
  RngStream channel_rng_;

  std::vector<PacketRecord> log_;
  std::vector<Transit> transits_;
  std::vector<std::unordered_set<MessageId>> seen_;
  std::vector<std::deque<Buffered>> buffers_;
  std::vector<std::deque<std::size_t>> sent_cache_;
  std::vector<bool> excluded_;
  std::vector<bool> isolated_;
  MessageId next_message_{0};
  NetworkCounters counters_;
};

}  // namespace uwt
