#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "uwt/sim/sim_time.hpp"

namespace uwt {

using AgentId = std::uint32_t;
using PacketId = std::uint64_t;
using MessageId = std::uint64_t;

struct Vec3 {
  double x{0}, y{0}, z{0};

  friend bool operator==(const Vec3&, const Vec3&) = default;
};

inline double distance(const Vec3& a, const Vec3& b) {
  const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

enum class AgentKind : std::uint8_t { StaticSensor, MobileAUV, SurfaceGateway };
std::string_view to_string(AgentKind kind);

struct NeighborEntry {
  AgentId id;
  SimTime last_heard;
};

struct AgentState {
  AgentId id{0};
  AgentKind kind{AgentKind::StaticSensor};
  Vec3 position;
  Vec3 velocity;
  Vec3 waypoint;
  double speed{0.0};
  double initial_energy{0.0};
  double residual_energy{0.0};
  // Running sum of every logged consumption; initial - residual must match it.
  double consumed_energy{0.0};
  double duty_cycle{1.0};
  std::vector<NeighborEntry> neighbor_table;
  bool alive{true};
  bool interrogator_host{false};
  // Ground truth. Never read by the monitoring path.
  bool compromised{false};

  bool has_neighbor(AgentId other) const {
    for (const auto& n : neighbor_table)
      if (n.id == other) return true;
    return false;
  }
};

struct EnergyParams {
  double e_elec{5e-8};       // J/bit
  double eps_amp{1e-10};     // J/bit/m^k
  double path_loss_k{1.5};
  double e_sense{1e-4};      // J per sensing event
  double e_compute{2e-4};    // J per routing/decision event
  double e_compute_interrogator{0.45};  // J per scorer inference on a host
  double initial_sensor{500.0};
  double initial_auv{5000.0};
  double initial_gateway{5000.0};

  void validate() const;
};

struct ChannelParams {
  int rate_bps{10000};
  double prop_delay_s_per_km{0.67};
  double base_loss_prob{0.05};
  double loss_per_km{0.05};
  double comm_range_m{400.0};
  int max_retries{2};
  double retry_backoff_s{2.0};
  double buffer_expiry_s{120.0};
  int max_hops{16};

  void validate() const;
};

enum class PacketKind : std::uint8_t { SensorData, RoutingControl, TrustSummary, Ack };
std::string_view to_string(PacketKind kind);

enum class DropReason : std::uint8_t {
  ChannelLoss,    // frame lost on air (each failed attempt is its own record)
  OutOfRange,     // next hop not reachable, never sent
  MaliciousDrop,  // swallowed by a compromised relay
  Expired,        // sat in a buffer past the expiry limit
  HopLimit,
  Isolated,       // sender or receiver logically isolated
  Dead,           // receiver out of energy
};
std::string_view to_string(DropReason reason);

/// True when the drop happened after the frame went on air, i.e. the
/// transmission itself is observable metadata.
constexpr bool on_air(DropReason reason) {
  return reason == DropReason::ChannelLoss || reason == DropReason::Isolated ||
         reason == DropReason::Dead;
}

/// One hop-level transmission event. Local drops (never transmitted) are also
/// logged as records with dst == src so every message has a complete trail.
struct PacketRecord {
  PacketId packet_id{0};
  MessageId message_id{0};  // header id carried on air; shared by hops, retries, replays
  AgentId src{0};
  AgentId dst{0};
  AgentId origin{0};
  AgentId final_dst{0};
  std::uint32_t size_bits{0};
  PacketKind kind{PacketKind::SensorData};
  SimTime sent_at;
  std::optional<SimTime> delivered_at;
  std::optional<PacketId> retransmission_of;
  std::optional<DropReason> dropped_reason;
  // Ground truth: record belongs to an injected replay copy.
  bool replay{false};

  bool resolved() const { return delivered_at.has_value() || dropped_reason.has_value(); }
  // Went on air: delivered, lost, still in flight, or discarded by the receiver.
  // Local drops are logged with dst == src and never count.
  bool transmitted() const { return dst != src && (!dropped_reason || on_air(*dropped_reason)); }
};

}  // namespace uwt
