#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "uwt/sim/rng.hpp"
#include "uwt/world/types.hpp"

namespace uwt {

/// Acoustic propagation delay, linear in distance. Throws on negative input.
double propagation_delay(double distance_m, const ChannelParams& params);

/// Serialization time of a frame at the configured bit rate.
double transmission_delay(std::uint32_t size_bits, const ChannelParams& params);

/// Distance-linear Bernoulli loss probability, clamped to [0, 0.95].
double loss_probability(double distance_m, const ChannelParams& params);

/// E_tx(l, d) = l*E_elec + l*eps_amp*d^k
double tx_energy(std::uint64_t size_bits, double distance_m, const EnergyParams& params);

struct EnergyComponents {
  double sense{0.0};
  double compute{0.0};
  double tx{0.0};
};

/// Charges one step of E_sense*duty + E_compute + E_tx to `agent`, clamping at
/// zero residual; an agent that hits zero is marked dead. Returns the energy
/// actually drawn.
double step_energy(AgentState& agent, const EnergyComponents& components);

struct MobilityParams {
  double width_m{1000.0};
  double height_m{1000.0};
  double auv_depth_min_m{10.0};
  double auv_depth_max_m{200.0};
  double speed_min_mps{0.5};
  double speed_max_mps{2.0};
};

/// Advances every MobileAUV toward its waypoint; on arrival draws the next
/// waypoint and speed from `rng`. Sensors and gateways do not move.
void move_agents(std::vector<AgentState>& agents, double dt, const MobilityParams& params,
                 RngStream& rng);

/// Draws a fresh waypoint/speed for an AUV.
void draw_waypoint(AgentState& agent, const MobilityParams& params, RngStream& rng);

/// Rebuilds every neighbor table from geometry. Dead agents and agents marked
/// in `hidden` neither appear in tables nor get one.
void refresh_neighbors(std::vector<AgentState>& agents, double comm_range_m, SimTime now,
                       const std::vector<bool>& hidden);

/// Greedy geographic next hop: the alive, non-excluded neighbor closest to
/// `target` among those making progress; ties go to the lower id.
std::optional<AgentId> route_next_hop(const std::vector<AgentState>& agents, AgentId from,
                                      AgentId final_dst, const std::vector<bool>& excluded);

/// Neighbor maximizing distance to `final_dst` (used by route manipulation).
std::optional<AgentId> route_farthest_hop(const std::vector<AgentState>& agents, AgentId from,
                                          AgentId final_dst, const std::vector<bool>& excluded);

}  // namespace uwt
