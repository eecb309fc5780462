#include "uwt/world/physics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace uwt {

std::string_view to_string(AgentKind kind) {
  switch (kind) {
    case AgentKind::StaticSensor: return "sensor";
    case AgentKind::MobileAUV: return "auv";
    case AgentKind::SurfaceGateway: return "gateway";
  }
  return "unknown";
}

std::string_view to_string(PacketKind kind) {
  switch (kind) {
    case PacketKind::SensorData: return "SensorData";
    case PacketKind::RoutingControl: return "RoutingControl";
    case PacketKind::TrustSummary: return "TrustSummary";
    case PacketKind::Ack: return "Ack";
  }
  return "unknown";
}

std::string_view to_string(DropReason reason) {
  switch (reason) {
    case DropReason::ChannelLoss: return "ChannelLoss";
    case DropReason::OutOfRange: return "OutOfRange";
    case DropReason::MaliciousDrop: return "MaliciousDrop";
    case DropReason::Expired: return "Expired";
    case DropReason::HopLimit: return "HopLimit";
    case DropReason::Isolated: return "Isolated";
    case DropReason::Dead: return "Dead";
  }
  return "unknown";
}

void EnergyParams::validate() const {
  if (!(e_elec > 0 && eps_amp > 0 && e_sense > 0 && e_compute > 0 && e_compute_interrogator > 0))
    throw std::invalid_argument("energy parameters must be strictly positive");
  if (!(path_loss_k >= 1.0)) throw std::invalid_argument("path-loss exponent k must be >= 1");
  if (!(initial_sensor > 0 && initial_auv > 0 && initial_gateway > 0))
    throw std::invalid_argument("initial energies must be strictly positive");
}

void ChannelParams::validate() const {
  if (rate_bps < 10000 || rate_bps > 20000)
    throw std::invalid_argument("acoustic rate must lie in [10000, 20000] bps");
  if (!(prop_delay_s_per_km >= 0)) throw std::invalid_argument("propagation delay must be >= 0");
  auto is_prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!is_prob(base_loss_prob) || !is_prob(loss_per_km))
    throw std::invalid_argument("loss probabilities must lie in [0, 1]");
  if (!(comm_range_m > 0)) throw std::invalid_argument("communication range must be positive");
  if (max_retries < 0 || max_hops < 1) throw std::invalid_argument("retry/hop limits out of range");
  if (!(retry_backoff_s > 0 && buffer_expiry_s > 0))
    throw std::invalid_argument("backoff and expiry must be positive");
}

double propagation_delay(double distance_m, const ChannelParams& params) {
  if (distance_m < 0) throw std::invalid_argument("negative propagation distance");
  return distance_m / 1000.0 * params.prop_delay_s_per_km;
}

double transmission_delay(std::uint32_t size_bits, const ChannelParams& params) {
  return static_cast<double>(size_bits) / static_cast<double>(params.rate_bps);
}

double loss_probability(double distance_m, const ChannelParams& params) {
  const double p = params.base_loss_prob + params.loss_per_km * distance_m / 1000.0;
  return std::clamp(p, 0.0, 0.95);
}

double tx_energy(std::uint64_t size_bits, double distance_m, const EnergyParams& params) {
  const double l = static_cast<double>(size_bits);
  return l * params.e_elec + l * params.eps_amp * std::pow(distance_m, params.path_loss_k);
}

double step_energy(AgentState& agent, const EnergyComponents& c) {
  if (!agent.alive) return 0.0;
  const double want = c.sense * agent.duty_cycle + c.compute + c.tx;
  const double drawn = std::min(want, agent.residual_energy);
  agent.residual_energy -= drawn;
  agent.consumed_energy += drawn;
  if (agent.residual_energy <= 0.0) {
    agent.residual_energy = 0.0;
    agent.alive = false;
  }
  return drawn;
}

void draw_waypoint(AgentState& agent, const MobilityParams& params, RngStream& rng) {
  agent.waypoint = Vec3{rng.uniform(0.0, params.width_m), rng.uniform(0.0, params.height_m),
                        rng.uniform(params.auv_depth_min_m, params.auv_depth_max_m)};
  agent.speed = rng.uniform(params.speed_min_mps, params.speed_max_mps);
}

void move_agents(std::vector<AgentState>& agents, double dt, const MobilityParams& params,
                 RngStream& rng) {
  if (!(dt > 0)) throw std::invalid_argument("mobility step must be positive");
  for (auto& a : agents) {
    if (a.kind != AgentKind::MobileAUV || !a.alive) continue;
    const double remaining = distance(a.position, a.waypoint);
    const double step = a.speed * dt;
    if (step >= remaining) {
      a.position = a.waypoint;
      a.velocity = Vec3{};
      draw_waypoint(a, params, rng);
      continue;
    }
    const double f = step / remaining;
    const Vec3 delta{(a.waypoint.x - a.position.x) * f, (a.waypoint.y - a.position.y) * f,
                     (a.waypoint.z - a.position.z) * f};
    a.position = Vec3{a.position.x + delta.x, a.position.y + delta.y, a.position.z + delta.z};
    a.velocity = Vec3{delta.x / dt, delta.y / dt, delta.z / dt};
  }
}

void refresh_neighbors(std::vector<AgentState>& agents, double comm_range_m, SimTime now,
                       const std::vector<bool>& hidden) {
  const std::size_t n = agents.size();
  for (auto& a : agents) a.neighbor_table.clear();
  for (std::size_t i = 0; i < n; ++i) {
    if (!agents[i].alive || (i < hidden.size() && hidden[i])) continue;
    for (std::size_t j = i + 1; j < n; ++j) {
      if (!agents[j].alive || (j < hidden.size() && hidden[j])) continue;
      if (distance(agents[i].position, agents[j].position) <= comm_range_m) {
        agents[i].neighbor_table.push_back({static_cast<AgentId>(j), now});
        agents[j].neighbor_table.push_back({static_cast<AgentId>(i), now});
      }
    }
  }
}

namespace {

bool usable(const std::vector<AgentState>& agents, AgentId id, const std::vector<bool>& excluded) {
  return agents[id].alive && !(id < excluded.size() && excluded[id]);
}

}  // namespace

std::optional<AgentId> route_next_hop(const std::vector<AgentState>& agents, AgentId from,
                                      AgentId final_dst, const std::vector<bool>& excluded) {
  const Vec3& target = agents[final_dst].position;
  const double own = distance(agents[from].position, target);
  std::optional<AgentId> best;
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& n : agents[from].neighbor_table) {
    if (!usable(agents, n.id, excluded)) continue;
    const double d = distance(agents[n.id].position, target);
    if (!(d < own)) continue;
    if (d < best_d || (d == best_d && best && n.id < *best)) {
      best_d = d;
      best = n.id;
    }
  }
  return best;
}

std::optional<AgentId> route_farthest_hop(const std::vector<AgentState>& agents, AgentId from,
                                          AgentId final_dst, const std::vector<bool>& excluded) {
  const Vec3& target = agents[final_dst].position;
  std::optional<AgentId> best;
  double best_d = -1.0;
  for (const auto& n : agents[from].neighbor_table) {
    if (!usable(agents, n.id, excluded)) continue;
    const double d = distance(agents[n.id].position, target);
    if (d > best_d || (d == best_d && best && n.id < *best)) {
      best_d = d;
      best = n.id;
    }
  }
  return best;
}

}  // namespace uwt
