#pragma once

#include <array>
#include <map>
#include <optional>
#include <string_view>
#include <vector>

#include "uwt/sim/rng.hpp"
#include "uwt/world/network.hpp"
#include "uwt/world/types.hpp"

namespace uwt {

enum class AttackKind : std::uint8_t {
  SelectiveDrop,
  RouteManipulation,
  TransmissionBurst,
  Replay,
  CoordinatedInsider,
};
inline constexpr std::size_t kAttackKindCount = 5;
std::string_view to_string(AttackKind kind);
std::optional<AttackKind> parse_attack_kind(std::string_view s);

/// `intensity` is kind-specific: drop probability, detour probability, burst
/// rate multiplier, replays per monitoring interval, or the coordination
/// group id.
struct AttackProfile {
  AttackKind kind{AttackKind::SelectiveDrop};
  SimTime activation;
  double intensity{0.0};
};

struct AdversaryParams {
  double fraction{0.15};
  // Relative weights of each AttackKind, in enum order.
  std::array<double, kAttackKindCount> mix{0.25, 0.25, 0.125, 0.125, 0.25};
  double activation_min_frac{0.2};
  double activation_max_frac{0.4};
  double drop_intensity{0.6};
  double route_intensity{0.5};
  double burst_intensity{4.0};
  double replay_intensity{0.5};
  // Drop probability applied by coordinated insiders once two members share a route.
  double insider_drop_intensity{0.6};
  // Allow gateways and interrogator hosts to be compromised.
  bool allow_privileged{false};
  // Recruit the other members of an insider group from the eligible agents
  // nearest the first one, so the group can actually share routes.
  bool colocate_insiders{true};

  void validate() const;
};

struct CompromiseAssignment {
  double fraction{0.0};
  std::vector<AgentId> assigned;  // ascending
  std::map<AgentId, AttackProfile> profiles;

  bool contains(AgentId id) const { return profiles.count(id) > 0; }
};

/// round(fraction * N), halves rounded up.
std::size_t compromised_count(double fraction, std::size_t n_agents);

/// Picks round(fraction*N) eligible agents with rng, assigns attack kinds by
/// largest remainder over `params.mix`, and draws activation times in
/// [min_frac, max_frac] * mission. Sets the ground-truth flag on `agents`.
CompromiseAssignment assign_compromised(std::vector<AgentState>& agents,
                                        const AdversaryParams& params, SimTime mission,
                                        RngStream& rng);

/// Runtime attack behavior. Every decision is a no-op for benign agents and
/// for compromised agents before their activation time.
class Adversary {
 public:
  Adversary(CompromiseAssignment assignment, AdversaryParams params, RngStream rng)
      : assignment_(std::move(assignment)), params_(params), rng_(rng) {}

  const CompromiseAssignment& assignment() const { return assignment_; }
  const AttackProfile* profile(AgentId id) const;
  bool active(AgentId id, SimTime now) const;

  /// SelectiveDrop / CoordinatedInsider relay drops.
  bool drop_relay(AgentId holder, const Transit& t, SimTime now);

  /// RouteManipulation detours and insider steering toward fellow members.
  std::optional<AgentId> choose_next_hop(const std::vector<AgentState>& agents, AgentId holder,
                                         const Transit& t, std::optional<AgentId> greedy,
                                         const std::vector<bool>& excluded, SimTime now);

  /// Rate multiplier for originated traffic (TransmissionBurst).
  double traffic_multiplier(AgentId id, SimTime now) const;

  /// Expected replays per monitoring interval (Replay).
  double replay_rate(AgentId id, SimTime now) const;

  RngStream& rng() { return rng_; }

 private:
  bool is_member(AgentId id, int group) const;

  CompromiseAssignment assignment_;
  AdversaryParams params_;
  RngStream rng_;
};

}  // namespace uwt
