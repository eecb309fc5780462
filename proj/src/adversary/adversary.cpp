#include "uwt/adversary/adversary.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace uwt {

std::string_view to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::SelectiveDrop: return "SelectiveDrop";
    case AttackKind::RouteManipulation: return "RouteManipulation";
    case AttackKind::TransmissionBurst: return "TransmissionBurst";
    case AttackKind::Replay: return "Replay";
    case AttackKind::CoordinatedInsider: return "CoordinatedInsider";
  }
  return "unknown";
}

std::optional<AttackKind> parse_attack_kind(std::string_view s) {
  for (std::size_t i = 0; i < kAttackKindCount; ++i) {
    auto k = static_cast<AttackKind>(i);
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

void AdversaryParams::validate() const {
  if (!(fraction >= 0.0 && fraction < 1.0))
    throw std::invalid_argument("adversary fraction must lie in [0, 1)");
  double total = 0.0;
  for (double w : mix) {
    if (!(w >= 0.0)) throw std::invalid_argument("attack mix weights must be non-negative");
    total += w;
  }
  if (fraction > 0.0 && !(total > 0.0)) throw std::invalid_argument("attack mix is empty");
  if (!(activation_min_frac >= 0.0 && activation_min_frac <= activation_max_frac &&
        activation_max_frac <= 1.0))
    throw std::invalid_argument("activation window must satisfy 0 <= min <= max <= 1");
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(drop_intensity) || !prob(route_intensity) || !prob(insider_drop_intensity))
    throw std::invalid_argument("drop/detour intensities are probabilities");
  if (!(burst_intensity >= 1.0)) throw std::invalid_argument("burst multiplier must be >= 1");
  if (!(replay_intensity >= 0.0)) throw std::invalid_argument("replay rate must be >= 0");
}

std::size_t compromised_count(double fraction, std::size_t n_agents) {
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n_agents) + 0.5));
}

namespace {

std::vector<std::size_t> largest_remainder(const std::array<double, kAttackKindCount>& w,
                                           std::size_t total) {
  const double sum = std::accumulate(w.begin(), w.end(), 0.0);
  std::vector<std::size_t> counts(kAttackKindCount, 0);
  std::vector<std::pair<double, std::size_t>> rema;
  std::size_t used = 0;
  for (std::size_t i = 0; i < kAttackKindCount; ++i) {
    const double exact = w[i] / sum * static_cast<double>(total);
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    used += counts[i];
    rema.emplace_back(exact - std::floor(exact), i);
  }
  // Larger remainder first, lower kind index on ties.
  std::stable_sort(rema.begin(), rema.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; used < total; ++k, ++used) counts[rema[k % rema.size()].second] += 1;
  return counts;
}

}  // namespace

CompromiseAssignment assign_compromised(std::vector<AgentState>& agents,
                                        const AdversaryParams& params, SimTime mission,
                                        RngStream& rng) {
  params.validate();
  CompromiseAssignment out;
  out.fraction = params.fraction;
  const std::size_t want = compromised_count(params.fraction, agents.size());
  if (want == 0) return out;

  std::vector<AgentId> eligible;
  for (const auto& a : agents) {
    const bool privileged = a.kind == AgentKind::SurfaceGateway || a.interrogator_host;
    if (!privileged || params.allow_privileged) eligible.push_back(a.id);
  }
  if (want >= eligible.size())
    throw std::invalid_argument("adversary fraction would compromise every eligible agent");

  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < want; ++i) {
    const std::size_t j = i + rng.below(eligible.size() - i);
    std::swap(eligible[i], eligible[j]);
  }
  std::vector<AgentId> chosen(eligible.begin(), eligible.begin() + static_cast<long>(want));

  auto counts = largest_remainder(params.mix, want);
  // A coordination group needs two members; a lone insider becomes a dropper.
  auto& insiders = counts[static_cast<std::size_t>(AttackKind::CoordinatedInsider)];
  if (insiders == 1) {
    insiders = 0;
    counts[static_cast<std::size_t>(AttackKind::SelectiveDrop)] += 1;
  }
  std::vector<AttackKind> kinds;
  for (std::size_t k = 0; k < kAttackKindCount; ++k)
    for (std::size_t c = 0; c < counts[k]; ++c) kinds.push_back(static_cast<AttackKind>(k));
  for (std::size_t i = kinds.size(); i > 1; --i) std::swap(kinds[i - 1], kinds[rng.below(i)]);

  if (params.colocate_insiders) {
    std::optional<AgentId> anchor;
    for (std::size_t i = 0; i < chosen.size(); ++i) {
      if (kinds[i] != AttackKind::CoordinatedInsider) continue;
      if (!anchor) {
        anchor = chosen[i];
        continue;
      }
      const Vec3& at = agents[*anchor].position;
      std::optional<AgentId> best;
      double best_d = 0.0;
      for (AgentId cand : eligible) {
        if (std::find(chosen.begin(), chosen.end(), cand) != chosen.end()) continue;
        const double d = distance(agents[cand].position, at);
        if (!best || d < best_d || (d == best_d && cand < *best)) {
          best = cand;
          best_d = d;
        }
      }
      if (best) chosen[i] = *best;
    }
  }

  for (std::size_t i = 0; i < chosen.size(); ++i) {
    AttackProfile p;
    p.kind = kinds[i];
    p.activation = SimTime{rng.uniform(params.activation_min_frac, params.activation_max_frac) *
                           mission.seconds};
    switch (p.kind) {
      case AttackKind::SelectiveDrop: p.intensity = params.drop_intensity; break;
      case AttackKind::RouteManipulation: p.intensity = params.route_intensity; break;
      case AttackKind::TransmissionBurst: p.intensity = params.burst_intensity; break;
      case AttackKind::Replay: p.intensity = params.replay_intensity; break;
      case AttackKind::CoordinatedInsider: p.intensity = 0.0; break;
    }
    out.profiles[chosen[i]] = p;
    agents[chosen[i]].compromised = true;
  }
  out.assigned = chosen;
  std::sort(out.assigned.begin(), out.assigned.end());
  return out;
}

const AttackProfile* Adversary::profile(AgentId id) const {
  auto it = assignment_.profiles.find(id);
  return it == assignment_.profiles.end() ? nullptr : &it->second;
}

bool Adversary::active(AgentId id, SimTime now) const {
  const AttackProfile* p = profile(id);
  return p && now >= p->activation;
}

bool Adversary::is_member(AgentId id, int group) const {
  const AttackProfile* p = profile(id);
  return p && p->kind == AttackKind::CoordinatedInsider && static_cast<int>(p->intensity) == group;
}

bool Adversary::drop_relay(AgentId holder, const Transit& t, SimTime now) {
  if (t.replay || !active(holder, now)) return false;
  const AttackProfile& p = *profile(holder);
  if (p.kind == AttackKind::SelectiveDrop) return rng_.bernoulli(p.intensity);
  if (p.kind == AttackKind::CoordinatedInsider) {
    const int group = static_cast<int>(p.intensity);
    int members = 0;
    for (AgentId a : t.path)
      if (is_member(a, group)) ++members;
    if (members >= 2) return rng_.bernoulli(params_.insider_drop_intensity);
  }
  return false;
}

std::optional<AgentId> Adversary::choose_next_hop(const std::vector<AgentState>& agents,
                                                  AgentId holder, const Transit& t,
                                                  std::optional<AgentId> greedy,
                                                  const std::vector<bool>& excluded,
                                                  SimTime now) {
  if (!active(holder, now)) return greedy;
  const AttackProfile& p = *profile(holder);
  if (p.kind == AttackKind::RouteManipulation) {
    if (rng_.bernoulli(p.intensity)) {
      auto far = route_farthest_hop(agents, holder, t.final_dst, excluded);
      if (far) return far;
    }
    return greedy;
  }
  if (p.kind == AttackKind::CoordinatedInsider && greedy && *greedy != t.final_dst) {
    // Steer toward a fellow member that still makes progress.
    const int group = static_cast<int>(p.intensity);
    const Vec3& target = agents[t.final_dst].position;
    const double own = distance(agents[holder].position, target);
    std::optional<AgentId> best;
    double best_d = own;
    for (const auto& n : agents[holder].neighbor_table) {
      if (!is_member(n.id, group) || !agents[n.id].alive) continue;
      if (n.id < excluded.size() && excluded[n.id]) continue;
      const double d = distance(agents[n.id].position, target);
      if (d < best_d) {
        best_d = d;
        best = n.id;
      }
    }
    if (best) return best;
  }
  return greedy;
}

double Adversary::traffic_multiplier(AgentId id, SimTime now) const {
  if (!active(id, now)) return 1.0;
  const AttackProfile& p = *profile(id);
  return p.kind == AttackKind::TransmissionBurst ? p.intensity : 1.0;
}

double Adversary::replay_rate(AgentId id, SimTime now) const {
  if (!active(id, now)) return 0.0;
  const AttackProfile& p = *profile(id);
  return p.kind == AttackKind::Replay ? p.intensity : 0.0;
}

}  // namespace uwt
