#pragma once

#include <cstdint>
#include <string_view>

#include "uwt/world/types.hpp"

namespace uwt {

enum class Tier : std::uint8_t { Normal, Interrogation, LocallyConstrained, Isolated, Recovered };
std::string_view to_string(Tier tier);

struct TrustParams {
  double alpha{0.8};
  double tau_min{0.65};
  double tau_hard{0.4};
  int persistence_p{3};
  int recovery_r{5};
  double initial_tau{0.8};

  void validate() const;
};

struct TrustRecord {
  AgentId agent{0};
  double tau{0.8};
  double raw_score{0.8};
  int persistence_below{0};
  int persistence_above{0};
  Tier tier{Tier::Normal};
};

/// tau <- alpha*tau + (1-alpha)*raw, then persistence counters.
TrustRecord smooth_update(TrustRecord record, double raw, const TrustParams& params);

enum class Authorization : std::uint8_t { Authorized, Interrogate };
Authorization authorize_forwarding(const TrustRecord& record, const TrustParams& params);

struct BetaReputation {
  AgentId agent{0};
  std::uint64_t s{0};
  std::uint64_t f{0};
};

enum class Outcome : std::uint8_t { Positive, Negative };
BetaReputation beta_update(BetaReputation rep, Outcome outcome);
double beta_trust(const BetaReputation& rep);

constexpr double static_trust(AgentId) { return 1.0; }

}  // namespace uwt
