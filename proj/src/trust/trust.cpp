#include "uwt/trust/trust.hpp"

#include <algorithm>
#include <stdexcept>

namespace uwt {

std::string_view to_string(Tier tier) {
  switch (tier) {
    case Tier::Normal: return "Normal";
    case Tier::Interrogation: return "Interrogation";
    case Tier::LocallyConstrained: return "LocallyConstrained";
    case Tier::Isolated: return "Isolated";
    case Tier::Recovered: return "Recovered";
  }
  return "unknown";
}

void TrustParams::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in [0, 1]");
  if (!(tau_hard >= 0.0 && tau_hard < tau_min && tau_min <= 1.0))
    throw std::invalid_argument("thresholds must satisfy 0 <= tau_hard < tau_min <= 1");
  if (persistence_p < 1 || recovery_r < 1)
    throw std::invalid_argument("persistence and recovery counts must be >= 1");
  if (!(initial_tau >= 0.0 && initial_tau <= 1.0))
    throw std::invalid_argument("initial tau must lie in [0, 1]");
}

TrustRecord smooth_update(TrustRecord r, double raw, const TrustParams& p) {
  if (!(raw >= 0.0 && raw <= 1.0)) throw std::invalid_argument("raw score outside [0, 1]");
  r.raw_score = raw;
  r.tau = p.alpha * r.tau + (1.0 - p.alpha) * raw;
  if (r.tau < p.tau_min) {
    r.persistence_below += 1;
    r.persistence_above = 0;
  } else {
    r.persistence_above += 1;
    r.persistence_below = 0;
  }
  return r;
}

Authorization authorize_forwarding(const TrustRecord& r, const TrustParams& p) {
  return r.tau >= p.tau_min ? Authorization::Authorized : Authorization::Interrogate;
}

BetaReputation beta_update(BetaReputation rep, Outcome outcome) {
  if (outcome == Outcome::Positive)
    rep.s += 1;
  else
    rep.f += 1;
  return rep;
}

double beta_trust(const BetaReputation& rep) {
  return (static_cast<double>(rep.s) + 1.0) / (static_cast<double>(rep.s + rep.f) + 2.0);
}

}  // namespace uwt
