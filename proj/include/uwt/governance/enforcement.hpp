#pragma once

#include <optional>
#include <vector>

#include "uwt/governance/ledger.hpp"
#include "uwt/trust/trust.hpp"

namespace uwt {

struct EnforcementParams {
  double throttle_factor{0.25};
  bool auto_recovery{true};
  // Require both interrogators below tau_min before persistence escalation.
  bool cross_validation{true};
};

struct EnforcementState {
  AgentId agent{0};
  Tier tier{Tier::Normal};
  SimTime since;
  double throttle_factor{1.0};
  bool excluded{false};
  bool isolated{false};
  int constrained_below{0};  // intervals below tau_min since entering LocallyConstrained
  bool isolation_requested{false};
  bool reinstatement_requested{false};
};

/// What the caller observed this interval besides the agent's own record.
struct EnforcementInput {
  std::optional<double> secondary_raw;  // second interrogator's score, if one was in range
  bool isolation_committed{false};      // an Isolated event for the agent is on the ledger
  bool reinstatement_committed{false};  // a Reinstated event committed after isolation
};

struct EnforcementActions {
  bool exclude{false};
  bool lift_exclusion{false};
  bool isolate{false};
  bool reinstate{false};
  bool escalation_deferred{false};  // persistence met but no second opinion available
  std::vector<SecurityEvent> queue;
};

/// Agreement iff both scores fall on the same side of tau_min.
bool cross_validate(double primary, double secondary, const TrustParams& params);

/// One step of the tiered response, called once per monitoring interval with
/// the agent's freshly smoothed record.
EnforcementState enforce_transition(EnforcementState state, const TrustRecord& record,
                                    const TrustParams& params, const EnforcementParams& ep,
                                    const EnforcementInput& in, SimTime now,
                                    EnforcementActions& actions);

}  // namespace uwt
