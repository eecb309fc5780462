#include "uwt/governance/enforcement.hpp"

namespace uwt {

bool cross_validate(double primary, double secondary, const TrustParams& params) {
  return (primary < params.tau_min) == (secondary < params.tau_min);
}

namespace {

void enter(EnforcementState& s, Tier t, SimTime now) {
  s.tier = t;
  s.since = now;
}

void lift(EnforcementState& s, EnforcementActions& a) {
  if (s.excluded) a.lift_exclusion = true;
  s.excluded = false;
  s.throttle_factor = 1.0;
  s.constrained_below = 0;
  s.isolation_requested = false;
}

}  // namespace

EnforcementState enforce_transition(EnforcementState s, const TrustRecord& r,
                                    const TrustParams& p, const EnforcementParams& ep,
                                    const EnforcementInput& in, SimTime now,
                                    EnforcementActions& a) {
  const bool below = r.tau < p.tau_min;
  const bool recovered = r.persistence_above >= p.recovery_r;

  if (s.tier == Tier::Recovered) {
    if (!below) {
      enter(s, Tier::Normal, now);
      return s;
    }
    enter(s, Tier::Interrogation, now);
  } else if (s.tier == Tier::Normal) {
    if (!below) return s;
    enter(s, Tier::Interrogation, now);
  }

  switch (s.tier) {
    case Tier::Interrogation: {
      if (recovered) {
        enter(s, Tier::Recovered, now);
        break;
      }
      bool escalate = r.tau < p.tau_hard;
      if (!escalate && r.persistence_below >= p.persistence_p) {
        if (!ep.cross_validation) {
          escalate = true;
        } else if (!in.secondary_raw) {
          a.escalation_deferred = true;
        } else {
          escalate = r.raw_score < p.tau_min && *in.secondary_raw < p.tau_min;
        }
      }
      if (escalate) {
        enter(s, Tier::LocallyConstrained, now);
        s.excluded = true;
        s.throttle_factor = ep.throttle_factor;
        s.constrained_below = 0;
        a.exclude = true;
        a.queue.push_back(SecurityEvent::Flagged);
        a.queue.push_back(SecurityEvent::Excluded);
      }
      break;
    }
    case Tier::LocallyConstrained: {
      if (recovered) {
        lift(s, a);
        enter(s, Tier::Recovered, now);
        a.queue.push_back(SecurityEvent::Reinstated);
        break;
      }
      if (s.isolation_requested && in.isolation_committed) {
        enter(s, Tier::Isolated, now);
        s.isolated = true;
        s.reinstatement_requested = false;
        a.isolate = true;
        break;
      }
      if (below) s.constrained_below += 1;
      if (s.constrained_below >= p.persistence_p && !s.isolation_requested) {
        s.isolation_requested = true;
        a.queue.push_back(SecurityEvent::Isolated);
      }
      break;
    }
    case Tier::Isolated: {
      if (s.reinstatement_requested && in.reinstatement_committed) {
        lift(s, a);
        s.isolated = false;
        s.reinstatement_requested = false;
        a.reinstate = true;
        enter(s, Tier::Recovered, now);
        break;
      }
      if (recovered && ep.auto_recovery && !s.reinstatement_requested) {
        s.reinstatement_requested = true;
        a.queue.push_back(SecurityEvent::Reinstated);
      }
      break;
    }
    case Tier::Normal:
    case Tier::Recovered:
      break;
  }
  return s;
}

}  // namespace uwt
