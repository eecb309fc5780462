#include "uwt/sim/engine.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

namespace uwt {

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::PacketArrival: return "packet-arrival";
    case EventKind::WindowClose: return "window-close";
    case EventKind::TrustTick: return "trust-tick";
    case EventKind::ConsensusTick: return "consensus-tick";
    case EventKind::ConsensusMessage: return "consensus-message";
    case EventKind::MobilityTick: return "mobility-tick";
    case EventKind::AttackToggle: return "attack-toggle";
    case EventKind::DutyCycleTick: return "duty-cycle-tick";
    case EventKind::TrafficTick: return "traffic-tick";
    case EventKind::RetryTimer: return "retry-timer";
    case EventKind::Timer: return "timer";
  }
  return "unknown";
}

double RngStream::normal() {
  double u1 = uniform();
  double u2 = uniform();
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

EventHandle Engine::schedule(SimTime fire_at, EventKind kind, Handler handler) {
  if (!(fire_at >= now_) || !std::isfinite(fire_at.seconds)) {
    throw SchedulingError("event scheduled at t=" + std::to_string(fire_at.seconds) +
                          " before current clock t=" + std::to_string(now_.seconds));
  }
  const std::uint64_t seq = next_seq_++;
  queue_.push(Entry{fire_at, seq, kind, std::move(handler)});
  live_.insert(seq);
  return EventHandle{seq};
}

bool Engine::cancel(EventHandle handle) {
  if (live_.erase(handle.seq) == 0) return false;
  cancelled_.insert(handle.seq);
  return true;
}

RunSummary Engine::run_until(SimTime end) {
  RunSummary summary;
  while (!queue_.empty() && queue_.top().fire_at <= end) {
    // Moving out of the priority queue needs a const_cast; the entry is popped
    // immediately afterwards.
    Entry entry = std::move(const_cast<Entry&>(queue_.top()));
    queue_.pop();
    if (cancelled_.erase(entry.seq) > 0) {
      ++summary.cancelled;
      continue;
    }
    live_.erase(entry.seq);
    now_ = entry.fire_at;
    if (tracing_) trace_.push_back(TraceEntry{entry.fire_at, entry.seq, entry.kind});
    ++summary.processed;
    ++summary.per_kind[static_cast<std::size_t>(entry.kind)];
    entry.handler();
  }
  if (end > now_) now_ = end;
  summary.end = now_;

  totals_.processed += summary.processed;
  totals_.cancelled += summary.cancelled;
  for (std::size_t i = 0; i < kEventKindCount; ++i) totals_.per_kind[i] += summary.per_kind[i];
  return summary;
}

std::string Engine::serialize_trace() const {
  std::string out;
  out.reserve(trace_.size() * 32);
  char buf[96];
  for (const auto& e : trace_) {
    std::snprintf(buf, sizeof buf, "%a %llu %u\n", e.fire_at.seconds,
                  static_cast<unsigned long long>(e.seq), static_cast<unsigned>(e.kind));
    out += buf;
  }
  return out;
}

}  // namespace uwt
