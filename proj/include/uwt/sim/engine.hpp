#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <queue>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "uwt/sim/rng.hpp"
#include "uwt/sim/sim_time.hpp"

namespace uwt {

enum class EventKind : std::uint8_t {
  PacketArrival,
  WindowClose,
  TrustTick,
  ConsensusTick,
  ConsensusMessage,
  MobilityTick,
  AttackToggle,
  DutyCycleTick,
  TrafficTick,
  RetryTimer,
  Timer,
};
inline constexpr std::size_t kEventKindCount = 11;

std::string_view to_string(EventKind kind);

struct EventHandle {
  std::uint64_t seq{0};
};

/// Thrown when a handler tries to schedule before the current clock.
class SchedulingError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct RunConfig {
  std::uint64_t seed{1};
  SimTime mission_duration{7200.0};
};

struct RunSummary {
  std::uint64_t processed{0};
  std::uint64_t cancelled{0};
  std::array<std::uint64_t, kEventKindCount> per_kind{};
  SimTime end;
};

struct TraceEntry {
  SimTime fire_at;
  std::uint64_t seq;
  EventKind kind;
};

/// Single-threaded discrete-event engine. Events are totally ordered by
/// (fire_at, seq); seq is the insertion counter so equal timestamps run FIFO.
class Engine {
 public:
  using Handler = std::function<void()>;

  explicit Engine(RunConfig config = {}) : config_(config) {}

  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  EventHandle schedule(SimTime fire_at, EventKind kind, Handler handler);
  EventHandle schedule_in(double delay, EventKind kind, Handler handler) {
    return schedule(now_ + delay, kind, std::move(handler));
  }

  /// Returns false when the event already fired or was cancelled.
  bool cancel(EventHandle handle);

  RunSummary run_until(SimTime end);

  SimTime now() const { return now_; }
  const RunConfig& config() const { return config_; }
  std::size_t pending() const { return queue_.size() - cancelled_.size(); }

  RngStream rng_stream(std::string_view label) const { return RngStream(config_.seed, label); }

  void enable_trace(bool on) { tracing_ = on; }
  const std::vector<TraceEntry>& trace() const { return trace_; }
  std::string serialize_trace() const;

 private:
  struct Entry {
    SimTime fire_at;
    std::uint64_t seq;
    EventKind kind;
    Handler handler;
  };
  struct Later {
    bool operator()(const Entry& a, const Entry& b) const {
      if (a.fire_at != b.fire_at) return a.fire_at > b.fire_at;
      return a.seq > b.seq;
    }
  };

  RunConfig config_;
  SimTime now_{};
  std::uint64_t next_seq_{0};
  std::priority_queue<Entry, std::vector<Entry>, Later> queue_;
  std::unordered_set<std::uint64_t> live_;
  std::unordered_set<std::uint64_t> cancelled_;
  RunSummary totals_{};
  bool tracing_{false};
  std::vector<TraceEntry> trace_;
};

}  // namespace uwt
