#include "uwt/world/network.hpp"

#include <limits>
#include <stdexcept>

namespace uwt {

namespace {
constexpr std::size_t kSentCacheSize = 32;
}

Network::Network(Engine& engine, std::vector<AgentState> agents, ChannelParams channel,
                 EnergyParams energy, NetworkHooks& hooks)
    : engine_(engine),
      agents_(std::move(agents)),
      channel_(channel),
      energy_(energy),
      hooks_(hooks),
      channel_rng_(engine.rng_stream("channel")),
      seen_(agents_.size()),
      buffers_(agents_.size()),
      sent_cache_(agents_.size()),
      excluded_(agents_.size(), false),
      isolated_(agents_.size(), false) {
  refresh_topology();
}

void Network::refresh_topology() {
  refresh_neighbors(agents_, channel_.comm_range_m, engine_.now(), isolated_);
}

void Network::set_isolated(AgentId id, bool value) {
  isolated_[id] = value;
  refresh_topology();
}

double Network::outcome_window(std::uint32_t size_bits) const {
  return 3.0 * (transmission_delay(size_bits, channel_) +
                propagation_delay(channel_.comm_range_m, channel_));
}

AgentId Network::nearest_gateway(AgentId from) const {
  AgentId best = from;
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& a : agents_) {
    if (a.kind != AgentKind::SurfaceGateway) continue;
    const double d = distance(agents_[from].position, a.position);
    if (d < best_d) {
      best_d = d;
      best = a.id;
    }
  }
  return best;
}

std::size_t Network::buffered() const {
  std::size_t n = 0;
  for (const auto& b : buffers_) n += b.size();
  return n;
}

MessageId Network::originate(AgentId origin, AgentId final_dst, PacketKind kind,
                             std::uint32_t size_bits) {
  if (size_bits == 0) throw std::invalid_argument("packets must carry at least one bit");
  Transit t;
  t.message_id = next_message_++;
  t.origin = origin;
  t.final_dst = final_dst;
  t.kind = kind;
  t.size_bits = size_bits;
  t.created = engine_.now();
  t.path.push_back(origin);
  t.holder = origin;
  transits_.push_back(std::move(t));
  const std::size_t ti = transits_.size() - 1;
  seen_[origin].insert(transits_[ti].message_id);
  if (kind == PacketKind::SensorData) ++counters_.originated;
  hold(ti);
  return transits_[ti].message_id;
}

bool Network::replay(AgentId agent, RngStream& rng) {
  auto& cache = sent_cache_[agent];
  if (cache.empty() || !agents_[agent].alive || isolated_[agent]) return false;
  const Transit& src = transits_[cache[rng.below(cache.size())]];
  Transit t;
  t.message_id = src.message_id;
  t.origin = src.origin;
  t.final_dst = src.final_dst;
  t.kind = src.kind;
  t.size_bits = src.size_bits;
  t.created = engine_.now();
  t.replay = true;
  t.path.push_back(agent);
  t.holder = agent;
  transits_.push_back(std::move(t));
  hold(transits_.size() - 1);
  return true;
}

void Network::hold(std::size_t ti) {
  Transit& t = transits_[ti];
  const AgentId h = t.holder;
  if (!agents_[h].alive) {
    local_drop(ti, DropReason::Dead);
    return;
  }
  if (t.holder != t.origin && hooks_.drop_relay(h, transits_[ti])) {
    local_drop(ti, DropReason::MaliciousDrop);
    return;
  }
  auto greedy = route_next_hop(agents_, h, transits_[ti].final_dst, excluded_);
  auto next = hooks_.choose_next_hop(h, transits_[ti], greedy);
  charge(h, EnergyComponents{0.0, energy_.e_compute, 0.0});
  if (!next) {
    buffers_[h].push_back(Buffered{ti, engine_.now()});
    return;
  }
  transmit(ti, h, *next);
}

PacketRecord& Network::new_record(std::size_t ti, AgentId src, AgentId dst,
                                  std::optional<PacketId> retransmission_of) {
  const Transit& t = transits_[ti];
  PacketRecord r;
  r.packet_id = log_.size();
  r.message_id = t.message_id;
  r.src = src;
  r.dst = dst;
  r.origin = t.origin;
  r.final_dst = t.final_dst;
  r.size_bits = t.size_bits;
  r.kind = t.kind;
  r.sent_at = engine_.now();
  r.retransmission_of = retransmission_of;
  r.replay = t.replay;
  log_.push_back(r);
  return log_.back();
}

void Network::remember_sent(AgentId agent, std::size_t ti) {
  if (transits_[ti].replay) return;
  auto& cache = sent_cache_[agent];
  for (std::size_t c : cache)
    if (transits_[c].message_id == transits_[ti].message_id) return;
  cache.push_back(ti);
  if (cache.size() > kSentCacheSize) cache.pop_front();
}

PacketId Network::transmit(std::size_t ti, AgentId src, AgentId dst,
                           std::optional<PacketId> retransmission_of) {
  const double d = distance(agents_[src].position, agents_[dst].position);
  if (d > channel_.comm_range_m || !agents_[src].alive) {
    PacketRecord& r = new_record(ti, src, src, retransmission_of);
    r.dropped_reason = agents_[src].alive ? DropReason::OutOfRange : DropReason::Dead;
    const PacketId pid = r.packet_id;
    transits_[ti].finished = true;
    settle_outcome(ti, false);
    return pid;
  }
  PacketRecord& rec = new_record(ti, src, dst, retransmission_of);
  const PacketId pid = rec.packet_id;
  const std::uint32_t bits = rec.size_bits;
  charge(src, EnergyComponents{0.0, 0.0, tx_energy(bits, d, energy_)});
  seen_[src].insert(transits_[ti].message_id);
  remember_sent(src, ti);
  hooks_.on_transmit(log_[pid]);

  if (channel_rng_.bernoulli(loss_probability(d, channel_))) {
    log_[pid].dropped_reason = DropReason::ChannelLoss;
    int attempt = 0;
    for (auto prev = retransmission_of; prev; prev = log_[*prev].retransmission_of) ++attempt;
    if (attempt < channel_.max_retries) {
      engine_.schedule_in(channel_.retry_backoff_s, EventKind::RetryTimer, [this, ti, src, dst, pid] {
        if (transits_[ti].finished) return;
        transmit(ti, src, dst, pid);
      });
    } else {
      transits_[ti].finished = true;
      settle_outcome(ti, false);
    }
    return pid;
  }
  const double delay = transmission_delay(bits, channel_) + propagation_delay(d, channel_);
  engine_.schedule_in(delay, EventKind::PacketArrival, [this, pid, ti] { arrive(pid, ti); });
  return pid;
}

void Network::arrive(PacketId pid, std::size_t ti) {
  const AgentId src = log_[pid].src;
  const AgentId rx = log_[pid].dst;
  if (!agents_[rx].alive || isolated_[rx] || isolated_[src]) {
    log_[pid].dropped_reason = !agents_[rx].alive ? DropReason::Dead : DropReason::Isolated;
    transits_[ti].finished = true;
    settle_outcome(ti, false);
    return;
  }
  log_[pid].delivered_at = engine_.now();
  hooks_.on_arrival(log_[pid]);

  Transit& t = transits_[ti];
  if (t.entrusted_at) {
    const bool on_time = engine_.now() - *t.entrusted_at <= outcome_window(t.size_bits);
    settle_outcome(ti, on_time);
  }
  const MessageId mid = t.message_id;
  if (!seen_[rx].insert(mid).second) {
    ++counters_.duplicates_discarded;
    transits_[ti].finished = true;
    return;
  }
  if (rx == t.final_dst) {
    if (!t.replay && t.kind == PacketKind::SensorData) ++counters_.delivered;
    t.finished = true;
    return;
  }
  t.hops += 1;
  if (t.hops >= channel_.max_hops) {
    t.holder = rx;
    local_drop(ti, DropReason::HopLimit);
    return;
  }
  t.holder = rx;
  t.path.push_back(rx);
  t.entrusted_at = engine_.now();
  hold(ti);
}

void Network::settle_outcome(std::size_t ti, bool positive) {
  Transit& t = transits_[ti];
  if (!t.entrusted_at) return;
  const AgentId relay = t.holder;
  t.entrusted_at.reset();
  hooks_.on_relay_outcome(relay, positive);
}

void Network::local_drop(std::size_t ti, DropReason reason) {
  const AgentId h = transits_[ti].holder;
  PacketRecord& r = new_record(ti, h, h, std::nullopt);
  r.dropped_reason = reason;
  transits_[ti].finished = true;
  settle_outcome(ti, false);
}

void Network::mobility_step(double dt, const MobilityParams& params, RngStream& rng) {
  move_agents(agents_, dt, params, rng);
  refresh_topology();
  const SimTime now = engine_.now();
  for (AgentId a = 0; a < agents_.size(); ++a) {
    auto pending = std::move(buffers_[a]);
    buffers_[a].clear();
    for (const auto& b : pending) {
      if (transits_[b.transit].finished) continue;
      if (now - b.since > channel_.buffer_expiry_s) {
        local_drop(b.transit, DropReason::Expired);
        continue;
      }
      if (!agents_[a].alive || isolated_[a]) {
        local_drop(b.transit, agents_[a].alive ? DropReason::Isolated : DropReason::Dead);
        continue;
      }
      const auto& t = transits_[b.transit];
      auto greedy = route_next_hop(agents_, a, t.final_dst, excluded_);
      auto next = hooks_.choose_next_hop(a, t, greedy);
      if (!next) {
        buffers_[a].push_back(b);
        continue;
      }
      transmit(b.transit, a, *next);
    }
  }
}

}  // namespace uwt
