#pragma once

// Recomputes every feature window from scratch out of a finished packet log.
// Deliberately naive: each (agent, window) rescans the whole log, and all
// history (known ids, last hops, previous peers) is rebuilt from the records.

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "uwt/features/features.hpp"

namespace oracle {

using namespace uwt;

struct Ev {
  double t;
  int type;  // 0 arrival, 1 transmit; arrivals sort first at equal times
  const PacketRecord* r;
};

inline std::vector<Ev> agent_events(const std::vector<PacketRecord>& log, AgentId a,
                                    const Vantage& vantage) {
  std::vector<Ev> ev;
  for (const auto& r : log) {
    if (!vantage.hears(r.packet_id)) continue;
    if (r.transmitted() && r.src == a) ev.push_back({r.sent_at.seconds, 1, &r});
    if (r.delivered_at && r.dst == a && r.dst != r.src) ev.push_back({r.delivered_at->seconds, 0, &r});
  }
  std::sort(ev.begin(), ev.end(), [](const Ev& x, const Ev& y) {
    if (x.t != y.t) return x.t < y.t;
    if (x.type != y.type) return x.type < y.type;
    return x.r->packet_id < y.r->packet_id;
  });
  return ev;
}

inline long window_of(double t, double len) { return static_cast<long>(std::floor(t / len)); }

inline std::set<AgentId> peers_in(const std::vector<Ev>& ev, long k, double len) {
  std::set<AgentId> p;
  for (const auto& e : ev)
    if (window_of(e.t, len) == k) p.insert(e.type == 1 ? e.r->dst : e.r->src);
  return p;
}

inline FeatureVector window_vector(const std::vector<Ev>& ev, AgentId a, long k,
                                   const FeatureNorms& norms, double len) {
  double tx = 0, retx = 0, decisions = 0, changes = 0, dups = 0, relay_in = 0, relay_out = 0;
  std::vector<double> times;
  for (std::size_t i = 0; i < ev.size(); ++i) {
    const Ev& e = ev[i];
    if (window_of(e.t, len) != k) continue;
    const PacketRecord& r = *e.r;
    if (e.type == 1) {
      tx += 1;
      times.push_back(e.t);
      if (r.retransmission_of) {
        retx += 1;
        continue;
      }
      decisions += 1;
      // previous routing decision toward the same destination
      for (std::size_t j = i; j-- > 0;) {
        const Ev& p = ev[j];
        if (p.type == 1 && !p.r->retransmission_of && p.r->final_dst == r.final_dst) {
          if (p.r->dst != r.dst) changes += 1;
          break;
        }
      }
      bool sent_before = false;
      for (std::size_t j = 0; j < i; ++j)
        if (ev[j].type == 1 && ev[j].r->message_id == r.message_id) sent_before = true;
      if (sent_before)
        dups += 1;
      else if (r.origin != a)
        relay_out += 1;
    } else if (r.final_dst != a) {
      bool known = false;
      for (std::size_t j = 0; j < i; ++j)
        if (ev[j].r->message_id == r.message_id) known = true;
      if (!known) relay_in += 1;
    }
  }
  FeatureVector v;
  v[kPktCount] = tx / norms.norm_volume;
  if (times.size() >= 2) {
    std::sort(times.begin(), times.end());
    std::vector<double> gaps;
    for (std::size_t i = 1; i < times.size(); ++i) gaps.push_back(times[i] - times[i - 1]);
    double sum = 0;
    for (double g : gaps) sum += g;
    const double mean = sum / static_cast<double>(gaps.size());
    double ss = 0;
    for (double g : gaps) ss += (g - mean) * (g - mean);
    v[kGapMean] = mean;
    v[kGapVar] = ss / static_cast<double>(gaps.size());
  }
  const double denom = std::max(1.0, tx);
  v[kRetxRate] = retx / denom;
  v[kRoutingStability] = 1.0 - changes / std::max(1.0, decisions);
  const auto now = peers_in(ev, k, len);
  const auto before = k > 0 ? peers_in(ev, k - 1, len) : std::set<AgentId>{};
  std::vector<AgentId> diff;
  std::set_symmetric_difference(now.begin(), now.end(), before.begin(), before.end(),
                                std::back_inserter(diff));
  v[kNeighborChurn] = static_cast<double>(diff.size()) / norms.norm_churn;
  const double missing = relay_in > relay_out ? relay_in - relay_out : 0.0;
  v[kProtocolDeviation] = std::min(1.0, (dups + missing) / denom);
  return v;
}

/// [window][agent]
inline std::vector<std::vector<FeatureVector>> features(const std::vector<PacketRecord>& log,
                                                        std::size_t n_agents,
                                                        const FeatureNorms& norms, double len,
                                                        long windows, const Vantage& vantage = {}) {
  std::vector<std::vector<FeatureVector>> out(static_cast<std::size_t>(windows),
                                              std::vector<FeatureVector>(n_agents));
  for (std::size_t a = 0; a < n_agents; ++a) {
    const auto ev = agent_events(log, static_cast<AgentId>(a), vantage);
    for (long k = 0; k < windows; ++k)
      out[static_cast<std::size_t>(k)][a] = window_vector(ev, static_cast<AgentId>(a), k, norms, len);
  }
  return out;
}

}  // namespace oracle
