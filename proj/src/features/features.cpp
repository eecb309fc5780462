#include "uwt/features/features.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "uwt/sim/rng.hpp"

namespace uwt {

std::string_view feature_name(std::size_t i) {
  static constexpr std::array<std::string_view, kFeatureDim> names{
      "pkt_count",          "gap_mean",       "gap_var",
      "retx_rate",          "routing_stability", "neighbor_churn",
      "protocol_deviation"};
  return names.at(i);
}

ObservedPacket ObservedPacket::from(const PacketRecord& r) {
  ObservedPacket p;
  p.packet_id = r.packet_id;
  p.message_id = r.message_id;
  p.src = r.src;
  p.dst = r.dst;
  p.origin = r.origin;
  p.final_dst = r.final_dst;
  p.size_bits = r.size_bits;
  p.kind = r.kind;
  p.sent_at = r.sent_at;
  p.delivered_at = r.delivered_at;
  p.retransmission_of = r.retransmission_of;
  return p;
}

bool Vantage::hears(PacketId id) const {
  return miss_prob <= 0.0 || hash_uniform(key, id) >= miss_prob;
}

FeatureExtractor::FeatureExtractor(std::size_t n_agents, FeatureNorms norms, double interval_len,
                                   Vantage vantage)
    : n_(n_agents), norms_(norms), len_(interval_len), vantage_(vantage), hist_(n_agents),
      open_(n_agents) {
  norms_.validate();
  if (!(interval_len > 0)) throw std::invalid_argument("interval length must be positive");
}

FeatureExtractor::Acc& FeatureExtractor::acc(AgentId a, SimTime t) {
  const long k = interval_index(t, len_);
  if (k < next_close_) throw std::logic_error("event observed after its window closed");
  return open_[a][k];
}

void FeatureExtractor::observe_transmit(const ObservedPacket& p) {
  if (!vantage_.hears(p.packet_id)) return;
  const AgentId x = p.src;
  History& h = hist_[x];
  Acc& w = acc(x, p.sent_at);
  w.tx += 1;
  w.tx_times.push_back(p.sent_at.seconds);
  w.peers.push_back(p.dst);
  if (p.retransmission_of) {
    w.retx += 1;
  } else {
    w.decisions += 1;
    auto it = h.last_hop.find(p.final_dst);
    if (it == h.last_hop.end()) {
      h.last_hop.emplace(p.final_dst, p.dst);
    } else if (it->second != p.dst) {
      w.changes += 1;
      it->second = p.dst;
    }
    if (h.sent.count(p.message_id)) {
      w.dups += 1;
    } else if (p.origin != x) {
      w.relay_out += 1;
    }
  }
  h.sent.insert(p.message_id);
  h.known.insert(p.message_id);
}

void FeatureExtractor::observe_arrival(const ObservedPacket& p) {
  if (!p.delivered_at || !vantage_.hears(p.packet_id)) return;
  const AgentId x = p.dst;
  History& h = hist_[x];
  Acc& w = acc(x, *p.delivered_at);
  w.peers.push_back(p.src);
  if (p.final_dst != x && h.known.insert(p.message_id).second) w.relay_in += 1;
  h.known.insert(p.message_id);
}

std::vector<FeatureVector> FeatureExtractor::close_window(long k) {
  if (k != next_close_) throw std::logic_error("windows must be closed in order");
  std::vector<FeatureVector> out(n_);
  for (std::size_t a = 0; a < n_; ++a) {
    Acc w;
    auto it = open_[a].find(k);
    if (it != open_[a].end()) {
      w = std::move(it->second);
      open_[a].erase(it);
    }
    FeatureVector v;
    v[kPktCount] = w.tx / norms_.norm_volume;
    if (w.tx_times.size() >= 2) {
      std::sort(w.tx_times.begin(), w.tx_times.end());
      const std::size_t m = w.tx_times.size() - 1;
      double sum = 0.0;
      for (std::size_t i = 0; i < m; ++i) sum += w.tx_times[i + 1] - w.tx_times[i];
      const double mean = sum / m;
      double ss = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        const double d = w.tx_times[i + 1] - w.tx_times[i] - mean;
        ss += d * d;
      }
      v[kGapMean] = mean;
      v[kGapVar] = ss / m;
    }
    const double tx = std::max<std::uint32_t>(1, w.tx);
    v[kRetxRate] = w.retx / tx;
    v[kRoutingStability] = 1.0 - static_cast<double>(w.changes) /
                                     std::max<std::uint32_t>(1, w.decisions);
    std::sort(w.peers.begin(), w.peers.end());
    w.peers.erase(std::unique(w.peers.begin(), w.peers.end()), w.peers.end());
    std::vector<AgentId> diff;
    std::set_symmetric_difference(w.peers.begin(), w.peers.end(), hist_[a].prev_peers.begin(),
                                  hist_[a].prev_peers.end(), std::back_inserter(diff));
    v[kNeighborChurn] = diff.size() / norms_.norm_churn;
    hist_[a].prev_peers = std::move(w.peers);
    const double missing = w.relay_in > w.relay_out ? w.relay_in - w.relay_out : 0.0;
    v[kProtocolDeviation] = std::min(1.0, (w.dups + missing) / tx);
    out[a] = v;
  }
  next_close_ = k + 1;
  return out;
}

std::vector<std::vector<std::uint32_t>> transmit_counts(const std::vector<PacketRecord>& log,
                                                        std::size_t n_agents, double interval_len,
                                                        long n_windows) {
  std::vector<std::vector<std::uint32_t>> counts(n_agents,
                                                 std::vector<std::uint32_t>(n_windows, 0));
  for (const auto& r : log) {
    if (!r.transmitted()) continue;
    const long k = interval_index(r.sent_at, interval_len);
    if (k >= 0 && k < n_windows) counts[r.src][k] += 1;
  }
  return counts;
}

SequenceBuffer::SequenceBuffer(std::size_t n_agents, std::size_t k)
    : k_(k), rings_(n_agents), last_(n_agents, -1) {
  if (k == 0) throw std::invalid_argument("sequence length must be positive");
}

void SequenceBuffer::push(AgentId agent, long interval_index, const FeatureVector& v) {
  if (interval_index <= last_[agent])
    throw DuplicatePushError("feature vector for agent " + std::to_string(agent) +
                             " interval " + std::to_string(interval_index) + " already pushed");
  last_[agent] = interval_index;
  auto& ring = rings_[agent];
  ring.push_back(v);
  if (ring.size() > k_) ring.pop_front();
}

FeatureSequence SequenceBuffer::snapshot(AgentId agent) const {
  FeatureSequence s;
  s.agent = agent;
  const auto& ring = rings_[agent];
  s.valid_len = ring.size();
  s.vectors.assign(k_ - ring.size(), FeatureVector{});
  s.vectors.insert(s.vectors.end(), ring.begin(), ring.end());
  return s;
}

}  // namespace uwt
