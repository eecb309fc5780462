#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <stdexcept>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "uwt/world/types.hpp"

namespace uwt {

inline constexpr std::size_t kFeatureDim = 7;
inline constexpr std::size_t kSequenceLen = 64;

enum Feature : std::size_t {
  kPktCount,
  kGapMean,
  kGapVar,
  kRetxRate,
  kRoutingStability,
  kNeighborChurn,
  kProtocolDeviation,
};
std::string_view feature_name(std::size_t i);

/// Header metadata an interrogator can overhear. Deliberately has no payload,
/// drop cause or ground-truth field.
struct ObservedPacket {
  PacketId packet_id{0};
  MessageId message_id{0};
  AgentId src{0};
  AgentId dst{0};
  AgentId origin{0};
  AgentId final_dst{0};
  std::uint32_t size_bits{0};
  PacketKind kind{PacketKind::SensorData};
  SimTime sent_at;
  std::optional<SimTime> delivered_at;
  std::optional<PacketId> retransmission_of;

  static ObservedPacket from(const PacketRecord& r);
};

struct FeatureVector {
  std::array<double, kFeatureDim> values{};

  static FeatureVector quiet() {
    FeatureVector v;
    v.values[kRoutingStability] = 1.0;
    return v;
  }
  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }
  bool operator==(const FeatureVector&) const = default;
};

struct FeatureNorms {
  double norm_volume{1.0};
  double norm_churn{5.0};

  void validate() const {
    if (!(norm_volume > 0 && norm_churn > 0))
      throw std::invalid_argument("feature normalization constants must be positive");
  }
};

/// Which frames an observer overhears. A vantage with miss probability p
/// drops each frame independently (addressed by packet id) with probability p.
struct Vantage {
  std::uint64_t key{0};
  double miss_prob{0.0};

  bool hears(PacketId id) const;
};

/// Streaming per-agent window statistics. Events must be fed in simulation
/// order; window k covers [k*len, (k+1)*len).
class FeatureExtractor {
 public:
  FeatureExtractor(std::size_t n_agents, FeatureNorms norms, double interval_len = 30.0,
                   Vantage vantage = {});

  void observe_transmit(const ObservedPacket& p);
  void observe_arrival(const ObservedPacket& p);

  /// Finalizes window k for every agent. Windows must be closed in order.
  std::vector<FeatureVector> close_window(long k);

  const FeatureNorms& norms() const { return norms_; }
  const Vantage& vantage() const { return vantage_; }

 private:
  struct Acc {
    std::vector<double> tx_times;
    std::uint32_t tx{0};
    std::uint32_t retx{0};
    std::uint32_t decisions{0};
    std::uint32_t changes{0};
    std::uint32_t dups{0};
    std::uint32_t relay_in{0};
    std::uint32_t relay_out{0};
    std::vector<AgentId> peers;
  };
  struct History {
    std::unordered_map<AgentId, AgentId> last_hop;  // final_dst -> next hop
    std::unordered_set<MessageId> sent;
    std::unordered_set<MessageId> known;  // sent or received
    std::vector<AgentId> prev_peers;      // sorted
  };

  Acc& acc(AgentId a, SimTime t);

  std::size_t n_;
  FeatureNorms norms_;
  double len_;
  Vantage vantage_;
  long next_close_{0};
  std::vector<History> hist_;
  std::vector<std::map<long, Acc>> open_;
};

/// Count of transmissions per (agent, window); used to calibrate norm_volume.
std::vector<std::vector<std::uint32_t>> transmit_counts(const std::vector<PacketRecord>& log,
                                                        std::size_t n_agents, double interval_len,
                                                        long n_windows);

struct FeatureSequence {
  AgentId agent{0};
  std::vector<FeatureVector> vectors;  // exactly kSequenceLen, oldest first, padding first
  std::size_t valid_len{0};

  bool padded(std::size_t pos) const { return pos < vectors.size() - valid_len; }
};

class DuplicatePushError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Last-K ring of feature vectors per agent.
class SequenceBuffer {
 public:
  explicit SequenceBuffer(std::size_t n_agents, std::size_t k = kSequenceLen);

  void push(AgentId agent, long interval_index, const FeatureVector& v);
  FeatureSequence snapshot(AgentId agent) const;
  std::size_t valid_len(AgentId agent) const { return rings_[agent].size(); }

 private:
  std::size_t k_;
  std::vector<std::deque<FeatureVector>> rings_;
  std::vector<long> last_;
};

}  // namespace uwt
