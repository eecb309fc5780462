#include <gtest/gtest.h>

#include "../support/feature_oracle.hpp"
#include "uwt/features/features.hpp"
#include "uwt/harness/experiment.hpp"
#include "uwt/harness/simulation.hpp"

using namespace uwt;

namespace {

ObservedPacket tx(PacketId id, MessageId m, AgentId src, AgentId dst, double t,
                  std::optional<PacketId> retx = std::nullopt, AgentId origin = 1,
                  AgentId final_dst = 0) {
  ObservedPacket p;
  p.packet_id = id;
  p.message_id = m;
  p.src = src;
  p.dst = dst;
  p.origin = origin;
  p.final_dst = final_dst;
  p.size_bits = 100;
  p.sent_at = SimTime{t};
  p.retransmission_of = retx;
  return p;
}

}  // namespace

TEST(Features, QuietAgent) {
  FeatureExtractor fx(3, FeatureNorms{});
  const auto v = fx.close_window(0);
  for (const auto& x : v) EXPECT_EQ(x, FeatureVector::quiet());
  EXPECT_EQ(FeatureVector::quiet().values, (std::array<double, 7>{0, 0, 0, 0, 1, 0, 0}));
}

TEST(Features, ConstantGaps) {
  FeatureExtractor fx(2, FeatureNorms{});
  for (int i = 0; i < 4; ++i) fx.observe_transmit(tx(i, i, 1, 0, 1.0 + 7.0 * i));
  const auto v = fx.close_window(0);
  EXPECT_EQ(v[1][kGapMean], 7.0);
  EXPECT_EQ(v[1][kGapVar], 0.0);
  EXPECT_EQ(v[1][kPktCount], 4.0);
}

TEST(Features, RetransmissionAndStaleIds) {
  FeatureExtractor fx(2, FeatureNorms{});
  PacketId id = 0;
  double t = 0.5;
  for (MessageId m = 0; m < 5; ++m) fx.observe_transmit(tx(id++, m, 1, 0, t += 1));
  for (PacketId r = 0; r < 3; ++r) fx.observe_transmit(tx(id++, r, 1, 0, t += 1, r));
  fx.observe_transmit(tx(id++, 0, 1, 0, t += 1));  // replayed stale ids
  fx.observe_transmit(tx(id++, 1, 1, 0, t += 1));
  const auto v = fx.close_window(0);
  EXPECT_DOUBLE_EQ(v[1][kRetxRate], 0.3);
  EXPECT_DOUBLE_EQ(v[1][kProtocolDeviation], 0.2);
}

TEST(Features, NextHopChangesLowerStability) {
  FeatureExtractor fx(4, FeatureNorms{});
  fx.observe_transmit(tx(0, 0, 1, 2, 1));
  fx.observe_transmit(tx(1, 1, 1, 3, 2));
  fx.observe_transmit(tx(2, 2, 1, 3, 3));
  fx.observe_transmit(tx(3, 3, 1, 2, 4));
  const auto v = fx.close_window(0);
  EXPECT_DOUBLE_EQ(v[1][kRoutingStability], 0.5);  // 2 changes over 4 decisions
}

TEST(Features, ChurnCountsPeerAddsAndRemoves) {
  FeatureExtractor fx(5, FeatureNorms{1.0, 2.0});
  fx.observe_transmit(tx(0, 0, 1, 2, 1));
  fx.observe_transmit(tx(1, 1, 1, 3, 2));
  auto v = fx.close_window(0);
  EXPECT_DOUBLE_EQ(v[1][kNeighborChurn], 1.0);  // {2,3} added / 2
  fx.observe_transmit(tx(2, 2, 1, 3, 31));
  fx.observe_transmit(tx(3, 3, 1, 4, 32));
  v = fx.close_window(1);
  EXPECT_DOUBLE_EQ(v[1][kNeighborChurn], 1.0);  // -2 +4
}

TEST(Features, WindowsCloseInOrder) {
  FeatureExtractor fx(1, FeatureNorms{});
  EXPECT_THROW(fx.close_window(1), std::logic_error);
  fx.close_window(0);
  EXPECT_THROW(fx.observe_transmit(tx(0, 0, 0, 0, 5)), std::logic_error);
}

template <typename T>
concept HasPayload = requires(T p) { p.payload; };
template <typename T>
concept HasDropCause = requires(T p) { p.dropped_reason; };
template <typename T>
concept HasGroundTruth = requires(T p) { p.replay; };

TEST(Features, InputCarriesMetadataOnly) {
  static_assert(!HasPayload<ObservedPacket>);
  static_assert(!HasDropCause<ObservedPacket>);
  static_assert(!HasGroundTruth<ObservedPacket>);
  static_assert(HasGroundTruth<PacketRecord>);
  SUCCEED();
}

TEST(Sequence, FirstIntervalIsPadded) {
  SequenceBuffer b(2);
  b.push(0, 0, FeatureVector::quiet());
  const auto s = b.snapshot(0);
  EXPECT_EQ(s.vectors.size(), kSequenceLen);
  EXPECT_EQ(s.valid_len, 1u);
  for (std::size_t i = 0; i < 63; ++i) EXPECT_TRUE(s.padded(i));
  EXPECT_FALSE(s.padded(63));
}

TEST(Sequence, RingEvictsOldest) {
  SequenceBuffer b(1);
  for (long k = 0; k <= 100; ++k) {
    FeatureVector v;
    v[0] = static_cast<double>(k);
    b.push(0, k, v);
  }
  const auto s = b.snapshot(0);
  EXPECT_EQ(s.valid_len, 64u);
  EXPECT_EQ(s.vectors.front()[0], 37.0);
  EXPECT_EQ(s.vectors.back()[0], 100.0);
}

TEST(Sequence, DuplicatePushThrows) {
  SequenceBuffer b(1);
  b.push(0, 3, FeatureVector{});
  EXPECT_THROW(b.push(0, 3, FeatureVector{}), DuplicatePushError);
}

TEST(Features, StreamingMatchesBruteForce) {
  ScenarioConfig cfg;
  cfg.mission_duration_s = 600;
  cfg.mode = Mode::Static;
  cfg.adversary.activation_min_frac = 0.1;
  cfg.adversary.activation_max_frac = 0.3;
  cfg.monitoring.norm_volume = 7;
  SimulationOptions opt;
  opt.record_features = true;
  Simulation sim(cfg, 21, nullptr, opt);
  const auto out = sim.run();
  const FeatureNorms norms{7, 5};
  const auto ref = oracle::features(sim.network().log(), cfg.deployment.n_agents, norms, 30.0, 20);
  ASSERT_EQ(out.features.size(), 20u);
  std::size_t busy = 0;
  for (std::size_t k = 0; k < 20; ++k)
    for (std::size_t a = 0; a < cfg.deployment.n_agents; ++a) {
      ASSERT_EQ(out.features[k][a], ref[k][a]) << "agent " << a << " window " << k;
      busy += out.features[k][a][kPktCount] > 0;
    }
  EXPECT_GT(busy, 500u);
}

TEST(Features, BenignStaticSensorIsStationary) {
  // A lone sensor one hop from its sink on a lossless channel.
  FeatureExtractor fx(2, FeatureNorms{});
  std::vector<FeatureVector> seen;
  for (long k = 0; k < 10; ++k) {
    for (int i = 0; i < 3; ++i) fx.observe_transmit(tx(k * 3 + i, k * 3 + i, 1, 0, 30.0 * k + 5 + 10 * i));
    seen.push_back(fx.close_window(k)[1]);
  }
  for (std::size_t k = 2; k < seen.size(); ++k) EXPECT_EQ(seen[k], seen[1]);
}
