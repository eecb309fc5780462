#include <gtest/gtest.h>

#include <vector>

#include "uwt/adversary/adversary.hpp"
#include "uwt/sim/engine.hpp"
#include "uwt/world/network.hpp"

using namespace uwt;

namespace {

std::vector<AgentState> field(std::size_t n) {
  std::vector<AgentState> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    v[i].id = static_cast<AgentId>(i);
    v[i].position = {100.0 * static_cast<double>(i % 10), 100.0 * static_cast<double>(i / 10), 100};
    v[i].initial_energy = v[i].residual_energy = 500;
  }
  return v;
}

class AttackHooks : public NetworkHooks {
 public:
  AttackHooks(Adversary& adv, Engine& eng) : adv_(adv), eng_(eng) {}
  Network* net{nullptr};
  bool drop_relay(AgentId holder, const Transit& t) override {
    return adv_.drop_relay(holder, t, eng_.now());
  }
  std::optional<AgentId> choose_next_hop(AgentId holder, const Transit& t,
                                         std::optional<AgentId> greedy) override {
    return adv_.choose_next_hop(net->agents(), holder, t, greedy, net->excluded(), eng_.now());
  }

 private:
  Adversary& adv_;
  Engine& eng_;
};

// Chain 0..4 at 300 m spacing; agent 2 is the only route from 3/4 to 0.
struct ChainRun {
  std::vector<PacketRecord> log;
};

ChainRun run_chain(AttackKind kind, double intensity, double activation, int messages) {
  Engine eng(RunConfig{9});
  std::vector<AgentState> v(5);
  for (std::size_t i = 0; i < 5; ++i) {
    v[i].id = static_cast<AgentId>(i);
    v[i].position = {300.0 * static_cast<double>(i), 0, 100};
    v[i].initial_energy = v[i].residual_energy = 500;
  }
  CompromiseAssignment as;
  as.assigned = {2};
  as.profiles[2] = AttackProfile{kind, SimTime{activation}, intensity};
  Adversary adv(as, AdversaryParams{}, RngStream(9, "attack"));
  AttackHooks hooks(adv, eng);
  ChannelParams c;
  c.base_loss_prob = c.loss_per_km = 0;
  Network net(eng, v, c, EnergyParams{}, hooks);
  hooks.net = &net;
  for (int i = 0; i < messages; ++i)
    eng.schedule(SimTime{10.0 * i}, EventKind::TrafficTick,
                 [&] { net.originate(4, 0, PacketKind::SensorData, 2000); });
  eng.run_until(SimTime{10.0 * messages + 60});
  return {net.log()};
}

}  // namespace

TEST(Assignment, RoundHalfUp) {
  EXPECT_EQ(compromised_count(0.15, 50), 8u);
  EXPECT_EQ(compromised_count(0.0, 50), 0u);
  EXPECT_EQ(compromised_count(0.1, 25), 3u);  // 2.5 rounds up
}

TEST(Assignment, EmptyForZeroFraction) {
  auto agents = field(50);
  AdversaryParams p;
  p.fraction = 0;
  RngStream rng(1, "adversary");
  EXPECT_TRUE(assign_compromised(agents, p, SimTime{7200}, rng).assigned.empty());
}

TEST(Assignment, DeterministicAndExcludesPrivileged) {
  auto agents = field(50);
  agents[0].kind = AgentKind::SurfaceGateway;
  agents[1].kind = AgentKind::SurfaceGateway;
  agents[2].interrogator_host = agents[3].interrogator_host = true;
  AdversaryParams p;
  RngStream r1(4, "adversary"), r2(4, "adversary");
  auto a1 = agents, a2 = agents;
  const auto x = assign_compromised(a1, p, SimTime{7200}, r1);
  const auto y = assign_compromised(a2, p, SimTime{7200}, r2);
  EXPECT_EQ(x.assigned, y.assigned);
  ASSERT_EQ(x.assigned.size(), 8u);
  for (AgentId id : x.assigned) {
    EXPECT_GE(id, 4u);
    EXPECT_TRUE(a1[id].compromised);
    const auto& prof = x.profiles.at(id);
    EXPECT_GE(prof.activation.seconds, 0.2 * 7200);
    EXPECT_LE(prof.activation.seconds, 0.4 * 7200);
  }
  std::size_t flagged = 0;
  for (const auto& a : a1) flagged += a.compromised;
  EXPECT_EQ(flagged, 8u);
}

TEST(Assignment, RejectsCompromisingEveryone) {
  auto agents = field(4);
  AdversaryParams p;
  p.fraction = 0.9;
  RngStream rng(1, "adversary");
  EXPECT_THROW(assign_compromised(agents, p, SimTime{100}, rng), std::invalid_argument);
}

TEST(Attacks, SaturatedDropSwallowsEveryRelay) {
  const auto run = run_chain(AttackKind::SelectiveDrop, 1.0, 0.0, 20);
  int malicious = 0, delivered = 0;
  for (const auto& r : run.log) {
    malicious += r.dropped_reason == DropReason::MaliciousDrop;
    delivered += r.delivered_at && r.dst == 0;
    if (r.src == 2) {
      EXPECT_EQ(r.dropped_reason, DropReason::MaliciousDrop);
    }
  }
  EXPECT_EQ(malicious, 20);
  EXPECT_EQ(delivered, 0);
}

TEST(Attacks, NullIntensityMatchesBenign) {
  const auto benign = run_chain(AttackKind::SelectiveDrop, 0.0, 1e9, 20);
  for (AttackKind k : {AttackKind::SelectiveDrop, AttackKind::RouteManipulation}) {
    const auto attacked = run_chain(k, 0.0, 0.0, 20);
    ASSERT_EQ(attacked.log.size(), benign.log.size());
    for (std::size_t i = 0; i < benign.log.size(); ++i) {
      EXPECT_EQ(attacked.log[i].dst, benign.log[i].dst);
      EXPECT_EQ(attacked.log[i].dropped_reason, benign.log[i].dropped_reason);
    }
  }
}

TEST(Attacks, InactiveBeforeActivation) {
  const auto run = run_chain(AttackKind::SelectiveDrop, 1.0, 100.0, 20);
  for (const auto& r : run.log) {
    if (r.dropped_reason == DropReason::MaliciousDrop) {
      EXPECT_GE(r.sent_at.seconds, 100.0);
    }
    if (r.src == 2 && r.sent_at.seconds < 100.0) {
      EXPECT_TRUE(r.delivered_at.has_value());
    }
  }
}

TEST(Attacks, RateHooks) {
  CompromiseAssignment as;
  as.assigned = {1, 2};
  as.profiles[1] = AttackProfile{AttackKind::TransmissionBurst, SimTime{50}, 5.0};
  as.profiles[2] = AttackProfile{AttackKind::Replay, SimTime{50}, 0.5};
  Adversary adv(as, AdversaryParams{}, RngStream(1, "attack"));
  EXPECT_EQ(adv.traffic_multiplier(1, SimTime{10}), 1.0);
  EXPECT_EQ(adv.traffic_multiplier(1, SimTime{60}), 5.0);
  EXPECT_EQ(adv.traffic_multiplier(0, SimTime{60}), 1.0);
  EXPECT_EQ(adv.replay_rate(2, SimTime{60}), 0.5);
  EXPECT_EQ(adv.replay_rate(2, SimTime{49}), 0.0);
}
