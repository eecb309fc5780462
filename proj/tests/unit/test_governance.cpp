#include <gtest/gtest.h>

#include <sstream>
#include <string>

#include "uwt/governance/consortium.hpp"
#include "uwt/governance/enforcement.hpp"
#include "uwt/governance/ledger.hpp"

using namespace uwt;

TEST(Validators, QuorumSizes) {
  const auto a = ValidatorSet::of(9);
  EXPECT_EQ(a.f, 2u);
  EXPECT_EQ(a.quorum, 6u);
  const auto b = ValidatorSet::of(4);
  EXPECT_EQ(b.f, 1u);
  EXPECT_EQ(b.quorum, 3u);
  const auto c = ValidatorSet::of(1);
  EXPECT_EQ(c.f, 0u);
  EXPECT_EQ(c.quorum, 1u);
}

TEST(Ledger, Sha256KnownVector) {
  EXPECT_EQ(to_hex(sha256("abc")),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Ledger, GoldenBlockHash) {
  Digest prev;
  prev.fill(0x11);
  TrustCommit c;
  c.agent = 7;
  c.interval_index = 3;
  c.tau_delta_nano = -250000000;
  c.event = SecurityEvent::Excluded;
  c.reporter = 4;
  const auto b = make_block(1, prev, SimTime{1.5}, {c});
  EXPECT_EQ(to_hex(b.block_hash),
            "6ac46cc0d810bc88ccd0ecc1ef3edce1b756dcccd0730b06402c5799a1a6245b");
}

TEST(Ledger, HexRoundTrip) {
  const auto d = sha256("x");
  EXPECT_EQ(digest_from_hex(to_hex(d)), d);
  EXPECT_FALSE(digest_from_hex("ABC"));
}

namespace {

std::vector<LedgerBlock> sample_chain(std::size_t n) {
  std::vector<LedgerBlock> v;
  Digest prev{};
  for (std::size_t h = 0; h < n; ++h) {
    std::vector<TrustCommit> cs{TrustCommit::delta(static_cast<AgentId>(h % 7), static_cast<std::uint32_t>(h), -0.01 * static_cast<double>(h % 5), 3),
                                TrustCommit::security(5, static_cast<std::uint32_t>(h), SecurityEvent::Flagged, 2)};
    v.push_back(make_block(h, prev, SimTime{30.0 * static_cast<double>(h)}, cs));
    prev = v.back().block_hash;
  }
  return v;
}

}  // namespace

TEST(Ledger, ValidChainVerifies) {
  EXPECT_EQ(verify_chain(sample_chain(10)), std::nullopt);
  EXPECT_EQ(verify_chain({}), std::nullopt);
}

TEST(Ledger, TamperedPayloadDetectedAtItsHeight) {
  auto v = sample_chain(10);
  v[4].commits[0].tau_delta_nano += 1;
  EXPECT_EQ(verify_chain(v), 4u);
}

TEST(Ledger, ReorderedCommitsDetected) {
  auto v = sample_chain(10);
  std::swap(v[6].commits[0], v[6].commits[1]);
  EXPECT_EQ(verify_chain(v), 6u);
}

TEST(Ledger, RehashedBlockBreaksTheLink) {
  auto v = sample_chain(10);
  v[3].commits.clear();
  v[3].block_hash = compute_block_hash(v[3]);
  EXPECT_EQ(verify_chain(v), 4u);
}

TEST(Ledger, ExportRoundTripsThroughVerify) {
  const auto v = sample_chain(12);
  const auto text = export_jsonl(v);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 12);
  const auto ok = verify_export(text);
  EXPECT_TRUE(ok.valid) << ok.reason;
  EXPECT_EQ(ok.blocks, 12u);
}

TEST(Ledger, ByteFlipInExportDetected) {
  const auto text = export_jsonl(sample_chain(12));
  std::size_t line_start = 0;
  for (int i = 0; i < 7; ++i) line_start = text.find('\n', line_start) + 1;
  std::string bad = text;
  const auto pos = bad.find("\"tau_delta_nano\":", line_start) + 18;
  bad[pos] = bad[pos] == '1' ? '2' : '1';
  const auto r = verify_export(bad);
  EXPECT_FALSE(r.valid);
  EXPECT_EQ(r.bad_height, 7u);
}

TEST(Ledger, AppendRejectsBrokenLink) {
  Ledger l;
  const auto v = sample_chain(3);
  l.append(v[0]);
  EXPECT_THROW(l.append(v[2]), std::exception);
  l.append(v[1]);
  EXPECT_EQ(l.height(), 2u);
  EXPECT_EQ(l.head_hash(), v[1].block_hash);
}

TEST(Ledger, DeltaRangeChecked) {
  EXPECT_THROW(TrustCommit::delta(1, 0, 1.5, 0), std::invalid_argument);
  EXPECT_EQ(TrustCommit::delta(1, 0, -0.04, 0).tau_delta_nano, -40000000);
}

namespace {

struct PbftRun {
  std::vector<std::vector<LedgerBlock>> chains;
  std::vector<bool> honest;
  ConsortiumStats stats;
  std::size_t committed{0};
};

PbftRun run_pbft(std::vector<Fault> faults, std::uint64_t seed, int rounds, double jitter = 0.0) {
  Engine eng(RunConfig{seed});
  ConsortiumParams p;
  p.validators = faults.size();
  p.link_jitter_s = jitter;
  Consortium c(eng, p, faults);
  std::size_t committed = 0;
  c.on_commit([&](const LedgerBlock& b) { committed += b.commits.size(); });
  for (int r = 0; r < rounds; ++r)
    eng.schedule(SimTime{10.0 * r}, EventKind::ConsensusTick, [&, r] {
      c.submit(TrustCommit::delta(static_cast<AgentId>(r % 13), static_cast<std::uint32_t>(r), 0.001, 1));
      c.tick();
    });
  eng.run_until(SimTime{10.0 * rounds + 200});
  for (int i = 0; i < 30 && c.pending() > 0; ++i) {
    c.tick();
    eng.run_until(SimTime{eng.now().seconds + 30});
  }
  PbftRun out;
  for (std::size_t v = 0; v < faults.size(); ++v) {
    out.chains.push_back(c.chain(v).blocks());
    out.honest.push_back(c.honest(v));
  }
  out.stats = c.stats();
  out.committed = committed;
  return out;
}

void expect_consistent(const PbftRun& r) {
  const std::vector<LedgerBlock>* longest = nullptr;
  for (std::size_t v = 0; v < r.chains.size(); ++v)
    if (r.honest[v] && (!longest || r.chains[v].size() > longest->size())) longest = &r.chains[v];
  ASSERT_NE(longest, nullptr);
  EXPECT_EQ(verify_chain(*longest), std::nullopt);
  for (std::size_t v = 0; v < r.chains.size(); ++v) {
    if (!r.honest[v]) continue;
    const auto& c = r.chains[v];
    for (std::size_t h = 0; h < c.size(); ++h) ASSERT_EQ(c[h], (*longest)[h]) << "validator " << v;
  }
}

}  // namespace

TEST(Pbft, AllHonestCommitsEverything) {
  const auto r = run_pbft(std::vector<Fault>(9, Fault::Honest), 1, 20);
  expect_consistent(r);
  EXPECT_EQ(r.committed, 20u);
  EXPECT_EQ(r.stats.view_changes, 0u);
  for (const auto& c : r.chains) EXPECT_EQ(c.size(), r.chains[0].size());
}

TEST(Pbft, SilentPrimaryForcesViewChange) {
  std::vector<Fault> f(9, Fault::Honest);
  f[1] = Fault::Silent;  // primary for height 0, view 1 is validator 1; height 1 view 0 too
  f[2] = Fault::Silent;
  const auto r = run_pbft(f, 2, 20);
  expect_consistent(r);
  EXPECT_EQ(r.committed, 20u);
  EXPECT_GT(r.stats.view_changes, 0u);
}

TEST(Pbft, EquivocatorsCannotSplitHonestChains) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::vector<Fault> f(9, Fault::Honest);
    f[seed % 9] = Fault::Equivocator;
    f[(seed + 4) % 9] = Fault::Equivocator;
    const auto r = run_pbft(f, seed, 15, 0.04);
    expect_consistent(r);
    EXPECT_EQ(r.committed, 15u) << "seed " << seed;
  }
}

TEST(Pbft, TooManyFaultsRejectedOrStalls) {
  std::vector<Fault> f(4, Fault::Honest);
  f[0] = f[1] = Fault::Silent;
  const auto r = run_pbft(f, 3, 5);
  for (std::size_t v = 2; v < 4; ++v) EXPECT_TRUE(r.chains[v].empty());
}

namespace {

struct Walk {
  TrustParams tp;
  EnforcementParams ep;
  TrustRecord rec;
  EnforcementState st;
  double now{0};

  EnforcementActions step(double raw, EnforcementInput in = {}) {
    rec = smooth_update(rec, raw, tp);
    EnforcementActions a;
    now += 30;
    st = enforce_transition(st, rec, tp, ep, in, SimTime{now}, a);
    return a;
  }
};

}  // namespace

TEST(Enforcement, CrossValidationAgreement) {
  TrustParams p;
  EXPECT_TRUE(cross_validate(0.3, 0.5, p));
  EXPECT_TRUE(cross_validate(0.7, 0.9, p));
  EXPECT_FALSE(cross_validate(0.3, 0.7, p));
  EXPECT_FALSE(cross_validate(0.65, 0.64, p));
}

TEST(Enforcement, PersistenceEscalatesWithSecondOpinion) {
  Walk w;
  w.tp.alpha = 0;
  w.step(0.5);
  EXPECT_EQ(w.st.tier, Tier::Interrogation);
  w.step(0.5);
  const auto deferred = w.step(0.5);
  EXPECT_TRUE(deferred.escalation_deferred);
  EXPECT_EQ(w.st.tier, Tier::Interrogation);
  const auto a = w.step(0.5, EnforcementInput{0.55});
  EXPECT_EQ(w.st.tier, Tier::LocallyConstrained);
  EXPECT_TRUE(a.exclude);
  EXPECT_EQ(a.queue, (std::vector<SecurityEvent>{SecurityEvent::Flagged, SecurityEvent::Excluded}));
  EXPECT_EQ(w.st.throttle_factor, 0.25);
}

TEST(Enforcement, DisagreementBlocksEscalation) {
  Walk w;
  w.tp.alpha = 0;
  for (int i = 0; i < 5; ++i) w.step(0.5, EnforcementInput{0.9});
  EXPECT_EQ(w.st.tier, Tier::Interrogation);
}

TEST(Enforcement, HardThresholdSkipsPersistence) {
  Walk w;
  w.tp.alpha = 0;
  const auto a = w.step(0.2);
  EXPECT_EQ(w.st.tier, Tier::LocallyConstrained);
  EXPECT_TRUE(a.exclude);
}

TEST(Enforcement, IsolationWaitsForCommit) {
  Walk w;
  w.tp.alpha = 0;
  w.step(0.1);
  w.step(0.1);
  w.step(0.1);
  const auto req = w.step(0.1);
  EXPECT_EQ(req.queue, (std::vector<SecurityEvent>{SecurityEvent::Isolated}));
  EXPECT_EQ(w.st.tier, Tier::LocallyConstrained);
  EXPECT_TRUE(w.step(0.1).queue.empty());
  EnforcementInput in;
  in.isolation_committed = true;
  const auto iso = w.step(0.1, in);
  EXPECT_TRUE(iso.isolate);
  EXPECT_EQ(w.st.tier, Tier::Isolated);
}

TEST(Enforcement, RecoveryFromConstraint) {
  Walk w;
  w.tp.alpha = 0;
  w.step(0.2);
  ASSERT_EQ(w.st.tier, Tier::LocallyConstrained);
  for (int i = 0; i < 4; ++i) w.step(0.9);
  EXPECT_EQ(w.st.tier, Tier::LocallyConstrained);
  const auto a = w.step(0.9);
  EXPECT_EQ(w.st.tier, Tier::Recovered);
  EXPECT_TRUE(a.lift_exclusion);
  EXPECT_FALSE(w.st.excluded);
  EXPECT_EQ(w.st.throttle_factor, 1.0);
  w.step(0.9);
  EXPECT_EQ(w.st.tier, Tier::Normal);
}

TEST(Enforcement, IsolatedAgentNeedsCommittedReinstatement) {
  Walk w;
  w.tp.alpha = 0;
  for (int i = 0; i < 4; ++i) w.step(0.1);
  EnforcementInput in;
  in.isolation_committed = true;
  w.step(0.1, in);
  ASSERT_EQ(w.st.tier, Tier::Isolated);
  for (int i = 0; i < 4; ++i) w.step(0.9, in);
  const auto req = w.step(0.9, in);
  EXPECT_EQ(req.queue, (std::vector<SecurityEvent>{SecurityEvent::Reinstated}));
  EXPECT_EQ(w.st.tier, Tier::Isolated);
  in.reinstatement_committed = true;
  const auto back = w.step(0.9, in);
  EXPECT_TRUE(back.reinstate);
  EXPECT_EQ(w.st.tier, Tier::Recovered);
  EXPECT_FALSE(w.st.isolated);
}

TEST(Enforcement, NoAutoRecoveryKeepsIsolation) {
  Walk w;
  w.tp.alpha = 0;
  w.ep.auto_recovery = false;
  for (int i = 0; i < 4; ++i) w.step(0.1);
  EnforcementInput in;
  in.isolation_committed = true;
  w.step(0.1, in);
  for (int i = 0; i < 20; ++i) EXPECT_TRUE(w.step(0.95, in).queue.empty());
  EXPECT_EQ(w.st.tier, Tier::Isolated);
}
