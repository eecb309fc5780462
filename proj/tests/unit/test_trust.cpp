#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "uwt/harness/simulation.hpp"
#include "uwt/trust/scorer.hpp"
#include "uwt/trust/training.hpp"
#include "uwt/trust/trust.hpp"

using namespace uwt;

TEST(Trust, SmoothingExample) {
  TrustParams p;
  TrustRecord r;
  r.tau = 0.9;
  r = smooth_update(r, 0.4, p);
  EXPECT_NEAR(r.tau, 0.80, 1e-15);
  EXPECT_EQ(r.raw_score, 0.4);
}

TEST(Trust, AlphaExtremes) {
  TrustParams p;
  TrustRecord r;
  r.tau = 0.8;
  p.alpha = 1.0;
  EXPECT_EQ(smooth_update(r, 0.1, p).tau, 0.8);
  p.alpha = 0.0;
  EXPECT_EQ(smooth_update(r, 0.1, p).tau, 0.1);
}

TEST(Trust, RejectsOutOfRangeRaw) {
  TrustParams p;
  EXPECT_THROW(smooth_update(TrustRecord{}, 1.2, p), std::invalid_argument);
  EXPECT_THROW(smooth_update(TrustRecord{}, std::nan(""), p), std::invalid_argument);
}

TEST(Trust, PersistenceCounters) {
  TrustParams p;
  p.alpha = 0;
  TrustRecord r;
  r = smooth_update(r, 0.3, p);
  r = smooth_update(r, 0.3, p);
  EXPECT_EQ(r.persistence_below, 2);
  EXPECT_EQ(r.persistence_above, 0);
  r = smooth_update(r, 0.9, p);
  EXPECT_EQ(r.persistence_below, 0);
  EXPECT_EQ(r.persistence_above, 1);
}

TEST(Trust, AuthorizationBoundary) {
  TrustParams p;
  TrustRecord r;
  r.tau = 0.65;
  EXPECT_EQ(authorize_forwarding(r, p), Authorization::Authorized);
  r.tau = 0.649;
  EXPECT_EQ(authorize_forwarding(r, p), Authorization::Interrogate);
}

TEST(Trust, InvalidParams) {
  TrustParams p;
  p.tau_hard = 0.7;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = TrustParams{};
  p.alpha = 1.5;
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(Beta, Examples) {
  EXPECT_EQ(beta_trust(BetaReputation{}), 0.5);
  BetaReputation r;
  for (int i = 0; i < 8; ++i) r = beta_update(r, Outcome::Positive);
  for (int i = 0; i < 2; ++i) r = beta_update(r, Outcome::Negative);
  EXPECT_DOUBLE_EQ(beta_trust(r), 0.75);
  EXPECT_DOUBLE_EQ(beta_trust(BetaReputation{0, 0, 2}), 0.25);
}

namespace {

ScorerConfig small_config() {
  ScorerConfig c;
  c.layers = 2;
  c.model_dim = 8;
  c.heads = 2;
  c.ff_dim = 16;
  c.seq_len = 12;
  return c;
}

FeatureSequence random_sequence(RngStream& rng, std::size_t len, std::size_t valid) {
  FeatureSequence s;
  s.vectors.resize(len);
  s.valid_len = valid;
  for (std::size_t i = len - valid; i < len; ++i)
    for (auto& x : s.vectors[i].values) x = rng.uniform(0.0, 2.0);
  return s;
}

void zero_group(ScorerModel& m, const std::string& name) {
  for (const auto& g : parameter_layout(m.config))
    if (g.name == name) std::fill_n(m.params.begin() + g.offset, g.size(), 0.0);
}

}  // namespace

TEST(Scorer, DefaultParameterBudget) {
  const auto n = ScorerConfig{}.parameter_count();
  EXPECT_GE(n, 1'000'000u);
  EXPECT_LE(n, 1'300'000u);
}

TEST(Scorer, LayoutIsContiguous) {
  const auto layout = parameter_layout(small_config());
  std::size_t off = 0;
  for (const auto& g : layout) {
    EXPECT_EQ(g.offset, off) << g.name;
    off += g.size();
  }
  EXPECT_EQ(off, small_config().parameter_count());
}

TEST(Scorer, ZeroModelScoresOneHalf) {
  const auto m = ScorerModel::zeros(small_config());
  Scorer<double> s(m);
  RngStream rng(1, "seq");
  const auto seq = random_sequence(rng, 12, 7);
  EXPECT_EQ(s.score(seq), 0.5);
}

TEST(Scorer, ColdStart) {
  RngStream rng(2, "init");
  Scorer<double> s(ScorerModel::initialized(small_config(), rng));
  FeatureSequence empty;
  empty.vectors.resize(12);
  EXPECT_EQ(s.score(empty), kColdStartScore);
}

TEST(Scorer, NonFiniteInputThrows) {
  RngStream rng(2, "init");
  Scorer<double> s(ScorerModel::initialized(small_config(), rng));
  auto seq = random_sequence(rng, 12, 3);
  seq.vectors.back()[kGapVar] = std::nan("");
  EXPECT_THROW(s.score(seq), std::invalid_argument);
}

TEST(Scorer, PaddingDoesNotLeak) {
  RngStream rng(3, "init");
  Scorer<double> s(ScorerModel::initialized(small_config(), rng));
  auto seq = random_sequence(rng, 12, 5);
  const double base = s.score(seq);
  for (std::size_t i = 0; i < 7; ++i)
    for (auto& x : seq.vectors[i].values) x = 123.0;
  EXPECT_EQ(s.score(seq), base);
}

TEST(Scorer, PermutationInvariantWithoutPositions) {
  RngStream rng(4, "init");
  auto m = ScorerModel::initialized(small_config(), rng);
  zero_group(m, "pos_embedding");
  Scorer<double> s(m);
  auto seq = random_sequence(rng, 12, 9);
  const double base = s.score(seq);
  std::reverse(seq.vectors.begin() + 3, seq.vectors.end());
  EXPECT_NEAR(s.score(seq), base, 1e-12);
  std::rotate(seq.vectors.begin() + 3, seq.vectors.begin() + 5, seq.vectors.end());
  EXPECT_NEAR(s.score(seq), base, 1e-12);
}

TEST(Scorer, BatchMatchesSingle) {
  RngStream rng(5, "init");
  Scorer<double> s(ScorerModel::initialized(small_config(), rng));
  std::vector<FeatureSequence> seqs;
  for (std::size_t v : {1u, 4u, 12u, 7u}) seqs.push_back(random_sequence(rng, 12, v));
  std::vector<const FeatureSequence*> ptrs;
  for (const auto& q : seqs) ptrs.push_back(&q);
  const auto batch = s.score_batch(ptrs);
  for (std::size_t i = 0; i < seqs.size(); ++i) EXPECT_NEAR(batch[i], s.score(seqs[i]), 1e-12);
}

TEST(Scorer, GradientMatchesFiniteDifferences) {
  RngStream rng(6, "init");
  Scorer<double> s(ScorerModel::initialized(small_config(), rng));
  std::vector<SeqInput<double>> in;
  for (std::size_t v : {3u, 12u, 6u}) in.push_back(Scorer<double>::prepare(random_sequence(rng, 12, v), v % 2));
  std::vector<const SeqInput<double>*> batch;
  for (const auto& x : in) batch.push_back(&x);
  RngStream pick(6, "pick");
  const auto r = gradient_check(s, batch, 1e-5, 0, pick);
  EXPECT_EQ(r.checked, small_config().parameter_count());
  EXPECT_LE(r.max_rel_error, 1e-4) << r.worst_group;
}

TEST(Scorer, ZeroModelHeadBiasGradient) {
  Scorer<double> s(ScorerModel::zeros(small_config()));
  RngStream rng(9, "seq");
  std::vector<SeqInput<double>> in;
  for (double y : {1.0, 1.0, 0.0}) in.push_back(Scorer<double>::prepare(random_sequence(rng, 12, 5), y));
  std::vector<const SeqInput<double>*> batch;
  for (const auto& x : in) batch.push_back(&x);
  std::vector<double> g;
  s.loss_and_grad(batch, g);
  const auto layout = parameter_layout(small_config());
  EXPECT_NEAR(g[layout.back().offset], -1.0 / 6.0, 1e-15);  // mean(0.5 - y)
}

TEST(Scorer, LossMovesAlongGradient) {
  RngStream rng(10, "init");
  Scorer<double> s(ScorerModel::initialized(small_config(), rng));
  std::vector<SeqInput<double>> in;
  for (std::size_t v : {4u, 9u}) in.push_back(Scorer<double>::prepare(random_sequence(rng, 12, v), 0.0));
  std::vector<const SeqInput<double>*> batch;
  for (const auto& x : in) batch.push_back(&x);
  std::vector<double> g;
  const double base = s.loss_and_grad(batch, g);
  const std::size_t i = parameter_layout(small_config())[0].offset + 3;
  const double h = 1e-5;
  s.params()[i] += h;
  EXPECT_NEAR(s.loss(batch) - base, g[i] * h, 1e-9);
}

TEST(Scorer, FloatAgreesWithDouble) {
  RngStream rng(7, "init");
  const auto m = ScorerModel::initialized(ScorerConfig{}, rng);
  Scorer<double> d(m);
  Scorer<float> f(m);
  const auto seq = random_sequence(rng, kSequenceLen, 40);
  EXPECT_NEAR(f.score(seq), d.score(seq), 1e-4);
}

TEST(Scorer, ModelRoundTripIsExact) {
  RngStream rng(8, "init");
  auto m = ScorerModel::initialized(small_config(), rng);
  m.standardizer.mean[2] = 0.125;
  m.standardizer.scale[5] = 3.5;
  const auto path = std::filesystem::temp_directory_path() / "uwt_model_roundtrip.bin";
  save_model(m, path);
  const auto back = load_model(path);
  std::filesystem::remove(path);
  EXPECT_EQ(back.config, m.config);
  EXPECT_EQ(back.params, m.params);
  EXPECT_EQ(back.standardizer.mean, m.standardizer.mean);
  EXPECT_EQ(back.standardizer.scale, m.standardizer.scale);
}

TEST(Scorer, TruncatedModelFileThrows) {
  RngStream rng(8, "init");
  const auto path = std::filesystem::temp_directory_path() / "uwt_model_trunc.bin";
  save_model(ScorerModel::initialized(small_config(), rng), path);
  std::filesystem::resize_file(path, std::filesystem::file_size(path) / 2);
  EXPECT_THROW(load_model(path), std::runtime_error);
  std::filesystem::remove(path);
}

namespace {

std::vector<TraceRow> toy_rows(std::uint64_t seed, std::size_t agents, long intervals) {
  std::vector<TraceRow> rows;
  for (std::size_t a = 0; a < agents; ++a)
    for (long k = 0; k < intervals; ++k) {
      TraceRow r;
      r.seed = seed;
      r.agent = static_cast<AgentId>(a);
      r.interval_index = k;
      r.compromised = a % 2 == 1 && k >= intervals / 2;
      r.features = FeatureVector::quiet();
      r.features[kPktCount] = r.compromised ? 3.0 : 0.5;
      r.features[kRetxRate] = r.compromised ? 0.6 : 0.05 * static_cast<double>(seed % 3);
      rows.push_back(r);
    }
  return rows;
}

}  // namespace

TEST(Training, OverfitsSeparableToy) {
  const auto set = TraceSet::from_rows(toy_rows(1, 4, 20));
  TrainParams p;
  p.config = small_config();
  p.epochs = 200;
  p.samples_per_epoch = 64;
  p.batch = 16;
  p.lr = 3e-3;
  p.warmup_steps = 10;
  TrainingReport rep;
  const auto m = train_scorer(set, TraceSet{}, p, rep);
  ASSERT_EQ(rep.epoch_loss.size(), 200u);
  EXPECT_LT(rep.epoch_loss.back(), 0.01);
  Scorer<float> s(m);
  const auto e = evaluate_scorer(s, set, 1, 0, 0.5);
  EXPECT_EQ(e.classification.accuracy(), 1.0);
}

TEST(Training, SingleClassIsRejected) {
  auto rows = toy_rows(1, 4, 20);
  for (auto& r : rows) r.compromised = false;
  TrainParams p;
  p.config = small_config();
  TrainingReport rep;
  EXPECT_THROW(train_scorer(TraceSet::from_rows(rows), TraceSet{}, p, rep), TrainingError);
}

TEST(Training, SameSeedSameModel) {
  const auto set = TraceSet::from_rows(toy_rows(1, 4, 20));
  TrainParams p;
  p.config = small_config();
  p.epochs = 2;
  p.samples_per_epoch = 64;
  TrainingReport r1, r2;
  EXPECT_EQ(train_scorer(set, TraceSet{}, p, r1).params, train_scorer(set, TraceSet{}, p, r2).params);
}

TEST(Traces, CsvRoundTripIsExact) {
  auto rows = toy_rows(5, 3, 4);
  rows[2].features[kGapMean] = 0.1 + 0.2;
  rows[3].features[kGapVar] = 1.0 / 3.0;
  std::stringstream ss;
  write_trace_csv(ss, rows);
  std::string header;
  std::getline(std::stringstream(ss.str()), header);
  EXPECT_EQ(header, kTraceHeader);
  const auto back = read_trace_csv(ss);
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(back[i].seed, rows[i].seed);
    EXPECT_EQ(back[i].agent, rows[i].agent);
    EXPECT_EQ(back[i].interval_index, rows[i].interval_index);
    EXPECT_EQ(back[i].features, rows[i].features);
    EXPECT_EQ(back[i].compromised, rows[i].compromised);
  }
}

TEST(Traces, GapsAreRejected) {
  auto rows = toy_rows(1, 1, 5);
  rows.erase(rows.begin() + 2);
  EXPECT_THROW(TraceSet::from_rows(rows), std::exception);
}

TEST(Traces, SplitHoldsOutWholeRuns) {
  std::vector<TraceRow> rows;
  for (std::uint64_t seed : {11u, 12u, 13u, 14u, 15u}) {
    const auto r = toy_rows(seed, 2, 3);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  const auto [train, val] = split_by_seed(TraceSet::from_rows(rows), 0.2);
  EXPECT_EQ(train.seeds(), (std::vector<std::uint64_t>{11, 12, 13, 14}));
  EXPECT_EQ(val.seeds(), (std::vector<std::uint64_t>{15}));
  EXPECT_EQ(train.rows() + val.rows(), rows.size());
}

TEST(Traces, SequenceIsPaddedAndAligned) {
  const auto set = TraceSet::from_rows(toy_rows(1, 2, 20));
  const auto s = set.sequence(1, 14);
  EXPECT_EQ(s.vectors.size(), kSequenceLen);
  EXPECT_EQ(s.valid_len, 15u);
  EXPECT_EQ(s.vectors.back(), set.series()[1].vectors[14]);
  EXPECT_TRUE(s.padded(kSequenceLen - 16));
}

TEST(Traces, StandardizerUsesPopulationMoments) {
  std::vector<TraceRow> rows = toy_rows(1, 1, 4);
  for (std::size_t i = 0; i < 4; ++i) rows[i].features[kGapMean] = static_cast<double>(2 * i);
  const auto st = fit_standardizer(TraceSet::from_rows(rows));
  EXPECT_DOUBLE_EQ(st.mean[kGapMean], 3.0);
  EXPECT_DOUBLE_EQ(st.scale[kGapMean], std::sqrt(5.0));
  EXPECT_EQ(st.scale[kNeighborChurn], 1.0);  // constant column
}
