#include "uwt/trust/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "json.hpp"
#include "uwt/harness/simulation.hpp"

namespace uwt {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> f;
  std::size_t start = 0;
  for (;;) {
    const std::size_t c = line.find(',', start);
    f.push_back(line.substr(start, c - start));
    if (c == std::string::npos) break;
    start = c + 1;
  }
  return f;
}

SeqInput<float> make_input(const TraceSeries& s, std::size_t end, std::size_t k) {
  const std::size_t len = std::min(k, end + 1);
  const std::size_t first = end + 1 - len;
  SeqInput<float> in;
  in.x.resize(static_cast<Eigen::Index>(len), static_cast<Eigen::Index>(kFeatureDim));
  for (std::size_t i = 0; i < len; ++i)
    for (std::size_t j = 0; j < kFeatureDim; ++j)
      in.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          static_cast<float>(s.vectors[first + i][j]);
  in.target = s.compromised[end] ? 0.0f : 1.0f;
  return in;
}

struct SampleRef {
  std::uint32_t series;
  std::uint32_t end;
};

}  // namespace

TraceSet TraceSet::from_rows(const std::vector<TraceRow>& rows) {
  std::map<std::pair<std::uint64_t, AgentId>, std::vector<const TraceRow*>> groups;
  for (const auto& r : rows) groups[{r.seed, r.agent}].push_back(&r);
  TraceSet set;
  for (auto& [key, g] : groups) {
    std::sort(g.begin(), g.end(),
              [](const TraceRow* a, const TraceRow* b) { return a->interval_index < b->interval_index; });
    TraceSeries s;
    s.seed = key.first;
    s.agent = key.second;
    s.first_interval = g.front()->interval_index;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (g[i]->interval_index != s.first_interval + static_cast<long>(i))
        throw std::runtime_error("trace for seed " + std::to_string(key.first) + " agent " +
                                 std::to_string(key.second) + " has a gap or duplicate at interval " +
                                 std::to_string(g[i]->interval_index));
      s.vectors.push_back(g[i]->features);
      s.compromised.push_back(g[i]->compromised);
    }
    set.series_.push_back(std::move(s));
  }
  return set;
}

std::vector<std::uint64_t> TraceSet::seeds() const {
  std::set<std::uint64_t> s;
  for (const auto& x : series_) s.insert(x.seed);
  return {s.begin(), s.end()};
}

std::size_t TraceSet::rows() const {
  std::size_t n = 0;
  for (const auto& s : series_) n += s.vectors.size();
  return n;
}

FeatureSequence TraceSet::sequence(std::size_t s, std::size_t end, std::size_t k) const {
  const auto& ser = series_.at(s);
  if (end >= ser.vectors.size()) throw std::out_of_range("sequence end past series");
  FeatureSequence seq;
  seq.agent = ser.agent;
  seq.valid_len = std::min(k, end + 1);
  seq.vectors.assign(k - seq.valid_len, FeatureVector{});
  for (std::size_t i = end + 1 - seq.valid_len; i <= end; ++i) seq.vectors.push_back(ser.vectors[i]);
  return seq;
}

TraceSet TraceSet::filter(const std::function<bool(std::uint64_t)>& keep) const {
  TraceSet out;
  for (const auto& s : series_)
    if (keep(s.seed)) out.series_.push_back(s);
  return out;
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& rows) {
  out << kTraceHeader << '\n';
  char buf[32];
  for (const auto& r : rows) {
    out << r.seed << ',' << r.agent << ',' << r.interval_index;
    for (std::size_t j = 0; j < kFeatureDim; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", r.features[j]);
      out << ',' << buf;
    }
    out << ',' << (r.compromised ? 1 : 0) << '\n';
  }
}

std::vector<TraceRow> read_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader)
    throw std::runtime_error("trace CSV header mismatch");
  std::vector<TraceRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 4 + kFeatureDim)
      throw std::runtime_error("trace CSV line " + std::to_string(lineno) + " has wrong field count");
    TraceRow r;
    try {
      r.seed = std::stoull(f[0]);
      r.agent = static_cast<AgentId>(std::stoul(f[1]));
      r.interval_index = std::stol(f[2]);
      for (std::size_t j = 0; j < kFeatureDim; ++j) r.features[j] = std::stod(f[3 + j]);
    } catch (const std::logic_error&) {
      throw std::runtime_error("trace CSV line " + std::to_string(lineno) + " is malformed");
    }
    const auto& lab = f[3 + kFeatureDim];
    if (lab != "0" && lab != "1")
      throw std::runtime_error("trace CSV line " + std::to_string(lineno) + " has a bad label");
    r.compromised = lab == "1";
    rows.push_back(r);
  }
  return rows;
}

std::vector<TraceRow> load_traces(const std::filesystem::path& path) {
  std::vector<std::filesystem::path> files;
  if (std::filesystem::is_directory(path)) {
    for (const auto& e : std::filesystem::directory_iterator(path))
      if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(path);
  }
  std::vector<TraceRow> all;
  for (const auto& f : files) {
    std::ifstream in(f);
    if (!in) throw std::runtime_error("cannot open " + f.string());
    auto rows = read_trace_csv(in);
    all.insert(all.end(), rows.begin(), rows.end());
  }
  return all;
}

std::pair<TraceSet, TraceSet> split_by_seed(const TraceSet& all, double val_fraction) {
  const auto seeds = all.seeds();
  std::size_t n_val = static_cast<std::size_t>(std::ceil(val_fraction * static_cast<double>(seeds.size())));
  if (seeds.size() < 2) n_val = 0;
  n_val = std::min(n_val, seeds.size() - std::min<std::size_t>(seeds.size(), 1));
  const std::set<std::uint64_t> val(seeds.end() - static_cast<std::ptrdiff_t>(n_val), seeds.end());
  return {all.filter([&](std::uint64_t s) { return !val.count(s); }),
          all.filter([&](std::uint64_t s) { return val.count(s) > 0; })};
}

Standardizer fit_standardizer(const TraceSet& set) {
  Standardizer st;
  const double n = static_cast<double>(set.rows());
  if (n == 0) return st;
  for (std::size_t j = 0; j < kFeatureDim; ++j) {
    double sum = 0.0;
    for (const auto& s : set.series())
      for (const auto& v : s.vectors) sum += v[j];
    const double mean = sum / n;
    double ss = 0.0;
    for (const auto& s : set.series())
      for (const auto& v : s.vectors) ss += (v[j] - mean) * (v[j] - mean);
    const double sd = std::sqrt(ss / n);
    st.mean[j] = mean;
    st.scale[j] = sd > 1e-6 ? sd : 1.0;
  }
  return st;
}

std::string TrainingReport::to_json() const {
  nlohmann::json j;
  j["epoch_loss"] = epoch_loss;
  j["train_seeds"] = train_seeds;
  j["val_seeds"] = val_seeds;
  j["train_rows"] = train_rows;
  j["val_rows"] = val_rows;
  j["train_positive_rows"] = positives;
  j["train_negative_rows"] = negatives;
  const auto& c = validation.classification;
  j["validation"] = {{"sequences", validation.sequences},
                     {"loss", validation.loss},
                     {"accuracy", c.accuracy()},
                     {"precision", c.precision()},
                     {"recall", c.recall()},
                     {"tp", c.tp},
                     {"fp", c.fp},
                     {"tn", c.tn},
                     {"fn", c.fn}};
  j["standardizer"] = {{"mean", standardizer.mean}, {"scale", standardizer.scale}};
  return j.dump(2);
}

EvalMetrics evaluate_scorer(const Scorer<float>& scorer, const TraceSet& set, std::size_t stride,
                            long warmup, double threshold) {
  EvalMetrics m;
  if (stride == 0) stride = 1;
  const std::size_t k = scorer.config().seq_len;
  std::vector<SeqInput<float>> chunk;
  double loss_sum = 0.0;
  auto flush = [&] {
    if (chunk.empty()) return;
    std::vector<const SeqInput<float>*> ptrs;
    for (const auto& c : chunk) ptrs.push_back(&c);
    loss_sum += static_cast<double>(scorer.loss(ptrs)) * static_cast<double>(chunk.size());
    const auto z = scorer.logits(ptrs);
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      const double p = 1.0 / (1.0 + std::exp(-static_cast<double>(z[i])));
      const bool pred = p < threshold;
      const bool actual = chunk[i].target < 0.5f;
      if (pred)
        ++(actual ? m.classification.tp : m.classification.fp);
      else
        ++(actual ? m.classification.fn : m.classification.tn);
    }
    m.sequences += chunk.size();
    chunk.clear();
  };
  for (const auto& s : set.series()) {
    for (std::size_t e = 0; e < s.vectors.size(); ++e) {
      const long interval = s.first_interval + static_cast<long>(e);
      if (interval < warmup || static_cast<std::size_t>(interval) % stride != 0) continue;
      chunk.push_back(make_input(s, e, k));
      if (chunk.size() == 64) flush();
    }
  }
  flush();
  if (m.sequences) m.loss = loss_sum / static_cast<double>(m.sequences);
  return m;
}

ScorerModel train_scorer(const TraceSet& train, const TraceSet& validation,
                         const TrainParams& p, TrainingReport& report, const TrainLog& log) {
  p.config.validate();
  if (p.batch == 0 || p.epochs <= 0) throw TrainingError("batch size and epochs must be positive");
  std::vector<SampleRef> pos, neg;
  const auto& series = train.series();
  for (std::size_t s = 0; s < series.size(); ++s)
    for (std::size_t e = 0; e < series[s].vectors.size(); ++e)
      (series[s].compromised[e] ? pos : neg)
          .push_back({static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(e)});
  if (pos.empty() || neg.empty())
    throw TrainingError("training traces contain a single class (" + std::to_string(pos.size()) +
                        " compromised, " + std::to_string(neg.size()) + " benign rows)");

  report.train_seeds = train.seeds();
  report.val_seeds = validation.seeds();
  report.train_rows = train.rows();
  report.val_rows = validation.rows();
  report.positives = pos.size();
  report.negatives = neg.size();
  report.standardizer = fit_standardizer(train);

  RngStream init(p.seed, "training-init");
  ScorerModel model = ScorerModel::initialized(p.config, init);
  model.standardizer = report.standardizer;
  Scorer<float> scorer(model);
  auto& w = scorer.params();
  std::vector<float> m(w.size(), 0.0f), v(w.size(), 0.0f), grad;

  RngStream order(p.seed, "training-order");
  const std::size_t steps_per_epoch = std::max<std::size_t>(1, p.samples_per_epoch / p.batch);
  const std::size_t total_steps = steps_per_epoch * static_cast<std::size_t>(p.epochs);
  std::size_t step = 0;
  std::vector<SeqInput<float>> batch(p.batch);
  std::vector<const SeqInput<float>*> ptrs(p.batch);
  for (std::size_t i = 0; i < p.batch; ++i) ptrs[i] = &batch[i];

  for (int epoch = 0; epoch < p.epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (std::size_t it = 0; it < steps_per_epoch; ++it, ++step) {
      for (std::size_t i = 0; i < p.batch; ++i) {
        SampleRef ref;
        if (p.balanced_batches) {
          const auto& pool = (i % 2 == 0) ? pos : neg;
          ref = pool[order.below(pool.size())];
        } else {
          const std::size_t r = order.below(pos.size() + neg.size());
          ref = r < pos.size() ? pos[r] : neg[r - pos.size()];
        }
        batch[i] = make_input(series[ref.series], ref.end, p.config.seq_len);
      }
      const float loss = scorer.loss_and_grad(ptrs, grad);
      if (!std::isfinite(loss))
        throw TrainingError("training diverged: non-finite loss at step " + std::to_string(step));
      epoch_loss += loss;

      double norm2 = 0.0;
      for (float g : grad) norm2 += static_cast<double>(g) * g;
      const double norm = std::sqrt(norm2);
      const double clip = (p.clip_norm > 0 && norm > p.clip_norm) ? p.clip_norm / norm : 1.0;

      double lr = p.lr;
      if (step < p.warmup_steps) {
        lr *= static_cast<double>(step + 1) / static_cast<double>(p.warmup_steps);
      } else if (total_steps > p.warmup_steps) {
        const double t = static_cast<double>(step - p.warmup_steps) /
                         static_cast<double>(total_steps - p.warmup_steps);
        lr *= p.final_lr_frac + (1.0 - p.final_lr_frac) * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
      }
      const double bc1 = 1.0 - std::pow(p.beta1, static_cast<double>(step + 1));
      const double bc2 = 1.0 - std::pow(p.beta2, static_cast<double>(step + 1));
      const float b1 = static_cast<float>(p.beta1), b2 = static_cast<float>(p.beta2);
      const float a = static_cast<float>(lr / bc1);
      const float sb2 = static_cast<float>(1.0 / std::sqrt(bc2));
      const float eps = static_cast<float>(p.eps);
      for (std::size_t i = 0; i < w.size(); ++i) {
        const float g = static_cast<float>(grad[i] * clip);
        m[i] = b1 * m[i] + (1.0f - b1) * g;
        v[i] = b2 * v[i] + (1.0f - b2) * g * g;
        w[i] -= a * m[i] / (std::sqrt(v[i]) * sb2 + eps);
      }
    }
    report.epoch_loss.push_back(epoch_loss / static_cast<double>(steps_per_epoch));
    if (log) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "epoch %d/%d loss %.5f", epoch + 1, p.epochs,
                    report.epoch_loss.back());
      log(buf);
    }
  }
  for (float x : w)
    if (!std::isfinite(x)) throw TrainingError("training diverged: non-finite parameter");

  if (!validation.empty())
    report.validation = evaluate_scorer(scorer, validation, p.val_stride, p.val_warmup, p.threshold);
  return scorer.to_model();
}

ScorerModel train_scorer(const TraceSet& all, const TrainParams& params, TrainingReport& report,
                         const TrainLog& log) {
  auto [train, val] = split_by_seed(all, params.val_fraction);
  return train_scorer(train, val, params, report, log);
}

}  // namespace uwt
