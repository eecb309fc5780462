#include "uwt/harness/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <stdexcept>
#include <unordered_set>

namespace uwt {

double Classification::accuracy() const {
  return total() == 0 ? 0.0 : static_cast<double>(tp + tn) / static_cast<double>(total());
}

double Classification::precision() const {
  if (tp + fp == 0) return tp + fn == 0 ? 1.0 : 0.0;
  return static_cast<double>(tp) / static_cast<double>(tp + fp);
}

double Classification::recall() const {
  if (tp + fn == 0) return 1.0;
  return static_cast<double>(tp) / static_cast<double>(tp + fn);
}

Classification& Classification::operator+=(const Classification& o) {
  tp += o.tp;
  fp += o.fp;
  tn += o.tn;
  fn += o.fn;
  return *this;
}

Classification classify_interval(const std::vector<bool>& predicted,
                                 const std::vector<bool>& actual) {
  if (predicted.size() != actual.size())
    throw std::invalid_argument("prediction and label vectors differ in length");
  Classification c;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i])
      ++(actual[i] ? c.tp : c.fp);
    else
      ++(actual[i] ? c.fn : c.tn);
  }
  return c;
}

std::optional<double> compute_pdr(std::uint64_t originated, std::uint64_t delivered) {
  if (originated == 0) return std::nullopt;
  if (delivered > originated) throw std::logic_error("more deliveries than originated packets");
  return static_cast<double>(delivered) / static_cast<double>(originated);
}

std::optional<double> compute_pdr(const std::vector<PacketRecord>& log) {
  std::unordered_set<MessageId> sent, got;
  for (const auto& r : log) {
    if (r.kind != PacketKind::SensorData || r.replay) continue;
    if (r.src == r.origin) sent.insert(r.message_id);
    if (r.delivered_at && r.dst == r.final_dst) got.insert(r.message_id);
  }
  return compute_pdr(sent.size(), got.size());
}

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows) {
  auto opt = [](const std::optional<double>& v) { return v ? format_real(*v) : std::string(); };
  out << kMetricsHeader << '\n';
  for (const auto& r : rows) {
    out << r.run_id << ',' << r.seed << ',' << r.interval_index << ',' << r.mode << ','
        << opt(r.accuracy) << ',' << opt(r.precision) << ',' << opt(r.recall) << ','
        << format_real(r.mean_residual_energy_J) << ',' << opt(r.pdr_cumulative) << ','
        << r.flagged_count << ',' << r.excluded_count << ',' << r.isolated_count << ','
        << r.false_positive_count << '\n';
  }
}

std::vector<MetricsRow> read_metrics_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader)
    throw std::runtime_error("metrics CSV header mismatch");
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    for (;;) {
      const std::size_t c = line.find(',', start);
      f.push_back(line.substr(start, c - start));
      if (c == std::string::npos) break;
      start = c + 1;
    }
    if (f.size() != 13) throw std::runtime_error("metrics CSV row has wrong field count");
    auto opt = [](const std::string& s) -> std::optional<double> {
      if (s.empty()) return std::nullopt;
      return std::stod(s);
    };
    MetricsRow r;
    r.run_id = f[0];
    r.seed = std::stoull(f[1]);
    r.interval_index = std::stol(f[2]);
    r.mode = f[3];
    r.accuracy = opt(f[4]);
    r.precision = opt(f[5]);
    r.recall = opt(f[6]);
    r.mean_residual_energy_J = std::stod(f[7]);
    r.pdr_cumulative = opt(f[8]);
    r.flagged_count = std::stoull(f[9]);
    r.excluded_count = std::stoull(f[10]);
    r.isolated_count = std::stoull(f[11]);
    r.false_positive_count = std::stoull(f[12]);
    rows.push_back(std::move(r));
  }
  return rows;
}

double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

MeanStd mean_std(const std::vector<double>& v) {
  MeanStd r;
  r.n = v.size();
  if (v.empty()) return r;
  double s = 0.0;
  for (double x : v) s += x;
  r.mean = s / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - r.mean) * (x - r.mean);
    r.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return r;
}

}  // namespace uwt
