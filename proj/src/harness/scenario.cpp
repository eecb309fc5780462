#include "uwt/harness/scenario.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <type_traits>

namespace uwt {

using nlohmann::json;

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::Interrogator: return "interrogator";
    case Mode::Bayesian: return "bayesian";
    case Mode::Static: return "static";
  }
  return "unknown";
}

std::optional<Mode> parse_mode(std::string_view s) {
  for (Mode m : {Mode::Interrogator, Mode::Bayesian, Mode::Static})
    if (to_string(m) == s) return m;
  return std::nullopt;
}

long ScenarioConfig::intervals() const {
  return static_cast<long>(std::floor(mission_duration_s / monitoring.interval_s + 1e-9));
}

void ScenarioConfig::validate() const {
  const auto& d = deployment;
  if (d.n_gateways < 1) throw ConfigError("at least one gateway is required");
  if (d.n_gateways + d.n_auvs > d.n_agents)
    throw ConfigError("gateways plus AUVs exceed the agent count");
  if (d.n_interrogator_hosts < 1 || d.n_interrogator_hosts > d.n_gateways + d.n_auvs)
    throw ConfigError("interrogator hosts are drawn from gateways and AUVs");
  if (!(d.sensor_depth_min_m >= 0 && d.sensor_depth_min_m <= d.sensor_depth_max_m))
    throw ConfigError("sensor depth range is inverted");
  if (!(mobility.width_m > 0 && mobility.height_m > 0)) throw ConfigError("area must be positive");
  if (!(mobility.speed_min_mps > 0 && mobility.speed_min_mps <= mobility.speed_max_mps))
    throw ConfigError("AUV speed range is invalid");
  channel.validate();
  energy.validate();
  trust.validate();
  adversary.validate();
  if (!(enforcement.throttle_factor >= 0 && enforcement.throttle_factor <= 1))
    throw ConfigError("throttle factor must lie in [0, 1]");
  if (consortium.validators < 1) throw ConfigError("at least one validator is required");
  const auto& t = traffic;
  if (!(t.slot_s > 0 && t.sensor_period_s >= t.slot_s)) throw ConfigError("traffic slot invalid");
  if (!(t.coordination_period_s == 0 || t.coordination_period_s >= t.slot_s))
    throw ConfigError("coordination period shorter than a traffic slot");
  if (t.sensor_bits == 0 || t.coordination_bits == 0 || t.summary_bits == 0)
    throw ConfigError("packet sizes must be positive");
  const auto& m = monitoring;
  if (!(m.interval_s > 0 && mission_duration_s >= m.interval_s))
    throw ConfigError("mission must cover at least one monitoring interval");
  if (m.warmup_intervals < 0 || m.normal_stride < 1) throw ConfigError("monitoring counts invalid");
  if (!(m.secondary_miss_prob >= 0 && m.secondary_miss_prob < 1))
    throw ConfigError("secondary miss probability must lie in [0, 1)");
  if (!(m.consensus_period_s > 0 && m.mobility_tick_s > 0)) throw ConfigError("tick periods invalid");
  if (!(m.norm_volume >= 0 && m.norm_churn >= 0)) throw ConfigError("norms must be >= 0");
  if (!(m.duty_floor > 0 && m.duty_floor <= 1)) throw ConfigError("duty floor must lie in (0, 1]");
}

namespace {

// Reads fields from a JSON object, remembering which keys were consumed so
// anything left over can be reported.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  template <typename T>
  void operator()(const std::string& key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    const json& v = *it;
    const std::string at = path_.empty() ? key : path_ + "." + key;
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(at + " must be a boolean");
      out = v.get<bool>();
    } else if constexpr (std::is_same_v<T, Mode>) {
      auto m = v.is_string() ? parse_mode(v.get<std::string>()) : std::nullopt;
      if (!m) throw ConfigError(at + " must be one of interrogator, bayesian, static");
      out = *m;
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(at + " must be a string");
      out = v.get<std::string>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError(at + " must be an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (!v.is_number_unsigned()) throw ConfigError(at + " must be non-negative");
        out = static_cast<T>(v.get<std::uint64_t>());
      } else {
        out = static_cast<T>(v.get<std::int64_t>());
      }
    } else {
      if (!v.is_number()) throw ConfigError(at + " must be a number");
      out = v.get<double>();
    }
  }

  template <typename F>
  void section(const std::string& key, F&& f) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    Reader sub(*it, path_.empty() ? key : path_ + "." + key);
    f(sub);
    sub.finish();
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key()))
        throw ConfigError("unknown key '" + it.key() + "' in " + where());
  }

 private:
  std::string where() const { return path_.empty() ? "scenario" : "section '" + path_ + "'"; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

class Writer {
 public:
  explicit Writer(json& j) : j_(j) { j_ = json::object(); }

  template <typename T>
  void operator()(const std::string& key, T& v) {
    if constexpr (std::is_same_v<T, Mode>)
      j_[key] = std::string(to_string(v));
    else
      j_[key] = v;
  }

  template <typename F>
  void section(const std::string& key, F&& f) {
    Writer sub(j_[key]);
    f(sub);
  }

 private:
  json& j_;
};

template <typename V>
void visit(ScenarioConfig& c, V& v) {
  v.section("deployment", [&](auto& s) {
    auto& d = c.deployment;
    s("n_agents", d.n_agents);
    s("n_gateways", d.n_gateways);
    s("n_auvs", d.n_auvs);
    s("n_interrogator_hosts", d.n_interrogator_hosts);
    s("sensor_depth_min_m", d.sensor_depth_min_m);
    s("sensor_depth_max_m", d.sensor_depth_max_m);
  });
  v.section("mobility", [&](auto& s) {
    auto& m = c.mobility;
    s("width_m", m.width_m);
    s("height_m", m.height_m);
    s("auv_depth_min_m", m.auv_depth_min_m);
    s("auv_depth_max_m", m.auv_depth_max_m);
    s("speed_min_mps", m.speed_min_mps);
    s("speed_max_mps", m.speed_max_mps);
  });
  v.section("channel", [&](auto& s) {
    auto& ch = c.channel;
    s("rate_bps", ch.rate_bps);
    s("prop_delay_s_per_km", ch.prop_delay_s_per_km);
    s("base_loss_prob", ch.base_loss_prob);
    s("loss_per_km", ch.loss_per_km);
    s("comm_range_m", ch.comm_range_m);
    s("max_retries", ch.max_retries);
    s("retry_backoff_s", ch.retry_backoff_s);
    s("buffer_expiry_s", ch.buffer_expiry_s);
    s("max_hops", ch.max_hops);
  });
  v.section("energy", [&](auto& s) {
    auto& e = c.energy;
    s("e_elec", e.e_elec);
    s("eps_amp", e.eps_amp);
    s("path_loss_k", e.path_loss_k);
    s("e_sense", e.e_sense);
    s("e_compute", e.e_compute);
    s("e_compute_interrogator", e.e_compute_interrogator);
    s("initial_sensor", e.initial_sensor);
    s("initial_auv", e.initial_auv);
    s("initial_gateway", e.initial_gateway);
  });
  v.section("trust", [&](auto& s) {
    auto& t = c.trust;
    s("alpha", t.alpha);
    s("tau_min", t.tau_min);
    s("tau_hard", t.tau_hard);
    s("persistence_p", t.persistence_p);
    s("recovery_r", t.recovery_r);
    s("initial_tau", t.initial_tau);
  });
  v.section("adversary", [&](auto& s) {
    auto& a = c.adversary;
    s("fraction", a.fraction);
    s.section("mix", [&](auto& m) {
      for (std::size_t k = 0; k < kAttackKindCount; ++k)
        m(std::string(to_string(static_cast<AttackKind>(k))), a.mix[k]);
    });
    s("activation_min_frac", a.activation_min_frac);
    s("activation_max_frac", a.activation_max_frac);
    s("drop_intensity", a.drop_intensity);
    s("route_intensity", a.route_intensity);
    s("burst_intensity", a.burst_intensity);
    s("replay_intensity", a.replay_intensity);
    s("insider_drop_intensity", a.insider_drop_intensity);
    s("allow_privileged", a.allow_privileged);
    s("colocate_insiders", a.colocate_insiders);
  });
  v.section("enforcement", [&](auto& s) {
    auto& e = c.enforcement;
    s("throttle_factor", e.throttle_factor);
    s("auto_recovery", e.auto_recovery);
    s("cross_validation", e.cross_validation);
  });
  v.section("consortium", [&](auto& s) {
    auto& p = c.consortium;
    s("validators", p.validators);
    s("link_latency_s", p.link_latency_s);
    s("link_jitter_s", p.link_jitter_s);
    s("view_timeout_s", p.view_timeout_s);
    s("max_commits_per_block", p.max_commits_per_block);
  });
  v.section("traffic", [&](auto& s) {
    auto& t = c.traffic;
    s("sensor_period_s", t.sensor_period_s);
    s("sensor_bits", t.sensor_bits);
    s("coordination_period_s", t.coordination_period_s);
    s("coordination_bits", t.coordination_bits);
    s("summary_bits", t.summary_bits);
    s("slot_s", t.slot_s);
  });
  v.section("monitoring", [&](auto& s) {
    auto& m = c.monitoring;
    s("interval_s", m.interval_s);
    s("warmup_intervals", m.warmup_intervals);
    s("normal_stride", m.normal_stride);
    s("secondary_range_m", m.secondary_range_m);
    s("secondary_miss_prob", m.secondary_miss_prob);
    s("consensus_period_s", m.consensus_period_s);
    s("delta_commit_threshold", m.delta_commit_threshold);
    s("mobility_tick_s", m.mobility_tick_s);
    s("norm_volume", m.norm_volume);
    s("norm_churn", m.norm_churn);
    s("duty_floor", m.duty_floor);
    s("enforcement", m.enforcement);
  });
  v("mode", c.mode);
  v("mission_duration_s", c.mission_duration_s);
  v("model_path", c.model_path);
  v("calibration_seed", c.calibration_seed);
}

}  // namespace

ScenarioConfig parse_scenario(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("scenario is not valid JSON: ") + e.what());
  }
  ScenarioConfig cfg;
  Reader r(j, "");
  visit(cfg, r);
  r.finish();
  try {
    cfg.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open scenario " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

json scenario_json(const ScenarioConfig& cfg) {
  ScenarioConfig copy = cfg;
  json j;
  Writer w(j);
  visit(copy, w);
  return j;
}

}  // namespace uwt
