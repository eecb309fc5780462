#include "uwt/harness/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace uwt {

using nlohmann::json;

std::string make_run_id(Mode mode, std::uint64_t seed) {
  return std::string(to_string(mode)) + "-" + std::to_string(seed);
}

std::vector<AgentState> deploy_agents(const ScenarioConfig& cfg, RngStream& rng) {
  const auto& d = cfg.deployment;
  const auto& m = cfg.mobility;
  std::vector<AgentState> agents(d.n_agents);
  for (std::size_t i = 0; i < d.n_agents; ++i) {
    AgentState& a = agents[i];
    a.id = static_cast<AgentId>(i);
    if (i < d.n_gateways) {
      a.kind = AgentKind::SurfaceGateway;
      a.position = Vec3{m.width_m * static_cast<double>(i + 1) / static_cast<double>(d.n_gateways + 1),
                        m.height_m, 0.0};
      a.initial_energy = cfg.energy.initial_gateway;
    } else if (i < d.n_gateways + d.n_auvs) {
      a.kind = AgentKind::MobileAUV;
      a.position = Vec3{rng.uniform(0.0, m.width_m), rng.uniform(0.0, m.height_m),
                        rng.uniform(m.auv_depth_min_m, m.auv_depth_max_m)};
      draw_waypoint(a, m, rng);
      a.initial_energy = cfg.energy.initial_auv;
    } else {
      a.kind = AgentKind::StaticSensor;
      a.position = Vec3{rng.uniform(0.0, m.width_m), rng.uniform(0.0, m.height_m),
                        rng.uniform(d.sensor_depth_min_m, d.sensor_depth_max_m)};
      a.initial_energy = cfg.energy.initial_sensor;
    }
    a.residual_energy = a.initial_energy;
    a.interrogator_host = i < d.n_interrogator_hosts;
  }
  return agents;
}

Simulation::Simulation(const ScenarioConfig& cfg, std::uint64_t seed, const Scorer<float>* scorer,
                       SimulationOptions options)
    : cfg_(cfg),
      seed_(seed),
      scorer_(scorer),
      opt_(options),
      engine_(RunConfig{seed, SimTime{cfg.mission_duration_s}}),
      n_(cfg.deployment.n_agents) {
  cfg_.validate();
  auto& mon = cfg_.monitoring;
  if (!(mon.norm_volume > 0)) throw ConfigError("norm_volume must be resolved before a run");
  if (mon.norm_churn <= 0) mon.norm_churn = static_cast<double>(n_) / 10.0;
  if (cfg_.mode == Mode::Interrogator && !scorer_)
    throw ConfigError("interrogator mode requires a scorer model");

  RngStream deploy = engine_.rng_stream("deployment");
  auto agents = deploy_agents(cfg_, deploy);
  RngStream assign = engine_.rng_stream("adversary");
  auto assignment =
      assign_compromised(agents, cfg_.adversary, SimTime{cfg_.mission_duration_s}, assign);
  adversary_ =
      std::make_unique<Adversary>(std::move(assignment), cfg_.adversary, engine_.rng_stream("attack"));
  for (const auto& a : agents) {
    if (a.kind == AgentKind::SurfaceGateway)
      gateways_.push_back(a.id);
    else
      monitored_.push_back(a.id);
    if (a.interrogator_host) hosts_.push_back(a.id);
  }
  network_ = std::make_unique<Network>(engine_, std::move(agents), cfg_.channel, cfg_.energy,
                                       static_cast<NetworkHooks&>(*this));
  consortium_ = std::make_unique<Consortium>(engine_, cfg_.consortium);
  consortium_->on_commit([this](const LedgerBlock& b) { on_block(b); });

  const FeatureNorms norms{mon.norm_volume, mon.norm_churn};
  primary_ = std::make_unique<FeatureExtractor>(n_, norms, mon.interval_s);
  secondary_ = std::make_unique<FeatureExtractor>(
      n_, norms, mon.interval_s,
      Vantage{engine_.rng_stream("secondary-vantage").key(), mon.secondary_miss_prob});
  seq_primary_ = std::make_unique<SequenceBuffer>(n_);
  seq_secondary_ = std::make_unique<SequenceBuffer>(n_);
  outcome_key_ = engine_.rng_stream("secondary-outcomes").key();
  traffic_rng_ = engine_.rng_stream("traffic");
  mobility_rng_ = engine_.rng_stream("mobility");

  const auto& tr = cfg_.traffic;
  const long per_sensor = std::max(1L, std::lround(tr.sensor_period_s / tr.slot_s));
  const long per_coord =
      tr.coordination_period_s > 0 ? std::max(1L, std::lround(tr.coordination_period_s / tr.slot_s)) : 1;
  sensor_phase_.resize(n_);
  coord_phase_.resize(n_);
  for (std::size_t a = 0; a < n_; ++a) {
    sensor_phase_[a] = static_cast<long>(traffic_rng_.below(static_cast<std::uint64_t>(per_sensor)));
    coord_phase_[a] = static_cast<long>(traffic_rng_.below(static_cast<std::uint64_t>(per_coord)));
  }

  credit_.assign(n_, 0.0);
  const double tau0 = cfg_.mode == Mode::Static ? static_trust(0) : cfg_.trust.initial_tau;
  records_.resize(n_);
  enf_.resize(n_);
  beta_primary_.resize(n_);
  beta_secondary_.resize(n_);
  for (std::size_t a = 0; a < n_; ++a) {
    records_[a].agent = static_cast<AgentId>(a);
    records_[a].tau = records_[a].raw_score = tau0;
    enf_[a].agent = static_cast<AgentId>(a);
    beta_primary_[a].agent = beta_secondary_[a].agent = static_cast<AgentId>(a);
  }
  committed_tau_.assign(n_, tau0);
  relayed_.assign(n_, false);
  awaiting_isolation_.assign(n_, false);
  isolation_ready_.assign(n_, false);
  awaiting_reinstatement_.assign(n_, false);
  reinstatement_ready_.assign(n_, false);
  isolation_height_.assign(n_, std::nullopt);
  first_flag_.assign(n_, std::nullopt);

  out_.run_id = make_run_id(cfg_.mode, seed_);
  out_.seed = seed_;
  out_.mode = cfg_.mode;
}

Simulation::~Simulation() = default;

bool Simulation::drop_relay(AgentId holder, const Transit& t) {
  return adversary_->drop_relay(holder, t, engine_.now());
}

std::optional<AgentId> Simulation::choose_next_hop(AgentId holder, const Transit& t,
                                                   std::optional<AgentId> greedy) {
  return adversary_->choose_next_hop(network_->agents(), holder, t, greedy, network_->excluded(),
                                     engine_.now());
}

void Simulation::on_transmit(const PacketRecord& r) {
  const auto p = ObservedPacket::from(r);
  primary_->observe_transmit(p);
  secondary_->observe_transmit(p);
  if (r.src != r.origin) relayed_[r.src] = true;
}

void Simulation::on_arrival(const PacketRecord& r) {
  const auto p = ObservedPacket::from(r);
  primary_->observe_arrival(p);
  secondary_->observe_arrival(p);
  if (r.replay || r.kind != PacketKind::SensorData || r.dst != r.final_dst) return;
  if (r.message_id < mission_msg_.size() && mission_msg_[r.message_id] &&
      !mission_done_[r.message_id]) {
    mission_done_[r.message_id] = true;
    ++mission_delivered_;
  }
}

void Simulation::on_relay_outcome(AgentId relay, bool positive) {
  const Outcome o = positive ? Outcome::Positive : Outcome::Negative;
  beta_primary_[relay] = beta_update(beta_primary_[relay], o);
  if (hash_uniform(outcome_key_, outcome_counter_++) >= cfg_.monitoring.secondary_miss_prob)
    beta_secondary_[relay] = beta_update(beta_secondary_[relay], o);
}

void Simulation::schedule_all() {
  const auto& mon = cfg_.monitoring;
  const double mission = cfg_.mission_duration_s;
  engine_.schedule(SimTime{0.0}, EventKind::TrafficTick, [this] { traffic_slot(0); });
  if (mon.mobility_tick_s <= mission)
    engine_.schedule(SimTime{mon.mobility_tick_s}, EventKind::MobilityTick,
                     [this] { mobility_tick(1); });
  engine_.schedule(SimTime{mon.interval_s}, EventKind::WindowClose, [this] { close_interval(0); });
  if (mon.consensus_period_s <= mission)
    engine_.schedule(SimTime{mon.consensus_period_s}, EventKind::ConsensusTick,
                     [this] { consensus_tick(1); });
}

void Simulation::mobility_tick(long i) {
  const double dt = cfg_.monitoring.mobility_tick_s;
  network_->mobility_step(dt, cfg_.mobility, mobility_rng_);
  const double next = static_cast<double>(i + 1) * dt;
  if (next <= cfg_.mission_duration_s)
    engine_.schedule(SimTime{next}, EventKind::MobilityTick, [this, i] { mobility_tick(i + 1); });
}

bool Simulation::admit(AgentId a) {
  if (network_->isolated(a)) return false;
  const double f = enf_[a].throttle_factor;
  if (f >= 1.0) return true;
  credit_[a] += f;
  if (credit_[a] >= 1.0 - 1e-9) {
    credit_[a] -= 1.0;
    return true;
  }
  return false;
}

void Simulation::traffic_slot(long slot) {
  const SimTime now = engine_.now();
  const auto& tr = cfg_.traffic;
  const auto& mon = cfg_.monitoring;
  const long per_sensor = std::max(1L, std::lround(tr.sensor_period_s / tr.slot_s));
  const bool coord = tr.coordination_period_s > 0;
  const long per_coord = coord ? std::max(1L, std::lround(tr.coordination_period_s / tr.slot_s)) : 1;

  for (AgentId a : monitored_) {
    // Draws from the traffic stream happen for every agent in every mode so
    // paired runs see the same offered load.
    std::optional<AgentId> peer;
    if (coord && slot % per_coord == coord_phase_[a] && monitored_.size() > 1) {
      auto j = traffic_rng_.below(monitored_.size() - 1);
      AgentId p = monitored_[j];
      if (p == a) p = monitored_.back();
      peer = p;
    }
    const AgentState& st = network_->agents()[a];
    if (!st.alive) continue;
    network_->charge(a, EnergyComponents{cfg_.energy.e_sense * st.duty_cycle, 0.0, 0.0});

    if (slot % per_sensor == sensor_phase_[a] && admit(a)) {
      const MessageId mid =
          network_->originate(a, network_->nearest_gateway(a), PacketKind::SensorData, tr.sensor_bits);
      if (mission_msg_.size() <= mid) {
        mission_msg_.resize(mid + 1, false);
        mission_done_.resize(mid + 1, false);
      }
      mission_msg_[mid] = true;
      ++mission_originated_;
    }
    const double mult = adversary_->traffic_multiplier(a, now);
    if (mult > 1.0 && adversary_->rng().bernoulli((mult - 1.0) * tr.slot_s / tr.sensor_period_s) &&
        admit(a))
      network_->originate(a, network_->nearest_gateway(a), PacketKind::SensorData, tr.sensor_bits);
    const double replay = adversary_->replay_rate(a, now);
    if (replay > 0.0 &&
        adversary_->rng().bernoulli(std::min(1.0, replay * tr.slot_s / mon.interval_s)))
      network_->replay(a, adversary_->rng());
    if (peer && admit(a))
      network_->originate(a, *peer, PacketKind::RoutingControl, tr.coordination_bits);
  }

  const double next = static_cast<double>(slot + 1) * tr.slot_s;
  if (next < cfg_.mission_duration_s)
    engine_.schedule(SimTime{next}, EventKind::TrafficTick, [this, slot] { traffic_slot(slot + 1); });
}

std::optional<AgentId> Simulation::host_for(AgentId a, std::optional<AgentId> skip) const {
  const auto& agents = network_->agents();
  std::optional<AgentId> best;
  double best_d = std::numeric_limits<double>::infinity();
  for (AgentId h : hosts_) {
    if (h == a || (skip && h == *skip) || !agents[h].alive) continue;
    const double d = distance(agents[h].position, agents[a].position);
    if (skip && d > cfg_.monitoring.secondary_range_m) continue;
    if (d < best_d) {
      best_d = d;
      best = h;
    }
  }
  return best;
}

bool Simulation::label(AgentId a, long k) const {
  const AttackProfile* p = adversary_->profile(a);
  return p && p->activation.seconds < static_cast<double>(k + 1) * cfg_.monitoring.interval_s;
}

void Simulation::close_interval(long k) {
  last_closed_ = k;
  if (k + 1 < cfg_.intervals())
    engine_.schedule(SimTime{static_cast<double>(k + 2) * cfg_.monitoring.interval_s},
                     EventKind::WindowClose, [this, k] { close_interval(k + 1); });
  const auto vp = primary_->close_window(k);
  const auto vs = secondary_->close_window(k);
  for (std::size_t a = 0; a < n_; ++a) {
    seq_primary_->push(static_cast<AgentId>(a), k, vp[a]);
    seq_secondary_->push(static_cast<AgentId>(a), k, vs[a]);
  }
  if (opt_.record_traces)
    for (AgentId a : monitored_) out_.traces.push_back(TraceRow{seed_, a, k, vp[a], label(a, k)});
  if (opt_.record_features) out_.features.push_back(vp);

  for (auto& st : network_->agents()) {
    if (!st.alive || st.initial_energy <= 0) continue;
    st.duty_cycle =
        std::clamp(st.residual_energy / st.initial_energy / 0.5, cfg_.monitoring.duty_floor, 1.0);
  }

  trust_step(k);
  if (cfg_.mode != Mode::Static && cfg_.monitoring.enforcement) enforce(k);

  const SimTime now = engine_.now();
  for (AgentId a : monitored_) {
    const AttackProfile* p = adversary_->profile(a);
    const TrustRecord& r = records_[a];
    if (p && !first_flag_[a] && now >= p->activation && r.tau < cfg_.trust.tau_min &&
        r.persistence_below >= cfg_.trust.persistence_p)
      first_flag_[a] = now.seconds;
  }
  record_metrics(k);
  std::fill(relayed_.begin(), relayed_.end(), false);
}

void Simulation::trust_step(long k) {
  if (cfg_.mode == Mode::Static) return;
  const auto& mon = cfg_.monitoring;
  const auto& agents = network_->agents();
  secondary_raw_.assign(n_, std::nullopt);

  struct Job {
    AgentId agent;
    AgentId host;
    bool secondary;
  };
  std::vector<Job> jobs;
  for (AgentId a : monitored_) {
    if (!agents[a].alive) continue;
    const auto host = host_for(a);
    if (!host) continue;
    const bool elevated = enf_[a].tier != Tier::Normal;
    if (cfg_.mode == Mode::Interrogator) {
      const bool due = elevated || relayed_[a] ||
                       (k + static_cast<long>(a)) % mon.normal_stride == 0;
      if (!due) continue;
    } else if (beta_primary_[a].s + beta_primary_[a].f == 0) {
      continue;
    }
    jobs.push_back(Job{a, *host, false});
    if (elevated)
      if (auto sec = host_for(a, *host)) jobs.push_back(Job{a, *sec, true});
  }

  std::vector<double> raw(jobs.size());
  if (cfg_.mode == Mode::Interrogator) {
    std::vector<FeatureSequence> seqs;
    seqs.reserve(jobs.size());
    for (const Job& j : jobs)
      seqs.push_back(j.secondary ? seq_secondary_->snapshot(j.agent)
                                 : seq_primary_->snapshot(j.agent));
    std::vector<const FeatureSequence*> ptrs;
    for (const auto& s : seqs) ptrs.push_back(&s);
    raw = scorer_->score_batch(ptrs);
  } else {
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      const auto& rep = jobs[i].secondary ? beta_secondary_[jobs[i].agent] : beta_primary_[jobs[i].agent];
      raw[i] = beta_trust(rep);
    }
  }

  const double cost =
      cfg_.mode == Mode::Interrogator ? cfg_.energy.e_compute_interrogator : cfg_.energy.e_compute;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const Job& j = jobs[i];
    network_->charge(j.host, EnergyComponents{0.0, cost, 0.0});
    ++out_.totals.scorings;
    const double r = std::clamp(raw[i], 0.0, 1.0);
    if (j.secondary)
      secondary_raw_[j.agent] = r;
    else
      records_[j.agent] = smooth_update(records_[j.agent], r, cfg_.trust);
  }
}

void Simulation::enforce(long k) {
  const SimTime now = engine_.now();
  const double interval_start = static_cast<double>(k) * cfg_.monitoring.interval_s;
  for (AgentId a : monitored_) {
    EnforcementInput in;
    in.secondary_raw = secondary_raw_.empty() ? std::nullopt : secondary_raw_[a];
    in.isolation_committed = isolation_ready_[a];
    in.reinstatement_committed = reinstatement_ready_[a];
    EnforcementActions act;
    const Tier before = enf_[a].tier;
    enf_[a] = enforce_transition(enf_[a], records_[a], cfg_.trust, cfg_.enforcement, in, now, act);
    records_[a].tier = enf_[a].tier;
    const bool truth = label(a, k);

    if (act.escalation_deferred) ++out_.totals.escalations_deferred;
    EnforcementEvent ev;
    ev.agent = a;
    ev.interval_index = k;
    ev.time = now.seconds;
    ev.from = before;
    ev.to = enf_[a].tier;
    ev.compromised = truth;
    if (act.exclude) {
      network_->set_excluded(a, true);
      credit_[a] = 0.0;
      ev.exclusion_latency = now.seconds - interval_start;
      ++out_.totals.tier2_entries;
      if (!truth) ++out_.totals.tier2_false_positives;
      auto& m = out_.totals.max_exclusion_latency_s;
      if (network_->excluded()[a]) m = std::max(m.value_or(0.0), *ev.exclusion_latency);
    }
    if (act.lift_exclusion) {
      network_->set_excluded(a, false);
      credit_[a] = 0.0;
    }
    if (act.isolate) {
      network_->set_isolated(a, true);
      ++out_.totals.isolations;
      ev.ledger_height = isolation_height_[a];
      if (!isolation_height_[a]) ++out_.totals.isolations_without_commit;
      awaiting_isolation_[a] = isolation_ready_[a] = false;
    }
    if (act.reinstate) {
      network_->set_isolated(a, false);
      network_->set_excluded(a, false);
      credit_[a] = 0.0;
      awaiting_reinstatement_[a] = reinstatement_ready_[a] = false;
    }
    if (before == Tier::LocallyConstrained && enf_[a].tier != Tier::LocallyConstrained &&
        enf_[a].tier != Tier::Isolated)
      awaiting_isolation_[a] = isolation_ready_[a] = false;

    const auto host = host_for(a);
    const AgentId reporter = host ? *host : gateways_.front();
    for (SecurityEvent e : act.queue) {
      consortium_->submit(TrustCommit::security(a, static_cast<std::uint32_t>(k), e, reporter));
      if (e == SecurityEvent::Isolated) {
        awaiting_isolation_[a] = true;
        isolation_ready_[a] = false;
        isolation_height_[a].reset();
      }
      if (e == SecurityEvent::Reinstated && enf_[a].tier == Tier::Isolated) {
        awaiting_reinstatement_[a] = true;
        reinstatement_ready_[a] = false;
      }
    }
    if (before != enf_[a].tier) out_.transitions.push_back(ev);
  }
}

void Simulation::on_block(const LedgerBlock& b) {
  for (const auto& c : b.commits) {
    if (c.agent >= n_) continue;
    if (c.event == SecurityEvent::Isolated && awaiting_isolation_[c.agent]) {
      isolation_ready_[c.agent] = true;
      isolation_height_[c.agent] = b.height;
    }
    if (c.event == SecurityEvent::Reinstated && awaiting_reinstatement_[c.agent])
      reinstatement_ready_[c.agent] = true;
  }
}

void Simulation::consensus_tick(long i) {
  const double next = static_cast<double>(i + 1) * cfg_.monitoring.consensus_period_s;
  if (next <= cfg_.mission_duration_s)
    engine_.schedule(SimTime{next}, EventKind::ConsensusTick, [this, i] { consensus_tick(i + 1); });
  if (cfg_.mode != Mode::Static) {
    const auto k = static_cast<std::uint32_t>(std::max(0L, last_closed_));
    for (AgentId a : monitored_) {
      const double d = records_[a].tau - committed_tau_[a];
      if (std::abs(d) < cfg_.monitoring.delta_commit_threshold) continue;
      const auto host = host_for(a);
      consortium_->submit(TrustCommit::delta(a, k, d, host ? *host : gateways_.front()));
      committed_tau_[a] = records_[a].tau;
    }
    for (AgentId h : hosts_) {
      const AgentState& st = network_->agents()[h];
      if (st.kind == AgentKind::SurfaceGateway || !st.alive || network_->isolated(h)) continue;
      network_->originate(h, network_->nearest_gateway(h), PacketKind::TrustSummary,
                          cfg_.traffic.summary_bits);
    }
  }
  consortium_->tick();
}

void Simulation::record_metrics(long k) {
  MetricsRow row;
  row.run_id = out_.run_id;
  row.seed = seed_;
  row.interval_index = k;
  row.mode = std::string(to_string(cfg_.mode));
  std::vector<bool> predicted, actual;
  for (AgentId a : monitored_) {
    const bool p = records_[a].tau < cfg_.trust.tau_min;
    const bool t = label(a, k);
    predicted.push_back(p);
    actual.push_back(t);
    row.flagged_count += p;
    row.false_positive_count += p && !t;
    row.excluded_count += network_->excluded()[a];
    row.isolated_count += network_->isolated(a);
  }
  if (k >= cfg_.monitoring.warmup_intervals) {
    const Classification c = classify_interval(predicted, actual);
    row.accuracy = c.accuracy();
    row.precision = c.precision();
    row.recall = c.recall();
    out_.totals.classification += c;
  }
  double e = 0.0;
  for (const auto& st : network_->agents()) e += st.residual_energy;
  row.mean_residual_energy_J = e / static_cast<double>(n_);
  row.pdr_cumulative = compute_pdr(mission_originated_, mission_delivered_);
  out_.rows.push_back(std::move(row));
}

json Simulation::manifest() const {
  json m;
  m["run_id"] = out_.run_id;
  m["seed"] = seed_;
  m["mode"] = std::string(to_string(cfg_.mode));
  m["scenario"] = scenario_json(cfg_);
  m["feature_norms"] = {{"norm_volume", cfg_.monitoring.norm_volume},
                        {"norm_churn", cfg_.monitoring.norm_churn}};
  m["gateways"] = gateways_;
  m["interrogator_hosts"] = hosts_;
  json attacks = json::array();
  for (const auto& [id, p] : adversary_->assignment().profiles)
    attacks.push_back({{"agent", id},
                       {"kind", std::string(to_string(p.kind))},
                       {"activation_s", p.activation.seconds},
                       {"intensity", p.intensity}});
  m["attack_schedule"] = std::move(attacks);
  if (scorer_) {
    m["scorer"] = {{"layers", scorer_->config().layers},
                   {"model_dim", scorer_->config().model_dim},
                   {"heads", scorer_->config().heads},
                   {"ff_dim", scorer_->config().ff_dim},
                   {"parameters", scorer_->config().parameter_count()}};
  }
  return m;
}

RunOutput Simulation::run() {
  schedule_all();
  const RunSummary summary = engine_.run_until(SimTime{cfg_.mission_duration_s});

  RunTotals& t = out_.totals;
  t.events_processed = summary.processed;
  t.mission_originated = mission_originated_;
  t.mission_delivered = mission_delivered_;
  t.pdr = compute_pdr(mission_originated_, mission_delivered_);
  double e = 0.0;
  for (const auto& st : network_->agents()) e += st.residual_energy;
  t.final_mean_residual_energy_J = e / static_cast<double>(n_);

  std::vector<double> latencies;
  for (AgentId a : monitored_) {
    DetectionOutcome o;
    o.agent = a;
    if (const AttackProfile* p = adversary_->profile(a)) {
      o.compromised = true;
      o.attack = std::string(to_string(p->kind));
      o.attack_activation = p->activation.seconds;
      o.first_flag_time = first_flag_[a];
      if (o.first_flag_time) {
        o.detection_latency = *o.first_flag_time - p->activation.seconds;
        latencies.push_back(*o.detection_latency);
      }
      ++t.compromised;
    }
    out_.outcomes.push_back(o);
  }
  t.detected = latencies.size();
  if (!latencies.empty()) t.median_detection_latency_s = median(latencies);

  out_.ledger = consortium_->reference_chain().blocks();
  t.blocks = out_.ledger.size();
  t.view_changes = consortium_->stats().view_changes;
  out_.manifest = manifest();
  return std::move(out_);
}

}  // namespace uwt
