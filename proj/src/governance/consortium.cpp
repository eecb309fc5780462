#include "uwt/governance/consortium.hpp"

#include <algorithm>
#include <stdexcept>

namespace uwt {

ValidatorSet ValidatorSet::of(std::size_t n) {
  if (n == 0) throw std::invalid_argument("validator set must not be empty");
  ValidatorSet s;
  s.n = n;
  s.f = (n - 1) / 3;
  s.quorum = (n + s.f + 1 + 1) / 2;
  return s;
}

std::string_view to_string(Fault f) {
  switch (f) {
    case Fault::Honest: return "honest";
    case Fault::Silent: return "silent";
    case Fault::Equivocator: return "equivocator";
  }
  return "unknown";
}

Consortium::Consortium(Engine& engine, ConsortiumParams params, std::vector<Fault> faults)
    : engine_(engine),
      params_(params),
      set_(ValidatorSet::of(params.validators)),
      faults_(std::move(faults)),
      nodes_(params.validators),
      rng_(engine.rng_stream("consensus")) {
  if (faults_.empty()) faults_.assign(set_.n, Fault::Honest);
  if (faults_.size() != set_.n) throw std::invalid_argument("fault vector size mismatch");
  if (!(params.link_latency_s > 0 && params.view_timeout_s > 0 && params.link_jitter_s >= 0))
    throw std::invalid_argument("consensus timing parameters must be positive");
}

void Consortium::submit(const TrustCommit& c) { mempool_.emplace_back(next_id_++, c); }

std::size_t Consortium::pending() const {
  std::size_t best = 0;
  for (std::size_t v = 0; v < set_.n; ++v)
    if (honest(v)) best = std::max(best, nodes_[v].included.size());
  return mempool_.size() - best;
}

const Ledger& Consortium::reference_chain() const {
  const Ledger* best = nullptr;
  for (std::size_t v = 0; v < set_.n; ++v)
    if (honest(v) && (!best || nodes_[v].chain.height() > best->height())) best = &nodes_[v].chain;
  if (!best) throw std::logic_error("no honest validator");
  return *best;
}

bool Consortium::idle() const {
  for (std::size_t v = 0; v < set_.n; ++v)
    if (honest(v) && nodes_[v].active) return false;
  return true;
}

void Consortium::send(std::size_t from, std::size_t to, Msg m) {
  stats_.messages += 1;
  if (m.kind == MsgKind::Prepare) sent_prepares_[{m.height, m.view, m.hash}].insert(from);
  if (m.kind == MsgKind::Commit) sent_commits_[{m.height, m.view, m.hash}].insert(from);
  if (m.kind == MsgKind::ViewChange) sent_view_changes_[{m.height, m.view}][from] = m.lock;
  double delay = params_.link_latency_s;
  if (params_.link_jitter_s > 0) delay += rng_.uniform(0.0, params_.link_jitter_s);
  engine_.schedule_in(delay, EventKind::ConsensusMessage,
                      [this, to, m = std::move(m)] { deliver(to, m); });
}

void Consortium::broadcast(std::size_t from, const Msg& m) {
  for (std::size_t to = 0; to < set_.n; ++to) send(from, to, m);
}

void Consortium::reset_height(Node& n) {
  n.active = false;
  n.view = 0;
  n.accepted.reset();
  n.accepted_block.reset();
  n.lock.reset();
  n.sent_commit = false;
  n.prepares.clear();
  n.commits.clear();
  n.commit_blocks.clear();
  n.view_changes.clear();
  n.proposed_in_view = false;
  if (n.timer) {
    engine_.cancel(*n.timer);
    n.timer.reset();
  }
}

void Consortium::append(std::size_t v, const LedgerBlock& b) {
  Node& n = nodes_[v];
  n.chain.append(b);
  auto ids = block_ids_.find(b.block_hash);
  if (ids != block_ids_.end()) n.included.insert(ids->second.begin(), ids->second.end());
  certified_.emplace(b.height, b);
  reset_height(n);
  if (honest(v) && announced_.insert(b.height).second) {
    stats_.blocks_committed += 1;
    if (!had_view_change_[b.height]) stats_.first_view_commits += 1;
    if (on_commit_) on_commit_(b);
  }
}

void Consortium::catch_up(std::size_t v) {
  Node& n = nodes_[v];
  for (auto it = certified_.find(n.chain.height()); it != certified_.end();
       it = certified_.find(n.chain.height()))
    append(v, it->second);
}

LedgerBlock Consortium::fresh_block(std::size_t v, std::int64_t salt) const {
  const Node& n = nodes_[v];
  std::vector<TrustCommit> commits;
  for (const auto& [id, c] : mempool_) {
    if (n.included.count(id)) continue;
    if (commits.size() >= params_.max_commits_per_block) break;
    commits.push_back(c);
  }
  return make_block(n.chain.height(), n.chain.head_hash(),
                    SimTime{engine_.now().seconds + static_cast<double>(salt) * 1e-6},
                    std::move(commits));
}

void Consortium::tick() {
  for (std::size_t v = 0; v < set_.n; ++v) {
    if (faults_[v] == Fault::Silent) continue;
    catch_up(v);
    Node& n = nodes_[v];
    bool work = false;
    for (const auto& e : mempool_)
      if (!n.included.count(e.first)) {
        work = true;
        break;
      }
    if (!work || n.active) continue;
    if (faults_[v] == Fault::Equivocator) {
      if (primary(n.chain.height(), 0) == v) propose(v);
      continue;
    }
    stats_.rounds_started += 1;
    start_round(v);
  }
}

void Consortium::start_round(std::size_t v) {
  Node& n = nodes_[v];
  n.active = true;
  arm_timer(v);
  if (primary(n.chain.height(), n.view) == v && !n.proposed_in_view) propose(v);
}

void Consortium::arm_timer(std::size_t v) {
  Node& n = nodes_[v];
  if (n.timer) engine_.cancel(*n.timer);
  const std::uint64_t h = n.chain.height(), view = n.view;
  n.timer = engine_.schedule_in(params_.view_timeout_s, EventKind::Timer,
                                [this, v, h, view] { timeout(v, h, view); });
}

bool Consortium::valid_lock(const Lock& l, std::uint64_t height) const {
  if (l.block.height != height || compute_block_hash(l.block) != l.block.block_hash) return false;
  auto it = sent_prepares_.find({height, l.view, l.block.block_hash});
  return it != sent_prepares_.end() && it->second.size() >= set_.quorum;
}

std::optional<Consortium::Lock> Consortium::highest_lock(
    std::uint64_t height, const std::map<std::size_t, std::optional<Lock>>& vcs,
    const std::vector<std::size_t>& who) const {
  std::optional<Lock> best;
  for (std::size_t s : who) {
    auto it = vcs.find(s);
    if (it == vcs.end() || !it->second || !valid_lock(*it->second, height)) continue;
    const Lock& l = *it->second;
    if (!best || l.view > best->view ||
        (l.view == best->view && l.block.block_hash < best->block.block_hash))
      best = l;
  }
  return best;
}

void Consortium::propose(std::size_t v) {
  Node& n = nodes_[v];
  n.proposed_in_view = true;
  const std::uint64_t h = n.chain.height();
  Msg m{MsgKind::PrePrepare, v, h, n.view, {}, std::nullopt, std::nullopt, {}};
  if (n.view > 0) {
    for (const auto& [s, lock] : n.view_changes[n.view]) {
      if (m.justification.size() == set_.quorum) break;
      m.justification.push_back(s);
    }
  }
  if (faults_[v] == Fault::Equivocator) {
    // Two conflicting proposals, one per half of the validator set.
    LedgerBlock a = fresh_block(v, 0), b = fresh_block(v, 1);
    for (const LedgerBlock* blk : {&a, &b})
      block_ids_[blk->block_hash] = [&] {
        std::vector<std::uint64_t> ids;
        for (const auto& e : mempool_)
          if (!n.included.count(e.first) && ids.size() < params_.max_commits_per_block)
            ids.push_back(e.first);
        return ids;
      }();
    for (std::size_t to = 0; to < set_.n; ++to) {
      Msg x = m;
      const LedgerBlock& blk = (to < set_.n / 2) ? a : b;
      x.hash = blk.block_hash;
      x.block = blk;
      send(v, to, std::move(x));
    }
    return;
  }
  LedgerBlock blk;
  std::optional<Lock> best;
  if (n.view > 0) best = highest_lock(h, n.view_changes[n.view], m.justification);
  if (best) {
    blk = best->block;
  } else {
    blk = fresh_block(v, 0);
    std::vector<std::uint64_t> ids;
    for (const auto& e : mempool_)
      if (!n.included.count(e.first) && ids.size() < params_.max_commits_per_block)
        ids.push_back(e.first);
    block_ids_[blk.block_hash] = std::move(ids);
  }
  m.hash = blk.block_hash;
  m.block = std::move(blk);
  broadcast(v, m);
}

bool Consortium::valid_block(const Node& n, const LedgerBlock& b) const {
  return b.height == n.chain.height() && b.prev_hash == n.chain.head_hash() &&
         compute_block_hash(b) == b.block_hash && block_ids_.count(b.block_hash);
}

void Consortium::deliver(std::size_t to, const Msg& m) {
  if (faults_[to] == Fault::Silent) return;
  catch_up(to);
  Node& n = nodes_[to];
  if (m.height != n.chain.height()) return;  // stale, or ahead of a lagging replica

  if (faults_[to] == Fault::Equivocator) {
    // Agrees with everything; sends commits only to a random subset.
    if (m.kind == MsgKind::PrePrepare && m.block) {
      broadcast(to, Msg{MsgKind::Prepare, to, m.height, m.view, m.hash, std::nullopt,
                        std::nullopt, {}});
      n.commit_blocks[{m.view, m.hash}] = *m.block;
    } else if (m.kind == MsgKind::Prepare) {
      auto& s = n.prepares[{m.view, m.hash}];
      s.insert(m.from);
      auto blk = n.commit_blocks.find({m.view, m.hash});
      if (s.size() == set_.quorum && blk != n.commit_blocks.end()) {
        for (std::size_t t = 0; t < set_.n; ++t)
          if (rng_.bernoulli(0.5))
            send(to, t, Msg{MsgKind::Commit, to, m.height, m.view, m.hash, blk->second,
                            std::nullopt, {}});
      }
    } else if (m.kind == MsgKind::ViewChange) {
      auto& vc = n.view_changes[m.view];
      if (!vc.count(to)) {
        vc[to] = std::nullopt;
        // Claims a lock on whatever it last saw, prepared or not.
        std::optional<Lock> claim;
        if (!n.commit_blocks.empty())
          claim = Lock{m.view > 0 ? m.view - 1 : 0, n.commit_blocks.rbegin()->second};
        broadcast(to, Msg{MsgKind::ViewChange, to, m.height, m.view, {}, std::nullopt, claim, {}});
      }
      vc[m.from] = m.lock;
      if (primary(m.height, m.view) == to && vc.size() >= set_.quorum &&
          !(n.view == m.view && n.proposed_in_view)) {
        n.view = m.view;
        n.proposed_in_view = false;
        propose(to);
      }
    }
    return;
  }

  if (!n.active) {
    n.active = true;
    arm_timer(to);
  }
  switch (m.kind) {
    case MsgKind::PrePrepare: on_preprepare(to, m); break;
    case MsgKind::Prepare: on_prepare(to, m); break;
    case MsgKind::Commit: on_commit_msg(to, m); break;
    case MsgKind::ViewChange: on_view_change(to, m); break;
  }
}

void Consortium::on_preprepare(std::size_t v, const Msg& m) {
  Node& n = nodes_[v];
  if (m.view != n.view || m.from != primary(m.height, m.view) || !m.block) return;
  if (n.accepted) return;  // at most one proposal per view; a second one is equivocation
  const LedgerBlock& b = *m.block;
  if (b.block_hash != m.hash || !valid_block(n, b)) return;
  if (m.view > 0) {
    std::set<std::size_t> who(m.justification.begin(), m.justification.end());
    if (who.size() < set_.quorum) return;
    std::map<std::size_t, std::optional<Lock>> claimed;
    for (std::size_t s : who) {
      auto it = sent_view_changes_.find({m.height, m.view});
      if (it == sent_view_changes_.end() || !it->second.count(s)) return;
      claimed[s] = it->second.at(s);
    }
    auto best = highest_lock(m.height, claimed, m.justification);
    if (best && best->block.block_hash != b.block_hash) return;
    if (!best && n.lock && n.lock->block.block_hash != b.block_hash) return;
  } else if (n.lock && n.lock->block.block_hash != b.block_hash) {
    return;
  }
  n.accepted = m.hash;
  n.accepted_block = b;
  broadcast(v, Msg{MsgKind::Prepare, v, m.height, m.view, m.hash, std::nullopt, std::nullopt, {}});
  try_prepared(v, m.view, m.hash);
}

void Consortium::on_prepare(std::size_t v, const Msg& m) {
  nodes_[v].prepares[{m.view, m.hash}].insert(m.from);
  try_prepared(v, m.view, m.hash);
}

void Consortium::try_prepared(std::size_t v, std::uint64_t view, const Digest& hash) {
  Node& n = nodes_[v];
  if (view != n.view || n.sent_commit || !n.accepted || *n.accepted != hash) return;
  if (n.prepares[{view, hash}].size() < set_.quorum) return;
  n.lock = Lock{view, *n.accepted_block};
  n.sent_commit = true;
  broadcast(v, Msg{MsgKind::Commit, v, n.chain.height(), view, hash, *n.accepted_block,
                   std::nullopt, {}});
}

void Consortium::on_commit_msg(std::size_t v, const Msg& m) {
  Node& n = nodes_[v];
  if (!m.block || m.block->block_hash != m.hash) return;
  n.commits[{m.view, m.hash}].insert(m.from);
  n.commit_blocks.emplace(std::make_pair(m.view, m.hash), *m.block);
  try_commit(v, m.view, m.hash);
}

void Consortium::try_commit(std::size_t v, std::uint64_t view, const Digest& hash) {
  Node& n = nodes_[v];
  if (n.commits[{view, hash}].size() < set_.quorum) return;
  const LedgerBlock b = n.commit_blocks.at({view, hash});
  if (!valid_block(n, b)) return;
  append(v, b);
}

void Consortium::timeout(std::size_t v, std::uint64_t height, std::uint64_t view) {
  Node& n = nodes_[v];
  n.timer.reset();
  catch_up(v);
  if (n.chain.height() != height || n.view != view || !n.active) return;
  had_view_change_[height] = true;
  stats_.view_changes += 1;
  n.view = view + 1;
  n.accepted.reset();
  n.accepted_block.reset();
  n.sent_commit = false;
  n.proposed_in_view = false;
  Msg vc{MsgKind::ViewChange, v, height, n.view, {}, std::nullopt, n.lock, {}};
  broadcast(v, vc);
  arm_timer(v);
}

void Consortium::on_view_change(std::size_t v, const Msg& m) {
  Node& n = nodes_[v];
  auto& vcs = n.view_changes[m.view];
  vcs[m.from] = m.lock;
  if (m.view < n.view) return;
  if (primary(m.height, m.view) != v || vcs.size() < set_.quorum) return;
  if (m.view == n.view && n.proposed_in_view) return;
  if (m.view > n.view) {
    // Join the view the quorum moved to.
    n.view = m.view;
    n.accepted.reset();
    n.accepted_block.reset();
    n.sent_commit = false;
    arm_timer(v);
  }
  propose(v);
}

}  // namespace uwt
