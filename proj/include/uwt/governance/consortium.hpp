#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string_view>
#include <vector>

#include "uwt/governance/ledger.hpp"
#include "uwt/sim/engine.hpp"

namespace uwt {

struct ValidatorSet {
  std::size_t n{9};
  std::size_t f{2};
  std::size_t quorum{6};

  /// f = floor((n-1)/3), quorum = ceil((n+f+1)/2).
  static ValidatorSet of(std::size_t n);
};

enum class Fault : std::uint8_t { Honest, Silent, Equivocator };
std::string_view to_string(Fault f);

struct ConsortiumParams {
  std::size_t validators{9};
  double link_latency_s{0.05};
  // Extra uniform delay per message; 0 keeps links at exactly link_latency_s.
  double link_jitter_s{0.0};
  double view_timeout_s{2.0};
  std::size_t max_commits_per_block{4096};
};

struct ConsortiumStats {
  std::uint64_t rounds_started{0};
  std::uint64_t view_changes{0};
  std::uint64_t messages{0};
  std::uint64_t blocks_committed{0};
  // Heights that committed without any view change.
  std::uint64_t first_view_commits{0};
};

/// Simplified PBFT among surface validators, driven by the shared engine.
///
/// Validators lock on a block once it is prepared and carry the lock through
/// view changes; a new primary must re-propose the highest lock reported by a
/// quorum of view-change messages, and honest replicas check that choice.
/// Message authenticity is modelled by a registry of messages actually sent,
/// which stands in for signatures when certificates are validated.
class Consortium {
 public:
  Consortium(Engine& engine, ConsortiumParams params, std::vector<Fault> faults = {});

  Consortium(const Consortium&) = delete;
  Consortium& operator=(const Consortium&) = delete;

  const ValidatorSet& set() const { return set_; }

  /// Queues a commit in the shared mempool.
  void submit(const TrustCommit& c);
  std::size_t pending() const;

  /// Consensus tick: starts a round at every idle honest validator when the
  /// mempool holds uncommitted entries.
  void tick();

  /// Called once per height, the first time any honest validator commits it.
  void on_commit(std::function<void(const LedgerBlock&)> cb) { on_commit_ = std::move(cb); }

  const Ledger& chain(std::size_t validator) const { return nodes_.at(validator).chain; }
  /// Longest chain among honest validators.
  const Ledger& reference_chain() const;
  bool honest(std::size_t v) const { return faults_[v] == Fault::Honest; }
  const ConsortiumStats& stats() const { return stats_; }
  /// True when no validator is mid-round.
  bool idle() const;

 private:
  enum class MsgKind : std::uint8_t { PrePrepare, Prepare, Commit, ViewChange };

  struct Lock {
    std::uint64_t view{0};
    LedgerBlock block;
  };

  struct Msg {
    MsgKind kind;
    std::size_t from;
    std::uint64_t height;
    std::uint64_t view;
    Digest hash{};
    std::optional<LedgerBlock> block;               // PrePrepare, Commit
    std::optional<Lock> lock;                       // ViewChange
    std::vector<std::size_t> justification;         // PrePrepare in view > 0: view-change senders
  };

  struct Node {
    Ledger chain;
    bool active{false};
    std::uint64_t view{0};
    std::optional<Digest> accepted;  // pre-prepare accepted in current view
    std::optional<LedgerBlock> accepted_block;
    std::optional<Lock> lock;
    bool sent_commit{false};
    std::optional<EventHandle> timer;
    std::set<std::uint64_t> included;  // mempool ids already in this chain
    // (view, hash) -> senders, for the current height
    std::map<std::pair<std::uint64_t, Digest>, std::set<std::size_t>> prepares, commits;
    std::map<std::pair<std::uint64_t, Digest>, LedgerBlock> commit_blocks;
    std::map<std::uint64_t, std::map<std::size_t, std::optional<Lock>>> view_changes;
    bool proposed_in_view{false};
  };

  using Key = std::tuple<std::uint64_t, std::uint64_t, Digest>;  // height, view, hash

  std::size_t primary(std::uint64_t height, std::uint64_t view) const {
    return static_cast<std::size_t>((height + view) % set_.n);
  }
  void send(std::size_t from, std::size_t to, Msg m);
  void broadcast(std::size_t from, const Msg& m);
  void deliver(std::size_t to, const Msg& m);

  void start_round(std::size_t v);
  void arm_timer(std::size_t v);
  void propose(std::size_t v);
  void on_preprepare(std::size_t v, const Msg& m);
  void on_prepare(std::size_t v, const Msg& m);
  void on_commit_msg(std::size_t v, const Msg& m);
  void on_view_change(std::size_t v, const Msg& m);
  void timeout(std::size_t v, std::uint64_t height, std::uint64_t view);
  void try_prepared(std::size_t v, std::uint64_t view, const Digest& hash);
  void try_commit(std::size_t v, std::uint64_t view, const Digest& hash);
  void append(std::size_t v, const LedgerBlock& b);
  void catch_up(std::size_t v);
  void reset_height(Node& n);

  LedgerBlock fresh_block(std::size_t v, std::int64_t salt) const;
  bool valid_lock(const Lock& l, std::uint64_t height) const;
  std::optional<Lock> highest_lock(std::uint64_t height,
                                   const std::map<std::size_t, std::optional<Lock>>& vcs,
                                   const std::vector<std::size_t>& who) const;
  bool valid_block(const Node& n, const LedgerBlock& b) const;

  Engine& engine_;
  ConsortiumParams params_;
  ValidatorSet set_;
  std::vector<Fault> faults_;
  std::vector<Node> nodes_;
  RngStream rng_;

  std::vector<std::pair<std::uint64_t, TrustCommit>> mempool_;  // (id, commit)
  std::uint64_t next_id_{0};
  std::map<Digest, std::vector<std::uint64_t>> block_ids_;      // block hash -> mempool ids

  // Registries of messages actually sent; they stand in for signature checks.
  std::map<Key, std::set<std::size_t>> sent_prepares_;
  std::map<Key, std::set<std::size_t>> sent_commits_;
  std::map<std::pair<std::uint64_t, std::uint64_t>, std::map<std::size_t, std::optional<Lock>>>
      sent_view_changes_;
  std::map<std::uint64_t, LedgerBlock> certified_;       // height -> committed block
  std::function<void(const LedgerBlock&)> on_commit_;
  std::set<std::uint64_t> announced_;
  ConsortiumStats stats_;
  std::map<std::uint64_t, bool> had_view_change_;
};

}  // namespace uwt
