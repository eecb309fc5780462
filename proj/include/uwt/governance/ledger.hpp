#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "uwt/sim/sim_time.hpp"
#include "uwt/world/types.hpp"

namespace uwt {

using Digest = std::array<std::uint8_t, 32>;

Digest sha256(std::string_view bytes);
std::string to_hex(const Digest& d);
std::optional<Digest> digest_from_hex(std::string_view hex);  // lowercase only

enum class SecurityEvent : std::uint8_t { None = 0, Flagged, Excluded, Isolated, Reinstated };
std::string_view to_string(SecurityEvent e);

/// Summary record committed to the ledger. The trust delta is stored in
/// fixed point (1e-9 units) so the canonical encoding is exact.
struct TrustCommit {
  AgentId agent{0};
  std::uint32_t interval_index{0};
  std::int64_t tau_delta_nano{0};
  SecurityEvent event{SecurityEvent::None};
  AgentId reporter{0};

  static TrustCommit delta(AgentId agent, std::uint32_t interval, double tau_delta,
                           AgentId reporter);
  static TrustCommit security(AgentId agent, std::uint32_t interval, SecurityEvent event,
                              AgentId reporter);
  double tau_delta() const { return static_cast<double>(tau_delta_nano) * 1e-9; }
  bool operator==(const TrustCommit&) const = default;
};

struct LedgerBlock {
  std::uint64_t height{0};
  Digest prev_hash{};
  std::int64_t timestamp_us{0};
  std::vector<TrustCommit> commits;
  Digest block_hash{};

  SimTime timestamp() const { return SimTime{static_cast<double>(timestamp_us) * 1e-6}; }
  bool operator==(const LedgerBlock&) const = default;
};

/// Canonical bytes hashed into block_hash (see docs/ledger-format.md).
std::string canonical_bytes(const LedgerBlock& b);
Digest compute_block_hash(const LedgerBlock& b);

/// Builds a block and fills in its hash.
LedgerBlock make_block(std::uint64_t height, const Digest& prev, SimTime timestamp,
                       std::vector<TrustCommit> commits);

/// Returns the first height whose hash or predecessor link does not check
/// out, or nullopt for a valid chain. Heights must run 0..n-1.
std::optional<std::uint64_t> verify_chain(const std::vector<LedgerBlock>& blocks);

/// One JSON object per line, compact, in height order.
std::string export_jsonl(const std::vector<LedgerBlock>& blocks);
void export_jsonl(const std::vector<LedgerBlock>& blocks, std::ostream& out);

struct ChainCheck {
  bool valid{true};
  std::uint64_t bad_height{0};
  std::string reason;
  std::size_t blocks{0};
};

/// Parses an export and verifies it. A line that fails to parse is reported
/// at the height its line position implies.
ChainCheck verify_export(std::string_view text);

/// Append-only chain of one validator.
class Ledger {
 public:
  void append(LedgerBlock block);
  const std::vector<LedgerBlock>& blocks() const { return blocks_; }
  std::uint64_t height() const { return blocks_.size(); }
  Digest head_hash() const { return blocks_.empty() ? Digest{} : blocks_.back().block_hash; }

 private:
  std::vector<LedgerBlock> blocks_;
};

}  // namespace uwt
