#include "uwt/governance/ledger.hpp"

#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include <openssl/evp.h>

namespace uwt {

Digest sha256(std::string_view bytes) {
  Digest d{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), d.data(), &len, EVP_sha256(), nullptr) != 1 ||
      len != d.size())
    throw std::runtime_error("SHA-256 computation failed");
  return d;
}

std::string to_hex(const Digest& d) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string s(64, '0');
  for (std::size_t i = 0; i < d.size(); ++i) {
    s[2 * i] = kHex[d[i] >> 4];
    s[2 * i + 1] = kHex[d[i] & 0xf];
  }
  return s;
}

std::optional<Digest> digest_from_hex(std::string_view hex) {
  if (hex.size() != 64) return std::nullopt;
  auto nib = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    return -1;
  };
  Digest d{};
  for (std::size_t i = 0; i < 32; ++i) {
    const int hi = nib(hex[2 * i]), lo = nib(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) return std::nullopt;
    d[i] = static_cast<std::uint8_t>(hi << 4 | lo);
  }
  return d;
}

std::string_view to_string(SecurityEvent e) {
  switch (e) {
    case SecurityEvent::None: return "None";
    case SecurityEvent::Flagged: return "Flagged";
    case SecurityEvent::Excluded: return "Excluded";
    case SecurityEvent::Isolated: return "Isolated";
    case SecurityEvent::Reinstated: return "Reinstated";
  }
  return "unknown";
}

TrustCommit TrustCommit::delta(AgentId agent, std::uint32_t interval, double tau_delta,
                               AgentId reporter) {
  if (!(tau_delta >= -1.0 && tau_delta <= 1.0))
    throw std::invalid_argument("trust delta outside [-1, 1]");
  TrustCommit c;
  c.agent = agent;
  c.interval_index = interval;
  c.tau_delta_nano = std::llround(tau_delta * 1e9);
  c.reporter = reporter;
  return c;
}

TrustCommit TrustCommit::security(AgentId agent, std::uint32_t interval, SecurityEvent event,
                                  AgentId reporter) {
  TrustCommit c;
  c.agent = agent;
  c.interval_index = interval;
  c.event = event;
  c.reporter = reporter;
  return c;
}

namespace {

template <typename U>
void put_be(std::string& b, U v) {
  for (int i = sizeof(U) - 1; i >= 0; --i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

}  // namespace

std::string canonical_bytes(const LedgerBlock& blk) {
  std::string b;
  b.reserve(8 + 32 + 8 + 4 + blk.commits.size() * 21);
  put_be<std::uint64_t>(b, blk.height);
  b.append(reinterpret_cast<const char*>(blk.prev_hash.data()), blk.prev_hash.size());
  put_be<std::uint64_t>(b, static_cast<std::uint64_t>(blk.timestamp_us));
  put_be<std::uint32_t>(b, static_cast<std::uint32_t>(blk.commits.size()));
  for (const auto& c : blk.commits) {
    put_be<std::uint32_t>(b, c.agent);
    put_be<std::uint32_t>(b, c.interval_index);
    put_be<std::uint64_t>(b, static_cast<std::uint64_t>(c.tau_delta_nano));
    b.push_back(static_cast<char>(c.event));
    put_be<std::uint32_t>(b, c.reporter);
  }
  return b;
}

Digest compute_block_hash(const LedgerBlock& b) { return sha256(canonical_bytes(b)); }

LedgerBlock make_block(std::uint64_t height, const Digest& prev, SimTime timestamp,
                       std::vector<TrustCommit> commits) {
  LedgerBlock b;
  b.height = height;
  b.prev_hash = prev;
  b.timestamp_us = std::llround(timestamp.seconds * 1e6);
  b.commits = std::move(commits);
  b.block_hash = compute_block_hash(b);
  return b;
}

std::optional<std::uint64_t> verify_chain(const std::vector<LedgerBlock>& blocks) {
  Digest prev{};
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const LedgerBlock& b = blocks[i];
    if (b.height != i || b.prev_hash != prev || compute_block_hash(b) != b.block_hash) return i;
    prev = b.block_hash;
  }
  return std::nullopt;
}

namespace {

nlohmann::json block_json(const LedgerBlock& b) {
  nlohmann::json commits = nlohmann::json::array();
  for (const auto& c : b.commits) {
    commits.push_back({{"agent", c.agent},
                       {"interval_index", c.interval_index},
                       {"tau_delta_nano", c.tau_delta_nano},
                       {"event", static_cast<int>(c.event)},
                       {"reporter", c.reporter}});
  }
  return {{"height", b.height},
          {"prev_hash", to_hex(b.prev_hash)},
          {"timestamp_us", b.timestamp_us},
          {"commits", std::move(commits)},
          {"block_hash", to_hex(b.block_hash)}};
}

template <typename U>
U read_uint(const nlohmann::json& j, const char* key, U max) {
  const auto& v = j.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
    throw std::runtime_error(std::string(key) + " is not a non-negative integer");
  const auto u = v.get<std::uint64_t>();
  if (u > max) throw std::runtime_error(std::string(key) + " out of range");
  return static_cast<U>(u);
}

std::int64_t read_int(const nlohmann::json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_number_integer()) throw std::runtime_error(std::string(key) + " is not an integer");
  if (v.is_number_unsigned() && v.get<std::uint64_t>() > INT64_MAX)
    throw std::runtime_error(std::string(key) + " out of range");
  return v.get<std::int64_t>();
}

void expect_keys(const nlohmann::json& j, std::initializer_list<const char*> keys) {
  if (!j.is_object() || j.size() != keys.size())
    throw std::runtime_error("unexpected key set");
  for (const char* k : keys)
    if (!j.contains(k)) throw std::runtime_error(std::string("missing key ") + k);
}

Digest read_digest(const nlohmann::json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_string()) throw std::runtime_error(std::string(key) + " is not a string");
  auto d = digest_from_hex(v.get_ref<const std::string&>());
  if (!d) throw std::runtime_error(std::string(key) + " is not a lowercase hex digest");
  return *d;
}

LedgerBlock parse_block(std::string_view line) {
  const auto j = nlohmann::json::parse(line);
  expect_keys(j, {"height", "prev_hash", "timestamp_us", "commits", "block_hash"});
  LedgerBlock b;
  b.height = read_uint<std::uint64_t>(j, "height", UINT64_MAX);
  b.prev_hash = read_digest(j, "prev_hash");
  b.timestamp_us = read_int(j, "timestamp_us");
  b.block_hash = read_digest(j, "block_hash");
  const auto& cs = j.at("commits");
  if (!cs.is_array()) throw std::runtime_error("commits is not an array");
  for (const auto& c : cs) {
    expect_keys(c, {"agent", "interval_index", "tau_delta_nano", "event", "reporter"});
    TrustCommit t;
    t.agent = read_uint<std::uint32_t>(c, "agent", UINT32_MAX);
    t.interval_index = read_uint<std::uint32_t>(c, "interval_index", UINT32_MAX);
    t.tau_delta_nano = read_int(c, "tau_delta_nano");
    t.event = static_cast<SecurityEvent>(read_uint<std::uint8_t>(c, "event", 4));
    t.reporter = read_uint<std::uint32_t>(c, "reporter", UINT32_MAX);
    b.commits.push_back(t);
  }
  return b;
}

}  // namespace

void export_jsonl(const std::vector<LedgerBlock>& blocks, std::ostream& out) {
  for (const auto& b : blocks) out << block_json(b).dump() << '\n';
}

std::string export_jsonl(const std::vector<LedgerBlock>& blocks) {
  std::ostringstream os;
  export_jsonl(blocks, os);
  return os.str();
}

ChainCheck verify_export(std::string_view text) {
  ChainCheck res;
  Digest prev{};
  std::uint64_t h = 0;
  std::size_t start = 0;
  auto fail = [&](std::string reason) {
    res.valid = false;
    res.bad_height = h;
    res.reason = std::move(reason);
    return res;
  };
  while (start < text.size()) {
    const std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) return fail("final line is not newline-terminated");
    const std::string_view line = text.substr(start, nl - start);
    start = nl + 1;
    LedgerBlock b;
    try {
      b = parse_block(line);
    } catch (const std::exception& e) {
      return fail(std::string("unparseable block: ") + e.what());
    }
    if (b.height != h) return fail("height does not match position");
    if (b.prev_hash != prev) return fail("prev_hash does not link to predecessor");
    if (compute_block_hash(b) != b.block_hash) return fail("block_hash mismatch");
    if (block_json(b).dump() != line) return fail("non-canonical encoding");
    prev = b.block_hash;
    ++h;
    res.blocks = h;
  }
  return res;
}

void Ledger::append(LedgerBlock block) {
  if (block.height != height() || block.prev_hash != head_hash() ||
      compute_block_hash(block) != block.block_hash)
    throw std::logic_error("block does not extend the chain");
  blocks_.push_back(std::move(block));
}

}  // namespace uwt
