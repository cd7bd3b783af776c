#include "shardsim/trace.hpp"

#include "shardsim/rng.hpp"
#include "shardsim/sha256.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>

namespace shardsim {

namespace {

constexpr std::string_view kTraceHeader = "block_number,tx_index,from,to";

[[noreturn]] void parse_fail(std::size_t line_no, const std::string& what) {
  throw std::runtime_error("trace parse error at line " +
                           std::to_string(line_no) + ": " + what);
}

std::uint64_t parse_u64(std::string_view field, std::size_t line_no,
                        const char* name) {
  std::uint64_t value = 0;
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || field.empty()) {
    parse_fail(line_no, std::string("non-integer ") + name + " '" +
                            std::string(field) + "'");
  }
  return value;
}

// Assigns seq 0..n-1 in (block, stable input order) and fills block_range.
// `rows` carry their original tx_index for the sort key.
struct ParsedRow {
  std::uint64_t block;
  std::uint64_t tx_index;
  Transaction tx;  // tx.seq/tx.block filled after sorting
};

Trace finalize(std::vector<ParsedRow> rows, bool* was_unsorted) {
  const bool sorted = std::is_sorted(
      rows.begin(), rows.end(), [](const ParsedRow& a, const ParsedRow& b) {
        return std::pair(a.block, a.tx_index) < std::pair(b.block, b.tx_index);
      });
  if (!sorted) {
    std::stable_sort(
        rows.begin(), rows.end(), [](const ParsedRow& a, const ParsedRow& b) {
          return std::pair(a.block, a.tx_index) <
                 std::pair(b.block, b.tx_index);
        });
  }
  if (was_unsorted) *was_unsorted = !sorted;

  Trace trace;
  trace.transactions.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Transaction tx = std::move(rows[i].tx);
    tx.seq = i;
    tx.block = rows[i].block;
    trace.transactions.push_back(std::move(tx));
  }
  if (!trace.transactions.empty()) {
    trace.first_block = trace.transactions.front().block;
    trace.last_block = trace.transactions.back().block;
  }
  return trace;
}

// Writes every row of the canonical CSV through `emit`; shared by the file
// writer and the digest so both see identical bytes.
template <typename Emit>
void canonical_csv(const Trace& trace, const AccountInterner& interner,
                   Emit&& emit) {
  emit(kTraceHeader);
  emit("\n");
  std::uint64_t block = 0;
  std::uint64_t index_in_block = 0;
  bool first = true;
  std::string row;
  for (const Transaction& tx : trace.transactions) {
    if (first || tx.block != block) {
      block = tx.block;
      index_in_block = 0;
      first = false;
    }
    row.clear();
    row += std::to_string(tx.block);
    row += ',';
    row += std::to_string(index_in_block++);
    row += ',';
    row += interner.name(tx.accounts[0]);
    row += ',';
    if (tx.accounts.size() > 1) row += interner.name(tx.accounts[1]);
    row += '\n';
    emit(row);
  }
}

}  // namespace

Trace load_trace(std::istream& in, AccountInterner& interner,
                 std::ostream* warnings) {
  std::string line;
  std::size_t line_no = 0;

  if (!std::getline(in, line)) parse_fail(1, "empty input, header expected");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTraceHeader) {
    parse_fail(line_no, "header must be '" + std::string(kTraceHeader) + "'");
  }

  std::vector<ParsedRow> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    // Exactly 4 comma-separated fields; `to` may be empty.
    std::string_view rest = line;
    std::string_view field[4];
    for (int f = 0; f < 4; ++f) {
      const auto comma = rest.find(',');
      if (f < 3) {
        if (comma == std::string_view::npos) {
          parse_fail(line_no, "expected 4 fields");
        }
        field[f] = rest.substr(0, comma);
        rest = rest.substr(comma + 1);
      } else {
        if (comma != std::string_view::npos) {
          parse_fail(line_no, "expected 4 fields");
        }
        field[f] = rest;
      }
    }

    ParsedRow row;
    row.block = parse_u64(field[0], line_no, "block_number");
    row.tx_index = parse_u64(field[1], line_no, "tx_index");
    if (field[2].empty()) parse_fail(line_no, "empty from address");
    const AccountIdx from = interner.intern(field[2]);
    row.tx.accounts.push_back(from);
    if (!field[3].empty()) {
      const AccountIdx to = interner.intern(field[3]);
      if (to != from) row.tx.accounts.push_back(to);
    }
    rows.push_back(std::move(row));
  }

  bool was_unsorted = false;
  Trace trace = finalize(std::move(rows), &was_unsorted);
  if (was_unsorted && warnings) {
    *warnings << "warning: trace rows were out of order; sorted by "
                 "(block_number, tx_index)\n";
  }
  return trace;
}

void write_trace_csv(const Trace& trace, const AccountInterner& interner,
                     std::ostream& out) {
  canonical_csv(trace, interner,
                [&out](std::string_view chunk) { out << chunk; });
}

std::string trace_digest_hex(const Trace& trace,
                             const AccountInterner& interner) {
  Sha256Stream hasher;
  canonical_csv(trace, interner,
                [&hasher](std::string_view chunk) { hasher.update(chunk); });
  return hex_digest(hasher.finish());
}

std::vector<EpochBatch> epoch_windows(const Trace& trace, std::uint64_t tau) {
  if (tau < 1) throw std::invalid_argument("epoch_windows: tau must be >= 1");
  std::vector<EpochBatch> batches;
  if (trace.empty()) return batches;

  const auto& txs = trace.transactions;
  std::size_t cursor = 0;
  for (std::size_t e = 0;; ++e) {
    const std::uint64_t start = trace.first_block + e * tau;
    if (start > trace.last_block) break;
    const std::uint64_t end = start + tau - 1;  // nominal, may pass the trace
    const std::size_t begin = cursor;
    while (cursor < txs.size() && txs[cursor].block <= end) ++cursor;
    batches.push_back(EpochBatch{
        e, start, end,
        std::span<const Transaction>(txs.data() + begin, cursor - begin)});
  }
  return batches;
}

Trace gen_uniform(const UniformSpec& spec, AccountInterner& interner) {
  if (spec.n_accounts < 2) {
    throw std::invalid_argument("gen_uniform: n_accounts must be >= 2");
  }
  std::vector<AccountIdx> accounts;
  accounts.reserve(spec.n_accounts);
  for (std::uint64_t i = 0; i < spec.n_accounts; ++i) {
    accounts.push_back(interner.intern("a" + std::to_string(i)));
  }

  Rng rng(spec.seed);
  Trace trace;
  trace.transactions.reserve(spec.txs_per_block * spec.n_blocks);
  std::uint64_t seq = 0;
  for (std::uint64_t b = 0; b < spec.n_blocks; ++b) {
    for (std::uint64_t t = 0; t < spec.txs_per_block; ++t) {
      const std::uint64_t i = rng.below(spec.n_accounts);
      std::uint64_t j = rng.below(spec.n_accounts - 1);
      if (j >= i) ++j;  // uniform over the remaining accounts
      Transaction tx;
      tx.seq = seq++;
      tx.block = b;
      tx.accounts = {accounts[i], accounts[j]};
      trace.transactions.push_back(std::move(tx));
    }
  }
  if (!trace.empty()) {
    trace.first_block = 0;
    trace.last_block = spec.n_blocks - 1;
  }
  return trace;
}

Trace gen_clustered(const ClusteredSpec& spec, AccountInterner& interner) {
  if (spec.n_communities < 1 || spec.accounts_per_community < 1) {
    throw std::invalid_argument("gen_clustered: need >= 1 community/member");
  }
  if (spec.p_intra < 0 || spec.p_intra > 1) {
    throw std::invalid_argument("gen_clustered: p_intra must be in [0,1]");
  }
  if (spec.churn < 0 || spec.churn > 1) {
    throw std::invalid_argument("gen_clustered: churn must be in [0,1]");
  }

  std::vector<std::vector<AccountIdx>> members(spec.n_communities);
  std::vector<AccountIdx> all;
  std::unordered_map<AccountIdx, std::size_t> pos_in_all;
  const auto add_account = [&](AccountIdx a, std::vector<AccountIdx>& home) {
    home.push_back(a);
    pos_in_all.emplace(a, all.size());
    all.push_back(a);
  };
  for (std::uint64_t c = 0; c < spec.n_communities; ++c) {
    for (std::uint64_t m = 0; m < spec.accounts_per_community; ++m) {
      add_account(interner.intern("c" + std::to_string(c) + "_m" +
                                  std::to_string(m)),
                  members[c]);
    }
  }

  Rng rng(spec.seed);
  Trace trace;
  trace.transactions.reserve(spec.txs_per_block * spec.n_blocks);
  std::uint64_t seq = 0;
  std::uint64_t fresh_count = 0;

  for (std::uint64_t b = 0; b < spec.n_blocks; ++b) {
    // Churn is decided per block, before its transactions are drawn, so the
    // draw stream stays aligned whatever the outcome.
    bool churn_here = spec.churn > 0 && rng.chance(spec.churn);
    std::uint64_t churn_slot = 0;
    if (churn_here && spec.txs_per_block > 0) {
      churn_slot = rng.below(spec.txs_per_block);
    }

    for (std::uint64_t t = 0; t < spec.txs_per_block; ++t) {
      const std::uint64_t home = rng.below(spec.n_communities);
      auto& community = members[home];
      const std::uint64_t e1_pos = rng.below(community.size());
      AccountIdx e1 = community[e1_pos];
      AccountIdx e2;
      if (community.size() > 1 && rng.chance(spec.p_intra)) {
        std::uint64_t pos = rng.below(community.size() - 1);
        if (pos >= e1_pos) ++pos;
        e2 = community[pos];
      } else {
        // Counterparty uniform over every other account (same skip trick as
        // gen_uniform's distinct-pair rule).
        std::uint64_t pos = rng.below(all.size() - 1);
        if (pos >= pos_in_all.at(e1)) ++pos;
        e2 = all[pos];
      }
      if (churn_here && t == churn_slot) {
        const AccountIdx fresh =
            interner.intern("n" + std::to_string(fresh_count++));
        add_account(fresh, members[home]);
        e2 = fresh;
      }
      Transaction tx;
      tx.seq = seq++;
      tx.block = b;
      tx.accounts = {e1, e2};
      trace.transactions.push_back(std::move(tx));
    }
  }
  if (!trace.empty()) {
    trace.first_block = 0;
    trace.last_block = spec.n_blocks - 1;
  }
  return trace;
}

std::vector<Transaction> sample_expected(std::span<const Transaction> txs,
                                         double beta, std::uint64_t seed) {
  if (beta < 0.0 || beta > 1.0) {
    throw std::invalid_argument("sample_expected: beta must be in [0,1]");
  }
  const std::size_t n = txs.size();
  const auto m = static_cast<std::size_t>(
      std::min<double>(std::floor(beta * static_cast<double>(n) + 0.5),
                       static_cast<double>(n)));
  std::vector<Transaction> out;
  if (m == 0) return out;

  // Partial Fisher-Yates over indices, then re-sort the chosen indices so
  // the sample keeps input order.
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(m);
  std::sort(idx.begin(), idx.end());
  out.reserve(m);
  for (std::size_t i : idx) out.push_back(txs[i]);
  return out;
}

}  // namespace shardsim
