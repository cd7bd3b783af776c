// Transaction traces: CSV ingestion, synthetic generators, epoch slicing,
// and the expected-traffic sampler.
#pragma once

#include "shardsim/model.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace shardsim {

// A trace is the full transaction sequence, sorted by (block, seq), with seq
// globally unique in 0..n-1. Blocks may have gaps.
struct Trace {
  std::vector<Transaction> transactions;
  std::uint64_t first_block = 0;
  std::uint64_t last_block = 0;

  bool empty() const { return transactions.empty(); }
  std::uint64_t block_span() const {
    return empty() ? 0 : last_block - first_block + 1;
  }
};

// One epoch window: the transactions whose block falls in
// [first_block, first_block + tau - 1]. The span aliases the owning Trace.
struct EpochBatch {
  std::size_t epoch_index = 0;
  std::uint64_t first_block = 0;
  std::uint64_t last_block = 0;  // nominal window end (may exceed the trace)
  std::span<const Transaction> txs;
};

// Parses `block_number,tx_index,from,to` CSV (header required; `to` may be
// empty for creation rows; from==to collapses to arity 1). Malformed input
// throws std::runtime_error naming the line; out-of-order rows are sorted
// with a note to `warnings` when provided.
Trace load_trace(std::istream& in, AccountInterner& interner,
                 std::ostream* warnings = nullptr);

// Canonical CSV form of a trace (tx_index = position within its block).
void write_trace_csv(const Trace& trace, const AccountInterner& interner,
                     std::ostream& out);

// SHA-256 over the canonical CSV bytes; identifies trace content in run
// manifests.
std::string trace_digest_hex(const Trace& trace,
                             const AccountInterner& interner);

// Tiles the trace's block range into consecutive tau-block windows. Empty
// windows are preserved; the final window may nominally extend past
// last_block (callers decide how to treat the partial tail).
std::vector<EpochBatch> epoch_windows(const Trace& trace, std::uint64_t tau);

struct UniformSpec {
  std::uint64_t n_accounts = 2;  // >= 2
  std::uint64_t txs_per_block = 1;
  std::uint64_t n_blocks = 1;
  std::uint64_t seed = 0;
};

// Every transaction picks two distinct accounts uniformly at random.
Trace gen_uniform(const UniformSpec& spec, AccountInterner& interner);

struct ClusteredSpec {
  std::uint64_t n_communities = 1;
  std::uint64_t accounts_per_community = 2;
  double p_intra = 0.9;  // chance the counterparty stays in the community
  std::uint64_t txs_per_block = 1;
  std::uint64_t n_blocks = 1;
  double churn = 0.0;  // per-block chance one endpoint is a fresh account
  std::uint64_t seed = 0;
};

// Community-structured traffic: each tx picks a home community and a member
// endpoint; with probability p_intra the counterparty is a distinct member of
// the same community, otherwise uniform over all accounts. With probability
// `churn`, once per affected block, a never-seen account replaces the
// counterparty of one uniformly chosen transaction and joins that
// transaction's home community.
Trace gen_clustered(const ClusteredSpec& spec, AccountInterner& interner);

// Uniform sample of round(beta * n) transactions (round half up), preserving
// input order. The simulation's stand-in for an account's known future
// transactions.
std::vector<Transaction> sample_expected(std::span<const Transaction> txs,
                                         double beta, std::uint64_t seed);

}  // namespace shardsim
