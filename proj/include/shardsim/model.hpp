// Domain model: accounts, transactions, simulation parameters, and the
// account -> shard mapping.
//
// Account ids are opaque non-empty strings at the boundary; internally every
// account is a dense AccountIdx issued by AccountInterner, so hot paths work
// on integers and vectors instead of strings and maps.
#pragma once

#include "shardsim/types.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace shardsim {

// Bijection between account id strings and dense indices 0..size()-1.
// Indices are issued in first-seen order and never change.
class AccountInterner {
 public:
  AccountIdx intern(std::string_view id);
  std::optional<AccountIdx> find(std::string_view id) const;
  const std::string& name(AccountIdx idx) const;
  std::size_t size() const { return names_.size(); }

 private:
  struct StringHash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const {
      return std::hash<std::string_view>{}(s);
    }
  };
  std::unordered_map<std::string, AccountIdx, StringHash, std::equal_to<>>
      index_;
  std::vector<std::string> names_;
};

// One transaction: the ordered set of accounts it touches. No duplicate
// accounts (a from==to transfer collapses to arity 1); arity >= 1.
// seq is the global position in the trace (total order: block, then the
// source row order within the block).
struct Transaction {
  std::uint64_t seq = 0;
  std::uint64_t block = 0;
  std::vector<AccountIdx> accounts;
};

// System-level knobs. lambda == 0 means "resolve from the evaluation
// workload" (mean transactions per epoch / k) before the engine runs; the
// engine itself requires lambda > 0.
struct SimParams {
  int k = 16;               // shard count
  double eta = 2.0;         // cross-shard cost multiplier, > 1
  std::uint64_t tau = 300;  // blocks per epoch
  double lambda = 0.0;      // per-shard per-epoch budget (0 = auto)
  double beta = 0.0;        // expected-traffic fusion weight, in [0,1]
  std::uint64_t seed = 0;

  // Throws std::invalid_argument naming the offending field.
  void validate(bool require_lambda = false) const;
};

// Account -> shard assignment with a lazy hash fallback: looking up an
// account that has no explicit assignment assigns it hash_shard(id, k) on
// the spot. Shard ids are 1-based.
class AccountShardMapping {
 public:
  AccountShardMapping(int k, std::shared_ptr<AccountInterner> interner);

  int k() const { return k_; }
  AccountInterner& interner() { return *interner_; }
  const AccountInterner& interner() const { return *interner_; }
  const std::shared_ptr<AccountInterner>& interner_ptr() const {
    return interner_;
  }

  // Current shard; assigns the hash fallback on first sight.
  int shard_of(AccountIdx account);
  int shard_of(std::string_view id);

  // Read-only probe: nullopt when the account has no assignment yet.
  std::optional<int> lookup(AccountIdx account) const;

  // Hot-path accessor for accounts known to be assigned (const, no
  // registration). Throws std::logic_error if the precondition is violated.
  int shard_of_assigned(AccountIdx account) const;

  // Explicit (re)assignment; shard must be in 1..k.
  void assign(AccountIdx account, int shard);

  // Migration move: like assign but requires an existing assignment.
  void move(AccountIdx account, int shard);

  // Stores the shard id as given, without range checks. Exists so foreign or
  // persisted states can be loaded verbatim and then audited with
  // validate_mapping; engine paths always use the checked writers.
  void assign_unchecked(AccountIdx account, int shard);

  std::int64_t assigned_count() const { return assigned_count_; }

  // All accounts that currently hold an explicit assignment, ascending.
  std::vector<AccountIdx> assigned_accounts() const;

 private:
  int k_;
  std::shared_ptr<AccountInterner> interner_;
  std::vector<std::int32_t> assignment_;  // 0 = unassigned, else 1..k
  std::int64_t assigned_count_ = 0;
};

// Transaction classification under a mapping: the distinct shards touched,
// ascending. Intra-shard iff a single shard.
struct TxClass {
  std::vector<int> shards;
  bool is_cross() const { return shards.size() > 1; }
  int shard() const { return shards.front(); }
};

TxClass classify_transaction(const Transaction& tx, AccountShardMapping& m);

// Allocation-free variant for engine loops: fills `shards` with the distinct
// involved shards, ascending.
void classify_into(const Transaction& tx, AccountShardMapping& m,
                   std::vector<int>& shards);

// Mapping audit over a set of accounts: reports accounts without an explicit
// assignment and assignments outside 1..k, as data rather than by throwing.
enum class MappingViolation { kUnassigned, kOutOfRange };

struct ValidationIssue {
  AccountIdx account;
  MappingViolation kind;
};

struct ValidationReport {
  std::vector<ValidationIssue> violations;
  bool ok() const { return violations.empty(); }
};

ValidationReport validate_mapping(const AccountShardMapping& m,
                                  std::span<const AccountIdx> accounts);

}  // namespace shardsim
