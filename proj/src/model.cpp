#include "shardsim/model.hpp"

#include "shardsim/sha256.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace shardsim {

AccountIdx AccountInterner::intern(std::string_view id) {
  if (id.empty()) {
    throw std::invalid_argument("AccountInterner: empty account id");
  }
  if (auto it = index_.find(id); it != index_.end()) return it->second;
  const auto idx = static_cast<AccountIdx>(names_.size());
  names_.emplace_back(id);
  index_.emplace(names_.back(), idx);
  return idx;
}

std::optional<AccountIdx> AccountInterner::find(std::string_view id) const {
  if (auto it = index_.find(id); it != index_.end()) return it->second;
  return std::nullopt;
}

const std::string& AccountInterner::name(AccountIdx idx) const {
  if (idx >= names_.size()) {
    throw std::out_of_range("AccountInterner: unknown account index");
  }
  return names_[idx];
}

void SimParams::validate(bool require_lambda) const {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  if (!(eta > 1.0)) throw std::invalid_argument("eta must be > 1");
  if (tau < 1) throw std::invalid_argument("tau must be >= 1");
  if (lambda < 0.0 || (require_lambda && !(lambda > 0.0))) {
    throw std::invalid_argument("lambda must be > 0");
  }
  if (beta < 0.0 || beta > 1.0) {
    throw std::invalid_argument("beta must be in [0, 1]");
  }
}

AccountShardMapping::AccountShardMapping(
    int k, std::shared_ptr<AccountInterner> interner)
    : k_(k), interner_(std::move(interner)) {
  if (k_ < 1) throw std::invalid_argument("AccountShardMapping: k must be >= 1");
  if (!interner_) {
    throw std::invalid_argument("AccountShardMapping: null interner");
  }
  assignment_.resize(interner_->size(), 0);
}

int AccountShardMapping::shard_of(AccountIdx account) {
  if (account >= interner_->size()) {
    throw std::out_of_range("shard_of: unknown account index");
  }
  if (account >= assignment_.size()) assignment_.resize(interner_->size(), 0);
  std::int32_t& slot = assignment_[account];
  if (slot == 0) {
    slot = hash_shard(interner_->name(account), k_);
    ++assigned_count_;
  }
  return slot;
}

int AccountShardMapping::shard_of(std::string_view id) {
  return shard_of(interner_->intern(id));
}

std::optional<int> AccountShardMapping::lookup(AccountIdx account) const {
  if (account >= assignment_.size() || assignment_[account] == 0) {
    return std::nullopt;
  }
  return assignment_[account];
}

int AccountShardMapping::shard_of_assigned(AccountIdx account) const {
  if (account >= assignment_.size() || assignment_[account] == 0) {
    throw std::logic_error("shard_of_assigned: account has no assignment");
  }
  return assignment_[account];
}

void AccountShardMapping::assign(AccountIdx account, int shard) {
  if (account >= interner_->size()) {
    throw std::out_of_range("assign: unknown account index");
  }
  if (shard < 1 || shard > k_) {
    throw std::invalid_argument("assign: shard out of range");
  }
  if (account >= assignment_.size()) assignment_.resize(interner_->size(), 0);
  if (assignment_[account] == 0) ++assigned_count_;
  assignment_[account] = shard;
}

void AccountShardMapping::assign_unchecked(AccountIdx account, int shard) {
  if (account >= interner_->size()) {
    throw std::out_of_range("assign_unchecked: unknown account index");
  }
  if (account >= assignment_.size()) assignment_.resize(interner_->size(), 0);
  if (assignment_[account] == 0 && shard != 0) ++assigned_count_;
  assignment_[account] = shard;
}

void AccountShardMapping::move(AccountIdx account, int shard) {
  if (account >= assignment_.size() || assignment_[account] == 0) {
    throw std::logic_error("move: account has no assignment");
  }
  if (shard < 1 || shard > k_) {
    throw std::invalid_argument("move: shard out of range");
  }
  assignment_[account] = shard;
}

std::vector<AccountIdx> AccountShardMapping::assigned_accounts() const {
  std::vector<AccountIdx> out;
  out.reserve(static_cast<std::size_t>(assigned_count_));
  for (AccountIdx a = 0; a < assignment_.size(); ++a) {
    if (assignment_[a] != 0) out.push_back(a);
  }
  return out;
}

TxClass classify_transaction(const Transaction& tx, AccountShardMapping& m) {
  TxClass out;
  classify_into(tx, m, out.shards);
  return out;
}

void classify_into(const Transaction& tx, AccountShardMapping& m,
                   std::vector<int>& shards) {
  if (tx.accounts.empty()) {
    throw std::invalid_argument("classify: transaction touches no accounts");
  }
  shards.clear();
  for (AccountIdx a : tx.accounts) shards.push_back(m.shard_of(a));
  std::sort(shards.begin(), shards.end());
  shards.erase(std::unique(shards.begin(), shards.end()), shards.end());
}

ValidationReport validate_mapping(const AccountShardMapping& m,
                                  std::span<const AccountIdx> accounts) {
  ValidationReport report;
  for (AccountIdx a : accounts) {
    const auto shard = m.lookup(a);
    if (!shard) {
      report.violations.push_back({a, MappingViolation::kUnassigned});
    } else if (*shard < 1 || *shard > m.k()) {
      report.violations.push_back({a, MappingViolation::kOutOfRange});
    }
  }
  return report;
}

}  // namespace shardsim
