// Allocation strategies and the workload oracle.
//
// HashRandom and GreedyCommunity produce whole mappings up front; PilotDriven
// is realized inside the engine as per-account decisions. GreedyCommunity is
// a deliberately simple graph-based comparison point (label propagation +
// capped bin packing), not a faithful reimplementation of any published
// partitioner — reports label it accordingly.
#pragma once

#include "shardsim/model.hpp"
#include "shardsim/trace.hpp"
#include "shardsim/types.hpp"

#include <memory>
#include <span>
#include <string>
#include <string_view>

namespace shardsim {

enum class AllocatorKind { kHashRandom, kGreedyCommunity, kPilotDriven };

// CLI/config names: "hash", "greedy", "pilot".
AllocatorKind parse_allocator(std::string_view name);
std::string_view allocator_name(AllocatorKind kind);

// Hash rule: (SHA-256 of the UTF-8 account id, big-endian) mod k, plus 1.
// Stable across runs and platforms.
int allocate_hash(std::string_view account_id, int k);

// Community detection (deterministic label propagation over the
// co-occurrence graph, sweeps in account-index order, <= 20 rounds) followed
// by greedy bin packing of communities onto shards, heaviest first, subject
// to a per-shard cap of max(1, ceil(cap_factor * |A| / k)) accounts.
// Oversized communities are split across least-loaded shards.
AccountShardMapping allocate_greedy_community(
    std::span<const Transaction> txs, int k, double cap_factor,
    std::shared_ptr<AccountInterner> interner);

// Per-shard offered workload of a batch under `mapping`:
// omega_i = (# intra txs of shard i) + eta * (# cross txs touching shard i).
Vec workload_oracle(std::span<const Transaction> txs,
                    AccountShardMapping& mapping, double eta);
Vec workload_oracle(const EpochBatch& batch, AccountShardMapping& mapping,
                    double eta);

}  // namespace shardsim
