#include "shardsim/engine.hpp"

#include "shardsim/metrics.hpp"
#include "shardsim/pilot.hpp"
#include "shardsim/rng.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <thread>
#include <unordered_map>

namespace shardsim {

namespace {

// Stream tag separating mempool-noise draws from per-account sampling seeds.
constexpr std::uint64_t kNoiseStream = 0x6d656d706f6f6cULL;  // "mempool"

// Counterparty counts of `account` over txs against a read-only mapping;
// every involved account must already hold an assignment.
Vec counts_assigned(std::span<const Transaction> txs, AccountIdx account,
                    const AccountShardMapping& mapping, int k) {
  Vec counts = Vec::Zero(k);
  for (const Transaction& tx : txs) {
    for (AccountIdx b : tx.accounts) {
      if (b == account) continue;
      counts[mapping.shard_of_assigned(b) - 1] += 1.0;
    }
  }
  return counts;
}

}  // namespace

void HistoryStore::record_tx(const Transaction& tx, std::uint64_t epoch) {
  AccountIdx max_idx = 0;
  for (AccountIdx a : tx.accounts) max_idx = std::max(max_idx, a);
  if (max_idx >= rows_.size()) {
    rows_.resize(max_idx + 1);
    last_active_.resize(max_idx + 1, -1);
  }
  for (AccountIdx a : tx.accounts) {
    last_active_[a] =
        std::max(last_active_[a], static_cast<std::int64_t>(epoch));
    for (AccountIdx b : tx.accounts) {
      if (b == a) continue;
      rows_[a].push_back(Row{epoch, b});
    }
  }
}

std::vector<AccountIdx> HistoryStore::active_accounts(
    std::uint64_t window, std::uint64_t epoch) const {
  const auto lo = static_cast<std::int64_t>(cutoff(window, epoch));
  std::vector<AccountIdx> out;
  for (AccountIdx a = 0; a < last_active_.size(); ++a) {
    if (last_active_[a] >= lo) out.push_back(a);
  }
  return out;
}

Vec HistoryStore::counts_for(AccountIdx account, std::uint64_t window,
                             std::uint64_t epoch,
                             const AccountShardMapping& mapping, int k) const {
  Vec counts = Vec::Zero(k);
  if (account >= rows_.size()) return counts;
  const auto& rows = rows_[account];
  const std::uint64_t lo = cutoff(window, epoch);
  auto it = std::lower_bound(
      rows.begin(), rows.end(), lo,
      [](const Row& row, std::uint64_t value) { return row.epoch < value; });
  for (; it != rows.end(); ++it) {
    counts[mapping.shard_of_assigned(it->other) - 1] += 1.0;
  }
  return counts;
}

void HistoryStore::register_counterparties(AccountIdx account,
                                           std::uint64_t window,
                                           std::uint64_t epoch,
                                           AccountShardMapping& mapping) const {
  if (account >= rows_.size()) return;
  const auto& rows = rows_[account];
  const std::uint64_t lo = cutoff(window, epoch);
  auto it = std::lower_bound(
      rows.begin(), rows.end(), lo,
      [](const Row& row, std::uint64_t value) { return row.epoch < value; });
  for (; it != rows.end(); ++it) mapping.shard_of(it->other);
}

std::size_t HistoryStore::row_count() const {
  std::size_t n = 0;
  for (const auto& rows : rows_) n += rows.size();
  return n;
}

CommitOutcome commit_transactions(const EpochBatch& batch,
                                  AccountShardMapping& mapping, double lambda,
                                  double eta) {
  if (!(lambda > 0.0)) {
    throw std::invalid_argument("commit_transactions: lambda must be > 0");
  }
  if (!(eta > 1.0)) {
    throw std::invalid_argument("commit_transactions: eta must be > 1");
  }
  const int k = mapping.k();
  CommitOutcome out;
  out.consumed = Vec::Zero(k);
  Vec remaining = Vec::Constant(k, lambda);

  std::vector<int> shards;
  for (std::uint32_t i = 0; i < batch.txs.size(); ++i) {
    classify_into(batch.txs[i], mapping, shards);
    const bool is_cross = shards.size() > 1;
    const double unit = is_cross ? eta : 1.0;
    (is_cross ? out.cross : out.intra) += 1;

    bool fits = true;
    for (int s : shards) {
      if (remaining[s - 1] + kBudgetSlack < unit) {
        fits = false;
        break;
      }
    }
    if (fits) {
      for (int s : shards) {
        remaining[s - 1] -= unit;
        out.consumed[s - 1] += unit;
      }
      out.committed.push_back(i);
      (is_cross ? out.committed_cross : out.committed_intra) += 1;
    } else {
      out.dropped.push_back(i);
    }
  }
  return out;
}

std::vector<MigrationRequest> propose_migrations(SimState& state,
                                                 const EpochBatch& next_epoch,
                                                 const EngineOptions& options) {
  const SimParams& p = options.params;
  const int k = p.k;

  // Mempool lookahead, optionally thinned per-tx.
  std::vector<Transaction> noisy_storage;
  std::span<const Transaction> mempool = next_epoch.txs;
  if (options.noisy_mempool > 0.0) {
    Rng noise(derive_seed(p.seed, state.epoch, kNoiseStream));
    noisy_storage.reserve(mempool.size());
    for (const Transaction& tx : mempool) {
      if (!noise.chance(options.noisy_mempool)) noisy_storage.push_back(tx);
    }
    mempool = noisy_storage;
  }

  // Registers every mempool account as a side effect, which the read-only
  // decision loop below relies on.
  const Vec omega = workload_oracle(mempool, state.mapping, p.eta);

  // Mempool transactions per account, for expected-traffic sampling.
  std::unordered_map<AccountIdx, std::vector<std::uint32_t>> mempool_of;
  if (p.beta > 0.0) {
    for (std::uint32_t i = 0; i < mempool.size(); ++i) {
      for (AccountIdx a : mempool[i].accounts) mempool_of[a].push_back(i);
    }
  }

  const std::vector<AccountIdx> active =
      state.history.active_accounts(options.window, state.epoch);
  for (AccountIdx a : active) {
    state.history.register_counterparties(a, options.window, state.epoch,
                                          state.mapping);
  }

  // Per-account decisions; pure against read-only state from here on, so the
  // fan-out is deterministic regardless of thread count.
  const AccountShardMapping& mapping = state.mapping;
  const HistoryStore& history = state.history;
  std::vector<std::optional<MigrationRequest>> slots(active.size());

  const auto decide_range = [&](std::size_t begin, std::size_t end) {
    std::vector<Transaction> own;
    for (std::size_t idx = begin; idx < end; ++idx) {
      const AccountIdx a = active[idx];
      const Vec psi_h =
          history.counts_for(a, options.window, state.epoch, mapping, k);
      Vec psi_e = Vec::Zero(k);
      if (p.beta > 0.0) {
        if (auto it = mempool_of.find(a); it != mempool_of.end()) {
          own.clear();
          own.reserve(it->second.size());
          for (std::uint32_t t : it->second) own.push_back(mempool[t]);
          const auto expected = sample_expected(
              own, p.beta, derive_seed(p.seed, state.epoch, a));
          psi_e = counts_assigned(expected, a, mapping, k);
        }
      }
      const Vec psi = fuse(psi_h, psi_e, p.beta, options.raw_fusion);
      const int current = mapping.shard_of_assigned(a);
      const PilotDecision d = decide_from_psi(psi, omega, p.eta, current);
      if (d.chosen != current && d.potential_gain > 0.0) {
        slots[idx] =
            MigrationRequest{a, current, d.chosen, d.potential_gain,
                             state.epoch};
      }
    }
  };

  const unsigned threads = resolve_threads(options.threads);
  constexpr std::size_t kParallelThreshold = 512;
  if (threads > 1 && active.size() > kParallelThreshold) {
    std::vector<std::thread> pool;
    const std::size_t chunk = (active.size() + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t begin = std::min(active.size(), t * chunk);
      const std::size_t end = std::min(active.size(), begin + chunk);
      if (begin < end) pool.emplace_back(decide_range, begin, end);
    }
    for (auto& worker : pool) worker.join();
  } else {
    decide_range(0, active.size());
  }

  std::vector<MigrationRequest> requests;
  for (const auto& slot : slots) {
    if (slot) requests.push_back(*slot);
  }
  return requests;
}

std::vector<MigrationRequest> commit_migrations(
    std::vector<MigrationRequest> requests, double lambda) {
  std::sort(requests.begin(), requests.end(),
            [](const MigrationRequest& a, const MigrationRequest& b) {
              if (a.gain != b.gain) return a.gain > b.gain;
              return a.account < b.account;
            });
  const auto cap = lambda > 0.0
                       ? static_cast<std::size_t>(std::floor(lambda))
                       : std::size_t{0};
  if (requests.size() > cap) requests.resize(cap);
  return requests;
}

void reconfigure(SimState& state,
                 const std::vector<MigrationRequest>& committed) {
  for (const MigrationRequest& mr : committed) {
    state.mapping.move(mr.account, mr.to);
  }
  state.epoch += 1;
  const auto assigned = state.mapping.assigned_accounts();
  const auto report = validate_mapping(state.mapping, assigned);
  if (!report.ok()) {
    throw std::logic_error("reconfigure: mapping failed validation (" +
                           std::to_string(report.violations.size()) +
                           " violations)");
  }
}

EpochReport run_epoch(SimState& state, const EpochBatch& current,
                      const EpochBatch& next, const EngineOptions& options) {
  const SimParams& p = options.params;
  p.validate(/*require_lambda=*/true);

  const Vec omega_offered = workload_oracle(current, state.mapping, p.eta);
  const CommitOutcome outcome =
      commit_transactions(current, state.mapping, p.lambda, p.eta);
  if ((outcome.consumed > p.lambda + kBudgetSlack).any()) {
    throw std::logic_error("run_epoch: budget overrun");
  }
  for (std::uint32_t i : outcome.committed) {
    state.history.record_tx(current.txs[i], state.epoch);
  }

  std::vector<MigrationRequest> proposed;
  std::vector<MigrationRequest> committed_mr;
  if (options.allocator == AllocatorKind::kPilotDriven) {
    proposed = propose_migrations(state, next, options);
    committed_mr = commit_migrations(proposed, p.lambda);
    if (committed_mr.size() >
        static_cast<std::size_t>(std::floor(p.lambda))) {
      throw std::logic_error("run_epoch: migration cap exceeded");
    }
  }

  EpochReport report;
  report.epoch = state.epoch;
  report.committed_tx = static_cast<std::int64_t>(outcome.committed.size());
  report.dropped_tx = static_cast<std::int64_t>(outcome.dropped.size());
  report.intra = outcome.intra;
  report.cross = outcome.cross;
  report.committed_intra = outcome.committed_intra;
  report.committed_cross = outcome.committed_cross;
  report.proposed_mr = static_cast<std::int64_t>(proposed.size());
  report.committed_mr = static_cast<std::int64_t>(committed_mr.size());
  report.omega = omega_offered;
  report.cross_ratio = cross_shard_ratio(report.intra, report.cross);
  const WorkloadDeviation dev = workload_deviation(omega_offered);
  report.workload_deviation = dev.value;
  report.workload_deviation_defined = dev.defined;
  report.normalized_throughput =
      normalized_throughput(report.committed_tx, p.lambda);

  reconfigure(state, committed_mr);
  return report;
}

unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

}  // namespace shardsim
