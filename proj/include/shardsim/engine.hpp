// The epoch-driven simulation core: budgeted transaction commitment,
// migration-request proposal/commitment, and epoch-boundary reconfiguration.
#pragma once

#include "shardsim/allocators.hpp"
#include "shardsim/model.hpp"
#include "shardsim/trace.hpp"
#include "shardsim/types.hpp"

#include <cstdint>
#include <vector>

namespace shardsim {

// Slack absorbing floating-point drift when commitment sums eta-sized costs
// against the budget; both the commit check and the safety assertions use it.
inline constexpr double kBudgetSlack = 1e-9;

// A client's request to move its account, recorded on the coordination
// chain. gain is the potential improvement backing the request (> 0).
struct MigrationRequest {
  AccountIdx account = 0;
  int from = 0;
  int to = 0;
  double gain = 0.0;
  std::uint64_t epoch = 0;
};

// Per-epoch outcome row. intra/cross classify the whole offered batch;
// committed_intra/committed_cross split the committed subset. omega is the
// offered workload under the start-of-epoch mapping.
struct EpochReport {
  std::uint64_t epoch = 0;
  std::int64_t committed_tx = 0;
  std::int64_t dropped_tx = 0;
  std::int64_t intra = 0;
  std::int64_t cross = 0;
  std::int64_t committed_intra = 0;
  std::int64_t committed_cross = 0;
  std::int64_t proposed_mr = 0;
  std::int64_t committed_mr = 0;
  Vec omega;
  double cross_ratio = 0.0;
  double workload_deviation = 0.0;
  bool workload_deviation_defined = true;
  double normalized_throughput = 0.0;
};

// Per-account record of committed interactions: (epoch, counterparty) rows,
// appended in epoch order so trailing-window queries are a binary search.
class HistoryStore {
 public:
  // Appends one row per (participant, counterparty) pair of the transaction
  // and marks every participant active in `epoch`.
  void record_tx(const Transaction& tx, std::uint64_t epoch);

  // Accounts with any committed activity in the trailing `window` epochs
  // ending at `epoch` (window 0 = unbounded), ascending. `epoch` must be at
  // or beyond the newest recorded epoch: activity is tracked as a
  // last-active highwater, so querying behind the frontier would count
  // later activity as in-window.
  std::vector<AccountIdx> active_accounts(std::uint64_t window,
                                          std::uint64_t epoch) const;

  // Per-shard counterparty counts within the window; counterparties resolve
  // through their current (already materialized) assignment.
  Vec counts_for(AccountIdx account, std::uint64_t window, std::uint64_t epoch,
                 const AccountShardMapping& mapping, int k) const;

  // Materializes assignments for the account's windowed counterparties so
  // counts_for can run against a read-only mapping afterwards.
  void register_counterparties(AccountIdx account, std::uint64_t window,
                               std::uint64_t epoch,
                               AccountShardMapping& mapping) const;

  std::size_t row_count() const;

 private:
  struct Row {
    std::uint64_t epoch;
    AccountIdx other;
  };
  // First epoch still inside the window: epoch - window + 1 (clamped).
  static std::uint64_t cutoff(std::uint64_t window, std::uint64_t epoch) {
    if (window == 0) return 0;
    return epoch + 1 >= window ? epoch + 1 - window : 0;
  }
  std::vector<std::vector<Row>> rows_;
  std::vector<std::int64_t> last_active_;  // -1 = never
};

// Engine-level knobs on top of the system parameters.
struct EngineOptions {
  SimParams params;
  AllocatorKind allocator = AllocatorKind::kPilotDriven;
  std::uint64_t window = 0;     // trailing history epochs; 0 = entire history
  double noisy_mempool = 0.0;   // per-tx drop probability in the lookahead
  bool raw_fusion = false;      // blend raw counts instead of unit-mass
  unsigned threads = 0;         // decision-loop workers; 0 = hardware
};

// Mutable simulation state. All randomness is derived from
// (params.seed, epoch, account), so state carries no generator.
struct SimState {
  AccountShardMapping mapping;
  HistoryStore history;
  std::uint64_t epoch = 0;
};

struct CommitOutcome {
  std::vector<std::uint32_t> committed;  // positions within the batch
  std::vector<std::uint32_t> dropped;
  Vec consumed;  // per-shard units actually spent
  std::int64_t intra = 0;
  std::int64_t cross = 0;
  std::int64_t committed_intra = 0;
  std::int64_t committed_cross = 0;
};

// Processes the batch in trace order against per-shard budgets of lambda
// intra-equivalent units: an intra tx costs 1 at its shard; a cross tx costs
// eta at EACH involved shard and commits only if all of them can pay
// (all-or-nothing, otherwise dropped consuming nothing).
CommitOutcome commit_transactions(const EpochBatch& batch,
                                  AccountShardMapping& mapping, double lambda,
                                  double eta);

// One decision pass over every account active in the history window, with
// next_epoch as the mempool lookahead: Omega from the (optionally noisy)
// lookahead, expected transactions sampled per account under beta, and a
// request emitted iff the chosen shard differs with strictly positive gain.
std::vector<MigrationRequest> propose_migrations(SimState& state,
                                                 const EpochBatch& next_epoch,
                                                 const EngineOptions& options);

// Keeps the top floor(lambda) requests by gain (ties: smaller account index).
std::vector<MigrationRequest> commit_migrations(
    std::vector<MigrationRequest> requests, double lambda);

// Applies committed migrations, advances the epoch, and re-validates the
// mapping (throws std::logic_error on any violation — an engine bug).
void reconfigure(SimState& state,
                 const std::vector<MigrationRequest>& committed);

// Full epoch: commit current batch -> record committed history -> propose ->
// commit migrations -> reconfigure. Static allocators (hash/greedy) skip the
// migration phases. Metrics in the report are computed by the metrics
// module.
EpochReport run_epoch(SimState& state, const EpochBatch& current,
                      const EpochBatch& next, const EngineOptions& options);

// Worker count to use: explicit > 0 wins, else hardware concurrency.
unsigned resolve_threads(unsigned requested);

}  // namespace shardsim
