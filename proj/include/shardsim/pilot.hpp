// The client-side shard-selection math: interaction distributions, fusion of
// historical and expected traffic, per-shard cost, its potential transform,
// and the decision rule.
//
// All functions are pure; shard vectors are Eigen arrays so the formulas read
// like the algebra they implement. Shard arguments and results are 1-based.
#pragma once

#include "shardsim/model.hpp"
#include "shardsim/types.hpp"

#include <optional>
#include <span>

namespace shardsim {

// Relative tie tolerance in the decision loop: values v, w count as tied when
// |v - w| <= kTieTol * max(|v|, |w|). Relative (not absolute) so a uniform
// scaling of the inputs can never change the tie structure.
inline constexpr double kTieTol = 1e-9;

// Per-shard counterparty counts of `account` over txs: entry i sums, across
// all transactions, the counterparties currently mapped to shard i.
// Counterparties resolve through the live mapping (and register on first
// sight). Throws std::invalid_argument if a tx does not involve the account.
Vec interaction_distribution(std::span<const Transaction> txs,
                             AccountIdx account, AccountShardMapping& mapping,
                             int k);

// Convex blend of historical and expected interaction vectors. Each operand
// is normalized to unit total first (zero vectors stay zero) so beta acts on
// comparable scales; raw=true skips the normalization and blends the raw
// counts.
Vec fuse(const Vec& hist, const Vec& expected, double beta, bool raw = false);

// Cost of placing the account on shard i (1-based):
//   (psi_i + eta * (total - psi_i)) * omega_i + eta * sum_{j != i} psi_j * omega_j
double cost(const Vec& psi, const Vec& omega, double eta, int shard);
Vec costs(const Vec& psi, const Vec& omega, double eta);

// Potential of shard i: ((2*eta - 1) * psi_i - eta * total) * omega_i.
// Maximizing potential is equivalent to minimizing cost (cost_i - cost_j =
// potential_j - potential_i).
double potential(const Vec& psi, const Vec& omega, double eta, int shard);
Vec potentials(const Vec& psi, const Vec& omega, double eta);

struct PilotDecision {
  int chosen = 1;
  double potential_gain = 0.0;  // P[chosen] - P[current]; 0 without a current
  Vec potentials;
};

// Picks the extremal entry of `values` with the tie-break chain:
// (1) keep `current` if it is tied with the best, else (2) smallest omega
// among the tied, else (3) smallest index. Returns a 1-based shard id.
int select_best(const Vec& values, const Vec& omega,
                std::optional<int> current, bool maximize,
                double rel_tol = kTieTol);

// Decision from an already-fused interaction vector.
PilotDecision decide_from_psi(const Vec& psi, const Vec& omega, double eta,
                              std::optional<int> current);

// Full decision pipeline for one account: historical distribution over
// hist_txs, expected distribution over expected_txs, fusion under
// params.beta, then potential maximization against the account's current
// shard.
PilotDecision pilot_decide(AccountIdx account,
                           std::span<const Transaction> hist_txs,
                           std::span<const Transaction> expected_txs,
                           AccountShardMapping& mapping, const Vec& omega,
                           const SimParams& params, bool raw_fusion = false);

}  // namespace shardsim
