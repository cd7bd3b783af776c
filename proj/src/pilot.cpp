#include "shardsim/pilot.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace shardsim {

namespace {

void check_shard(const Vec& v, int shard, const char* where) {
  if (shard < 1 || shard > v.size()) {
    throw std::invalid_argument(std::string(where) + ": shard out of range");
  }
}

}  // namespace

Vec interaction_distribution(std::span<const Transaction> txs,
                             AccountIdx account, AccountShardMapping& mapping,
                             int k) {
  if (k < 1) {
    throw std::invalid_argument("interaction_distribution: k must be >= 1");
  }
  Vec counts = Vec::Zero(k);
  for (const Transaction& tx : txs) {
    bool involves = false;
    for (AccountIdx b : tx.accounts) {
      if (b == account) {
        involves = true;
        break;
      }
    }
    if (!involves) {
      throw std::invalid_argument(
          "interaction_distribution: transaction does not involve the "
          "account");
    }
    for (AccountIdx b : tx.accounts) {
      if (b == account) continue;
      const int shard = mapping.shard_of(b);
      counts[shard - 1] += 1.0;
    }
  }
  return counts;
}

Vec fuse(const Vec& hist, const Vec& expected, double beta, bool raw) {
  if (hist.size() != expected.size()) {
    throw std::invalid_argument("fuse: vector length mismatch");
  }
  if (beta < 0.0 || beta > 1.0) {
    throw std::invalid_argument("fuse: beta must be in [0,1]");
  }
  if (raw) return (1.0 - beta) * hist + beta * expected;
  const auto unit = [](const Vec& v) -> Vec {
    const double total = v.sum();
    return total > 0.0 ? Vec(v / total) : v;
  };
  return (1.0 - beta) * unit(hist) + beta * unit(expected);
}

Vec costs(const Vec& psi, const Vec& omega, double eta) {
  if (psi.size() != omega.size()) {
    throw std::invalid_argument("costs: vector length mismatch");
  }
  const double total = psi.sum();
  const double dot = (psi * omega).sum();
  // Placing on shard i makes its psi_i interactions intra (weight 1) and the
  // rest cross (weight eta) at shard i, plus eta-weighted load at every
  // counterparty shard j != i.
  return (psi + eta * (total - psi)) * omega + eta * (dot - psi * omega);
}

double cost(const Vec& psi, const Vec& omega, double eta, int shard) {
  check_shard(psi, shard, "cost");
  return costs(psi, omega, eta)[shard - 1];
}

Vec potentials(const Vec& psi, const Vec& omega, double eta) {
  if (psi.size() != omega.size()) {
    throw std::invalid_argument("potentials: vector length mismatch");
  }
  const double total = psi.sum();
  return ((2.0 * eta - 1.0) * psi - eta * total) * omega;
}

double potential(const Vec& psi, const Vec& omega, double eta, int shard) {
  check_shard(psi, shard, "potential");
  return potentials(psi, omega, eta)[shard - 1];
}

int select_best(const Vec& values, const Vec& omega,
                std::optional<int> current, bool maximize, double rel_tol) {
  const auto k = values.size();
  if (k < 1) throw std::invalid_argument("select_best: empty values");
  if (omega.size() != k) {
    throw std::invalid_argument("select_best: vector length mismatch");
  }
  const double best = maximize ? values.maxCoeff() : values.minCoeff();
  const auto tied = [&](double v) {
    return std::abs(v - best) <=
           rel_tol * std::max(std::abs(v), std::abs(best));
  };
  if (current) {
    check_shard(values, *current, "select_best");
    if (tied(values[*current - 1])) return *current;
  }
  int pick = 0;
  for (Eigen::Index i = 0; i < k; ++i) {
    if (!tied(values[i])) continue;
    if (pick == 0 || omega[i] < omega[pick - 1]) {
      pick = static_cast<int>(i) + 1;
    }
  }
  return pick;
}

PilotDecision decide_from_psi(const Vec& psi, const Vec& omega, double eta,
                              std::optional<int> current) {
  PilotDecision decision;
  decision.potentials = potentials(psi, omega, eta);
  decision.chosen = select_best(decision.potentials, omega, current,
                                /*maximize=*/true);
  decision.potential_gain =
      current ? decision.potentials[decision.chosen - 1] -
                    decision.potentials[*current - 1]
              : 0.0;
  return decision;
}

PilotDecision pilot_decide(AccountIdx account,
                           std::span<const Transaction> hist_txs,
                           std::span<const Transaction> expected_txs,
                           AccountShardMapping& mapping, const Vec& omega,
                           const SimParams& params, bool raw_fusion) {
  const int current = mapping.shard_of(account);
  const Vec psi_h =
      interaction_distribution(hist_txs, account, mapping, params.k);
  const Vec psi_e =
      interaction_distribution(expected_txs, account, mapping, params.k);
  const Vec psi = fuse(psi_h, psi_e, params.beta, raw_fusion);
  return decide_from_psi(psi, omega, params.eta, current);
}

}  // namespace shardsim
