#include "shardsim/allocators.hpp"

#include "shardsim/sha256.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <unordered_map>
#include <vector>

namespace shardsim {

AllocatorKind parse_allocator(std::string_view name) {
  if (name == "hash") return AllocatorKind::kHashRandom;
  if (name == "greedy") return AllocatorKind::kGreedyCommunity;
  if (name == "pilot") return AllocatorKind::kPilotDriven;
  throw std::invalid_argument("allocator must be one of hash, greedy, pilot");
}

std::string_view allocator_name(AllocatorKind kind) {
  switch (kind) {
    case AllocatorKind::kHashRandom:
      return "hash";
    case AllocatorKind::kGreedyCommunity:
      return "greedy";
    case AllocatorKind::kPilotDriven:
      return "pilot";
  }
  throw std::logic_error("allocator_name: unknown kind");
}

int allocate_hash(std::string_view account_id, int k) {
  return hash_shard(account_id, k);
}

namespace {

// Weighted neighbor lists over co-occurring accounts, indexed densely by the
// order of first appearance in txs.
struct InteractionGraph {
  std::vector<AccountIdx> accounts;             // dense -> AccountIdx
  std::unordered_map<AccountIdx, int> dense;    // AccountIdx -> dense
  std::vector<std::map<int, double>> neighbor;  // dense -> {dense: weight}

  int touch(AccountIdx a) {
    auto [it, fresh] = dense.emplace(a, static_cast<int>(accounts.size()));
    if (fresh) {
      accounts.push_back(a);
      neighbor.emplace_back();
    }
    return it->second;
  }
};

InteractionGraph build_graph(std::span<const Transaction> txs) {
  InteractionGraph g;
  for (const Transaction& tx : txs) {
    for (std::size_t i = 0; i < tx.accounts.size(); ++i) {
      const int a = g.touch(tx.accounts[i]);
      for (std::size_t j = i + 1; j < tx.accounts.size(); ++j) {
        const int b = g.touch(tx.accounts[j]);
        g.neighbor[a][b] += 1.0;
        g.neighbor[b][a] += 1.0;
      }
    }
  }
  return g;
}

// Asynchronous label propagation, deterministic: nodes are swept in dense
// order, each adopting the label with the largest incident weight (ties to
// the smaller label). Converges quickly on community-structured graphs; the
// round cap bounds pathological cases.
std::vector<int> propagate_labels(const InteractionGraph& g) {
  const int n = static_cast<int>(g.accounts.size());
  std::vector<int> label(n);
  for (int i = 0; i < n; ++i) label[i] = i;

  constexpr int kMaxRounds = 20;
  std::unordered_map<int, double> weight_by_label;
  for (int round = 0; round < kMaxRounds; ++round) {
    bool changed = false;
    for (int v = 0; v < n; ++v) {
      if (g.neighbor[v].empty()) continue;
      weight_by_label.clear();
      for (const auto& [u, w] : g.neighbor[v]) weight_by_label[label[u]] += w;
      int best = label[v];
      double best_w = -1.0;
      for (const auto& [lab, w] : weight_by_label) {
        if (w > best_w || (w == best_w && lab < best)) {
          best = lab;
          best_w = w;
        }
      }
      if (best != label[v]) {
        label[v] = best;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return label;
}

}  // namespace

AccountShardMapping allocate_greedy_community(
    std::span<const Transaction> txs, int k, double cap_factor,
    std::shared_ptr<AccountInterner> interner) {
  if (k < 1) {
    throw std::invalid_argument("allocate_greedy_community: k must be >= 1");
  }
  if (cap_factor < 1.0) {
    throw std::invalid_argument(
        "allocate_greedy_community: cap_factor must be >= 1");
  }
  AccountShardMapping mapping(k, std::move(interner));

  const InteractionGraph graph = build_graph(txs);
  const int n = static_cast<int>(graph.accounts.size());
  if (n == 0) return mapping;  // nothing to partition; hash rule on lookup

  const std::vector<int> label = propagate_labels(graph);

  // Group members per community, in dense (first-appearance) order.
  std::unordered_map<int, std::vector<int>> by_label;
  for (int v = 0; v < n; ++v) by_label[label[v]].push_back(v);
  std::vector<std::vector<int>> communities;
  communities.reserve(by_label.size());
  for (auto& [lab, members] : by_label) communities.push_back(members);
  // Heaviest first; equal sizes ordered by their smallest member for
  // determinism (unordered_map iteration order is not portable).
  std::sort(communities.begin(), communities.end(),
            [](const std::vector<int>& a, const std::vector<int>& b) {
              if (a.size() != b.size()) return a.size() > b.size();
              return a.front() < b.front();
            });

  const auto cap = static_cast<std::int64_t>(std::max(
      1.0, std::ceil(cap_factor * static_cast<double>(n) /
                     static_cast<double>(k))));
  std::vector<std::int64_t> load(k, 0);
  const auto least_loaded = [&](void) {
    int best = 0;
    for (int s = 1; s < k; ++s) {
      if (load[s] < load[best]) best = s;
    }
    return best;
  };

  for (const auto& members : communities) {
    // Place whole on the least-loaded shard with room; otherwise spill member
    // by member across least-loaded shards (cap * k >= n guarantees room).
    int target = -1;
    std::int64_t target_load = 0;
    for (int s = 0; s < k; ++s) {
      if (load[s] + static_cast<std::int64_t>(members.size()) <= cap &&
          (target < 0 || load[s] < target_load)) {
        target = s;
        target_load = load[s];
      }
    }
    if (target >= 0) {
      for (int v : members) mapping.assign(graph.accounts[v], target + 1);
      load[target] += static_cast<std::int64_t>(members.size());
    } else {
      for (int v : members) {
        int s = least_loaded();
        if (load[s] >= cap) {
          throw std::logic_error(
              "allocate_greedy_community: capacity accounting bug");
        }
        mapping.assign(graph.accounts[v], s + 1);
        ++load[s];
      }
    }
  }
  return mapping;
}

Vec workload_oracle(std::span<const Transaction> txs,
                    AccountShardMapping& mapping, double eta) {
  if (!(eta > 1.0)) {
    throw std::invalid_argument("workload_oracle: eta must be > 1");
  }
  Vec omega = Vec::Zero(mapping.k());
  std::vector<int> shards;
  for (const Transaction& tx : txs) {
    classify_into(tx, mapping, shards);
    if (shards.size() == 1) {
      omega[shards[0] - 1] += 1.0;
    } else {
      for (int s : shards) omega[s - 1] += eta;
    }
  }
  return omega;
}

Vec workload_oracle(const EpochBatch& batch, AccountShardMapping& mapping,
                    double eta) {
  return workload_oracle(batch.txs, mapping, eta);
}

}  // namespace shardsim
