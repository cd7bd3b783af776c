#include <doctest.h>

#include <shardsim/pilot.hpp>
#include <shardsim/rng.hpp>
#include <shardsim/sha256.hpp>

#include <cmath>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

using namespace shardsim;

namespace {

Vec vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (const double x : xs) v[i++] = x;
  return v;
}

// Independent scalar-loop oracle for the placement cost: local work
// (psi_i intra + eta for each foreign counterparty) weighted by omega_i, plus
// eta * omega_j for every counterparty left on each foreign shard j.
double cost_oracle(const Vec& psi, const Vec& omega, double eta, int shard) {
  const int i = shard - 1;
  double total = 0;
  for (Eigen::Index j = 0; j < psi.size(); ++j) total += psi[j];
  double value = (psi[i] + eta * (total - psi[i])) * omega[i];
  for (Eigen::Index j = 0; j < psi.size(); ++j) {
    if (j != i) value += eta * psi[j] * omega[j];
  }
  return value;
}

// Exhaustive argmin/argmax with the shared tie-break chain, written
// independently of select_best.
int pick_oracle(const Vec& values, const Vec& omega, std::optional<int> current,
                bool maximize, double rel_tol) {
  const Eigen::Index n = values.size();
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < n; ++i) {
    if (maximize ? values[i] > values[best] : values[i] < values[best]) {
      best = i;
    }
  }
  auto tied = [&](Eigen::Index i) {
    const double a = values[i], b = values[best];
    return std::abs(a - b) <= rel_tol * std::max(std::abs(a), std::abs(b));
  };
  if (current && tied(*current - 1)) return *current;
  Eigen::Index pick = -1;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!tied(i)) continue;
    if (pick < 0 || omega[i] < omega[pick]) pick = i;
  }
  return static_cast<int>(pick) + 1;
}

struct PilotFixture {
  std::shared_ptr<AccountInterner> interner =
      std::make_shared<AccountInterner>();
  AccountShardMapping mapping;
  PilotFixture(int k) : mapping(k, interner) {}
  AccountIdx account(const std::string& id, int shard) {
    const AccountIdx idx = interner->intern(id);
    mapping.assign(idx, shard);
    return idx;
  }
};

}  // namespace

TEST_CASE("interaction_distribution counts counterparties per shard") {
  PilotFixture fx(2);
  const AccountIdx nu = fx.account("nu", 1);
  const AccountIdx b = fx.account("b", 2);
  const AccountIdx c = fx.account("c", 1);
  const AccountIdx d = fx.account("d", 2);

  const std::vector<Transaction> txs{
      {0, 0, {nu, b}},
      {1, 0, {nu, c, d}},
  };
  const Vec psi = interaction_distribution(txs, nu, fx.mapping, 2);
  CHECK(psi[0] == 1.0);  // c
  CHECK(psi[1] == 2.0);  // b, d
}

TEST_CASE("interaction_distribution edge cases") {
  PilotFixture fx(3);
  const AccountIdx nu = fx.account("nu", 1);

  CHECK(interaction_distribution({}, nu, fx.mapping, 3).sum() == 0.0);

  // Arity-1 transactions contribute no counterparties.
  const std::vector<Transaction> solo{{0, 0, {nu}}};
  CHECK(interaction_distribution(solo, nu, fx.mapping, 3).sum() == 0.0);

  // Every transaction must involve the account.
  const AccountIdx b = fx.account("b", 2);
  const AccountIdx c = fx.account("c", 2);
  const std::vector<Transaction> foreign{{0, 0, {b, c}}};
  CHECK_THROWS_AS(interaction_distribution(foreign, nu, fx.mapping, 3),
                  std::invalid_argument);

  // Repeat counterparties accumulate.
  const std::vector<Transaction> repeat{{0, 0, {nu, b}}, {1, 0, {nu, b}}};
  const Vec psi = interaction_distribution(repeat, nu, fx.mapping, 3);
  CHECK(psi[1] == 2.0);
  CHECK(psi[0] == 0.0);
  CHECK(psi[2] == 0.0);
}

TEST_CASE("interaction_distribution resolves unassigned counterparties") {
  PilotFixture fx(16);
  const AccountIdx nu = fx.account("nu", 1);
  const AccountIdx stranger = fx.interner->intern("0xabc");  // unassigned
  const std::vector<Transaction> txs{{0, 0, {nu, stranger}}};
  const Vec psi = interaction_distribution(txs, nu, fx.mapping, 16);
  // The stranger lands on its hash shard and is counted there.
  CHECK(psi[hash_shard("0xabc", 16) - 1] == 1.0);
  CHECK(fx.mapping.lookup(stranger).has_value());
}

TEST_CASE("fuse blends unit-normalized operands") {
  const Vec h = vec({2, 0});
  const Vec e = vec({0, 4});
  const Vec f = fuse(h, e, 0.25);
  CHECK(f[0] == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(f[1] == doctest::Approx(0.25).epsilon(1e-12));

  // Endpoints: beta 0 -> normalized history, beta 1 -> normalized expected.
  const Vec f0 = fuse(h, e, 0.0);
  CHECK(f0[0] == doctest::Approx(1.0));
  CHECK(f0[1] == doctest::Approx(0.0));
  const Vec f1 = fuse(h, e, 1.0);
  CHECK(f1[0] == doctest::Approx(0.0));
  CHECK(f1[1] == doctest::Approx(1.0));

  // A zero operand stays zero instead of poisoning the blend.
  const Vec z = vec({0, 0});
  const Vec fz = fuse(z, e, 0.25);
  CHECK(fz[0] == doctest::Approx(0.0));
  CHECK(fz[1] == doctest::Approx(0.25));
  CHECK(fuse(z, z, 0.5).sum() == 0.0);

  // Equal direction in, same direction out, any beta.
  const Vec v = vec({3, 1});
  for (const double beta : {0.0, 0.3, 1.0}) {
    const Vec fv = fuse(v, v * 2.0, beta);
    CHECK(fv[0] == doctest::Approx(0.75));
    CHECK(fv[1] == doctest::Approx(0.25));
  }

  CHECK_THROWS_AS(fuse(vec({1, 2}), vec({1, 2, 3}), 0.5),
                  std::invalid_argument);
}

TEST_CASE("fuse raw mode blends untouched counts") {
  const Vec h = vec({2, 0});
  const Vec e = vec({0, 4});
  const Vec f = fuse(h, e, 0.25, /*raw=*/true);
  CHECK(f[0] == doctest::Approx(1.5));   // 0.75 * 2
  CHECK(f[1] == doctest::Approx(1.0));   // 0.25 * 4
}

TEST_CASE("cost matches the worked two-shard example") {
  const Vec psi = vec({3, 1});
  const Vec omega = vec({10, 5});
  CHECK(cost(psi, omega, 2.0, 1) == doctest::Approx(60.0).epsilon(1e-12));
  CHECK(cost(psi, omega, 2.0, 2) == doctest::Approx(95.0).epsilon(1e-12));
  const Vec all = costs(psi, omega, 2.0);
  CHECK(all[0] == doctest::Approx(60.0));
  CHECK(all[1] == doctest::Approx(95.0));
}

TEST_CASE("potential matches the worked two-shard example") {
  const Vec psi = vec({3, 1});
  const Vec omega = vec({10, 5});
  CHECK(potential(psi, omega, 2.0, 1) == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(potential(psi, omega, 2.0, 2) == doctest::Approx(-25.0).epsilon(1e-12));
  const Vec all = potentials(psi, omega, 2.0);
  CHECK(all[0] == doctest::Approx(10.0));
  CHECK(all[1] == doctest::Approx(-25.0));
}

TEST_CASE("zero interaction vector zeroes costs and potentials") {
  const Vec psi = Vec::Zero(4);
  const Vec omega = vec({7, 3, 9, 2});
  CHECK(costs(psi, omega, 2.0).abs().sum() == 0.0);
  CHECK(potentials(psi, omega, 2.0).abs().sum() == 0.0);
}

TEST_CASE("cost and potentials match scalar-loop oracles") {
  Rng rng(2024);
  for (int iter = 0; iter < 500; ++iter) {
    const int k = 2 + static_cast<int>(rng.below(15));
    const double eta = 1.0 + rng.unit() * 9.0 + 1e-6;
    Vec psi(k), omega(k);
    for (int i = 0; i < k; ++i) {
      psi[i] = static_cast<double>(rng.below(101));
      omega[i] = rng.unit() * 99.0 + 1.0;
    }
    const Vec cv = costs(psi, omega, eta);
    const Vec pv = potentials(psi, omega, eta);
    for (int s = 1; s <= k; ++s) {
      CHECK(cv[s - 1] ==
            doctest::Approx(cost_oracle(psi, omega, eta, s)).epsilon(1e-12));
      CHECK(cost(psi, omega, eta, s) == cv[s - 1]);
      CHECK(potential(psi, omega, eta, s) == pv[s - 1]);
      const double total = psi.sum();
      const double direct = ((2.0 * eta - 1.0) * psi[s - 1] - eta * total) *
                            omega[s - 1];
      CHECK(pv[s - 1] == doctest::Approx(direct).epsilon(1e-12));
    }
  }
}

TEST_CASE("pairwise cost differences mirror potential differences") {
  Rng rng(99);
  for (int iter = 0; iter < 300; ++iter) {
    const int k = 2 + static_cast<int>(rng.below(10));
    const double eta = 1.0 + rng.unit() * 5.0 + 1e-6;
    Vec psi(k), omega(k);
    for (int i = 0; i < k; ++i) {
      psi[i] = rng.unit() * 50.0;
      omega[i] = rng.unit() * 20.0 + 0.5;
    }
    const Vec cv = costs(psi, omega, eta);
    const Vec pv = potentials(psi, omega, eta);
    const double scale = cv.abs().maxCoeff() + pv.abs().maxCoeff() + 1.0;
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) {
        CHECK(std::abs((cv[i] - cv[j]) - (pv[j] - pv[i])) <= 1e-9 * scale);
      }
    }
  }
}

TEST_CASE("decide_from_psi follows the worked example") {
  const Vec psi = vec({3, 1});
  const Vec omega = vec({10, 5});
  const PilotDecision d = decide_from_psi(psi, omega, 2.0, 2);
  CHECK(d.chosen == 1);
  CHECK(d.potential_gain == doctest::Approx(35.0).epsilon(1e-12));
  CHECK(d.potentials[0] == doctest::Approx(10.0));
  CHECK(d.potentials[1] == doctest::Approx(-25.0));

  // Staying put yields zero gain.
  const PilotDecision stay = decide_from_psi(psi, omega, 2.0, 1);
  CHECK(stay.chosen == 1);
  CHECK(stay.potential_gain == 0.0);
}

TEST_CASE("decide_from_psi with no interactions prefers the lightest shard") {
  const Vec psi = Vec::Zero(3);
  const Vec omega = vec({7, 3, 9});
  const PilotDecision d = decide_from_psi(psi, omega, 2.0, std::nullopt);
  CHECK(d.chosen == 2);  // all potentials zero -> min omega wins
  CHECK(d.potential_gain == 0.0);

  // With a current shard, a full tie keeps the account where it is.
  const PilotDecision keep = decide_from_psi(psi, omega, 2.0, 3);
  CHECK(keep.chosen == 3);
  CHECK(keep.potential_gain == 0.0);
}

TEST_CASE("single-shard systems always choose shard 1") {
  const PilotDecision d =
      decide_from_psi(vec({5}), vec({11}), 2.0, std::optional<int>{1});
  CHECK(d.chosen == 1);
  CHECK(d.potential_gain == 0.0);
}

TEST_CASE("select_best tie-break chain: current, then omega, then index") {
  // psi = [1,1], eta 2 -> potentials tied at -omega_i * 1... use equal omega.
  const Vec tied = vec({-5, -5, -2});
  const Vec omega = vec({4, 4, 1});

  // current tied with best -> stays.
  CHECK(select_best(tied, omega, 1, /*maximize=*/false) == 1);
  CHECK(select_best(tied, omega, 2, false) == 2);
  // current not tied -> falls through to min omega among tied.
  const Vec vals = vec({-5, -5, -2});
  const Vec omega2 = vec({4, 3, 1});
  CHECK(select_best(vals, omega2, 3, false) == 2);
  // equal omega among tied -> smallest index.
  CHECK(select_best(tied, omega, std::nullopt, false) == 1);
  // maximize flips the sense.
  CHECK(select_best(vec({1, 9, 9}), vec({5, 2, 2}), std::nullopt, true) == 2);
}

TEST_CASE("near-ties within the relative tolerance count as ties") {
  const double base = 1e12;
  const Vec vals = vec({base, base * (1.0 + 1e-12), 0.0});
  const Vec omega = vec({9, 1, 5});
  // Entries 1 and 2 are tied at rel 1e-12 <= 1e-9 -> min omega picks shard 2.
  CHECK(select_best(vals, omega, std::nullopt, true) == 2);
  // A gap wider than the tolerance is not a tie.
  const Vec split = vec({base, base * (1.0 + 1e-6), 0.0});
  CHECK(select_best(split, omega, std::nullopt, true) == 2);
  const Vec split2 = vec({base * (1.0 + 1e-6), base, 0.0});
  CHECK(select_best(split2, omega, std::nullopt, true) == 1);
}

TEST_CASE("decision picks argmin cost == argmax potential") {
  Rng rng(31415);
  int integer_cases = 0;
  for (int iter = 0; iter < 2000; ++iter) {
    const bool integer_eta = iter % 2 == 0;
    const int k = 2 + static_cast<int>(rng.below(63));
    const double eta =
        integer_eta ? 2.0 + static_cast<double>(rng.below(9))
                    : 1.0 + rng.unit() * 9.0 + 1e-9;
    Vec psi(k), omega(k);
    for (int i = 0; i < k; ++i) {
      psi[i] = static_cast<double>(rng.below(101));
      omega[i] = integer_eta ? static_cast<double>(1 + rng.below(100))
                             : rng.unit() * 99.0 + 1.0;
    }
    std::optional<int> current;
    if (rng.chance(0.5)) current = 1 + static_cast<int>(rng.below(k));

    const int via_cost = select_best(costs(psi, omega, eta), omega, current,
                                     /*maximize=*/false);
    const int via_potential = select_best(potentials(psi, omega, eta), omega,
                                          current, /*maximize=*/true);
    CHECK(via_cost == via_potential);
    CHECK(pick_oracle(potentials(psi, omega, eta), omega, current, true,
                      kTieTol) == via_potential);
    if (integer_eta) ++integer_cases;
  }
  CHECK(integer_cases == 1000);
}

TEST_CASE("gain is nonnegative and zero only when staying") {
  Rng rng(777);
  for (int iter = 0; iter < 1000; ++iter) {
    const int k = 2 + static_cast<int>(rng.below(15));
    const double eta = 1.0 + rng.unit() * 4.0 + 1e-9;
    Vec psi(k), omega(k);
    for (int i = 0; i < k; ++i) {
      psi[i] = static_cast<double>(rng.below(30));
      omega[i] = rng.unit() * 10.0 + 0.1;
    }
    const int current = 1 + static_cast<int>(rng.below(k));
    const PilotDecision d = decide_from_psi(psi, omega, eta, current);
    CHECK(d.potential_gain >= 0.0);
    if (d.chosen == current) {
      CHECK(d.potential_gain == 0.0);
    } else {
      CHECK(d.potential_gain > 0.0);
    }
    CHECK(d.potential_gain ==
          doctest::Approx(d.potentials[d.chosen - 1] -
                          d.potentials[current - 1]));
  }
}

TEST_CASE("a dominant home shard is never left") {
  // When psi_i / total > eta / (2*eta - 1), shard i maximizes the potential
  // regardless of the (positive) workloads.
  Rng rng(4321);
  for (int iter = 0; iter < 400; ++iter) {
    const int k = 2 + static_cast<int>(rng.below(15));
    const double eta = 1.0 + rng.unit() * 9.0 + 1e-6;
    const double threshold = eta / (2.0 * eta - 1.0);
    const int home = static_cast<int>(rng.below(k));
    Vec psi(k), omega(k);
    double rest = 0;
    for (int i = 0; i < k; ++i) {
      psi[i] = i == home ? 0.0 : rng.unit();
      rest += psi[i];
      omega[i] = rng.unit() * 99.0 + 1.0;
    }
    // Give home strictly more than the dominance threshold of the total.
    const double margin = 1.05 + rng.unit();
    psi[home] = rest <= 0.0 ? 1.0
                            : rest * threshold * margin / (1.0 - threshold);
    const PilotDecision d =
        decide_from_psi(psi, omega, eta, 1 + static_cast<int>(rng.below(k)));
    CHECK(d.chosen == home + 1);
  }
}

TEST_CASE("decision is invariant under uniform scaling of psi and omega") {
  Rng rng(555);
  for (int iter = 0; iter < 500; ++iter) {
    const int k = 2 + static_cast<int>(rng.below(15));
    const double eta = 1.0 + rng.unit() * 4.0 + 1e-9;
    Vec psi(k), omega(k);
    for (int i = 0; i < k; ++i) {
      psi[i] = static_cast<double>(rng.below(50));
      omega[i] = rng.unit() * 20.0 + 0.5;
    }
    const int current = 1 + static_cast<int>(rng.below(k));
    const int baseline = decide_from_psi(psi, omega, eta, current).chosen;
    for (const double c : {1e-3, 0.5, 7.0, 1e3}) {
      CHECK(decide_from_psi(psi * c, omega, eta, current).chosen == baseline);
      CHECK(decide_from_psi(psi, omega * c, eta, current).chosen == baseline);
    }
  }
}

TEST_CASE("pilot_decide runs the full pipeline") {
  PilotFixture fx(2);
  const AccountIdx nu = fx.account("nu", 2);
  const AccountIdx p = fx.account("p", 1);
  const AccountIdx q = fx.account("q", 2);

  // History: 3 counterparties on shard 1, 1 on shard 2.
  const std::vector<Transaction> hist{
      {0, 0, {nu, p}}, {1, 0, {nu, p}}, {2, 0, {nu, p}}, {3, 0, {nu, q}}};
  const Vec omega = vec({10, 5});
  SimParams params;
  params.k = 2;
  params.eta = 2.0;
  params.beta = 0.0;

  const PilotDecision d =
      pilot_decide(nu, hist, {}, fx.mapping, omega, params);
  CHECK(d.chosen == 1);
  // With beta 0 the fused vector is psi/|psi| = [0.75, 0.25], so the worked
  // example's gain of 35 shrinks by the normalization factor 4.
  CHECK(d.potential_gain == doctest::Approx(35.0 / 4.0).epsilon(1e-12));

  // Raw fusion keeps the unnormalized counts and the textbook gain.
  const PilotDecision raw =
      pilot_decide(nu, hist, {}, fx.mapping, omega, params, /*raw=*/true);
  CHECK(raw.chosen == 1);
  CHECK(raw.potential_gain == doctest::Approx(35.0).epsilon(1e-12));
}

TEST_CASE("pilot_decide fuses expected traffic by beta") {
  PilotFixture fx(2);
  const AccountIdx nu = fx.account("nu", 1);
  const AccountIdx p = fx.account("p", 1);
  const AccountIdx q = fx.account("q", 2);

  // History pulls to shard 1, expected pulls to shard 2.
  const std::vector<Transaction> hist{{0, 0, {nu, p}}, {1, 0, {nu, p}}};
  const std::vector<Transaction> expected{
      {10, 0, {nu, q}}, {11, 0, {nu, q}}, {12, 0, {nu, q}}};
  const Vec omega = vec({6, 5});
  SimParams params;
  params.k = 2;
  params.eta = 2.0;

  params.beta = 0.0;
  CHECK(pilot_decide(nu, hist, expected, fx.mapping, omega, params).chosen ==
        1);
  params.beta = 1.0;
  const PilotDecision flip =
      pilot_decide(nu, hist, expected, fx.mapping, omega, params);
  CHECK(flip.chosen == 2);
  CHECK(flip.potential_gain > 0.0);

  // Fused decision agrees with composing the pieces by hand.
  params.beta = 0.4;
  const Vec psi_h = interaction_distribution(hist, nu, fx.mapping, 2);
  const Vec psi_e = interaction_distribution(expected, nu, fx.mapping, 2);
  const Vec fused = fuse(psi_h, psi_e, 0.4);
  const PilotDecision by_hand = decide_from_psi(fused, omega, 2.0, 1);
  const PilotDecision full =
      pilot_decide(nu, hist, expected, fx.mapping, omega, params);
  CHECK(full.chosen == by_hand.chosen);
  CHECK(full.potential_gain == doctest::Approx(by_hand.potential_gain));
}
