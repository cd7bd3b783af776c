#include <doctest.h>

#include <shardsim/model.hpp>
#include <shardsim/rng.hpp>
#include <shardsim/sha256.hpp>

#include <algorithm>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

using namespace shardsim;

namespace {

std::shared_ptr<AccountInterner> make_interner() {
  return std::make_shared<AccountInterner>();
}

}  // namespace

TEST_CASE("interner issues dense first-seen indices") {
  AccountInterner in;
  const AccountIdx a = in.intern("alice");
  const AccountIdx b = in.intern("bob");
  CHECK(a == 0);
  CHECK(b == 1);
  CHECK(in.intern("alice") == a);  // idempotent
  CHECK(in.size() == 2);
  CHECK(in.name(a) == "alice");
  CHECK(in.name(b) == "bob");
  CHECK(in.find("alice") == a);
  CHECK(in.find("carol") == std::nullopt);
  CHECK_THROWS_AS(in.intern(""), std::invalid_argument);
}

TEST_CASE("params defaults are valid and violations name the field") {
  SimParams p;
  CHECK(p.k == 16);
  CHECK(p.eta == doctest::Approx(2.0));
  CHECK(p.tau == 300);
  CHECK_NOTHROW(p.validate());

  auto message_of = [](SimParams bad, bool require_lambda = false) {
    try {
      bad.validate(require_lambda);
      return std::string{};
    } catch (const std::invalid_argument& e) {
      return std::string(e.what());
    }
  };

  SimParams bad = p;
  bad.k = 0;
  CHECK(message_of(bad).find("k") != std::string::npos);

  bad = p;
  bad.eta = 1.0;  // boundary excluded: eta must exceed 1
  CHECK(message_of(bad).find("eta") != std::string::npos);

  bad = p;
  bad.tau = 0;
  CHECK(message_of(bad).find("tau") != std::string::npos);

  bad = p;
  bad.beta = 1.5;
  CHECK(message_of(bad).find("beta") != std::string::npos);
  bad.beta = -0.1;
  CHECK(message_of(bad).find("beta") != std::string::npos);

  bad = p;
  bad.lambda = -2.0;
  CHECK(message_of(bad).find("lambda") != std::string::npos);

  // lambda == 0 is fine as "auto" but not once a concrete budget is required.
  bad = p;
  bad.lambda = 0.0;
  CHECK_NOTHROW(bad.validate(false));
  CHECK(message_of(bad, true).find("lambda") != std::string::npos);
}

TEST_CASE("mapping returns explicit assignments") {
  auto in = make_interner();
  AccountShardMapping m(4, in);
  const AccountIdx a = in->intern("a");
  m.assign(a, 2);
  CHECK(m.shard_of(a) == 2);
  CHECK(m.lookup(a) == 2);
  CHECK(m.shard_of_assigned(a) == 2);
  CHECK(m.assigned_count() == 1);
}

TEST_CASE("mapping hash fallback assigns and registers on first sight") {
  auto in = make_interner();
  AccountShardMapping m(16, in);

  // Fallback equals the standalone hash allocation and then sticks.
  CHECK(m.shard_of("0xabc") == hash_shard("0xabc", 16));
  CHECK(m.shard_of("0xabc") == 1);
  const AccountIdx idx = *in->find("0xabc");
  CHECK(m.lookup(idx) == 1);
  CHECK(m.assigned_count() == 1);

  // k == 1: everything lands on the only shard.
  AccountShardMapping single(1, make_interner());
  CHECK(single.shard_of("anything") == 1);

  // lookup stays read-only: no registration.
  const AccountIdx fresh = in->intern("fresh");
  CHECK(m.lookup(fresh) == std::nullopt);
  CHECK(m.assigned_count() == 1);
  CHECK_THROWS_AS(m.shard_of_assigned(fresh), std::logic_error);
}

TEST_CASE("mapping move and assign enforce their preconditions") {
  auto in = make_interner();
  AccountShardMapping m(4, in);
  const AccountIdx a = in->intern("a");

  CHECK_THROWS_AS(m.move(a, 2), std::logic_error);  // not assigned yet
  m.assign(a, 1);
  m.move(a, 4);
  CHECK(m.shard_of_assigned(a) == 4);

  CHECK_THROWS_AS(m.assign(a, 0), std::invalid_argument);
  CHECK_THROWS_AS(m.assign(a, 5), std::invalid_argument);
  CHECK_THROWS_AS(m.move(a, -1), std::invalid_argument);
}

TEST_CASE("assigned_accounts lists explicit assignments ascending") {
  auto in = make_interner();
  AccountShardMapping m(8, in);
  const AccountIdx a = in->intern("a");
  const AccountIdx b = in->intern("b");
  const AccountIdx c = in->intern("c");
  m.assign(c, 3);
  m.assign(a, 1);
  CHECK(m.assigned_accounts() == std::vector<AccountIdx>{a, c});
  m.assign(b, 2);
  CHECK(m.assigned_accounts() == std::vector<AccountIdx>{a, b, c});
}

TEST_CASE("classification resolves distinct shards ascending") {
  auto in = make_interner();
  AccountShardMapping m(4, in);
  const AccountIdx a = in->intern("a");
  const AccountIdx b = in->intern("b");
  const AccountIdx c = in->intern("c");
  m.assign(a, 2);
  m.assign(b, 2);
  m.assign(c, 3);

  const TxClass intra = classify_transaction({0, 0, {a, b}}, m);
  CHECK_FALSE(intra.is_cross());
  CHECK(intra.shard() == 2);
  CHECK(intra.shards == std::vector<int>{2});

  const TxClass cross = classify_transaction({1, 0, {a, c}}, m);
  CHECK(cross.is_cross());
  CHECK(cross.shards == std::vector<int>{2, 3});

  const TxClass self = classify_transaction({2, 0, {a}}, m);
  CHECK_FALSE(self.is_cross());
  CHECK(self.shard() == 2);

  // Classifying an account with no assignment pulls in the hash fallback.
  const TxClass fallback = classify_transaction({3, 0, {in->intern("zz")}}, m);
  CHECK(fallback.shards.size() == 1);
  CHECK(m.lookup(*in->find("zz")).has_value());
}

TEST_CASE("classification matches a brute-force distinct-shard oracle") {
  Rng rng(4242);
  for (int iter = 0; iter < 300; ++iter) {
    const int k = 2 + static_cast<int>(rng.below(7));
    auto in = make_interner();
    AccountShardMapping m(k, in);
    const int n_accounts = 2 + static_cast<int>(rng.below(6));
    std::vector<AccountIdx> ids;
    for (int i = 0; i < n_accounts; ++i) {
      const AccountIdx idx = in->intern("acct" + std::to_string(i));
      m.assign(idx, 1 + static_cast<int>(rng.below(k)));
      ids.push_back(idx);
    }
    Transaction tx;
    tx.seq = iter;
    const int arity = 1 + static_cast<int>(rng.below(4));
    for (int i = 0; i < arity; ++i) {
      tx.accounts.push_back(ids[rng.below(ids.size())]);
    }
    std::sort(tx.accounts.begin(), tx.accounts.end());
    tx.accounts.erase(std::unique(tx.accounts.begin(), tx.accounts.end()),
                      tx.accounts.end());

    std::set<int> expected;
    for (const AccountIdx a : tx.accounts) expected.insert(m.shard_of(a));

    const TxClass got = classify_transaction(tx, m);
    CHECK(got.shards == std::vector<int>(expected.begin(), expected.end()));
    CHECK(got.is_cross() == (expected.size() > 1));

    std::vector<int> scratch;
    classify_into(tx, m, scratch);
    CHECK(scratch == got.shards);
  }
}

TEST_CASE("validate_mapping reports unassigned and out-of-range accounts") {
  auto in = make_interner();
  AccountShardMapping m(2, in);
  const AccountIdx a = in->intern("a");
  const AccountIdx b = in->intern("b");

  m.assign(a, 1);
  m.assign(b, 2);
  const std::vector<AccountIdx> both{a, b};
  CHECK(validate_mapping(m, both).ok());

  // b loses its assignment in a fresh mapping -> unassigned violation.
  AccountShardMapping partial(2, in);
  partial.assign(a, 1);
  const ValidationReport missing = validate_mapping(partial, both);
  REQUIRE(missing.violations.size() == 1);
  CHECK(missing.violations[0].account == b);
  CHECK(missing.violations[0].kind == MappingViolation::kUnassigned);

  // A foreign state can hold a shard id beyond k; the audit flags it.
  AccountShardMapping foreign(2, in);
  foreign.assign_unchecked(a, 3);
  const ValidationReport oob = validate_mapping(foreign, {{a}});
  REQUIRE(oob.violations.size() == 1);
  CHECK(oob.violations[0].account == a);
  CHECK(oob.violations[0].kind == MappingViolation::kOutOfRange);
}

TEST_CASE("hash fallback is deterministic across mapping instances") {
  auto in1 = make_interner();
  auto in2 = make_interner();
  AccountShardMapping m1(16, in1);
  AccountShardMapping m2(16, in2);
  for (int i = 0; i < 100; ++i) {
    const std::string id = "acct" + std::to_string(i);
    CHECK(m1.shard_of(id) == m2.shard_of(id));
  }
}
