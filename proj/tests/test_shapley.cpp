#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "shapval/shapley.hpp"

using namespace shapval;

namespace {

Fact fact(std::string rel, std::vector<std::string> args) {
  return Fact{std::move(rel), std::move(args)};
}

const char* kStarQuery = "R(x), S(x,y), T(y)";

QueryGame star_game() {
  return {{{fact("R", {"a"}), fact("S", {"a", "b"}), fact("T", {"b"})}, {}},
          parse_query(kStarQuery)};
}

QueryGame branching_game() {
  return {{{fact("R", {"a"}), fact("S", {"a", "b"}), fact("S", {"a", "c"})},
           {}},
          parse_query("R(x), S(x,y)")};
}

PartitionedDatabase random_db(std::mt19937& rng, size_t max_endo,
                              size_t max_exo) {
  const std::vector<std::string> consts{"a", "b", "c"};
  auto rand_fact = [&] {
    switch (rng() % 3) {
      case 0:
        return fact("R", {consts[rng() % 3]});
      case 1:
        return fact("S", {consts[rng() % 3], consts[rng() % 3]});
      default:
        return fact("T", {consts[rng() % 3]});
    }
  };
  PartitionedDatabase db;
  size_t ne = 1 + rng() % max_endo;
  size_t nx = rng() % (max_exo + 1);
  for (size_t i = 0; i < ne; ++i) db.endo.insert(rand_fact());
  for (size_t i = 0; i < nx; ++i) {
    Fact f = rand_fact();
    if (!db.endo.count(f)) db.exo.insert(f);
  }
  return db;
}

FgmcOracle brute_oracle(const Query& q) {
  return [&q](const PartitionedDatabase& d) {
    Budget b;
    return fgmc_vector(q, d, b);
  };
}

}  // namespace

TEST_CASE("wealth basics") {
  QueryGame g = star_game();
  CHECK(wealth(g, g.db.endo) == 1);
  CHECK(wealth(g, {}) == 0);
  QueryGame sat{{{fact("R", {"b"})}, {fact("R", {"a"})}},
                parse_query("R(x)")};
  CHECK(wealth(sat, sat.db.endo) == 0);
  CHECK(wealth(sat, {}) == 0);
  CHECK_THROWS(wealth(g, {fact("Z", {"q"})}));
}

TEST_CASE("star symmetry gives one third each") {
  QueryGame g = star_game();
  Budget b;
  for (const auto& f : g.db.endo) {
    CHECK(shapley_permutations(g, f, b) == make_rational(1, 3));
    CHECK(shapley_subsets(g, f, b) == make_rational(1, 3));
  }
}

TEST_CASE("two interchangeable facts get one half") {
  QueryGame g{{{fact("R", {"a"}), fact("R", {"b"})}, {}},
              parse_query("R(x)")};
  Budget b;
  CHECK(shapley_permutations(g, fact("R", {"a"}), b) == make_rational(1, 2));
  CHECK(shapley_subsets(g, fact("R", {"a"}), b) == make_rational(1, 2));
}

TEST_CASE("branching instance values") {
  QueryGame g = branching_game();
  Budget b;
  CHECK(shapley_permutations(g, fact("R", {"a"}), b) == make_rational(2, 3));
  CHECK(shapley_permutations(g, fact("S", {"a", "b"}), b) ==
        make_rational(1, 6));
  CHECK(shapley_subsets(g, fact("R", {"a"}), b) == make_rational(2, 3));
  CHECK(shapley_subsets(g, fact("S", {"a", "b"}), b) == make_rational(1, 6));
}

TEST_CASE("star with exogenous middle gives one half to the endpoints") {
  QueryGame g{{{fact("R", {"a"}), fact("T", {"b"})}, {fact("S", {"a", "b"})}},
              parse_query(kStarQuery)};
  Budget b;
  CHECK(shapley_subsets(g, fact("R", {"a"}), b) == make_rational(1, 2));
  CHECK(shapley_subsets(g, fact("T", {"b"}), b) == make_rational(1, 2));
}

TEST_CASE("shapley_via_fgmc basics") {
  QueryGame g = star_game();
  CHECK(shapley_via_fgmc(g, fact("S", {"a", "b"}), brute_oracle(g.q)) ==
        make_rational(1, 3));

  QueryGame g2{{{fact("R", {"a"}), fact("R", {"b"})}, {}},
               parse_query("R(x)")};
  CHECK(shapley_via_fgmc(g2, fact("R", {"a"}), brute_oracle(g2.q)) ==
        make_rational(1, 2));

  // exogenous part already satisfies the query: everyone gets zero
  QueryGame g3{{{fact("R", {"b"})}, {fact("R", {"a"})}},
               parse_query("R(x)")};
  CHECK(shapley_via_fgmc(g3, fact("R", {"b"}), brute_oracle(g3.q)) == 0);
}

TEST_CASE("shapley_via_fgmc makes exactly two oracle calls") {
  QueryGame g = star_game();
  size_t calls = 0;
  FgmcOracle counting = [&](const PartitionedDatabase& d) {
    ++calls;
    Budget b;
    return fgmc_vector(g.q, d, b);
  };
  shapley_via_fgmc(g, fact("R", {"a"}), counting);
  CHECK(calls == 2);
}

TEST_CASE("three computation paths agree on random instances") {
  std::mt19937 rng(20240826);
  std::vector<Query> queries;
  queries.push_back(parse_query(kStarQuery));
  queries.push_back(parse_query("R(x)"));
  queries.push_back(parse_query("R(x), S(x,y)"));
  for (int round = 0; round < 60; ++round) {
    Query& q = queries[rng() % queries.size()];
    PartitionedDatabase db = random_db(rng, 6, 2);
    QueryGame g{db, q};
    for (const auto& f : db.endo) {
      Budget b1, b2;
      Rational perm = shapley_permutations(g, f, b1);
      Rational sub = shapley_subsets(g, f, b2);
      Rational via = shapley_via_fgmc(g, f, brute_oracle(q));
      CAPTURE(round);
      CHECK(perm == sub);
      CHECK(sub == via);
    }
  }
}

TEST_CASE("efficiency axiom on random instances") {
  std::mt19937 rng(20240827);
  Query q = parse_query(kStarQuery);
  for (int round = 0; round < 60; ++round) {
    PartitionedDatabase db = random_db(rng, 6, 2);
    QueryGame g{db, q};
    Budget b;
    Rational sum = 0;
    for (const auto& [f, v] : shapley_all(g, b)) sum += v;
    CAPTURE(round);
    CHECK(sum == wealth(g, db.endo));
  }
}

TEST_CASE("null players get zero") {
  std::mt19937 rng(20240828);
  Query q = parse_query(kStarQuery);
  for (int round = 0; round < 40; ++round) {
    PartitionedDatabase db = random_db(rng, 5, 2);
    db.endo.insert(fact("U", {"a"}));  // relation absent from the query
    QueryGame g{db, q};
    Budget b;
    CHECK(shapley_subsets(g, fact("U", {"a"}), b) == 0);
  }
}

TEST_CASE("max_shapley on the branching instance") {
  QueryGame g = branching_game();
  Budget b;
  auto [f, v] = max_shapley(g, b);
  CHECK(f == fact("R", {"a"}));
  CHECK(v == make_rational(2, 3));
}

TEST_CASE("max_shapley tie-break is canonical") {
  QueryGame g = star_game();
  Budget b;
  auto [f, v] = max_shapley(g, b);
  CHECK(f == fact("R", {"a"}));
  CHECK(v == make_rational(1, 3));
}

TEST_CASE("max_shapley with a null player") {
  QueryGame g{{{fact("R", {"a"}), fact("T", {"b"})}, {}},
              parse_query("R(x)")};
  Budget b;
  auto [f, v] = max_shapley(g, b);
  CHECK(f == fact("R", {"a"}));
  CHECK(v == 1);
}

TEST_CASE("singleton fast path matches the maximum value") {
  std::mt19937 rng(20240829);
  Query q = parse_query("R(x)");
  for (int round = 0; round < 40; ++round) {
    PartitionedDatabase db = random_db(rng, 5, 2);
    QueryGame g{db, q};
    Budget b1, b2;
    auto fast = max_shapley_singleton_fastpath(g, b1);
    auto [f, v] = max_shapley(g, b2);
    if (fast) {
      CAPTURE(round);
      CHECK(fast->second == v);
    }
  }
}

TEST_CASE("argmax invariant for wealth-one singletons") {
  std::mt19937 rng(20240830);
  Query q = parse_query(kStarQuery);
  for (int round = 0; round < 40; ++round) {
    PartitionedDatabase db = random_db(rng, 6, 2);
    QueryGame g{db, q};
    Budget b;
    for (const auto& s : db.endo) {
      if (wealth(g, {s}) != 1) continue;
      Budget b2, b3;
      auto [f, v] = max_shapley(g, b2);
      CHECK(v == shapley_subsets(g, s, b3));
    }
  }
}

/* constants variant ======================================================= */

TEST_CASE("sole author completes the support") {
  Query q = parse_query("Pub(x,y), Kw(y,'s')");
  FactSet d{fact("Pub", {"a", "p"}), fact("Kw", {"p", "s"})};
  ConstantPartition cp{{"a"}, {"p", "s"}};
  Budget b;
  CHECK(shapley_constants(q, d, cp, "a", b) == 1);
}

TEST_CASE("two authors sharing one paper get one half each") {
  Query q = parse_query("Pub(x,y), Kw(y,'s')");
  FactSet d{fact("Pub", {"a", "p"}), fact("Pub", {"b", "p"}),
            fact("Kw", {"p", "s"})};
  ConstantPartition cp{{"a", "b"}, {"p", "s"}};
  Budget b;
  CHECK(shapley_constants(q, d, cp, "a", b) == make_rational(1, 2));
  CHECK(shapley_constants(q, d, cp, "b", b) == make_rational(1, 2));
}

TEST_CASE("constants never in a support get zero") {
  Query q = parse_query("Pub(x,y), Kw(y,'s')");
  FactSet d{fact("Pub", {"a", "p"}), fact("Kw", {"p", "s"}),
            fact("Other", {"z"})};
  ConstantPartition cp{{"a", "z"}, {"p", "s"}};
  Budget b;
  CHECK(shapley_constants(q, d, cp, "z", b) == 0);
}

TEST_CASE("induced database") {
  FactSet d{fact("R", {"a", "b"}), fact("R", {"a", "c"}), fact("T", {"b"})};
  CHECK(induced_database(d, {"a", "b"}) ==
        FactSet{fact("R", {"a", "b"}), fact("T", {"b"})});
  CHECK(induced_database(d, {}).empty());
}

TEST_CASE("fgmc over constants") {
  Query q = parse_query("Pub(x,y), Kw(y,'s')");
  FactSet d{fact("Pub", {"a", "p"}), fact("Pub", {"b", "p"}),
            fact("Kw", {"p", "s"})};
  ConstantPartition cp{{"a", "b"}, {"p", "s"}};
  Budget b;
  CHECK(fgmc_constants(q, d, cp, 1, b) == 2);
  CHECK(fgmc_constants(q, d, cp, 0, b) == 0);
  CHECK(fgmc_constants(q, d, cp, 7, b) == 0);
}

TEST_CASE("constants value through fixed-size counts matches enumeration") {
  Query q = parse_query("Pub(x,y), Kw(y,'s')");
  FactSet d{fact("Pub", {"a", "p"}), fact("Pub", {"b", "p"}),
            fact("Kw", {"p", "s"})};
  ConstantPartition cp{{"a", "b"}, {"p", "s"}};
  Budget b;
  CHECK(shapley_constants_via_fgmc(q, d, cp, "a", b, true) ==
        make_rational(1, 2));
  CHECK(shapley_constants_via_fgmc(q, d, cp, "a", b, true) ==
        shapley_constants(q, d, cp, "a", b));
  // queries with constants require the experimental flag
  CHECK_THROWS(shapley_constants_via_fgmc(q, d, cp, "a", b, false));
}

TEST_CASE("constants equivalence on random constant-free instances") {
  std::mt19937 rng(20240831);
  Query q = parse_query("R(x), S(x,y)");
  const std::vector<std::string> consts{"a", "b", "c", "d"};
  for (int round = 0; round < 40; ++round) {
    FactSet d;
    size_t n = 1 + rng() % 5;
    for (size_t i = 0; i < n; ++i) {
      if (rng() % 2)
        d.insert(fact("R", {consts[rng() % consts.size()]}));
      else
        d.insert(fact("S", {consts[rng() % consts.size()],
                            consts[rng() % consts.size()]}));
    }
    ConstantPartition cp;
    for (const auto& name : constants_of(d))
      (rng() % 3 ? cp.endo_consts : cp.exo_consts).insert(name);
    for (const auto& name : cp.endo_consts) {
      Budget b1, b2;
      CAPTURE(round);
      CHECK(shapley_constants(q, d, cp, name, b1) ==
            shapley_constants_via_fgmc(q, d, cp, name, b2));
    }
  }
}
