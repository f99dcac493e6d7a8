#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <random>
#include <sstream>

#include "shapval/analyzer.hpp"
#include "shapval/reduction.hpp"
#include "shapval/shapley.hpp"

using namespace shapval;

namespace {

Fact fact(std::string rel, std::vector<std::string> args) {
  return Fact{std::move(rel), std::move(args)};
}

const char* kStarQuery = "R(x), S(x,y), T(y)";

PartitionedDatabase star_db() {
  return {{fact("R", {"a"}), fact("S", {"a", "b"}), fact("T", {"b"})}, {}};
}

ShapleyOracle brute_shapley() {
  return [](const Query& q, const PartitionedDatabase& db, const Fact& alpha) {
    Budget b(1ull << 26);
    return shapley_subsets(QueryGame{db, q}, alpha, b);
  };
}

PartitionedDatabase random_star_db(std::mt19937& rng, size_t max_endo,
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
  size_t ne = rng() % (max_endo + 1);
  size_t nx = rng() % (max_exo + 1);
  for (size_t i = 0; i < ne; ++i) db.endo.insert(rand_fact());
  for (size_t i = 0; i < nx; ++i) {
    Fact f = rand_fact();
    if (!db.endo.count(f)) db.exo.insert(f);
  }
  return db;
}

}  // namespace

TEST_CASE("normalize shortcut when the exogenous part satisfies the query") {
  Query q = parse_query("R(x)");
  PartitionedDatabase d{{fact("R", {"a"}), fact("R", {"b"})},
                        {fact("R", {"z"})}};
  NormalizedInstance norm = normalize_instance(q, {}, {}, d);
  REQUIRE(norm.shortcut.has_value());
  CHECK(*norm.shortcut == CountVector{1, 2, 1});
}

TEST_CASE("normalize leaves disjoint instances unchanged") {
  Query q = parse_query(kStarQuery);
  PartitionedDatabase d = star_db();
  FactSet sprime{fact("U", {"u0", "u1"})};
  NormalizedInstance norm = normalize_instance(q, sprime, {}, d);
  CHECK(!norm.shortcut.has_value());
  CHECK(norm.db == d);
  CHECK(norm.removed_endo == 0);
}

TEST_CASE("normalize renames shared non-C constants, counts preserved") {
  Query q = parse_query(kStarQuery);
  PartitionedDatabase d = star_db();
  FactSet sprime{fact("U", {"b", "u1"})};  // shares constant b with D
  NormalizedInstance norm = normalize_instance(q, sprime, {}, d);
  CHECK(!norm.shortcut.has_value());
  ConstantSet after = constants_of(norm.db.all());
  CHECK(!after.count("b"));
  Budget b1, b2;
  CHECK(fgmc_vector(q, norm.db, b1) == fgmc_vector(q, d, b2));
}

TEST_CASE("normalize refuses to drop relevant overlap facts") {
  Query q = parse_query(kStarQuery);
  PartitionedDatabase d = star_db();
  // S' containing a fact of D entirely over C would have to be removed; the
  // fact is relevant, so the hypothesis gate must fire.
  Query qc = parse_query("R('a'), S('a','b'), T('b')");
  FactSet sprime{fact("S", {"a", "b"})};
  CHECK_THROWS_AS(normalize_instance(qc, sprime, {"a", "b"}, d),
                  HypothesisError);
}

TEST_CASE("completion adds the support exogenously") {
  PartitionedDatabase d = star_db();
  CHECK(complete_with_support(d, {}) == d);
  FactSet sprime{fact("U", {"u0", "u1"})};
  PartitionedDatabase dp = complete_with_support(d, sprime);
  CHECK(dp.endo == d.endo);
  CHECK(dp.exo == sprime);
  CHECK_THROWS_AS(complete_with_support(d, {fact("R", {"a"})}),
                  std::invalid_argument);
}

TEST_CASE("completion with a fresh-vocabulary support preserves counts") {
  Query q = parse_query(kStarQuery);
  Query qp = parse_query("U(x,y)");
  Query both = conjoin(q, qp);
  PartitionedDatabase d = star_db();
  FactSet sprime{fact("U", {"u0", "u1"})};
  PartitionedDatabase dp = complete_with_support(d, sprime);
  Budget b1, b2;
  CHECK(fgmc_vector(q, d, b1) == fgmc_vector(both, dp, b2));
}

TEST_CASE("duplicate_support splits a two-edge path around the midpoint") {
  FactSet s{fact("A", {"a", "m"}), fact("A", {"m", "b"})};
  FreshGen gen(constants_of(s));
  ReductionFragment frag =
      duplicate_support(s, {"a", "b"}, {}, 1, false, gen);
  CHECK(frag.duplicated_constant == "m");
  CHECK(frag.s0 == s);
  CHECK(frag.tail.empty());
  REQUIRE(frag.copies.size() == 1);
  CHECK(frag.copies[0].size() == 2);
  CHECK(set_intersect(frag.copies[0], s).empty());
}

TEST_CASE("duplicate_support membership split on the star support") {
  FactSet s{fact("R", {"f0"}), fact("S", {"f0", "f1"}), fact("T", {"f1"})};
  FreshGen gen(constants_of(s));
  ReductionFragment frag = duplicate_support(s, {}, {}, 0, false, gen);
  CHECK(frag.duplicated_constant == "f0");
  CHECK(frag.s0 == FactSet{fact("R", {"f0"}), fact("S", {"f0", "f1"})});
  CHECK(frag.tail == FactSet{fact("T", {"f1"})});
  CHECK(frag.copies.empty());
}

TEST_CASE("duplicate_support endogenous-only requires a unique occurrence") {
  FactSet singleton{fact("R", {"f0"})};
  FreshGen gen(constants_of(singleton));
  ReductionFragment frag = duplicate_support(singleton, {}, {}, 2, true, gen);
  CHECK(frag.s0 == singleton);
  CHECK(frag.tail.empty());
  CHECK(frag.copies.size() == 2);

  FactSet shared{fact("A", {"a", "m"}), fact("A", {"m", "b"})};
  FreshGen gen2(constants_of(shared));
  CHECK_THROWS_AS(duplicate_support(shared, {"a", "b"}, {}, 1, true, gen2),
                  HypothesisError);
}

TEST_CASE("duplicate_support with no eligible constant") {
  FactSet ground{fact("R", {"a", "b"})};
  FreshGen gen(constants_of(ground));
  CHECK_THROWS_AS(duplicate_support(ground, {"a", "b"}, {}, 0, false, gen),
                  HypothesisError);
}

TEST_CASE("assemble gadget endo and exo parts") {
  PartitionedDatabase d = star_db();
  FactSet s{fact("R", {"f0"}), fact("S", {"f0", "f1"}), fact("T", {"f1"})};
  ConstantSet avoid = constants_of(d.all());
  for (const auto& name : constants_of(s)) avoid.insert(name);
  FreshGen gen(avoid);
  ReductionFragment frag0 = duplicate_support(s, {}, {}, 0, false, gen);
  PartitionedDatabase a0 = assemble_Ai(d, frag0, {});
  CHECK(a0.endo == set_union(d.endo, set_union({frag0.pivot}, frag0.tail)));
  CHECK(a0.exo == set_minus(frag0.s0, {frag0.pivot}));

  FreshGen gen2(avoid);
  ReductionFragment frag2 = duplicate_support(s, {}, {}, 2, false, gen2);
  PartitionedDatabase a2 = assemble_Ai(d, frag2, {});
  CHECK(a2.endo.size() == d.endo.size() + 3 + frag2.tail.size());
  CHECK(set_intersect(a2.endo, a2.exo).empty());
}

TEST_CASE("assemble detects constant collisions") {
  PartitionedDatabase d = star_db();
  // support reusing constant a of the database outside C
  FactSet s{fact("R", {"a"}), fact("S", {"a", "f1"})};
  FreshGen gen(constants_of(d.all()));
  ReductionFragment frag = duplicate_support(s, {}, {}, 0, false, gen);
  CHECK_THROWS_AS(assemble_Ai(d, frag, {}), std::logic_error);
}

TEST_CASE("marginal case classification basics") {
  PartitionedDatabase d = star_db();
  Query q = parse_query(kStarQuery);
  FactSet s{fact("R", {"f0"}), fact("S", {"f0", "f1"}), fact("T", {"f1"})};
  ConstantSet avoid = constants_of(d.all());
  for (const auto& name : constants_of(s)) avoid.insert(name);
  FreshGen gen(avoid);
  ReductionFragment frag = duplicate_support(s, {}, {}, 1, false, gen);

  // a pivot copy forces case 1
  FactSet b1{frag.pivot_copies[0]};
  CHECK(marginal_case(q, d, frag, false, b1) == MarginalCase::Case1);
  // missing tail fact forces case 2
  CHECK(marginal_case(q, d, frag, false, {}) == MarginalCase::Case2);
  // complete tail plus a satisfied database forces case 3
  FactSet b3 = set_union(frag.tail, d.endo);
  CHECK(marginal_case(q, d, frag, false, b3) == MarginalCase::Case3);
  // complete tail, unsatisfied database: the pivot's marginal counts
  CHECK(marginal_case(q, d, frag, false, frag.tail) ==
        MarginalCase::Contributes);
}

TEST_CASE("Z closed form on the spec corner cases") {
  CHECK(compute_Z(0, 3, 0) == 0);
  CHECK(compute_Z(1, 0, 0) == make_rational(1, 2));
  CHECK(compute_Z(0, 1, 1) == compute_Z_enumerated(0, 1, 1));
}

TEST_CASE("Z closed form matches enumeration everywhere small") {
  for (size_t i = 0; i <= 4; ++i)
    for (size_t n = 0; n <= 4; ++n)
      for (size_t t = 0; t <= 3; ++t) {
        if (n + i + 1 + t > 12) continue;
        CAPTURE(i); CAPTURE(n); CAPTURE(t);
        CHECK(compute_Z(i, n, t) == compute_Z_enumerated(i, n, t));
      }
}

TEST_CASE("factorial system on the one-by-one instance") {
  ShSeries series;
  series.n_endo = 0;
  series.tail_size = 0;
  series.values = {Rational(1)};
  CHECK(solve_factorial_system(series) == CountVector{1});
}

TEST_CASE("factorial system matrix for one endogenous fact") {
  // coefficients j!(1+i-j)!/(2+i)! — row i=0: [1/2, 1/2], row i=1: [1/3, 1/6]
  CountVector counts{0, 1};
  CHECK(factorial_series_value(counts, 0, 0) == make_rational(1, 2));
  CHECK(factorial_series_value(counts, 1, 0) == make_rational(1, 6));
  CountVector ones{1, 0};
  CHECK(factorial_series_value(ones, 0, 0) == make_rational(1, 2));
  CHECK(factorial_series_value(ones, 1, 0) == make_rational(1, 3));
}

TEST_CASE("factorial system round-trips random vectors") {
  std::mt19937 rng(20240903);
  for (int round = 0; round < 50; ++round) {
    size_t n = rng() % 10;
    size_t t = rng() % 3;
    CountVector counts;
    for (size_t j = 0; j <= n; ++j) counts.push_back(Integer(rng() % 50));
    ShSeries series;
    series.n_endo = n;
    series.tail_size = t;
    for (size_t i = 0; i <= n; ++i)
      series.values.push_back(factorial_series_value(counts, i, t));
    CAPTURE(round);
    CHECK(solve_factorial_system(series) == counts);
  }
}

TEST_CASE("Lemma-style marginal analysis is exhaustive on small gadgets") {
  std::mt19937 rng(20240904);
  std::vector<Query> queries = {parse_query(kStarQuery), parse_query("R(x)")};
  for (const auto& q : queries) {
    auto island = find_island_support(q);
    REQUIRE(island.has_value());
    for (size_t i = 0; i <= 2; ++i) {
      for (int round = 0; round < 6; ++round) {
        PartitionedDatabase d = random_star_db(rng, 4, 1);
        if (evaluate(q, d.exo)) continue;
        ConstantSet avoid = constants_of(d.all());
        FactSet s = rename_avoiding(island->support, q.constants(), avoid);
        for (const auto& name : constants_of(s)) avoid.insert(name);
        FreshGen gen(avoid);
        ReductionFragment frag;
        try {
          frag = duplicate_support(s, q.constants(), {}, i, false, gen);
        } catch (const HypothesisError&) {
          continue;
        }
        PartitionedDatabase ai = assemble_Ai(d, frag, q.constants());
        if (ai.endo.size() > 10) continue;

        QueryGame game{ai, q};
        std::vector<Fact> others;
        for (const auto& f : ai.endo)
          if (f != frag.pivot) others.push_back(f);
        REQUIRE(others.size() <= 14);
        for (std::uint64_t mask = 0; mask < (1ull << others.size()); ++mask) {
          FactSet b;
          for (size_t k = 0; k < others.size(); ++k)
            if (mask & (1ull << k)) b.insert(others[k]);
          FactSet with = b;
          with.insert(frag.pivot);
          int marginal = wealth(game, with) - wealth(game, b);
          MarginalCase mc = marginal_case(q, d, frag, false, b);
          CAPTURE(i); CAPTURE(round);
          CHECK((mc == MarginalCase::Contributes) == (marginal == 1));
        }
      }
    }
  }
}

TEST_CASE("oracle value decomposes into Z plus the case-3 sum") {
  Query q = parse_query(kStarQuery);
  PartitionedDatabase d = star_db();
  auto island = find_island_support(q);
  REQUIRE(island.has_value());
  for (size_t i = 0; i <= 1; ++i) {
    ConstantSet avoid = constants_of(d.all());
    FactSet s = rename_avoiding(island->support, {}, avoid);
    for (const auto& name : constants_of(s)) avoid.insert(name);
    FreshGen gen(avoid);
    ReductionFragment frag = duplicate_support(s, {}, {}, i, false, gen);
    PartitionedDatabase ai = assemble_Ai(d, frag, {});

    Budget b(1ull << 26);
    Rational sh = shapley_subsets(QueryGame{ai, q}, frag.pivot, b);
    size_t nn = ai.endo.size();
    // sum of case-3 coefficients over all subsets
    std::vector<Fact> others;
    for (const auto& f : ai.endo)
      if (f != frag.pivot) others.push_back(f);
    Rational case3 = 0;
    for (std::uint64_t mask = 0; mask < (1ull << others.size()); ++mask) {
      FactSet bset;
      for (size_t k = 0; k < others.size(); ++k)
        if (mask & (1ull << k)) bset.insert(others[k]);
      if (marginal_case(q, d, frag, false, bset) == MarginalCase::Case3) {
        size_t m = bset.size();
        case3 += make_rational(factorial(m) * factorial(nn - m - 1),
                               factorial(nn));
      }
    }
    Rational z = compute_Z(i, d.endo.size(), frag.tail.size());
    CAPTURE(i);
    CHECK(1 - sh - z == case3);
  }
}

TEST_CASE("pseudo-connected reduction on the star query") {
  Query q = parse_query(kStarQuery);
  PartitionedDatabase d = star_db();
  CountVector via =
      fgmc_via_shapley(q, ReductionMode::PseudoConnected, d, brute_shapley());
  CHECK(via == CountVector{0, 0, 0, 1});
}

TEST_CASE("pseudo-connected reduction on the unary query") {
  Query q = parse_query("R(x)");
  PartitionedDatabase d{{fact("R", {"a"}), fact("R", {"b"})}, {}};
  CountVector via =
      fgmc_via_shapley(q, ReductionMode::PseudoConnected, d, brute_shapley());
  CHECK(via == CountVector{0, 2, 1});
}

TEST_CASE("pseudo-connected reduction matches brute force on random dbs") {
  std::mt19937 rng(20240905);
  Query q = parse_query(kStarQuery);
  for (int round = 0; round < 15; ++round) {
    PartitionedDatabase d = random_star_db(rng, 4, 2);
    Budget b;
    CountVector direct = fgmc_vector(q, d, b);
    CountVector via = fgmc_via_shapley(q, ReductionMode::PseudoConnected, d,
                                       brute_shapley());
    CAPTURE(round);
    CHECK(via == direct);
  }
}

TEST_CASE("leak-mode reduction computes counts for the conjunction") {
  std::mt19937 rng(20240906);
  Query q = parse_query(kStarQuery);
  ReductionOptions opts;
  opts.qprime = parse_query("U(x,y)");
  for (int round = 0; round < 10; ++round) {
    PartitionedDatabase d = random_star_db(rng, 4, 2);
    Budget b;
    CountVector direct = fgmc_vector(q, d, b);
    CountVector via = fgmc_via_shapley(q, ReductionMode::Leak, d,
                                       brute_shapley(), opts);
    CAPTURE(round);
    CHECK(via == direct);
  }
}

TEST_CASE("leak mode requires a conjunct query") {
  Query q = parse_query(kStarQuery);
  CHECK_THROWS_AS(fgmc_via_shapley(q, ReductionMode::Leak, star_db(),
                                   brute_shapley()),
                  std::invalid_argument);
}

TEST_CASE("leak mode rejects non-variable-connected queries") {
  Query q = parse_query("R(x,y), S(u,v)");
  ReductionOptions opts;
  opts.qprime = parse_query("U(x,y)");
  CHECK_THROWS_AS(fgmc_via_shapley(q, ReductionMode::Leak,
                                   {{fact("R", {"a", "b"})}, {}},
                                   brute_shapley(), opts),
                  HypothesisError);
}

TEST_CASE("decomposable reduction on a two-component query") {
  std::mt19937 rng(20240907);
  Query q = parse_query("R(x,y), S(u,v)");
  const std::vector<std::string> consts{"a", "b", "c"};
  for (int round = 0; round < 12; ++round) {
    PartitionedDatabase d;
    size_t ne = rng() % 5;
    size_t nx = rng() % 3;
    auto rand_fact = [&] {
      return fact(rng() % 2 ? "R" : "S",
                  {consts[rng() % 3], consts[rng() % 3]});
    };
    for (size_t i = 0; i < ne; ++i) d.endo.insert(rand_fact());
    for (size_t i = 0; i < nx; ++i) {
      Fact f = rand_fact();
      if (!d.endo.count(f)) d.exo.insert(f);
    }
    Budget b;
    CountVector direct = fgmc_vector(q, d, b);
    CountVector via = fgmc_via_shapley(q, ReductionMode::Decomposable, d,
                                       brute_shapley());
    CAPTURE(round);
    CHECK(via == direct);
  }
}

TEST_CASE("decomposable mode rejects connected queries") {
  Query q = parse_query(kStarQuery);
  CHECK_THROWS_AS(fgmc_via_shapley(q, ReductionMode::Decomposable, star_db(),
                                   brute_shapley()),
                  HypothesisError);
}

TEST_CASE("endogenous-only reduction adds no exogenous facts") {
  Query q = parse_query("R(x)");
  PartitionedDatabase d{{fact("R", {"a"}), fact("R", {"b"}),
                         fact("T", {"c"})},
                        {}};
  ReductionOptions opts;
  opts.endogenous_only = true;
  size_t gadgets_checked = 0;
  ShapleyOracle checking = [&](const Query& oq, const PartitionedDatabase& db,
                               const Fact& alpha) {
    CHECK(db.exo.empty());
    ++gadgets_checked;
    Budget b(1ull << 26);
    return shapley_subsets(QueryGame{db, oq}, alpha, b);
  };
  CountVector via =
      fgmc_via_shapley(q, ReductionMode::PseudoConnected, d, checking, opts);
  Budget b;
  CHECK(via == fgmc_vector(q, d, b));
  CHECK(gadgets_checked == d.endo.size() + 1);
}

TEST_CASE("trace output names every gadget") {
  Query q = parse_query("R(x)");
  PartitionedDatabase d{{fact("R", {"a"})}, {}};
  std::ostringstream trace;
  ReductionOptions opts;
  opts.trace = &trace;
  fgmc_via_shapley(q, ReductionMode::PseudoConnected, d, brute_shapley(),
                   opts);
  std::string text = trace.str();
  CHECK(text.find("i=0") != std::string::npos);
  CHECK(text.find("i=1") != std::string::npos);
  CHECK(text.find("pivot=") != std::string::npos);
}

TEST_CASE("reduction shortcut when the exogenous part already satisfies") {
  Query q = parse_query("R(x)");
  PartitionedDatabase d{{fact("R", {"a"}), fact("R", {"b"})},
                        {fact("R", {"z"})}};
  size_t calls = 0;
  ShapleyOracle counting = [&](const Query&, const PartitionedDatabase&,
                               const Fact&) -> Rational {
    ++calls;
    return 0;
  };
  CountVector via =
      fgmc_via_shapley(q, ReductionMode::PseudoConnected, d, counting);
  CHECK(via == CountVector{1, 2, 1});
  CHECK(calls == 0);
}
