#include "shapval/shapley.hpp"

#include <algorithm>
#include <bit>
#include <numeric>

namespace shapval {

int wealth(const QueryGame& g, const FactSet& b) {
  for (const auto& f : b)
    if (!g.db.endo.count(f))
      throw std::invalid_argument("not an endogenous fact: " + to_string(f));
  int vb = evaluate(g.q, set_union(b, g.db.exo)) ? 1 : 0;
  int vx = evaluate(g.q, g.db.exo) ? 1 : 0;
  return vb - vx;
}

namespace {

size_t player_index(const SatOracle& oracle, const Fact& alpha) {
  const auto& facts = oracle.facts();
  auto it = std::lower_bound(facts.begin(), facts.end(), alpha);
  if (it == facts.end() || *it != alpha)
    throw std::invalid_argument("not an endogenous fact: " + to_string(alpha));
  return it - facts.begin();
}

// Eq.-2 sum for an arbitrary monotone boolean characteristic over bitmasks.
Rational shapley_subsets_generic(size_t n,
                                 const std::function<bool(std::uint64_t)>& sat,
                                 size_t player, Budget& budget) {
  if (n > 22)
    throw BudgetExceeded("subset-sum Shapley limited to 22 players, got " +
                         std::to_string(n));
  std::vector<Rational> coef(n);
  Integer nfac = factorial(n);
  for (size_t j = 0; j < n; ++j)
    coef[j] = make_rational(factorial(j) * factorial(n - j - 1), nfac);

  std::uint64_t pbit = 1ull << player;
  std::vector<std::uint64_t> others;
  for (size_t i = 0; i < n; ++i)
    if (i != player) others.push_back(1ull << i);
  size_t m = others.size();
  Rational sh = 0;
  budget.charge(1ull << m);
  for (std::uint64_t sub = 0; sub < (1ull << m); ++sub) {
    std::uint64_t mask = 0;
    for (size_t i = 0; i < m; ++i)
      if (sub & (1ull << i)) mask |= others[i];
    if (sat(mask | pbit) && !sat(mask)) sh += coef[std::popcount(mask)];
  }
  return sh;
}

}  // namespace

Rational shapley_permutations(const QueryGame& g, const Fact& alpha,
                              Budget& budget) {
  SatOracle oracle(g.q, g.db, budget);
  size_t n = oracle.n();
  size_t player = player_index(oracle, alpha);
  if (n > 9)
    throw BudgetExceeded("permutation Shapley limited to 9 players, got " +
                         std::to_string(n));
  if (oracle.exo_satisfies()) return 0;

  std::vector<size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Integer favourable = 0;
  Integer total = 0;
  do {
    budget.charge();
    ++total;
    // Monotone binary game: exactly one position flips v from 0 to 1 (none
    // if the full set does not satisfy q).
    std::uint64_t mask = 0;
    for (size_t i : perm) {
      mask |= 1ull << i;
      if (oracle.satisfied(mask)) {
        if (i == player) ++favourable;
        break;
      }
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return make_rational(favourable, total);
}

Rational shapley_subsets(const QueryGame& g, const Fact& alpha,
                         Budget& budget) {
  SatOracle oracle(g.q, g.db, budget);
  size_t player = player_index(oracle, alpha);
  if (oracle.exo_satisfies()) return 0;
  return shapley_subsets_generic(
      oracle.n(), [&](std::uint64_t m) { return oracle.satisfied(m); },
      player, budget);
}

std::map<Fact, Rational> shapley_all(const QueryGame& g, Budget& budget) {
  std::map<Fact, Rational> out;
  for (const auto& f : g.db.endo) out.emplace(f, shapley_subsets(g, f, budget));
  return out;
}

Rational shapley_via_fgmc(const QueryGame& g, const Fact& alpha,
                          const FgmcOracle& oracle) {
  if (!g.db.endo.count(alpha))
    throw std::invalid_argument("not an endogenous fact: " + to_string(alpha));
  size_t n = g.db.endo.size();
  FactSet rest = set_minus(g.db.endo, {alpha});
  CountVector with = oracle({rest, set_union(g.db.exo, {alpha})});
  CountVector without = oracle({rest, g.db.exo});
  Integer nfac = factorial(n);
  Rational sh = 0;
  for (size_t j = 0; j + 1 <= n; ++j)
    sh += make_rational(factorial(j) * factorial(n - j - 1), nfac) *
          Rational(with[j] - without[j]);
  return sh;
}

std::pair<Fact, Rational> max_shapley(const QueryGame& g, Budget& budget) {
  if (g.db.endo.empty())
    throw std::invalid_argument("max_shapley on an empty endogenous part");
  std::optional<std::pair<Fact, Rational>> best;
  for (const auto& f : g.db.endo) {
    Rational sh = shapley_subsets(g, f, budget);
    if (!best || sh > best->second) best = {f, sh};
  }
  return *best;
}

std::optional<std::pair<Fact, Rational>> max_shapley_singleton_fastpath(
    const QueryGame& g, Budget& budget) {
  for (const auto& f : g.db.endo)
    if (wealth(g, {f}) == 1) return {{f, shapley_subsets(g, f, budget)}};
  return std::nullopt;
}

/* Constants =============================================================== */

FactSet induced_database(const FactSet& d, const ConstantSet& c) {
  FactSet out;
  for (const auto& f : d) {
    bool ok = true;
    for (const auto& a : f.args)
      if (!c.count(a)) {
        ok = false;
        break;
      }
    if (ok) out.insert(f);
  }
  return out;
}

namespace {

struct ConstGame {
  std::vector<std::string> players;
  std::function<bool(std::uint64_t)> sat;
};

ConstGame const_game(const Query& q, const FactSet& d,
                     const ConstantSet& endo_consts,
                     const ConstantSet& exo_consts) {
  ConstGame game;
  game.players.assign(endo_consts.begin(), endo_consts.end());
  auto players = game.players;
  game.sat = [&q, d, players, exo_consts](std::uint64_t mask) {
    ConstantSet c = exo_consts;
    for (size_t i = 0; i < players.size(); ++i)
      if (mask & (1ull << i)) c.insert(players[i]);
    return evaluate(q, induced_database(d, c));
  };
  return game;
}

}  // namespace

Rational shapley_constants(const Query& q, const FactSet& d,
                           const ConstantPartition& cp, const std::string& c,
                           Budget& budget) {
  ConstGame game = const_game(q, d, cp.endo_consts, cp.exo_consts);
  auto it = std::find(game.players.begin(), game.players.end(), c);
  if (it == game.players.end())
    throw std::invalid_argument("not an endogenous constant: " + c);
  return shapley_subsets_generic(game.players.size(), game.sat,
                                 it - game.players.begin(), budget);
}

CountVector fgmc_constants_vector(const Query& q, const FactSet& d,
                                  const ConstantSet& endo_consts,
                                  const ConstantSet& exo_consts,
                                  Budget& budget) {
  ConstGame game = const_game(q, d, endo_consts, exo_consts);
  size_t n = game.players.size();
  if (n > 22)
    throw BudgetExceeded("constant enumeration limited to 22 players, got " +
                         std::to_string(n));
  CountVector counts(n + 1, 0);
  budget.charge(1ull << n);
  for (std::uint64_t mask = 0; mask < (1ull << n); ++mask)
    if (game.sat(mask)) ++counts[std::popcount(mask)];
  return counts;
}

Integer fgmc_constants(const Query& q, const FactSet& d,
                       const ConstantPartition& cp, size_t k, Budget& budget) {
  if (k > cp.endo_consts.size()) return 0;
  return fgmc_constants_vector(q, d, cp.endo_consts, cp.exo_consts, budget)[k];
}

Rational shapley_constants_via_fgmc(const Query& q, const FactSet& d,
                                    const ConstantPartition& cp,
                                    const std::string& c, Budget& budget,
                                    bool allow_constants) {
  ConstantSet qc = q.constants();
  if (!qc.empty()) {
    if (!allow_constants)
      throw std::invalid_argument(
          "constants route for queries with constants is experimental; "
          "enable it explicitly");
    for (const auto& name : qc)
      if (!cp.exo_consts.count(name))
        throw std::invalid_argument(
            "experimental constants route requires const(q) to be exogenous; "
            "endogenous query constant: " + name);
  }
  if (!cp.endo_consts.count(c))
    throw std::invalid_argument("not an endogenous constant: " + c);
  size_t n = cp.endo_consts.size();
  ConstantSet rest = cp.endo_consts;
  rest.erase(c);
  ConstantSet exo_with = cp.exo_consts;
  exo_with.insert(c);
  CountVector with = fgmc_constants_vector(q, d, rest, exo_with, budget);
  CountVector without =
      fgmc_constants_vector(q, d, rest, cp.exo_consts, budget);
  Integer nfac = factorial(n);
  Rational sh = 0;
  for (size_t j = 0; j + 1 <= n; ++j)
    sh += make_rational(factorial(j) * factorial(n - j - 1), nfac) *
          Rational(with[j] - without[j]);
  return sh;
}

}  // namespace shapval
