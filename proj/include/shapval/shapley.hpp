#ifndef SHAPVAL_SHAPLEY_HPP
#define SHAPVAL_SHAPLEY_HPP

#include <functional>
#include <map>
#include <optional>
#include <utility>

#include "shapval/counting.hpp"
#include "shapval/query.hpp"
#include "shapval/relational.hpp"

namespace shapval {

// The query game: players are the endogenous facts, wealth is
// v(B) = [B u Dx |= q] - [Dx |= q].
struct QueryGame {
  PartitionedDatabase db;
  Query q;
};

// v(B) for B a subset of the endogenous part; range {0,1} since q is
// monotone. Throws if B is not a subset of the players.
int wealth(const QueryGame& g, const FactSet& b);

// Shapley value by averaging marginal contributions over all |Dn|!
// permutations. Test oracle; limited to |Dn| <= 9.
Rational shapley_permutations(const QueryGame& g, const Fact& alpha,
                              Budget& budget);

// Shapley value by the subset sum
//   Sh = sum_{B subseteq Dn \ {alpha}} |B|!(n-|B|-1)!/n! (v(B u {alpha}) - v(B)).
Rational shapley_subsets(const QueryGame& g, const Fact& alpha, Budget& budget);

std::map<Fact, Rational> shapley_all(const QueryGame& g, Budget& budget);

using FgmcOracle = std::function<CountVector(const PartitionedDatabase&)>;

// Shapley value from two count vectors:
//   Sh = sum_j j!(n-j-1)!/n! [FGMC_j(Dn\{alpha}, Dx u {alpha})
//                             - FGMC_j(Dn\{alpha}, Dx)],  n = |Dn|.
// Exactly two oracle invocations.
Rational shapley_via_fgmc(const QueryGame& g, const Fact& alpha,
                          const FgmcOracle& oracle);

// A fact attaining the maximum Shapley value, and that value; ties broken by
// canonical fact order. Computes every player's value.
std::pair<Fact, Rational> max_shapley(const QueryGame& g, Budget& budget);

// Fast path: if some singleton {s} has wealth 1, s attains the maximum and
// only its own value is computed. Returns nullopt when no singleton works
// (the fact returned may differ from max_shapley's on ties; the value never
// does).
std::optional<std::pair<Fact, Rational>> max_shapley_singleton_fastpath(
    const QueryGame& g, Budget& budget);

/* Shapley value of constants ============================================== */

struct ConstantPartition {
  ConstantSet endo_consts;  // C_n: the players
  ConstantSet exo_consts;   // C_x
};

// D|_C: the facts of D whose constants all lie in C.
FactSet induced_database(const FactSet& d, const ConstantSet& c);

// Shapley value of constant c in the game with players C_n and wealth
// v(C) = [D|_{C u C_x} |= q] - [D|_{C_x} |= q].
Rational shapley_constants(const Query& q, const FactSet& d,
                           const ConstantPartition& cp, const std::string& c,
                           Budget& budget);

// Number of sets C subseteq C_n of size k with D|_{C u C_x} |= q.
Integer fgmc_constants(const Query& q, const FactSet& d,
                       const ConstantPartition& cp, size_t k, Budget& budget);

// Entries k = 0..|C_n|.
CountVector fgmc_constants_vector(const Query& q, const FactSet& d,
                                  const ConstantSet& endo_consts,
                                  const ConstantSet& exo_consts,
                                  Budget& budget);

// Shapley value of a constant through the fixed-size counts, mirroring the
// fact-level interpolation identity. Queries with constants are accepted
// only with allow_constants = true (experimental) and then require
// const(q) subseteq C_x.
Rational shapley_constants_via_fgmc(const Query& q, const FactSet& d,
                                    const ConstantPartition& cp,
                                    const std::string& c, Budget& budget,
                                    bool allow_constants = false);

}  // namespace shapval

#endif
