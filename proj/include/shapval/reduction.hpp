#ifndef SHAPVAL_REDUCTION_HPP
#define SHAPVAL_REDUCTION_HPP

#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "shapval/counting.hpp"
#include "shapval/query.hpp"
#include "shapval/relational.hpp"

namespace shapval {

// A reduction's precondition could not be certified; the engine refuses to
// run rather than produce silently wrong counts.
struct HypothesisError : std::runtime_error {
  explicit HypothesisError(const std::string& what)
      : std::runtime_error("hypothesis check failed: " + what) {}
};

// Normalized input: the exogenous part does not satisfy the query, no
// constant is shared with the gadget support S' outside C, and D n S' = {}.
// Facts removed from the endogenous part (all irrelevant to q) are counted
// so the final vector can be re-expanded.
struct NormalizedInstance {
  PartitionedDatabase db;
  std::optional<CountVector> shortcut;  // [C(n,j)]_j when Dx |= q
  size_t removed_endo = 0;
  Renaming renaming;
};

NormalizedInstance normalize_instance(const Query& q, const FactSet& sprime,
                                      const ConstantSet& c,
                                      const PartitionedDatabase& d);

// D' := D with S' added exogenously; rejects overlaps.
PartitionedDatabase complete_with_support(const PartitionedDatabase& d,
                                          const FactSet& sprime);

// S split around a duplicated constant a: S^0 = facts containing a,
// S^- = the rest, S^1..S^i = copies of S^0 with a renamed fresh.
struct ReductionFragment {
  FactSet s0;
  FactSet tail;  // S^-
  std::vector<FactSet> copies;
  Fact pivot;  // mu, the canonical first fact of S^0
  std::vector<Fact> pivot_copies;
  std::string duplicated_constant;
};

// Picks the first eligible constant a in const(S) \ (C u C') in canonical
// order; with endogenous_only, a must occur in exactly one fact of S (so
// S^0 = {mu} and the gadget adds no exogenous facts).
ReductionFragment duplicate_support(const FactSet& s, const ConstantSet& c,
                                    const ConstantSet& cprime, size_t i,
                                    bool endogenous_only, FreshGen& gen);

// A^i: endogenous part Dn u {mu, mu^1..mu^i} u S^-, everything else
// exogenous. Asserts constant-disjointness outside C between D' and the
// gadget.
PartitionedDatabase assemble_Ai(const PartitionedDatabase& dprime,
                                const ReductionFragment& frag,
                                const ConstantSet& c);

// The three degenerate cases of the marginal analysis; Contributes iff
// v(B u {mu}) - v(B) = 1. `negate_case3` selects the disconnected-query
// variant where case 3 requires the subquery to be UNsatisfied.
enum class MarginalCase { Case1, Case2, Case3, Contributes };

MarginalCase marginal_case(const Query& q_case3, const PartitionedDatabase& d,
                           const ReductionFragment& frag, bool negate_case3,
                           const FactSet& b);

// Contribution of the subsets in cases 1-2 to 1 - Sh(A^i_n, v, mu), where
// N = n_endo + i + 1 + tail_size:
//   Z = sum_m [C(N-1,m) - C(n_endo, m-tail_size)] m!(N-m-1)!/N!.
Rational compute_Z(size_t i, size_t n_endo, size_t tail_size);
// Brute-force evaluation of the same sum (N <= 12) used by the startup
// self-test and the test suite.
Rational compute_Z_enumerated(size_t i, size_t n_endo, size_t tail_size);

struct ShSeries {
  std::vector<Rational> values;  // Sh^0..Sh^{n_endo}
  size_t n_endo;
  size_t tail_size;
};

// Solves Sh^i = sum_j (j+t)!(n+i-j)!/(n+i+t+1)! x_j for x. Throws
// std::logic_error unless the solution is a non-negative integer vector.
CountVector solve_factorial_system(const ShSeries& series);
// Forward encoding, for round-trip checks.
Rational factorial_series_value(const CountVector& counts, size_t i,
                                size_t tail_size);

enum class ReductionMode { PseudoConnected, Leak, Decomposable };

// Answers Sh(Dn, v, alpha) for the given query on the given database.
using ShapleyOracle = std::function<Rational(
    const Query& q, const PartitionedDatabase& db, const Fact& alpha)>;

struct ReductionOptions {
  std::optional<Query> qprime;  // Leak mode conjunct
  bool endogenous_only = false;
  size_t bound = 0;             // word-length bound for path queries
  std::ostream* trace = nullptr;
  bool experimental_decompose = false;
};

// Computes fgmc_vector(q, D) using only Shapley-value oracle calls, per the
// selected construction. Hypothesis checks are hard gates (HypothesisError).
CountVector fgmc_via_shapley(const Query& q, ReductionMode mode,
                             const PartitionedDatabase& d,
                             const ShapleyOracle& oracle,
                             const ReductionOptions& opts = {});

}  // namespace shapval

#endif
