#ifndef SHAPVAL_COUNTING_HPP
#define SHAPVAL_COUNTING_HPP

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "shapval/query.hpp"
#include "shapval/relational.hpp"

namespace shapval {

// counts[j] = number of generalized supports of size exactly j, j = 0..|Dn|.
using CountVector = std::vector<Integer>;

struct BudgetExceeded : std::runtime_error {
  explicit BudgetExceeded(unsigned long long limit)
      : std::runtime_error("enumeration budget of " + std::to_string(limit) +
                           " subsets exceeded") {}
  explicit BudgetExceeded(const std::string& what) : std::runtime_error(what) {}
};

// Counts enumerated subsets; throws BudgetExceeded past the limit. The
// default limit is 2^22, overridable via the SHAPVAL_BUDGET variable.
class Budget {
 public:
  Budget();
  explicit Budget(unsigned long long limit) : limit_(limit) {}

  void charge(unsigned long long n = 1) {
    used_ += n;
    if (used_ > limit_) throw BudgetExceeded(limit_);
  }
  unsigned long long used() const { return used_; }
  unsigned long long limit() const { return limit_; }

 private:
  unsigned long long limit_;
  unsigned long long used_ = 0;
};

// Satisfaction of endogenous subsets (with the exogenous part always
// present), backed by the precomputed minimal generalized supports so that
// per-subset checks need no query evaluation.
class SatOracle {
 public:
  SatOracle(const Query& q, const PartitionedDatabase& db, Budget& budget);

  size_t n() const { return facts_.size(); }
  const std::vector<Fact>& facts() const { return facts_; }
  bool exo_satisfies() const { return exo_sat_; }
  std::uint64_t mask_of(const FactSet& subset) const;

  bool satisfied(std::uint64_t mask) const {
    if (exo_sat_) return true;
    for (std::uint64_t m : minimal_masks_)
      if ((m & mask) == m) return true;
    return false;
  }

 private:
  std::vector<Fact> facts_;
  bool exo_sat_;
  std::vector<std::uint64_t> minimal_masks_;
};

Integer gmc(const Query& q, const PartitionedDatabase& db, Budget& budget);
CountVector fgmc_vector(const Query& q, const PartitionedDatabase& db,
                        Budget& budget);
// fgmc(q,D,j) = 0 for j > |Dn| by convention.
Integer fgmc(const Query& q, const PartitionedDatabase& db, size_t j,
             Budget& budget);

Rational pqe(const Query& q, const ProbabilisticDatabase& pd, Budget& budget);

// Pr(D |= q) under uniform probability p on the endogenous part, from the
// count vector: sum_j z^j counts[j] / (1+z)^n with z = p/(1-p). Requires
// 0 < p < 1.
Rational sppqe_from_fgmc_vector(const CountVector& counts, const Rational& p);

using PqeOracle = std::function<Rational(const ProbabilisticDatabase&)>;

// Recovers the count vector from n+1 oracle answers at z = 1..n+1
// (p = z/(1+z)) by solving the Vandermonde system exactly. Throws
// std::logic_error if the solution is not a non-negative integer vector.
CountVector fgmc_vector_from_pqe(const Query& q, const PartitionedDatabase& db,
                                 const PqeOracle& oracle);

// Same interpolation from an abstract Pr(D |= q) as a function of the
// uniform probability p over n endogenous facts.
CountVector fgmc_vector_from_sppqe(
    size_t n, const std::function<Rational(const Rational& p)>& sppqe);

// Count vector using only evaluations on databases with empty exogenous
// part, by the recursion
//   FGMC_j(Dn, Dx) = FMC_{j+1}(Dn u {a}, Dx \ {a}) - FMC_{j+1}(Dn, Dx \ {a}).
// Exactly 2^|Dx| base calls; the count is reported through base_calls.
CountVector fgmc_via_fmc(const Query& q, const PartitionedDatabase& db,
                         Budget& budget, size_t* base_calls = nullptr);

// Exact Gaussian elimination; throws std::invalid_argument on a singular
// system.
std::vector<Rational> solve_linear_system(std::vector<std::vector<Rational>> a,
                                          std::vector<Rational> b);

}  // namespace shapval

#endif
