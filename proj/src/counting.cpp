#include "shapval/counting.hpp"

#include <algorithm>
#include <bit>
#include <cstdlib>

namespace shapval {

Budget::Budget() : limit_(1ull << 22) {
  if (const char* env = std::getenv("SHAPVAL_BUDGET")) {
    char* end = nullptr;
    unsigned long long v = std::strtoull(env, &end, 10);
    if (end && *end == '\0' && v > 0) limit_ = v;
  }
}

SatOracle::SatOracle(const Query& q, const PartitionedDatabase& db,
                     Budget& budget)
    : facts_(db.endo.begin(), db.endo.end()) {
  if (facts_.size() > 62)
    throw BudgetExceeded(budget.limit());
  exo_sat_ = evaluate(q, db.exo);
  if (exo_sat_) return;

  // Minimal endogenous subsets B with B u Dx |= q, by increasing size with
  // superset pruning. For CQ-family queries the minimal size is bounded by
  // the largest disjunct.
  size_t n = facts_.size();
  size_t cap = n;
  if (q.is_cq_family()) {
    size_t m = 0;
    for (const auto& d : q.cq_disjuncts) m = std::max(m, d.atoms.size());
    cap = std::min(cap, m);
  }
  for (size_t size = 1; size <= cap; ++size) {
    std::vector<bool> select(n, false);
    std::fill(select.begin(), select.begin() + size, true);
    do {
      budget.charge();
      std::uint64_t mask = 0;
      for (size_t i = 0; i < n; ++i)
        if (select[i]) mask |= 1ull << i;
      bool superset = false;
      for (std::uint64_t m : minimal_masks_)
        if ((m & mask) == m) {
          superset = true;
          break;
        }
      if (superset) continue;
      FactSet s = db.exo;
      for (size_t i = 0; i < n; ++i)
        if (select[i]) s.insert(facts_[i]);
      if (evaluate(q, s)) minimal_masks_.push_back(mask);
    } while (std::prev_permutation(select.begin(), select.end()));
  }
}

std::uint64_t SatOracle::mask_of(const FactSet& subset) const {
  std::uint64_t mask = 0;
  for (const auto& f : subset) {
    auto it = std::lower_bound(facts_.begin(), facts_.end(), f);
    if (it == facts_.end() || *it != f)
      throw std::invalid_argument("fact is not endogenous: " + to_string(f));
    mask |= 1ull << (it - facts_.begin());
  }
  return mask;
}

CountVector fgmc_vector(const Query& q, const PartitionedDatabase& db,
                        Budget& budget) {
  SatOracle oracle(q, db, budget);
  size_t n = oracle.n();
  CountVector counts(n + 1, 0);
  budget.charge(1ull << n);
  for (std::uint64_t mask = 0; mask < (1ull << n); ++mask)
    if (oracle.satisfied(mask)) ++counts[std::popcount(mask)];
  return counts;
}

Integer gmc(const Query& q, const PartitionedDatabase& db, Budget& budget) {
  Integer total = 0;
  for (const auto& c : fgmc_vector(q, db, budget)) total += c;
  return total;
}

Integer fgmc(const Query& q, const PartitionedDatabase& db, size_t j,
             Budget& budget) {
  if (j > db.endo.size()) return 0;
  return fgmc_vector(q, db, budget)[j];
}

Rational pqe(const Query& q, const ProbabilisticDatabase& pd, Budget& budget) {
  PartitionedDatabase db = pd.partition();
  SatOracle oracle(q, db, budget);
  std::vector<Rational> probs;
  for (const auto& f : oracle.facts()) probs.push_back(pd.facts.at(f));

  Rational total = 0;
  // DFS over worlds, accumulating the world probability incrementally.
  std::function<void(size_t, std::uint64_t, const Rational&)> go =
      [&](size_t i, std::uint64_t mask, const Rational& weight) {
        if (i == probs.size()) {
          budget.charge();
          if (oracle.satisfied(mask)) total += weight;
          return;
        }
        go(i + 1, mask | (1ull << i), weight * probs[i]);
        go(i + 1, mask, weight * (1 - probs[i]));
      };
  go(0, 0, 1);
  return total;
}

Rational sppqe_from_fgmc_vector(const CountVector& counts, const Rational& p) {
  if (p <= 0 || p >= 1)
    throw std::invalid_argument(
        "sppqe_from_fgmc_vector requires 0 < p < 1; got " + to_string(p));
  size_t n = counts.size() - 1;
  Rational z = p / (1 - p);
  Rational sum = 0;
  Rational zpow = 1;
  for (size_t j = 0; j <= n; ++j) {
    sum += zpow * Rational(counts[j]);
    zpow *= z;
  }
  Rational denom = 1;
  Rational base = 1 + z;
  for (size_t j = 0; j < n; ++j) denom *= base;
  return sum / denom;
}

std::vector<Rational> solve_linear_system(std::vector<std::vector<Rational>> a,
                                          std::vector<Rational> b) {
  size_t n = b.size();
  for (size_t col = 0; col < n; ++col) {
    size_t pivot = col;
    while (pivot < n && a[pivot][col] == 0) ++pivot;
    if (pivot == n) throw std::invalid_argument("singular linear system");
    std::swap(a[col], a[pivot]);
    std::swap(b[col], b[pivot]);
    Rational inv = 1 / a[col][col];
    for (size_t j = col; j < n; ++j) a[col][j] *= inv;
    b[col] *= inv;
    for (size_t row = 0; row < n; ++row) {
      if (row == col || a[row][col] == 0) continue;
      Rational f = a[row][col];
      for (size_t j = col; j < n; ++j) a[row][j] -= f * a[col][j];
      b[row] -= f * b[col];
    }
  }
  return b;
}

CountVector fgmc_vector_from_sppqe(
    size_t n, const std::function<Rational(const Rational& p)>& sppqe) {
  // (1+z)^n Pr(D |= q) = sum_j z^j FGMC_j at z = 1..n+1.
  std::vector<std::vector<Rational>> a(n + 1, std::vector<Rational>(n + 1));
  std::vector<Rational> rhs(n + 1);
  for (size_t row = 0; row <= n; ++row) {
    Rational zq(static_cast<long>(row + 1));
    Rational p = zq / (1 + zq);
    Rational zpow = 1;
    for (size_t j = 0; j <= n; ++j) {
      a[row][j] = zpow;
      zpow *= zq;
    }
    Rational scale = 1;
    Rational onez = 1 + zq;
    for (size_t j = 0; j < n; ++j) scale *= onez;
    rhs[row] = sppqe(p) * scale;
  }
  std::vector<Rational> sol = solve_linear_system(std::move(a), std::move(rhs));
  CountVector counts;
  for (const auto& r : sol) {
    if (!is_integral(r) || r < 0)
      throw std::logic_error(
          "interpolated count is not a non-negative integer: " + to_string(r));
    counts.push_back(r.get_num());
  }
  return counts;
}

CountVector fgmc_vector_from_pqe(const Query& q, const PartitionedDatabase& db,
                                 const PqeOracle& oracle) {
  (void)q;
  return fgmc_vector_from_sppqe(db.endo.size(), [&](const Rational& p) {
    ProbabilisticDatabase pd;
    for (const auto& f : db.endo) pd.facts[f] = p;
    for (const auto& f : db.exo) pd.facts[f] = 1;
    return oracle(pd);
  });
}

CountVector fgmc_via_fmc(const Query& q, const PartitionedDatabase& db,
                         Budget& budget, size_t* base_calls) {
  if (base_calls) *base_calls = 0;
  std::function<CountVector(const PartitionedDatabase&)> rec =
      [&](const PartitionedDatabase& d) -> CountVector {
    if (d.exo.empty()) {
      if (base_calls) ++*base_calls;
      return fgmc_vector(q, d, budget);
    }
    Fact alpha = *d.exo.begin();
    PartitionedDatabase moved{set_union(d.endo, {alpha}),
                              set_minus(d.exo, {alpha})};
    PartitionedDatabase dropped{d.endo, set_minus(d.exo, {alpha})};
    CountVector v1 = rec(moved);    // over |Dn|+1 endogenous facts
    CountVector v2 = rec(dropped);  // over |Dn| endogenous facts
    size_t n = d.endo.size();
    CountVector out(n + 1, 0);
    for (size_t j = 0; j <= n; ++j) {
      out[j] = v1[j + 1];
      if (j + 1 < v2.size()) out[j] -= v2[j + 1];
    }
    return out;
  };
  return rec(db);
}

}  // namespace shapval
