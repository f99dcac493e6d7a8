#include "shapval/reduction.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <mutex>
#include <ostream>

#include "shapval/analyzer.hpp"

namespace shapval {

NormalizedInstance normalize_instance(const Query& q, const FactSet& sprime,
                                      const ConstantSet& c,
                                      const PartitionedDatabase& d) {
  NormalizedInstance out;
  size_t n = d.endo.size();
  if (evaluate(q, d.exo)) {
    CountVector shortcut;
    for (size_t j = 0; j <= n; ++j)
      shortcut.push_back(binomial(Integer(static_cast<long>(n)),
                                  Integer(static_cast<long>(j))));
    out.db = d;
    out.shortcut = std::move(shortcut);
    return out;
  }

  // Rename constants shared with S' outside C to fresh ones.
  ConstantSet sprime_consts = constants_of(sprime);
  ConstantSet keep;
  for (const auto& name : constants_of(d.all()))
    if (!sprime_consts.count(name) || c.count(name)) keep.insert(name);
  out.renaming = renaming_avoiding(d.all(), keep, sprime_consts);
  out.db.endo = out.renaming.apply(d.endo);
  out.db.exo = out.renaming.apply(d.exo);

  // Facts still shared with S' are entirely over C; they must be irrelevant
  // to q, and removing them keeps the counts recoverable.
  for (const auto& f : set_intersect(out.db.endo, sprime)) {
    if (is_relevant_fact(q, f))
      throw HypothesisError("fact " + to_string(f) +
                            " of D n S' is relevant to the query");
    out.db.endo.erase(f);
    ++out.removed_endo;
  }
  for (const auto& f : set_intersect(out.db.exo, sprime)) {
    if (is_relevant_fact(q, f))
      throw HypothesisError("fact " + to_string(f) +
                            " of D n S' is relevant to the query");
    out.db.exo.erase(f);
  }
  return out;
}

PartitionedDatabase complete_with_support(const PartitionedDatabase& d,
                                          const FactSet& sprime) {
  FactSet overlap = set_intersect(d.all(), sprime);
  if (!overlap.empty())
    throw std::invalid_argument("completion support overlaps the database: " +
                                to_string(*overlap.begin()));
  return {d.endo, set_union(d.exo, sprime)};
}

ReductionFragment duplicate_support(const FactSet& s, const ConstantSet& c,
                                    const ConstantSet& cprime, size_t i,
                                    bool endogenous_only, FreshGen& gen) {
  std::map<std::string, size_t> occurrences;
  for (const auto& f : s) {
    ConstantSet in_fact(f.args.begin(), f.args.end());
    for (const auto& name : in_fact) ++occurrences[name];
  }
  std::string chosen;
  std::string analysis;
  for (const auto& [name, occ] : occurrences) {
    if (c.count(name) || cprime.count(name)) {
      analysis += " " + name + ":in-C";
      continue;
    }
    if (endogenous_only && occ != 1) {
      analysis += " " + name + ":occurs-" + std::to_string(occ) + "-times";
      continue;
    }
    chosen = name;
    break;
  }
  if (chosen.empty())
    throw HypothesisError(
        std::string("no eligible constant to duplicate in the support") +
        (endogenous_only ? " (endogenous-only mode)" : "") + ";" + analysis);

  ReductionFragment frag;
  frag.duplicated_constant = chosen;
  for (const auto& f : s) {
    bool contains = std::find(f.args.begin(), f.args.end(), chosen) !=
                    f.args.end();
    (contains ? frag.s0 : frag.tail).insert(f);
  }
  frag.pivot = *frag.s0.begin();
  for (size_t k = 1; k <= i; ++k) {
    Renaming ren;
    ren.map.emplace(chosen, gen.next());
    frag.copies.push_back(ren.apply(frag.s0));
    frag.pivot_copies.push_back(ren.apply(frag.pivot));
  }
  return frag;
}

PartitionedDatabase assemble_Ai(const PartitionedDatabase& dprime,
                                const ReductionFragment& frag,
                                const ConstantSet& c) {
  FactSet gadget = set_union(frag.s0, frag.tail);
  for (const auto& copy : frag.copies) gadget = set_union(gadget, copy);
  ConstantSet db_consts = constants_of(dprime.all());
  for (const auto& name : constants_of(gadget))
    if (db_consts.count(name) && !c.count(name))
      throw std::logic_error("gadget shares constant '" + name +
                             "' with the database outside C");

  PartitionedDatabase ai;
  ai.endo = set_union(dprime.endo, frag.tail);
  ai.endo.insert(frag.pivot);
  for (const auto& p : frag.pivot_copies) ai.endo.insert(p);
  ai.exo = dprime.exo;
  for (const auto& f : set_minus(frag.s0, {frag.pivot})) ai.exo.insert(f);
  for (size_t k = 0; k < frag.copies.size(); ++k)
    for (const auto& f : set_minus(frag.copies[k], {frag.pivot_copies[k]}))
      ai.exo.insert(f);
  if (!set_intersect(ai.endo, ai.exo).empty())
    throw std::logic_error("assembled gadget has endo/exo overlap");
  return ai;
}

MarginalCase marginal_case(const Query& q_case3, const PartitionedDatabase& d,
                           const ReductionFragment& frag, bool negate_case3,
                           const FactSet& b) {
  for (const auto& p : frag.pivot_copies)
    if (b.count(p)) return MarginalCase::Case1;
  for (const auto& f : frag.tail)
    if (!b.count(f)) return MarginalCase::Case2;
  bool sat = evaluate(q_case3, set_union(set_intersect(b, d.endo), d.exo));
  if (negate_case3 ? !sat : sat) return MarginalCase::Case3;
  return MarginalCase::Contributes;
}

Rational compute_Z(size_t i, size_t n_endo, size_t tail_size) {
  size_t nn = n_endo + i + 1 + tail_size;  // |A^i_n|
  Integer nfac = factorial(nn);
  Rational z = 0;
  for (size_t m = 0; m + 1 <= nn; ++m) {
    Integer total = binomial(Integer(static_cast<long>(nn - 1)),
                             Integer(static_cast<long>(m)));
    Integer case3_shape =
        binomial(Integer(static_cast<long>(n_endo)),
                 Integer(static_cast<long>(m)) -
                     Integer(static_cast<long>(tail_size)));
    z += make_rational((total - case3_shape) * factorial(m) *
                           factorial(nn - m - 1),
                       nfac);
  }
  return z;
}

Rational compute_Z_enumerated(size_t i, size_t n_endo, size_t tail_size) {
  size_t nn = n_endo + i + 1 + tail_size;
  if (nn > 12) throw std::invalid_argument("enumeration limited to N <= 12");
  size_t others = nn - 1;  // i pivot copies, tail_size tail, n_endo players
  Integer nfac = factorial(nn);
  Rational z = 0;
  for (std::uint64_t mask = 0; mask < (1ull << others); ++mask) {
    bool has_copy = (mask & ((1ull << i) - 1)) != 0;
    std::uint64_t tail_bits = (mask >> i) & ((1ull << tail_size) - 1);
    bool tail_full = tail_bits == ((1ull << tail_size) - 1);
    if (!has_copy && tail_full) continue;  // cases 1-2 only
    size_t m = std::popcount(mask);
    z += make_rational(factorial(m) * factorial(nn - m - 1), nfac);
  }
  return z;
}

CountVector solve_factorial_system(const ShSeries& series) {
  size_t n = series.n_endo;
  size_t t = series.tail_size;
  if (series.values.size() != n + 1)
    throw std::invalid_argument("factorial system needs Sh^0..Sh^n");
  std::vector<std::vector<Rational>> a(n + 1, std::vector<Rational>(n + 1));
  for (size_t i = 0; i <= n; ++i) {
    Integer denom = factorial(n + i + t + 1);
    for (size_t j = 0; j <= n; ++j)
      a[i][j] = make_rational(factorial(j + t) * factorial(n + i - j), denom);
  }
  std::vector<Rational> sol = solve_linear_system(std::move(a), series.values);
  CountVector counts;
  for (const auto& r : sol) {
    if (!is_integral(r) || r < 0)
      throw std::logic_error(
          "construction invalid: factorial system solved to " + to_string(r));
    counts.push_back(r.get_num());
  }
  return counts;
}

Rational factorial_series_value(const CountVector& counts, size_t i,
                                size_t tail_size) {
  size_t n = counts.size() - 1;
  Integer denom = factorial(n + i + tail_size + 1);
  Rational sh = 0;
  for (size_t j = 0; j <= n; ++j)
    sh += make_rational(factorial(j + tail_size) * factorial(n + i - j),
                        denom) *
          Rational(counts[j]);
  return sh;
}

namespace {

void z_self_test() {
  static std::once_flag flag;
  std::call_once(flag, [] {
    for (size_t i = 0; i <= 3; ++i)
      for (size_t n = 0; n <= 3; ++n)
        for (size_t t = 0; t <= 3; ++t) {
          if (n + i + 1 + t > 12) continue;
          if (compute_Z(i, n, t) != compute_Z_enumerated(i, n, t))
            throw std::logic_error("Z closed form disagrees with enumeration");
        }
  });
}

CountVector pascal_expand(const CountVector& counts) {
  CountVector out(counts.size() + 1, 0);
  for (size_t j = 0; j < out.size(); ++j) {
    if (j < counts.size()) out[j] += counts[j];
    if (j >= 1) out[j] += counts[j - 1];
  }
  return out;
}

// Core gadget loop shared by all modes: normalizes, completes with S',
// builds A^0..A^n, queries the oracle, solves the factorial system.
CountVector gadget_counts(const Query& q_oracle, const Query& q_check,
                          bool complement, const PartitionedDatabase& d_in,
                          const FactSet& s_raw, const FactSet& sprime,
                          const ConstantSet& c, const ConstantSet& cprime,
                          const ShapleyOracle& oracle,
                          const ReductionOptions& opts, const char* label) {
  NormalizedInstance norm = normalize_instance(q_check, sprime, c, d_in);
  if (norm.shortcut) return *norm.shortcut;
  PartitionedDatabase dprime = complete_with_support(norm.db, sprime);

  ConstantSet avoid = constants_of(dprime.all());
  avoid.insert(cprime.begin(), cprime.end());
  FactSet s = rename_avoiding(s_raw, c, avoid);
  ConstantSet gen_avoid = avoid;
  for (const auto& name : constants_of(s)) gen_avoid.insert(name);
  gen_avoid.insert(c.begin(), c.end());

  size_t n = norm.db.endo.size();
  ShSeries series;
  series.n_endo = n;
  series.tail_size = 0;
  for (size_t i = 0; i <= n; ++i) {
    FreshGen gen(gen_avoid);
    ReductionFragment frag =
        duplicate_support(s, c, cprime, i, opts.endogenous_only, gen);
    series.tail_size = frag.tail.size();
    PartitionedDatabase ai = assemble_Ai(dprime, frag, c);
    if (opts.endogenous_only && d_in.exo.empty() && sprime.empty() &&
        !ai.exo.empty())
      throw std::logic_error(
          "endogenous-only construction produced exogenous facts");
    Rational sh = oracle(q_oracle, ai, frag.pivot);
    Rational z = compute_Z(i, n, frag.tail.size());
    Rational shi = 1 - sh - z;
    if (opts.trace) {
      *opts.trace << "# " << label << " i=" << i << " pivot="
                  << to_string(frag.pivot) << "\n"
                  << format_database(ai) << "# oracle=" << to_string(sh)
                  << " Z=" << to_string(z) << " Sh^" << i << "="
                  << to_string(shi) << "\n";
    }
    series.values.push_back(shi);
  }
  CountVector counts = solve_factorial_system(series);
  if (complement) {
    for (size_t j = 0; j <= n; ++j) {
      Integer total = binomial(Integer(static_cast<long>(n)),
                               Integer(static_cast<long>(j)));
      counts[j] = total - counts[j];
      if (counts[j] < 0)
        throw std::logic_error("construction invalid: negative count");
    }
  }
  for (size_t r = 0; r < norm.removed_endo; ++r) counts = pascal_expand(counts);
  return counts;
}

FactSet support_with_constant_outside(const Query& q, const ConstantSet& c,
                                      size_t bound, const char* what) {
  for (const auto& cs : canonical_supports(q, bound)) {
    for (const auto& name : constants_of(cs.facts))
      if (!c.count(name)) return cs.facts;
  }
  throw HypothesisError(std::string(what) +
                        ": no minimal support with a constant outside C");
}

CountVector run_pseudo_connected(const Query& q, const PartitionedDatabase& d,
                                 const ShapleyOracle& oracle,
                                 const ReductionOptions& opts) {
  auto island = find_island_support(q, opts.bound);
  if (!island)
    throw HypothesisError(
        "no island minimal support certified for the query (pseudo-"
        "connectedness not established)");
  return gadget_counts(q, q, false, d, island->support, {}, q.constants(), {},
                       oracle, opts, "pseudo-connected");
}

CountVector run_leak(const Query& q, const PartitionedDatabase& d,
                     const ShapleyOracle& oracle,
                     const ReductionOptions& opts) {
  if (!opts.qprime)
    throw std::invalid_argument("leak mode requires the conjunct query q'");
  const Query& qp = *opts.qprime;
  ConstantSet c = q.constants();
  ConstantSet cp = qp.constants();
  if (!q.is_cq_family())
    throw HypothesisError(
        "leak mode certifies variable-connectedness only for CQ/UCQ inputs");
  for (const auto& dj : q.cq_disjuncts)
    if (!is_variable_connected(dj))
      throw HypothesisError("the query is not variable-connected");

  std::optional<FactSet> sprime;
  std::string failure = "q' has no minimal support";
  for (const auto& cs : canonical_supports(qp, opts.bound)) {
    if (evaluate(q, cs.facts)) {
      failure = "'S' does not satisfy q' fails";
      continue;
    }
    if (find_q_leak(q, cs.facts, opts.bound)) {
      failure = "'S' has no q-leak' fails";
      continue;
    }
    bool ok = true;
    for (const auto& alpha : cs.facts) {
      bool all_in_c = true;
      for (const auto& name : alpha.args)
        if (!c.count(name)) all_in_c = false;
      if (all_in_c && is_relevant_fact(q, alpha)) {
        failure = "'relevant facts of S' have a constant outside C' fails";
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    sprime = cs.facts;
    break;
  }
  if (!sprime) throw HypothesisError(failure);

  std::optional<FactSet> s;
  for (const auto& cs : canonical_supports(q, opts.bound))
    if (!find_q_leak(q, cs.facts, opts.bound)) {
      s = cs.facts;
      break;
    }
  if (!s) throw HypothesisError("q has no leak-free minimal support");

  Query q_and = conjoin(q, qp);
  return gadget_counts(q_and, q, false, d, *s, *sprime, c, cp, oracle, opts,
                       "leak");
}

CountVector run_decomposable(const Query& q, const PartitionedDatabase& d,
                             const ShapleyOracle& oracle,
                             const ReductionOptions& opts) {
  auto parts = decompose(q, opts.experimental_decompose);
  if (!parts)
    throw HypothesisError("the query admits no certified decomposition");
  const Query& q1 = parts->first;
  const Query& q2 = parts->second;
  ConstantSet c = q.constants();

  PartitionedDatabase d1, d2;
  auto route = [&](const FactSet& facts, bool is_endo) {
    for (const auto& f : facts) {
      bool r1 = is_relevant_fact(q1, f, opts.bound);
      bool r2 = is_relevant_fact(q2, f, opts.bound);
      if (r1 && r2)
        throw HypothesisError("fact " + to_string(f) +
                              " is relevant to both subqueries");
      PartitionedDatabase& part = r2 ? d2 : d1;
      (is_endo ? part.endo : part.exo).insert(f);
    }
  };
  route(d.endo, true);
  route(d.exo, false);

  FactSet s2 = support_with_constant_outside(q2, c, opts.bound, "q2");
  FactSet s1 = support_with_constant_outside(q1, c, opts.bound, "q1");
  CountVector v1 =
      gadget_counts(q, q1, true, d1, s2, {}, c, {}, oracle, opts, "part-1");
  CountVector v2 =
      gadget_counts(q, q2, true, d2, s1, {}, c, {}, oracle, opts, "part-2");

  if (opts.trace) { *opts.trace << "# v1:"; for (auto& x : v1) *opts.trace << " " << x.get_str(); *opts.trace << "\n# v2:"; for (auto& x : v2) *opts.trace << " " << x.get_str(); *opts.trace << "\n"; }
  // Join through the uniform-probability view: the parts are independent,
  // so the probabilities multiply; interpolation recovers the joint vector.
  size_t n = d.endo.size();
  return fgmc_vector_from_sppqe(n, [&](const Rational& p) -> Rational {
    return sppqe_from_fgmc_vector(v1, p) * sppqe_from_fgmc_vector(v2, p);
  });
}

}  // namespace

CountVector fgmc_via_shapley(const Query& q, ReductionMode mode,
                             const PartitionedDatabase& d,
                             const ShapleyOracle& oracle,
                             const ReductionOptions& opts) {
  z_self_test();
  switch (mode) {
    case ReductionMode::PseudoConnected:
      return run_pseudo_connected(q, d, oracle, opts);
    case ReductionMode::Leak:
      return run_leak(q, d, oracle, opts);
    case ReductionMode::Decomposable:
      return run_decomposable(q, d, oracle, opts);
  }
  throw std::logic_error("unreachable");
}

}  // namespace shapval
