#include "shapval/analyzer.hpp"

#include <algorithm>
#include <array>
#include <functional>
#include <set>
#include <vector>

namespace shapval {

bool is_self_join_free(const CQ& q) {
  std::set<std::string> seen;
  for (const auto& a : q.atoms)
    if (!seen.insert(a.relation).second) return false;
  return true;
}

namespace {

std::set<std::string> vars_of(const Atom& a) {
  std::set<std::string> out;
  for (const auto& t : a.args)
    if (t.is_variable()) out.insert(t.name);
  return out;
}

bool subset(const std::set<std::string>& a, const std::set<std::string>& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

std::set<std::string> intersect(const std::set<std::string>& a,
                                const std::set<std::string>& b) {
  std::set<std::string> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                        std::inserter(out, out.begin()));
  return out;
}

std::optional<std::array<size_t, 3>> non_hierarchical_triple(const CQ& q) {
  std::vector<std::set<std::string>> vars;
  for (const auto& a : q.atoms) vars.push_back(vars_of(a));
  size_t n = vars.size();
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j)
      for (size_t k = 0; k < n; ++k)
        if (!subset(intersect(vars[i], vars[j]), vars[k]) &&
            !subset(intersect(vars[k], vars[j]), vars[i]))
          return std::array<size_t, 3>{i, j, k};
  return std::nullopt;
}

}  // namespace

bool is_hierarchical(const CQ& q) {
  return !non_hierarchical_triple(q).has_value();
}

bool is_variable_connected(const CQ& q) {
  size_t n = q.atoms.size();
  if (n <= 1) return true;
  std::vector<size_t> parent(n);
  for (size_t i = 0; i < n; ++i) parent[i] = i;
  std::function<size_t(size_t)> find = [&](size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::vector<std::set<std::string>> vars;
  for (const auto& a : q.atoms) vars.push_back(vars_of(a));
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j)
      if (!intersect(vars[i], vars[j]).empty()) parent[find(i)] = find(j);
  for (size_t i = 1; i < n; ++i)
    if (find(i) != find(0)) return false;
  return true;
}

bool is_connected_query(const Query& q, size_t bound) {
  for (const auto& cs : canonical_supports(q, bound))
    if (!is_connected_set(cs.facts)) return false;
  return true;
}

std::optional<LeakWitness> find_q_leak(const Query& q, const FactSet& s,
                                       size_t bound) {
  ConstantSet c = q.constants();
  if (c.empty()) return std::nullopt;
  for (const auto& cs : canonical_supports(q, bound)) {
    for (const auto& src : cs.facts) {
      for (const auto& target : s) {
        if (src.relation != target.relation ||
            src.args.size() != target.args.size())
          continue;
        // The single-fact C-homomorphism is position-forced.
        std::map<std::string, std::string> h;
        bool ok = true;
        for (size_t i = 0; i < src.args.size() && ok; ++i) {
          const std::string& from = src.args[i];
          const std::string& to = target.args[i];
          if (c.count(from)) {
            if (from != to) ok = false;
            continue;
          }
          auto [it, inserted] = h.emplace(from, to);
          if (!inserted && it->second != to) ok = false;
        }
        if (!ok) continue;
        bool collapses = false;
        for (const auto& [from, to] : h)
          if (c.count(to)) collapses = true;
        if (!collapses) continue;
        // Construction-time verification of the witness.
        Fact image;
        image.relation = src.relation;
        for (const auto& arg : src.args) {
          auto it = h.find(arg);
          image.args.push_back(it == h.end() ? arg : it->second);
        }
        if (image != target)
          throw std::logic_error("leak witness verification failed");
        return LeakWitness{target, src, h};
      }
    }
  }
  return std::nullopt;
}

std::optional<FactSet> has_duplicable_singleton_support(const Query& q,
                                                        size_t bound) {
  if (evaluate(q, {})) return std::nullopt;  // trivial query
  ConstantSet c = q.constants();
  // Candidate relations with their arities.
  std::map<std::string, size_t> relations;
  for (const auto& d : q.cq_disjuncts)
    for (const auto& a : d.atoms) relations.emplace(a.relation, a.args.size());
  for (const auto& d : q.crpq_disjuncts)
    for (const auto& pa : d.path_atoms)
      for (const auto& sym : regex_symbols(pa.regex)) relations.emplace(sym, 2);
  (void)bound;

  for (const auto& [rel, arity] : relations) {
    std::vector<std::string> pool(c.begin(), c.end());
    FreshGen gen(c);
    for (size_t i = 0; i < arity; ++i) pool.push_back(gen.next());
    std::vector<size_t> idx(arity, 0);
    for (;;) {
      Fact f;
      f.relation = rel;
      for (size_t i = 0; i < arity; ++i) f.args.push_back(pool[idx[i]]);
      bool outside_c = false;
      for (const auto& a : f.args)
        if (!c.count(a)) outside_c = true;
      if (outside_c && evaluate(q, {f})) return FactSet{f};
      size_t k = 0;
      while (k < arity && ++idx[k] == pool.size()) {
        idx[k] = 0;
        ++k;
      }
      if (k == arity) break;
    }
  }
  return std::nullopt;
}

std::optional<IslandSupport> find_island_support(const Query& q, size_t bound) {
  if (bound == 0) bound = default_word_bound(q);
  ConstantSet c = q.constants();
  auto outside_c = [&](const FactSet& s) {
    for (const auto& name : constants_of(s))
      if (!c.count(name)) return true;
    return false;
  };

  // (a) connected constant-free query: any minimal support is an island.
  if (c.empty() && is_connected_query(q, bound)) {
    for (const auto& cs : canonical_supports(q, bound))
      if (outside_c(cs.facts))
        return IslandSupport{cs.facts, IslandRule::ConnectedConstantFree};
  }

  // (b) RPQ with a word of length >= 2: the simple path is an island.
  if (q.kind == Query::Kind::RPQ) {
    const PathAtom& pa = q.crpq_disjuncts[0].path_atoms[0];
    for (const auto& w : regex_words_up_to(pa.regex, bound)) {
      if (w.size() < 2) continue;
      FreshGen gen(c);
      FactSet path;
      std::string cur = pa.src.is_constant() ? pa.src.name : gen.next();
      std::string last = pa.dst.is_constant() ? pa.dst.name : gen.next();
      for (size_t i = 0; i < w.size(); ++i) {
        std::string next = (i + 1 == w.size()) ? last : gen.next();
        path.insert(Fact{w[i], {cur, next}});
        cur = next;
      }
      if (outside_c(path) && is_minimal_support(q, path))
        return IslandSupport{path, IslandRule::RpqLongWord};
    }
  }

  // (c) duplicable singleton support.
  if (auto s = has_duplicable_singleton_support(q, bound))
    if (outside_c(*s)) return IslandSupport{*s, IslandRule::DuplicableSingleton};

  return std::nullopt;
}

namespace {

template <typename AtomT>
std::vector<std::vector<size_t>> variable_components(
    const std::vector<AtomT>& items,
    const std::function<std::set<std::string>(const AtomT&)>& vars) {
  size_t n = items.size();
  std::vector<size_t> parent(n);
  for (size_t i = 0; i < n; ++i) parent[i] = i;
  std::function<size_t(size_t)> find = [&](size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j)
      if (!intersect(vars(items[i]), vars(items[j])).empty())
        parent[find(i)] = find(j);
  std::map<size_t, std::vector<size_t>> groups;
  for (size_t i = 0; i < n; ++i) groups[find(i)].push_back(i);
  std::vector<std::vector<size_t>> out;
  for (auto& [root, members] : groups) out.push_back(std::move(members));
  return out;
}

// Merge components that share vocabulary; a two-block split exists iff the
// merged grouping has >= 2 groups.
std::optional<std::pair<std::vector<size_t>, std::vector<size_t>>> split_blocks(
    const std::vector<std::vector<size_t>>& components,
    const std::vector<std::set<std::string>>& vocab) {
  size_t n = components.size();
  if (n < 2) return std::nullopt;
  std::vector<size_t> parent(n);
  for (size_t i = 0; i < n; ++i) parent[i] = i;
  std::function<size_t(size_t)> find = [&](size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::vector<std::set<std::string>> comp_vocab(n);
  for (size_t i = 0; i < n; ++i)
    for (size_t item : components[i])
      comp_vocab[i].insert(vocab[item].begin(), vocab[item].end());
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j)
      if (!intersect(comp_vocab[i], comp_vocab[j]).empty())
        parent[find(i)] = find(j);
  size_t first_root = find(0);
  std::pair<std::vector<size_t>, std::vector<size_t>> blocks;
  for (size_t i = 0; i < n; ++i) {
    auto& block = (find(i) == first_root) ? blocks.first : blocks.second;
    for (size_t item : components[i]) block.push_back(item);
  }
  if (blocks.second.empty()) return std::nullopt;
  return blocks;
}

std::optional<std::pair<std::vector<size_t>, std::vector<size_t>>>
split_experimental(const std::vector<std::vector<size_t>>& components,
                   const std::vector<ConstantSet>& consts) {
  size_t n = components.size();
  if (n < 2) return std::nullopt;
  std::vector<ConstantSet> comp_consts(n);
  for (size_t i = 0; i < n; ++i)
    for (size_t item : components[i])
      comp_consts[i].insert(consts[item].begin(), consts[item].end());
  for (size_t i = 0; i < n; ++i) {
    if (comp_consts[i].empty()) return std::nullopt;
    for (size_t j = i + 1; j < n; ++j)
      for (const auto& name : comp_consts[i])
        if (comp_consts[j].count(name)) return std::nullopt;
  }
  std::pair<std::vector<size_t>, std::vector<size_t>> blocks;
  blocks.first = components[0];
  for (size_t i = 1; i < n; ++i)
    blocks.second.insert(blocks.second.end(), components[i].begin(),
                         components[i].end());
  return blocks;
}

}  // namespace

std::optional<std::pair<Query, Query>> decompose(const Query& q,
                                                 bool experimental) {
  bool constant_free = q.constants().empty();
  if (q.is_cq_family()) {
    if (q.cq_disjuncts.size() != 1) return std::nullopt;
    const auto& atoms = q.cq_disjuncts[0].atoms;
    std::function<std::set<std::string>(const Atom&)> vars = vars_of;
    auto components = variable_components(atoms, vars);
    std::vector<std::set<std::string>> vocab;
    std::vector<ConstantSet> consts;
    for (const auto& a : atoms) {
      vocab.push_back({a.relation});
      ConstantSet cs;
      for (const auto& t : a.args)
        if (t.is_constant()) cs.insert(t.name);
      consts.push_back(cs);
    }
    auto blocks = constant_free ? split_blocks(components, vocab)
                 : experimental ? split_experimental(components, consts)
                                : std::nullopt;
    if (!blocks) return std::nullopt;
    std::vector<Atom> a1, a2;
    for (size_t i : blocks->first) a1.push_back(atoms[i]);
    for (size_t i : blocks->second) a2.push_back(atoms[i]);
    return std::make_pair(make_cq(std::move(a1)), make_cq(std::move(a2)));
  }

  if (q.crpq_disjuncts.size() != 1 || !constant_free) return std::nullopt;
  const auto& atoms = q.crpq_disjuncts[0].path_atoms;
  std::function<std::set<std::string>(const PathAtom&)> vars =
      [](const PathAtom& pa) {
        std::set<std::string> out;
        if (pa.src.is_variable()) out.insert(pa.src.name);
        if (pa.dst.is_variable()) out.insert(pa.dst.name);
        return out;
      };
  auto components = variable_components(atoms, vars);
  std::vector<std::set<std::string>> vocab;
  for (const auto& pa : atoms) {
    auto syms = regex_symbols(pa.regex);
    vocab.emplace_back(syms.begin(), syms.end());
  }
  auto blocks = split_blocks(components, vocab);
  if (!blocks) return std::nullopt;
  std::vector<PathAtom> a1, a2;
  for (size_t i : blocks->first) a1.push_back(atoms[i]);
  for (size_t i : blocks->second) a2.push_back(atoms[i]);
  return std::make_pair(make_crpq(std::move(a1)), make_crpq(std::move(a2)));
}

ClassificationVerdict classify(const Query& q) {
  if (q.kind == Query::Kind::CQ) {
    const CQ& cq = q.cq_disjuncts[0];
    auto triple = non_hierarchical_triple(cq);
    if (is_self_join_free(cq)) {
      if (!triple)
        return {Verdict::InFP, Rule::HierarchicalSjfCq,
                "hierarchical self-join-free CQ"};
      return {Verdict::SharpPHard, Rule::NonHierarchicalSjfCq,
              "witness triple " + to_string(cq.atoms[(*triple)[0]]) + ", " +
                  to_string(cq.atoms[(*triple)[1]]) + ", " +
                  to_string(cq.atoms[(*triple)[2]])};
    }
    if (q.constants().empty() && triple)
      return {Verdict::SharpPHard, Rule::ConnectedUcqUnsafe,
              "constant-free non-hierarchical CQ; witness triple " +
                  to_string(cq.atoms[(*triple)[0]]) + ", " +
                  to_string(cq.atoms[(*triple)[1]]) + ", " +
                  to_string(cq.atoms[(*triple)[2]])};
  }
  if (q.kind == Query::Kind::RPQ) {
    const auto& regex = q.crpq_disjuncts[0].path_atoms[0].regex;
    if (regex_has_word_of_length_at_least(regex, 3))
      return {Verdict::SharpPHard, Rule::RpqWordLength,
              "language contains a word of length at least 3"};
    return {Verdict::InFP, Rule::RpqWordLength,
            "all words have length at most 2"};
  }
  return {Verdict::Unknown, Rule::NoneApplicable, ""};
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::InFP:
      return "FP";
    case Verdict::SharpPHard:
      return "#P-hard";
    case Verdict::Unknown:
      return "unknown";
  }
  return "";
}

std::string to_string(Rule r) {
  switch (r) {
    case Rule::HierarchicalSjfCq:
      return "hierarchical sjf-CQ";
    case Rule::NonHierarchicalSjfCq:
      return "non-hierarchical sjf-CQ";
    case Rule::RpqWordLength:
      return "rpq-word-length";
    case Rule::ConnectedUcqUnsafe:
      return "connected-ucq-unsafe";
    case Rule::CcDisjoint:
      return "cc-disjoint";
    case Rule::DuplicableSingleton:
      return "duplicable-singleton";
    case Rule::NoneApplicable:
      return "none-applicable";
  }
  return "";
}

std::string to_string(IslandRule r) {
  switch (r) {
    case IslandRule::ConnectedConstantFree:
      return "connected-constant-free";
    case IslandRule::RpqLongWord:
      return "rpq-rule";
    case IslandRule::DuplicableSingleton:
      return "duplicable-singleton";
  }
  return "";
}

}  // namespace shapval
