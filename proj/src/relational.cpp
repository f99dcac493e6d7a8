#include "shapval/relational.hpp"

#include <algorithm>
#include <cctype>
#include <istream>
#include <sstream>
#include <stdexcept>

namespace shapval {

Atom Fact::as_atom() const {
  Atom a;
  a.relation = relation;
  for (const auto& c : args) a.args.push_back(constant(c));
  return a;
}

std::string to_string(const Fact& f) {
  std::string s = f.relation + "(";
  for (size_t i = 0; i < f.args.size(); ++i) {
    if (i) s += ",";
    s += f.args[i];
  }
  return s + ")";
}

std::string to_string(const Atom& a) {
  std::string s = a.relation + "(";
  for (size_t i = 0; i < a.args.size(); ++i) {
    if (i) s += ",";
    const Term& t = a.args[i];
    s += t.is_constant() ? "'" + t.name + "'" : t.name;
  }
  return s + ")";
}

ConstantSet constants_of(const FactSet& facts) {
  ConstantSet out;
  for (const auto& f : facts) out.insert(f.args.begin(), f.args.end());
  return out;
}

ConstantSet constants_of(const AtomSet& atoms) {
  ConstantSet out;
  for (const auto& a : atoms)
    for (const auto& t : a.args)
      if (t.is_constant()) out.insert(t.name);
  return out;
}

AtomSet as_atoms(const FactSet& facts) {
  AtomSet out;
  for (const auto& f : facts) out.insert(f.as_atom());
  return out;
}

FactSet set_union(const FactSet& a, const FactSet& b) {
  FactSet out = a;
  out.insert(b.begin(), b.end());
  return out;
}

FactSet set_minus(const FactSet& a, const FactSet& b) {
  FactSet out;
  for (const auto& f : a)
    if (!b.count(f)) out.insert(f);
  return out;
}

FactSet set_intersect(const FactSet& a, const FactSet& b) {
  FactSet out;
  for (const auto& f : a)
    if (b.count(f)) out.insert(f);
  return out;
}

PartitionedDatabase ProbabilisticDatabase::partition() const {
  PartitionedDatabase db;
  for (const auto& [f, p] : facts) {
    if (p == 1)
      db.exo.insert(f);
    else
      db.endo.insert(f);
  }
  return db;
}

std::string FreshGen::next() {
  for (;;) {
    std::string name = kFreshPrefix + std::to_string(counter_++);
    if (!avoid_.count(name)) return name;
  }
}

void FreshGen::avoid(const ConstantSet& more) {
  avoid_.insert(more.begin(), more.end());
}

namespace {

bool extend_match(const Atom& atom, const Fact& fact, const ConstantSet& fixed,
                  Homomorphism& h, std::vector<Term>& bound) {
  if (atom.relation != fact.relation || atom.args.size() != fact.args.size())
    return false;
  size_t added_from = bound.size();
  for (size_t i = 0; i < atom.args.size(); ++i) {
    const Term& t = atom.args[i];
    const std::string& c = fact.args[i];
    if (t.is_constant() && fixed.count(t.name)) {
      if (t.name != c) goto fail;
      continue;
    }
    if (auto it = h.find(t); it != h.end()) {
      if (it->second != c) goto fail;
    } else {
      h.emplace(t, c);
      bound.push_back(t);
    }
  }
  return true;
fail:
  while (bound.size() > added_from) {
    h.erase(bound.back());
    bound.pop_back();
  }
  return false;
}

bool search(const std::vector<Atom>& atoms, size_t idx, const FactSet& target,
            const ConstantSet& fixed, Homomorphism& h,
            std::vector<Term>& bound) {
  if (idx == atoms.size()) return true;
  for (const auto& fact : target) {
    size_t mark = bound.size();
    if (extend_match(atoms[idx], fact, fixed, h, bound)) {
      if (search(atoms, idx + 1, target, fixed, h, bound)) return true;
      while (bound.size() > mark) {
        h.erase(bound.back());
        bound.pop_back();
      }
    }
  }
  return false;
}

}  // namespace

std::optional<Homomorphism> find_c_homomorphism(const AtomSet& source,
                                                const FactSet& target,
                                                const ConstantSet& fixed) {
  std::vector<Atom> atoms(source.begin(), source.end());
  Homomorphism h;
  for (const auto& c : fixed) h.emplace(constant(c), c);
  std::vector<Term> bound;
  if (search(atoms, 0, target, fixed, h, bound)) {
    // Keep only terms that actually occur in the source.
    Homomorphism out;
    for (const auto& a : atoms)
      for (const auto& t : a.args) out.emplace(t, h.at(t));
    return out;
  }
  return std::nullopt;
}

namespace {

class UnionFind {
 public:
  int add() {
    parent_.push_back(static_cast<int>(parent_.size()));
    return parent_.back();
  }
  int find(int x) {
    while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
    return x;
  }
  void unite(int a, int b) { parent_[find(a)] = find(b); }

 private:
  std::vector<int> parent_;
};

}  // namespace

bool is_connected_set(const AtomSet& atoms) {
  if (atoms.size() <= 1) return true;
  UnionFind uf;
  std::map<Term, int> ids;
  std::vector<int> atom_roots;
  for (const auto& a : atoms) {
    int prev = -1;
    for (const auto& t : a.args) {
      auto [it, inserted] = ids.emplace(t, -1);
      if (inserted) it->second = uf.add();
      if (prev >= 0) uf.unite(prev, it->second);
      prev = it->second;
    }
    atom_roots.push_back(prev);
  }
  for (int r : atom_roots)
    if (uf.find(r) != uf.find(atom_roots[0])) return false;
  return true;
}

bool is_connected_set(const FactSet& facts) {
  return is_connected_set(as_atoms(facts));
}

std::string Renaming::apply(const std::string& c) const {
  auto it = map.find(c);
  return it == map.end() ? c : it->second;
}

Fact Renaming::apply(const Fact& f) const {
  Fact out;
  out.relation = f.relation;
  for (const auto& c : f.args) out.args.push_back(apply(c));
  return out;
}

FactSet Renaming::apply(const FactSet& facts) const {
  FactSet out;
  for (const auto& f : facts) out.insert(apply(f));
  return out;
}

Renaming renaming_avoiding(const FactSet& db, const ConstantSet& keep,
                           const ConstantSet& avoid) {
  ConstantSet forbidden = avoid;
  forbidden.insert(keep.begin(), keep.end());
  ConstantSet own = constants_of(db);
  forbidden.insert(own.begin(), own.end());
  FreshGen gen(forbidden);
  Renaming ren;
  for (const auto& c : own)
    if (!keep.count(c)) ren.map.emplace(c, gen.next());
  return ren;
}

FactSet rename_avoiding(const FactSet& db, const ConstantSet& keep,
                        const ConstantSet& avoid) {
  return renaming_avoiding(db, keep, avoid).apply(db);
}

namespace {

void skip_ws(const std::string& s, size_t& i) {
  while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
}

bool is_name_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

std::string read_name(const std::string& s, size_t& i, const char* what,
                      int line) {
  size_t start = i;
  while (i < s.size() && is_name_char(s[i])) ++i;
  if (i == start)
    throw std::invalid_argument("line " + std::to_string(line) +
                                ": expected " + what);
  return s.substr(start, i - start);
}

Fact parse_fact_text(const std::string& s, size_t& i, int line) {
  skip_ws(s, i);
  Fact f;
  f.relation = read_name(s, i, "relation name", line);
  skip_ws(s, i);
  if (i >= s.size() || s[i] != '(')
    throw std::invalid_argument("line " + std::to_string(line) +
                                ": expected '('");
  ++i;
  for (;;) {
    skip_ws(s, i);
    std::string c = read_name(s, i, "constant", line);
    if (c.rfind(kFreshPrefix, 0) == 0)
      throw std::invalid_argument("line " + std::to_string(line) +
                                  ": constant '" + c +
                                  "' uses the reserved prefix");
    f.args.push_back(c);
    skip_ws(s, i);
    if (i < s.size() && s[i] == ',') {
      ++i;
      continue;
    }
    break;
  }
  if (i >= s.size() || s[i] != ')')
    throw std::invalid_argument("line " + std::to_string(line) +
                                ": expected ')'");
  ++i;
  return f;
}

}  // namespace

ParsedDatabase parse_database(std::istream& in) {
  ParsedDatabase out;
  std::map<std::string, size_t> arities;
  std::string lineText;
  int line = 0;
  while (std::getline(in, lineText)) {
    ++line;
    size_t i = 0;
    skip_ws(lineText, i);
    if (i >= lineText.size() || lineText[i] == '#') continue;
    bool exo = false;
    if (lineText[i] == '!') {
      exo = true;
      ++i;
    }
    Fact f = parse_fact_text(lineText, i, line);
    auto [it, inserted] = arities.emplace(f.relation, f.args.size());
    if (!inserted && it->second != f.args.size())
      throw std::invalid_argument("line " + std::to_string(line) +
                                  ": arity mismatch for relation '" +
                                  f.relation + "'");
    skip_ws(lineText, i);
    Rational p = 1;
    bool has_p = false;
    if (i < lineText.size() && lineText[i] == '@') {
      ++i;
      skip_ws(lineText, i);
      size_t start = i;
      while (i < lineText.size() &&
             !std::isspace(static_cast<unsigned char>(lineText[i])))
        ++i;
      p = parse_rational(lineText.substr(start, i - start));
      if (p <= 0 || p > 1)
        throw std::invalid_argument("line " + std::to_string(line) +
                                    ": probability must be in (0,1]");
      has_p = true;
    }
    skip_ws(lineText, i);
    if (i < lineText.size())
      throw std::invalid_argument("line " + std::to_string(line) +
                                  ": trailing input");
    if (has_p && exo)
      throw std::invalid_argument("line " + std::to_string(line) +
                                  ": '!' and '@' cannot be combined");
    if (has_p) out.has_probabilities = true;
    out.probabilistic.facts[f] = exo ? Rational(1) : p;
    if (exo || (has_p && p == 1))
      out.partitioned.exo.insert(f);
    else
      out.partitioned.endo.insert(f);
  }
  FactSet overlap =
      set_intersect(out.partitioned.endo, out.partitioned.exo);
  if (!overlap.empty())
    throw std::invalid_argument("fact listed both endogenous and exogenous: " +
                                to_string(*overlap.begin()));
  return out;
}

ParsedDatabase parse_database_text(const std::string& text) {
  std::istringstream in(text);
  return parse_database(in);
}

std::string format_database(const PartitionedDatabase& db) {
  std::string out;
  for (const auto& f : db.endo) out += to_string(f) + "\n";
  for (const auto& f : db.exo) out += "!" + to_string(f) + "\n";
  return out;
}

}  // namespace shapval
