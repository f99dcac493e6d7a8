#include "shapval/query.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <set>
#include <stdexcept>

namespace shapval {

RegexPtr regex_epsilon() {
  return std::make_shared<RegexNode>(RegexNode{RegexNode::Kind::Epsilon, "", {}});
}
RegexPtr regex_symbol(std::string relation) {
  return std::make_shared<RegexNode>(
      RegexNode{RegexNode::Kind::Symbol, std::move(relation), {}});
}
RegexPtr regex_concat(std::vector<RegexPtr> children) {
  if (children.size() == 1) return children[0];
  return std::make_shared<RegexNode>(
      RegexNode{RegexNode::Kind::Concat, "", std::move(children)});
}
RegexPtr regex_alt(std::vector<RegexPtr> children) {
  if (children.size() == 1) return children[0];
  return std::make_shared<RegexNode>(
      RegexNode{RegexNode::Kind::Alt, "", std::move(children)});
}
RegexPtr regex_star(RegexPtr child) {
  return std::make_shared<RegexNode>(
      RegexNode{RegexNode::Kind::Star, "", {std::move(child)}});
}

std::string to_string(const RegexPtr& r) {
  switch (r->kind) {
    case RegexNode::Kind::Epsilon:
      return "eps";
    case RegexNode::Kind::Symbol:
      return r->symbol;
    case RegexNode::Kind::Concat: {
      std::string s;
      for (const auto& c : r->children) {
        if (!s.empty()) s += " ";
        bool paren = c->kind == RegexNode::Kind::Alt;
        s += paren ? "(" + to_string(c) + ")" : to_string(c);
      }
      return s;
    }
    case RegexNode::Kind::Alt: {
      std::string s;
      for (const auto& c : r->children) {
        if (!s.empty()) s += " | ";
        s += to_string(c);
      }
      return s;
    }
    case RegexNode::Kind::Star: {
      const auto& c = r->children[0];
      bool paren = c->kind != RegexNode::Kind::Symbol &&
                   c->kind != RegexNode::Kind::Epsilon;
      return (paren ? "(" + to_string(c) + ")" : to_string(c)) + "*";
    }
  }
  return "";
}

/* Thompson automaton ====================================================== */

namespace {

struct Nfa {
  // state -> list of (symbol, target); eps moves separate
  std::vector<std::vector<std::pair<std::string, int>>> sym;
  std::vector<std::vector<int>> eps;
  int start = 0;
  int accept = 0;

  int add_state() {
    sym.emplace_back();
    eps.emplace_back();
    return static_cast<int>(sym.size()) - 1;
  }
};

std::pair<int, int> build(Nfa& nfa, const RegexPtr& r) {
  switch (r->kind) {
    case RegexNode::Kind::Epsilon: {
      int s = nfa.add_state(), t = nfa.add_state();
      nfa.eps[s].push_back(t);
      return {s, t};
    }
    case RegexNode::Kind::Symbol: {
      int s = nfa.add_state(), t = nfa.add_state();
      nfa.sym[s].emplace_back(r->symbol, t);
      return {s, t};
    }
    case RegexNode::Kind::Concat: {
      auto [s, t] = build(nfa, r->children[0]);
      for (size_t i = 1; i < r->children.size(); ++i) {
        auto [s2, t2] = build(nfa, r->children[i]);
        nfa.eps[t].push_back(s2);
        t = t2;
      }
      return {s, t};
    }
    case RegexNode::Kind::Alt: {
      int s = nfa.add_state(), t = nfa.add_state();
      for (const auto& c : r->children) {
        auto [s2, t2] = build(nfa, c);
        nfa.eps[s].push_back(s2);
        nfa.eps[t2].push_back(t);
      }
      return {s, t};
    }
    case RegexNode::Kind::Star: {
      int s = nfa.add_state(), t = nfa.add_state();
      auto [s2, t2] = build(nfa, r->children[0]);
      nfa.eps[s].push_back(s2);
      nfa.eps[s].push_back(t);
      nfa.eps[t2].push_back(s2);
      nfa.eps[t2].push_back(t);
      return {s, t};
    }
  }
  throw std::logic_error("unreachable");
}

Nfa compile(const RegexPtr& r) {
  Nfa nfa;
  auto [s, t] = build(nfa, r);
  nfa.start = s;
  nfa.accept = t;
  return nfa;
}

std::set<int> eps_closure(const Nfa& nfa, std::set<int> states) {
  std::deque<int> todo(states.begin(), states.end());
  while (!todo.empty()) {
    int s = todo.front();
    todo.pop_front();
    for (int t : nfa.eps[s])
      if (states.insert(t).second) todo.push_back(t);
  }
  return states;
}

std::set<int> step(const Nfa& nfa, const std::set<int>& states,
                   const std::string& symbol) {
  std::set<int> out;
  for (int s : states)
    for (const auto& [sym, t] : nfa.sym[s])
      if (sym == symbol) out.insert(t);
  return eps_closure(nfa, out);
}

std::set<std::string> alphabet_of(const Nfa& nfa) {
  std::set<std::string> out;
  for (const auto& trans : nfa.sym)
    for (const auto& [sym, t] : trans) out.insert(sym);
  return out;
}

}  // namespace

bool regex_accepts_epsilon(const RegexPtr& r) {
  Nfa nfa = compile(r);
  return eps_closure(nfa, {nfa.start}).count(nfa.accept) > 0;
}

std::vector<Word> regex_words_up_to(const RegexPtr& r, size_t max_len) {
  Nfa nfa = compile(r);
  auto alphabet = alphabet_of(nfa);
  std::vector<Word> out;
  // BFS over (word, state set); each word visited once.
  struct Item {
    Word word;
    std::set<int> states;
  };
  std::deque<Item> todo;
  todo.push_back({{}, eps_closure(nfa, {nfa.start})});
  while (!todo.empty()) {
    Item item = std::move(todo.front());
    todo.pop_front();
    if (item.states.count(nfa.accept)) out.push_back(item.word);
    if (item.word.size() == max_len) continue;
    for (const auto& sym : alphabet) {
      auto next = step(nfa, item.states, sym);
      if (next.empty()) continue;
      Word w = item.word;
      w.push_back(sym);
      todo.push_back({std::move(w), std::move(next)});
    }
  }
  return out;
}

bool regex_has_word_of_length_at_least(const RegexPtr& r, size_t k) {
  Nfa nfa = compile(r);
  auto alphabet = alphabet_of(nfa);
  std::set<int> cur = eps_closure(nfa, {nfa.start});
  for (size_t i = 0; i < k; ++i) {
    std::set<int> next;
    for (const auto& sym : alphabet) {
      auto stepped = step(nfa, cur, sym);
      next.insert(stepped.begin(), stepped.end());
    }
    cur = next;
    if (cur.empty()) return false;
  }
  // States reachable with >= k symbols consumed.
  std::set<int> seen = cur;
  std::deque<int> frontier(cur.begin(), cur.end());
  if (seen.count(nfa.accept)) return true;
  while (!frontier.empty()) {
    std::set<int> from{frontier.front()};
    frontier.pop_front();
    from = eps_closure(nfa, from);
    for (int s : from)
      for (const auto& [sym, t] : nfa.sym[s]) {
        std::set<int> cl = eps_closure(nfa, {t});
        for (int u : cl)
          if (seen.insert(u).second) frontier.push_back(u);
      }
    if (seen.count(nfa.accept)) return true;
  }
  return seen.count(nfa.accept) > 0;
}

std::vector<std::string> regex_symbols(const RegexPtr& r) {
  std::vector<std::string> out;
  switch (r->kind) {
    case RegexNode::Kind::Symbol:
      out.push_back(r->symbol);
      break;
    case RegexNode::Kind::Epsilon:
      break;
    default:
      for (const auto& c : r->children) {
        auto sub = regex_symbols(c);
        out.insert(out.end(), sub.begin(), sub.end());
      }
  }
  return out;
}

/* Query construction ====================================================== */

namespace {

void canonicalize(CQ& cq) {
  std::sort(cq.atoms.begin(), cq.atoms.end());
  cq.atoms.erase(std::unique(cq.atoms.begin(), cq.atoms.end()),
                 cq.atoms.end());
}

void check_arities(const Query& q) {
  std::map<std::string, size_t> arities;
  for (const auto& d : q.cq_disjuncts)
    for (const auto& a : d.atoms) {
      if (a.args.empty())
        throw std::invalid_argument("atom with zero arity: " + a.relation);
      auto [it, inserted] = arities.emplace(a.relation, a.args.size());
      if (!inserted && it->second != a.args.size())
        throw std::invalid_argument("arity mismatch for relation '" +
                                    a.relation + "'");
    }
}

}  // namespace

ConstantSet Query::constants() const {
  ConstantSet out;
  for (const auto& d : cq_disjuncts)
    for (const auto& a : d.atoms)
      for (const auto& t : a.args)
        if (t.is_constant()) out.insert(t.name);
  for (const auto& d : crpq_disjuncts)
    for (const auto& pa : d.path_atoms) {
      if (pa.src.is_constant()) out.insert(pa.src.name);
      if (pa.dst.is_constant()) out.insert(pa.dst.name);
    }
  return out;
}

std::string Query::text() const {
  std::string out;
  auto term_text = [](const Term& t) {
    return t.is_constant() ? "'" + t.name + "'" : t.name;
  };
  if (is_cq_family()) {
    for (const auto& d : cq_disjuncts) {
      if (!out.empty()) out += " | ";
      std::string ds;
      for (const auto& a : d.atoms) {
        if (!ds.empty()) ds += ", ";
        ds += a.relation + "(";
        for (size_t i = 0; i < a.args.size(); ++i) {
          if (i) ds += ",";
          ds += term_text(a.args[i]);
        }
        ds += ")";
      }
      out += ds;
    }
  } else {
    for (const auto& d : crpq_disjuncts) {
      if (!out.empty()) out += " | ";
      std::string ds;
      for (const auto& pa : d.path_atoms) {
        if (!ds.empty()) ds += ", ";
        ds += "path " + term_text(pa.src) + " " + term_text(pa.dst) + " : " +
              to_string(pa.regex);
      }
      out += ds;
    }
  }
  return out;
}

Query make_cq(std::vector<Atom> atoms) {
  Query q;
  q.kind = Query::Kind::CQ;
  CQ cq{std::move(atoms)};
  if (cq.atoms.empty()) throw std::invalid_argument("CQ with no atoms");
  canonicalize(cq);
  q.cq_disjuncts.push_back(std::move(cq));
  check_arities(q);
  return q;
}

Query make_ucq(std::vector<CQ> disjuncts) {
  if (disjuncts.empty()) throw std::invalid_argument("UCQ with no disjuncts");
  if (disjuncts.size() == 1) return make_cq(std::move(disjuncts[0].atoms));
  Query q;
  q.kind = Query::Kind::UCQ;
  for (auto& d : disjuncts) {
    if (d.atoms.empty()) throw std::invalid_argument("CQ with no atoms");
    canonicalize(d);
    q.cq_disjuncts.push_back(std::move(d));
  }
  check_arities(q);
  return q;
}

Query make_rpq(RegexPtr regex, std::string src, std::string dst) {
  Query q;
  q.kind = Query::Kind::RPQ;
  CRPQ d;
  d.path_atoms.push_back(
      PathAtom{std::move(regex), constant(std::move(src)),
               constant(std::move(dst))});
  q.crpq_disjuncts.push_back(std::move(d));
  return q;
}

Query make_crpq(std::vector<PathAtom> atoms) {
  if (atoms.empty()) throw std::invalid_argument("CRPQ with no path atoms");
  Query q;
  q.kind = atoms.size() == 1 ? Query::Kind::RPQ : Query::Kind::CRPQ;
  q.crpq_disjuncts.push_back(CRPQ{std::move(atoms)});
  return q;
}

Query make_ucrpq(std::vector<CRPQ> disjuncts) {
  if (disjuncts.empty())
    throw std::invalid_argument("UCRPQ with no disjuncts");
  if (disjuncts.size() == 1) return make_crpq(std::move(disjuncts[0].path_atoms));
  Query q;
  q.kind = Query::Kind::UCRPQ;
  q.crpq_disjuncts = std::move(disjuncts);
  return q;
}

namespace {

// Rename variables of the right conjunct apart from those of the left;
// the conjuncts are independent Boolean queries, so shared variable names
// must not be identified.
class VarRenamer {
 public:
  explicit VarRenamer(std::set<std::string> taken) : taken_(std::move(taken)) {}
  Term operator()(const Term& t) {
    if (!t.is_variable() || !taken_.count(t.name)) return t;
    auto it = map_.find(t.name);
    if (it == map_.end()) {
      std::string fresh;
      do {
        fresh = t.name + "_" + std::to_string(counter_++);
      } while (taken_.count(fresh));
      it = map_.emplace(t.name, fresh).first;
    }
    return variable(it->second);
  }

 private:
  std::set<std::string> taken_;
  std::map<std::string, std::string> map_;
  size_t counter_ = 0;
};

}  // namespace

Query conjoin(const Query& a, const Query& b) {
  if (a.is_cq_family() && b.is_cq_family() && a.cq_disjuncts.size() == 1 &&
      b.cq_disjuncts.size() == 1) {
    std::set<std::string> taken;
    for (const auto& atom : a.cq_disjuncts[0].atoms)
      for (const auto& t : atom.args)
        if (t.is_variable()) taken.insert(t.name);
    VarRenamer ren(std::move(taken));
    std::vector<Atom> atoms = a.cq_disjuncts[0].atoms;
    for (const auto& atom : b.cq_disjuncts[0].atoms) {
      Atom copy{atom.relation, {}};
      for (const auto& t : atom.args) copy.args.push_back(ren(t));
      atoms.push_back(std::move(copy));
    }
    return make_cq(std::move(atoms));
  }
  if (!a.is_cq_family() && !b.is_cq_family() &&
      a.crpq_disjuncts.size() == 1 && b.crpq_disjuncts.size() == 1) {
    std::set<std::string> taken;
    for (const auto& pa : a.crpq_disjuncts[0].path_atoms) {
      if (pa.src.is_variable()) taken.insert(pa.src.name);
      if (pa.dst.is_variable()) taken.insert(pa.dst.name);
    }
    VarRenamer ren(std::move(taken));
    std::vector<PathAtom> atoms = a.crpq_disjuncts[0].path_atoms;
    for (const auto& pa : b.crpq_disjuncts[0].path_atoms)
      atoms.push_back(PathAtom{pa.regex, ren(pa.src), ren(pa.dst)});
    return make_crpq(std::move(atoms));
  }
  throw std::invalid_argument(
      "conjunction supported only between single-disjunct queries of the "
      "same family");
}

/* Parser ================================================================== */

namespace {

class Cursor {
 public:
  explicit Cursor(const std::string& text) : text_(text) {}

  void skip_ws() {
    while (pos_ < text_.size() &&
           std::isspace(static_cast<unsigned char>(text_[pos_])))
      advance();
  }
  bool eof() {
    skip_ws();
    return pos_ >= text_.size();
  }
  char peek() {
    skip_ws();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }
  bool consume(char c) {
    if (peek() == c) {
      advance();
      return true;
    }
    return false;
  }
  void expect(char c, const char* what) {
    if (!consume(c)) fail(std::string("expected ") + what);
  }
  [[noreturn]] void fail(const std::string& msg) {
    throw ParseError(msg, line_, col_);
  }
  bool at_name() {
    char c = peek();
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
  }
  std::string name(const char* what) {
    skip_ws();
    size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) ||
            text_[pos_] == '_'))
      advance();
    if (pos_ == start) fail(std::string("expected ") + what);
    return text_.substr(start, pos_ - start);
  }
  // lookahead for a keyword followed by non-name char
  bool peek_keyword(const std::string& kw) {
    skip_ws();
    if (text_.compare(pos_, kw.size(), kw) != 0) return false;
    size_t after = pos_ + kw.size();
    if (after < text_.size() &&
        (std::isalnum(static_cast<unsigned char>(text_[after])) ||
         text_[after] == '_'))
      return false;
    return true;
  }

 private:
  void advance() {
    if (text_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }
  const std::string& text_;
  size_t pos_ = 0;
  size_t line_ = 1;
  size_t col_ = 1;
};

Term parse_term(Cursor& cur) {
  if (cur.consume('\'')) {
    std::string name = cur.name("constant name");
    if (name.rfind(kFreshPrefix, 0) == 0)
      cur.fail("constant '" + name + "' uses the reserved prefix");
    cur.expect('\'', "closing quote");
    return constant(name);
  }
  return variable(cur.name("term"));
}

RegexPtr parse_regex_alt(Cursor& cur);

RegexPtr parse_regex_base(Cursor& cur) {
  if (cur.consume('(')) {
    RegexPtr r = parse_regex_alt(cur);
    cur.expect(')', "')'");
    return r;
  }
  if (cur.peek_keyword("eps")) {
    cur.name("eps");
    return regex_epsilon();
  }
  return regex_symbol(cur.name("regex symbol"));
}

RegexPtr parse_regex_rep(Cursor& cur) {
  RegexPtr r = parse_regex_base(cur);
  while (cur.consume('*')) r = regex_star(r);
  return r;
}

RegexPtr parse_regex_cat(Cursor& cur) {
  std::vector<RegexPtr> parts;
  parts.push_back(parse_regex_rep(cur));
  while (cur.at_name() || cur.peek() == '(') parts.push_back(parse_regex_rep(cur));
  return regex_concat(std::move(parts));
}

RegexPtr parse_regex_alt(Cursor& cur) {
  std::vector<RegexPtr> parts;
  parts.push_back(parse_regex_cat(cur));
  while (cur.consume('|')) parts.push_back(parse_regex_cat(cur));
  return regex_alt(std::move(parts));
}

struct RawDisjunct {
  std::vector<Atom> atoms;
  std::vector<PathAtom> path_atoms;
};

RawDisjunct parse_disjunct(Cursor& cur) {
  RawDisjunct d;
  for (;;) {
    if (cur.peek_keyword("path")) {
      cur.name("path");
      Term src = parse_term(cur);
      Term dst = parse_term(cur);
      cur.expect(':', "':' before regex");
      // The regex extends until the next top-level ',' or end of disjunct;
      // '|' after ':' is regex alternation.
      RegexPtr regex = parse_regex_alt(cur);
      d.path_atoms.push_back(PathAtom{regex, src, dst});
    } else {
      Atom a;
      a.relation = cur.name("relation name");
      cur.expect('(', "'('");
      for (;;) {
        a.args.push_back(parse_term(cur));
        if (!cur.consume(',')) break;
      }
      cur.expect(')', "')'");
      d.atoms.push_back(std::move(a));
    }
    if (!cur.consume(',')) break;
  }
  return d;
}

}  // namespace

Query parse_query(const std::string& text) {
  Cursor cur(text);
  std::vector<RawDisjunct> raw;
  raw.push_back(parse_disjunct(cur));
  while (cur.consume('|')) raw.push_back(parse_disjunct(cur));
  if (!cur.eof()) cur.fail("trailing input");

  bool path_family = false;
  for (const auto& d : raw)
    if (!d.path_atoms.empty()) path_family = true;

  try {
    if (!path_family) {
      std::vector<CQ> disjuncts;
      for (auto& d : raw) disjuncts.push_back(CQ{std::move(d.atoms)});
      return make_ucq(std::move(disjuncts));
    }

    std::vector<CRPQ> disjuncts;
    for (auto& d : raw) {
      CRPQ c;
      c.path_atoms = std::move(d.path_atoms);
      for (const auto& a : d.atoms) {
        if (a.args.size() != 2)
          throw std::invalid_argument(
              "only binary atoms can be mixed with path atoms: " +
              to_string(a));
        c.path_atoms.push_back(
            PathAtom{regex_symbol(a.relation), a.args[0], a.args[1]});
      }
      disjuncts.push_back(std::move(c));
    }
    return make_ucrpq(std::move(disjuncts));
  } catch (const ParseError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    cur.fail(e.what());
  }
}

/* Evaluation ============================================================== */

namespace {

struct Graph {
  // relation -> (source -> targets)
  std::map<std::string, std::map<std::string, std::vector<std::string>>> adj;

  explicit Graph(const FactSet& facts) {
    for (const auto& f : facts)
      if (f.args.size() == 2) adj[f.relation][f.args[0]].push_back(f.args[1]);
  }
};

bool rpq_reaches(const Graph& g, const Nfa& nfa, const std::string& from,
                 const std::string& to) {
  std::set<std::pair<std::string, int>> visited;
  std::deque<std::pair<std::string, int>> todo;
  for (int s : eps_closure(nfa, {nfa.start})) {
    if (s == nfa.accept && from == to) return true;
    if (visited.emplace(from, s).second) todo.emplace_back(from, s);
  }
  while (!todo.empty()) {
    auto [node, state] = todo.front();
    todo.pop_front();
    for (const auto& [sym, t] : nfa.sym[state]) {
      auto rel = g.adj.find(sym);
      if (rel == g.adj.end()) continue;
      auto outs = rel->second.find(node);
      if (outs == rel->second.end()) continue;
      for (const auto& next : outs->second) {
        for (int u : eps_closure(nfa, {t})) {
          if (u == nfa.accept && next == to) return true;
          if (visited.emplace(next, u).second) todo.emplace_back(next, u);
        }
      }
    }
  }
  return false;
}

bool eval_crpq(const CRPQ& d, const Graph& g, const FactSet& facts) {
  // Collect variables and candidate constants.
  std::set<std::string> vars;
  ConstantSet consts = constants_of(facts);
  for (const auto& pa : d.path_atoms) {
    if (pa.src.is_variable()) vars.insert(pa.src.name);
    if (pa.dst.is_variable()) vars.insert(pa.dst.name);
    if (pa.src.is_constant()) consts.insert(pa.src.name);
    if (pa.dst.is_constant()) consts.insert(pa.dst.name);
  }
  std::vector<std::string> var_list(vars.begin(), vars.end());
  std::vector<std::string> cand(consts.begin(), consts.end());
  if (cand.empty()) cand.push_back("__dummy");
  std::map<std::string, std::string> binding;
  std::map<std::string, Nfa> nfas;
  for (const auto& pa : d.path_atoms) {
    std::string key = to_string(pa.regex);
    if (!nfas.count(key)) nfas.emplace(key, compile(pa.regex));
  }
  auto resolve = [&](const Term& t) -> const std::string& {
    return t.is_constant() ? t.name : binding.at(t.name);
  };
  std::function<bool(size_t)> assign = [&](size_t vi) -> bool {
    if (vi == var_list.size()) {
      for (const auto& pa : d.path_atoms) {
        const Nfa& nfa = nfas.at(to_string(pa.regex));
        if (!rpq_reaches(g, nfa, resolve(pa.src), resolve(pa.dst)))
          return false;
      }
      return true;
    }
    for (const auto& c : cand) {
      binding[var_list[vi]] = c;
      if (assign(vi + 1)) return true;
    }
    binding.erase(var_list[vi]);
    return false;
  };
  return assign(0);
}

}  // namespace

bool evaluate(const Query& q, const FactSet& facts) {
  if (q.is_cq_family()) {
    for (const auto& d : q.cq_disjuncts) {
      ConstantSet c = constants_of(d.atom_set());
      if (find_c_homomorphism(d.atom_set(), facts, c)) return true;
    }
    return false;
  }
  Graph g(facts);
  for (const auto& d : q.crpq_disjuncts)
    if (eval_crpq(d, g, facts)) return true;
  return false;
}

/* Minimal supports ======================================================== */

bool is_minimal_support(const Query& q, const FactSet& s) {
  if (!evaluate(q, s)) return false;
  for (const auto& f : s) {
    FactSet smaller = s;
    smaller.erase(f);
    if (evaluate(q, smaller)) return false;
  }
  return true;
}

std::vector<FactSet> minimal_supports_in(const Query& q, const FactSet& db) {
  std::vector<Fact> facts(db.begin(), db.end());
  size_t n = facts.size();
  if (n > 26)
    throw std::length_error("minimal_supports_in: database too large (" +
                            std::to_string(n) + " facts)");
  if (evaluate(q, {})) return {FactSet{}};

  size_t cap = n;
  if (q.is_cq_family()) {
    size_t m = 0;
    for (const auto& d : q.cq_disjuncts) m = std::max(m, d.atoms.size());
    cap = std::min(cap, m);
  }

  std::vector<uint64_t> minimal_masks;
  std::vector<FactSet> out;
  for (size_t size = 1; size <= cap; ++size) {
    std::vector<bool> select(n, false);
    std::fill(select.begin(), select.begin() + size, true);
    do {
      uint64_t mask = 0;
      for (size_t i = 0; i < n; ++i)
        if (select[i]) mask |= 1ull << i;
      bool superset = false;
      for (uint64_t m : minimal_masks)
        if ((m & mask) == m) {
          superset = true;
          break;
        }
      if (superset) continue;
      FactSet s;
      for (size_t i = 0; i < n; ++i)
        if (select[i]) s.insert(facts[i]);
      if (evaluate(q, s)) {
        minimal_masks.push_back(mask);
        out.push_back(std::move(s));
      }
    } while (std::prev_permutation(select.begin(), select.end()));
  }
  return out;
}

/* Canonical supports and templates ======================================== */

size_t default_word_bound(const Query& q) {
  size_t symbols = 0;
  for (const auto& d : q.crpq_disjuncts)
    for (const auto& pa : d.path_atoms)
      symbols = std::max(symbols, regex_symbols(pa.regex).size());
  return std::max<size_t>(2 * symbols, 4);
}

namespace {

FactSet instantiate_atoms(const std::vector<Atom>& atoms, FreshGen& gen,
                          std::map<std::string, std::string>& var_map) {
  FactSet out;
  for (const auto& a : atoms) {
    Fact f;
    f.relation = a.relation;
    for (const auto& t : a.args) {
      if (t.is_constant()) {
        f.args.push_back(t.name);
      } else {
        auto [it, inserted] = var_map.emplace(t.name, "");
        if (inserted) it->second = gen.next();
        f.args.push_back(it->second);
      }
    }
    out.insert(f);
  }
  return out;
}

// Core of a CQ disjunct: repeatedly fold via proper C-endomorphisms.
std::vector<Atom> cq_core(std::vector<Atom> atoms, const ConstantSet& c) {
  for (;;) {
    std::sort(atoms.begin(), atoms.end());
    atoms.erase(std::unique(atoms.begin(), atoms.end()), atoms.end());
    // Freeze: variables become marker constants so they can be hom targets.
    std::map<std::string, std::string> var_map;
    FreshGen gen(c);
    FactSet frozen =
        instantiate_atoms(atoms, gen, var_map);
    std::map<std::string, Term> unfreeze;
    for (const auto& [v, name] : var_map) unfreeze.emplace(name, variable(v));

    // Search for a C-endomorphism with a strictly smaller image.
    AtomSet source(atoms.begin(), atoms.end());
    bool folded = false;
    // Enumerate all homomorphisms; accept the first one shrinking the image.
    std::vector<Atom> atom_list(source.begin(), source.end());
    std::function<bool(size_t, Homomorphism&)> go =
        [&](size_t idx, Homomorphism& h) -> bool {
      if (idx == atom_list.size()) {
        std::set<Atom> image;
        for (const auto& a : atom_list) {
          Atom ia;
          ia.relation = a.relation;
          for (const auto& t : a.args) {
            if (t.is_constant() && c.count(t.name)) {
              ia.args.push_back(t);
              continue;
            }
            const std::string& target = h.at(t);
            auto uf = unfreeze.find(target);
            ia.args.push_back(uf == unfreeze.end() ? constant(target)
                                                   : uf->second);
          }
          image.insert(ia);
        }
        if (image.size() < atom_list.size()) {
          atoms.assign(image.begin(), image.end());
          return true;
        }
        return false;
      }
      const Atom& a = atom_list[idx];
      for (const auto& f : frozen) {
        if (f.relation != a.relation || f.args.size() != a.args.size())
          continue;
        std::vector<Term> added;
        bool ok = true;
        for (size_t i = 0; i < a.args.size(); ++i) {
          const Term& t = a.args[i];
          if (t.is_constant() && c.count(t.name)) {
            if (t.name != f.args[i]) {
              ok = false;
              break;
            }
            continue;
          }
          auto it = h.find(t);
          if (it != h.end()) {
            if (it->second != f.args[i]) {
              ok = false;
              break;
            }
          } else {
            h.emplace(t, f.args[i]);
            added.push_back(t);
          }
        }
        if (ok && go(idx + 1, h)) return true;
        for (const auto& t : added) h.erase(t);
      }
      return false;
    };
    Homomorphism h;
    folded = go(0, h);
    if (!folded) return atoms;
  }
}

// Instantiations of one CRPQ disjunct: one support per combination of words
// (one word per path atom, lengths <= bound).
std::vector<FactSet> crpq_instantiations(const CRPQ& d, size_t bound,
                                         const ConstantSet& qconsts,
                                         size_t combo_cap = 4096) {
  std::vector<std::vector<Word>> word_choices;
  for (const auto& pa : d.path_atoms)
    word_choices.push_back(regex_words_up_to(pa.regex, bound));

  std::vector<FactSet> out;
  std::vector<size_t> idx(d.path_atoms.size(), 0);
  auto build_one = [&]() -> std::optional<FactSet> {
    FreshGen gen(qconsts);
    std::map<std::string, std::string> var_map;
    FactSet facts;
    auto value_of = [&](const Term& t) -> std::string {
      if (t.is_constant()) return t.name;
      auto [it, inserted] = var_map.emplace(t.name, "");
      if (inserted) it->second = gen.next();
      return it->second;
    };
    for (size_t ai = 0; ai < d.path_atoms.size(); ++ai) {
      const PathAtom& pa = d.path_atoms[ai];
      const Word& w = word_choices[ai][idx[ai]];
      if (w.empty()) {
        // epsilon: endpoints must coincide
        std::string s = value_of(pa.src);
        if (pa.dst.is_variable() && !var_map.count(pa.dst.name)) {
          var_map[pa.dst.name] = s;
        } else if (value_of(pa.dst) != s) {
          return std::nullopt;
        }
        continue;
      }
      std::string cur = value_of(pa.src);
      for (size_t wi = 0; wi < w.size(); ++wi) {
        std::string next =
            (wi + 1 == w.size()) ? value_of(pa.dst) : gen.next();
        facts.insert(Fact{w[wi], {cur, next}});
        cur = next;
      }
    }
    return facts;
  };

  size_t combos = 1;
  for (const auto& wc : word_choices) {
    if (wc.empty()) return {};
    combos *= wc.size();
    if (combos > combo_cap) break;
  }
  size_t produced = 0;
  for (;;) {
    if (auto s = build_one()) out.push_back(std::move(*s));
    if (++produced >= combo_cap) break;
    size_t k = 0;
    while (k < idx.size() && ++idx[k] == word_choices[k].size()) {
      idx[k] = 0;
      ++k;
    }
    if (k == idx.size()) break;
  }
  return out;
}

// C-hom-equivalence of two fact sets (fixing C).
bool c_hom_equivalent(const FactSet& a, const FactSet& b,
                      const ConstantSet& c) {
  return find_c_homomorphism(as_atoms(a), b, c).has_value() &&
         find_c_homomorphism(as_atoms(b), a, c).has_value();
}

}  // namespace

std::vector<FactSet> support_templates(const Query& q, size_t length_bound) {
  if (length_bound == 0) length_bound = default_word_bound(q);
  ConstantSet c = q.constants();
  std::vector<FactSet> out;
  for (const auto& d : q.cq_disjuncts) {
    FreshGen gen(c);
    std::map<std::string, std::string> var_map;
    out.push_back(instantiate_atoms(d.atoms, gen, var_map));
  }
  for (const auto& d : q.crpq_disjuncts) {
    auto insts = crpq_instantiations(d, length_bound, c);
    out.insert(out.end(), insts.begin(), insts.end());
  }
  return out;
}

std::vector<CanonicalSupport> canonical_supports(const Query& q,
                                                 size_t length_bound) {
  if (length_bound == 0) length_bound = default_word_bound(q);
  ConstantSet c = q.constants();
  std::vector<CanonicalSupport> out;
  auto keep_if_new = [&](FactSet s, std::string provenance) {
    if (!is_minimal_support(q, s)) return;
    for (const auto& prev : out)
      if (c_hom_equivalent(prev.facts, s, c)) return;
    out.push_back(CanonicalSupport{std::move(s), std::move(provenance)});
  };

  for (size_t di = 0; di < q.cq_disjuncts.size(); ++di) {
    std::vector<Atom> core = cq_core(q.cq_disjuncts[di].atoms, c);
    FreshGen gen(c);
    std::map<std::string, std::string> var_map;
    keep_if_new(instantiate_atoms(core, gen, var_map),
                "disjunct-" + std::to_string(di) + "-core");
  }
  for (size_t di = 0; di < q.crpq_disjuncts.size(); ++di) {
    auto insts = crpq_instantiations(q.crpq_disjuncts[di], length_bound, c);
    for (size_t wi = 0; wi < insts.size(); ++wi)
      keep_if_new(insts[wi], "disjunct-" + std::to_string(di) + "-path-" +
                                 std::to_string(wi));
  }
  return out;
}

bool is_relevant_fact(const Query& q, const Fact& alpha, size_t bound) {
  if (bound == 0) bound = default_word_bound(q);
  ConstantSet c = q.constants();
  for (const auto& tmpl : support_templates(q, bound)) {
    bool relation_present = false;
    for (const auto& f : tmpl)
      if (f.relation == alpha.relation && f.args.size() == alpha.args.size())
        relation_present = true;
    if (!relation_present) continue;

    // Enumerate images of the template's non-C constants into a pool of
    // alpha's constants, C, and enough fresh names; every minimal support
    // containing alpha is C-isomorphic to such an image.
    std::vector<std::string> movable;
    for (const auto& name : constants_of(tmpl))
      if (!c.count(name)) movable.push_back(name);
    ConstantSet pool_set(alpha.args.begin(), alpha.args.end());
    pool_set.insert(c.begin(), c.end());
    FreshGen gen(pool_set);
    for (size_t i = 0; i < movable.size(); ++i) pool_set.insert(gen.next());
    std::vector<std::string> pool(pool_set.begin(), pool_set.end());

    std::map<std::string, std::string> image_map;
    std::function<bool(size_t)> go = [&](size_t mi) -> bool {
      if (mi == movable.size()) {
        Renaming ren;
        ren.map = image_map;
        FactSet image = ren.apply(tmpl);
        return image.count(alpha) && is_minimal_support(q, image);
      }
      for (const auto& target : pool) {
        image_map[movable[mi]] = target;
        if (go(mi + 1)) return true;
      }
      image_map.erase(movable[mi]);
      return false;
    };
    if (go(0)) return true;
  }
  return false;
}

}  // namespace shapval
