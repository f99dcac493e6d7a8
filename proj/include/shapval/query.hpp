#ifndef SHAPVAL_QUERY_HPP
#define SHAPVAL_QUERY_HPP

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "shapval/relational.hpp"

namespace shapval {

struct RegexNode;
using RegexPtr = std::shared_ptr<const RegexNode>;

// Regular expressions over binary relation names.
struct RegexNode {
  enum class Kind { Epsilon, Symbol, Concat, Alt, Star };
  Kind kind;
  std::string symbol;              // Kind::Symbol
  std::vector<RegexPtr> children;  // Concat / Alt / Star
};

RegexPtr regex_epsilon();
RegexPtr regex_symbol(std::string relation);
RegexPtr regex_concat(std::vector<RegexPtr> children);
RegexPtr regex_alt(std::vector<RegexPtr> children);
RegexPtr regex_star(RegexPtr child);
std::string to_string(const RegexPtr& r);

using Word = std::vector<std::string>;

// Word-language analysis via a Thompson automaton of the regex.
bool regex_accepts_epsilon(const RegexPtr& r);
std::vector<Word> regex_words_up_to(const RegexPtr& r, size_t max_len);
bool regex_has_word_of_length_at_least(const RegexPtr& r, size_t k);
std::vector<std::string> regex_symbols(const RegexPtr& r);

struct CQ {
  std::vector<Atom> atoms;  // canonical (sorted, deduplicated) order
  AtomSet atom_set() const { return AtomSet(atoms.begin(), atoms.end()); }
};

struct PathAtom {
  RegexPtr regex;
  Term src;
  Term dst;
};

struct CRPQ {
  std::vector<PathAtom> path_atoms;
};

struct Query {
  enum class Kind { CQ, UCQ, RPQ, CRPQ, UCRPQ };
  Kind kind;
  std::vector<CQ> cq_disjuncts;      // CQ / UCQ
  std::vector<CRPQ> crpq_disjuncts;  // RPQ / CRPQ / UCRPQ

  bool is_cq_family() const { return kind == Kind::CQ || kind == Kind::UCQ; }
  // The constant set C the query is C-hom-closed for.
  ConstantSet constants() const;
  std::string text() const;
};

Query make_cq(std::vector<Atom> atoms);
Query make_ucq(std::vector<CQ> disjuncts);
Query make_rpq(RegexPtr regex, std::string src, std::string dst);
Query make_crpq(std::vector<PathAtom> atoms);
Query make_ucrpq(std::vector<CRPQ> disjuncts);

// Conjunction of two queries (CQ with CQ, or CQ-free path queries with each
// other when both are single-disjunct). Used by the reduction engine.
Query conjoin(const Query& a, const Query& b);

struct ParseError : std::invalid_argument {
  ParseError(const std::string& msg, size_t line, size_t column)
      : std::invalid_argument("parse error at " + std::to_string(line) + ":" +
                              std::to_string(column) + ": " + msg),
        line(line),
        column(column) {}
  size_t line;
  size_t column;
};

// Grammar (see README): atom list `R(x,'a'), S(x,y)`; `|` between
// disjuncts; path atom `path <term> <term> : <regex>` whose regex extends to
// the next top-level ',' (so `|` after ':' is alternation); `eps`, `*`,
// `()`, juxtaposition for concatenation.
Query parse_query(const std::string& text);

// facts |= q. Monotone for all supported query kinds.
bool evaluate(const Query& q, const FactSet& facts);

// Exactly the inclusion-minimal S subseteq D with S |= q. Enumerates subsets
// by increasing size with monotonicity pruning; intended for small D.
std::vector<FactSet> minimal_supports_in(const Query& q, const FactSet& db);

size_t default_word_bound(const Query& q);

struct CanonicalSupport {
  FactSet facts;
  std::string provenance;
};

// Fresh-constant instantiations of the disjunct cores (CQ family) and of the
// language words up to length_bound (path atoms). Every returned set is a
// minimal support of q.
std::vector<CanonicalSupport> canonical_supports(const Query& q,
                                                 size_t length_bound = 0);

// True iff alpha appears in some minimal support of q. Exact for CQ/UCQ;
// word lengths limited by `bound` for path queries.
bool is_relevant_fact(const Query& q, const Fact& alpha, size_t bound = 0);

// Support templates: fresh-constant instantiations whose C-homomorphic
// images cover every minimal support of q (up to the word bound for path
// queries). Exposed for the analyzer.
std::vector<FactSet> support_templates(const Query& q, size_t length_bound);

bool is_minimal_support(const Query& q, const FactSet& s);

}  // namespace shapval

#endif
