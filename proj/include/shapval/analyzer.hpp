#ifndef SHAPVAL_ANALYZER_HPP
#define SHAPVAL_ANALYZER_HPP

#include <map>
#include <optional>
#include <string>
#include <utility>

#include "shapval/query.hpp"
#include "shapval/relational.hpp"

namespace shapval {

// No two atoms share a relation name.
bool is_self_join_free(const CQ& q);

// False iff some atom triple (a1,a2,a3) has
//   vars(a1) n vars(a2) not subseteq vars(a3)  and
//   vars(a3) n vars(a2) not subseteq vars(a1).
bool is_hierarchical(const CQ& q);

// The incidence graph stays connected after deleting the constant nodes.
bool is_variable_connected(const CQ& q);

// Every canonical support is connected (bound-limited for path queries).
bool is_connected_query(const Query& q, size_t bound = 0);

// A single-fact C-homomorphism from a minimal-support fact onto `leak_fact`
// that collapses a constant outside C into C.
struct LeakWitness {
  Fact leak_fact;
  Fact source_fact;
  std::map<std::string, std::string> mapping;
};

std::optional<LeakWitness> find_q_leak(const Query& q, const FactSet& s,
                                       size_t bound = 0);

// A size-1 support containing a constant outside C.
std::optional<FactSet> has_duplicable_singleton_support(const Query& q,
                                                        size_t bound = 0);

enum class IslandRule {
  ConnectedConstantFree,
  RpqLongWord,
  DuplicableSingleton,
};

struct IslandSupport {
  FactSet support;
  IslandRule rule;
};

// A minimal support certified to be an island by a sufficient condition;
// absence never claims non-existence. The support always has a constant
// outside C.
std::optional<IslandSupport> find_island_support(const Query& q,
                                                 size_t bound = 0);

// Splits a single-disjunct constant-free query into two subqueries over
// disjoint relation vocabularies. With `experimental`, also splits queries
// with constants whose variable-components have pairwise disjoint constant
// sets.
std::optional<std::pair<Query, Query>> decompose(const Query& q,
                                                 bool experimental = false);

enum class Verdict { InFP, SharpPHard, Unknown };

enum class Rule {
  HierarchicalSjfCq,
  NonHierarchicalSjfCq,
  RpqWordLength,
  ConnectedUcqUnsafe,
  CcDisjoint,
  DuplicableSingleton,
  NoneApplicable,
};

struct ClassificationVerdict {
  Verdict verdict;
  Rule rule;
  std::string witness;
};

// Decision rules in fixed priority:
//   1. self-join-free CQ: hierarchical => InFP, otherwise SharpPHard;
//   2. RPQ: a word of length >= 3 => SharpPHard, otherwise InFP;
//   3. constant-free non-hierarchical CQ => SharpPHard;
//   4. otherwise Unknown.
ClassificationVerdict classify(const Query& q);

std::string to_string(Verdict v);
std::string to_string(Rule r);
std::string to_string(IslandRule r);

}  // namespace shapval

#endif
