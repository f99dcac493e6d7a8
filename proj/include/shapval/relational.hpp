#ifndef SHAPVAL_RELATIONAL_HPP
#define SHAPVAL_RELATIONAL_HPP

#include <compare>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "shapval/rational.hpp"

namespace shapval {

// Reserved prefix for generated constants; user input may not use it.
inline constexpr const char* kFreshPrefix = "__f";

struct Term {
  enum class Kind { Constant, Variable };
  Kind kind;
  std::string name;

  bool is_constant() const { return kind == Kind::Constant; }
  bool is_variable() const { return kind == Kind::Variable; }
  auto operator<=>(const Term&) const = default;
};

inline Term constant(std::string name) {
  return Term{Term::Kind::Constant, std::move(name)};
}
inline Term variable(std::string name) {
  return Term{Term::Kind::Variable, std::move(name)};
}

struct Atom {
  std::string relation;
  std::vector<Term> args;
  auto operator<=>(const Atom&) const = default;
};

// An atom whose arguments are all constants.
struct Fact {
  std::string relation;
  std::vector<std::string> args;
  auto operator<=>(const Fact&) const = default;

  Atom as_atom() const;
};

using FactSet = std::set<Fact>;
using AtomSet = std::set<Atom>;
using ConstantSet = std::set<std::string>;

std::string to_string(const Fact& f);
std::string to_string(const Atom& a);

ConstantSet constants_of(const FactSet& facts);
ConstantSet constants_of(const AtomSet& atoms);
AtomSet as_atoms(const FactSet& facts);
FactSet set_union(const FactSet& a, const FactSet& b);
FactSet set_minus(const FactSet& a, const FactSet& b);
FactSet set_intersect(const FactSet& a, const FactSet& b);

// D = (Dn, Dx): endogenous facts are the players of the query game,
// exogenous facts are assumed present.
struct PartitionedDatabase {
  FactSet endo;
  FactSet exo;

  FactSet all() const { return set_union(endo, exo); }
  auto operator<=>(const PartitionedDatabase&) const = default;
};

// Fact -> probability in (0,1]. The derived partition puts exactly the
// probability-1 facts in the exogenous part.
struct ProbabilisticDatabase {
  std::map<Fact, Rational> facts;

  PartitionedDatabase partition() const;
};

// Deterministic source of constants with the reserved prefix. Skips any
// name present in the avoid set at construction time.
class FreshGen {
 public:
  FreshGen() = default;
  explicit FreshGen(ConstantSet avoid) : avoid_(std::move(avoid)) {}

  std::string next();
  void avoid(const ConstantSet& more);

 private:
  ConstantSet avoid_;
  unsigned long counter_ = 0;
};

using Homomorphism = std::map<Term, std::string>;

// First C-homomorphism from `source` into `target` in canonical backtracking
// order, or nullopt. Constants in `fixed` must map to themselves; all other
// terms (variables and non-fixed constants) may map to any constant of the
// target.
std::optional<Homomorphism> find_c_homomorphism(const AtomSet& source,
                                                const FactSet& target,
                                                const ConstantSet& fixed);

// Connectivity of the incidence graph over S and its terms. The empty set
// and singletons are connected.
bool is_connected_set(const AtomSet& atoms);
bool is_connected_set(const FactSet& facts);

// C-isomorphic copy of D (C = keep): every constant outside `keep` is
// replaced injectively by a fresh constant avoiding `avoid`, `keep` and
// const(D). Returns the copy and the renaming applied.
struct Renaming {
  std::map<std::string, std::string> map;
  std::string apply(const std::string& c) const;
  Fact apply(const Fact& f) const;
  FactSet apply(const FactSet& facts) const;
};

Renaming renaming_avoiding(const FactSet& db, const ConstantSet& keep,
                           const ConstantSet& avoid);
FactSet rename_avoiding(const FactSet& db, const ConstantSet& keep,
                        const ConstantSet& avoid);

// Text format, one fact per line:
//   R(a,b)          endogenous
//   !R(a,b)         exogenous
//   R(a,b) @ 1/2    probabilistic
// Lines starting with '#' are comments.
struct ParsedDatabase {
  PartitionedDatabase partitioned;
  ProbabilisticDatabase probabilistic;
  bool has_probabilities = false;
};

ParsedDatabase parse_database(std::istream& in);
ParsedDatabase parse_database_text(const std::string& text);
std::string format_database(const PartitionedDatabase& db);

}  // namespace shapval

#endif
