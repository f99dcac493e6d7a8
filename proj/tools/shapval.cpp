// shapval: exact Shapley values, model counts and probabilistic evaluation
// for Boolean queries over partitioned databases.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "shapval/analyzer.hpp"
#include "shapval/counting.hpp"
#include "shapval/query.hpp"
#include "shapval/reduction.hpp"
#include "shapval/relational.hpp"
#include "shapval/shapley.hpp"

using nlohmann::json;
using namespace shapval;

namespace {

struct Common {
  std::string db_path;
  std::string query_text;
  std::string query_path;
  bool as_json = false;
  bool approx = false;
};

void add_common(CLI::App* cmd, Common& c, bool need_db = true) {
  if (need_db)
    cmd->add_option("--db", c.db_path, "database file ('-' for stdin)")
        ->required();
  auto* q = cmd->add_option("--query", c.query_text, "query text");
  cmd->add_option("--query-file", c.query_path, "file containing the query")
      ->excludes(q);
  cmd->add_flag("--json", c.as_json, "emit a JSON report");
  cmd->add_flag("--approx", c.approx,
                "additionally show a decimal approximation");
}

ParsedDatabase load_db(const std::string& path) {
  if (path == "-") return parse_database(std::cin);
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open database file: " + path);
  return parse_database(in);
}

Query load_query(const Common& c) {
  if (!c.query_path.empty()) {
    std::ifstream in(c.query_path);
    if (!in)
      throw std::invalid_argument("cannot open query file: " + c.query_path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_query(ss.str());
  }
  if (c.query_text.empty()) throw std::invalid_argument("missing --query");
  return parse_query(c.query_text);
}

Fact parse_fact(const std::string& text) {
  ParsedDatabase pd = parse_database_text(text);
  if (pd.partitioned.endo.size() != 1 || !pd.partitioned.exo.empty())
    throw std::invalid_argument("expected a single fact, got: " + text);
  return *pd.partitioned.endo.begin();
}

json rational_json(const Rational& r) {
  return json{{"num", r.get_num().get_str()}, {"den", r.get_den().get_str()}};
}

std::string approx_suffix(const Rational& r, bool approx) {
  if (!approx) return "";
  std::ostringstream os;
  os.precision(10);
  os << " ~= " << r.get_d();
  return os.str();
}

std::string render(const Rational& r, bool approx) {
  return to_string(r) + approx_suffix(r, approx);
}

std::string vector_text(const CountVector& v) {
  std::string out = "[";
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += v[i].get_str();
  }
  return out + "]";
}

json vector_json(const CountVector& v) {
  json arr = json::array();
  for (const auto& x : v) arr.push_back(x.get_str());
  return arr;
}

int run_shapley(const Common& c, const std::string& fact_text, bool all) {
  ParsedDatabase pd = load_db(c.db_path);
  QueryGame g{pd.partitioned, load_query(c)};
  Budget budget;
  if (all) {
    auto values = shapley_all(g, budget);
    if (c.as_json) {
      json arr = json::array();
      for (const auto& [f, v] : values)
        arr.push_back({{"fact", to_string(f)}, {"shapley", rational_json(v)}});
      std::cout << json{{"values", arr}}.dump(2) << "\n";
    } else {
      for (const auto& [f, v] : values)
        std::cout << to_string(f) << " = " << render(v, c.approx) << "\n";
    }
    return 0;
  }
  Fact alpha = parse_fact(fact_text);
  Rational v = shapley_subsets(g, alpha, budget);
  if (c.as_json)
    std::cout << json{{"fact", to_string(alpha)},
                      {"shapley", rational_json(v)}}
                     .dump(2)
              << "\n";
  else
    std::cout << render(v, c.approx) << "\n";
  return 0;
}

int run_max_shapley(const Common& c) {
  ParsedDatabase pd = load_db(c.db_path);
  QueryGame g{pd.partitioned, load_query(c)};
  Budget budget;
  auto [f, v] = max_shapley(g, budget);
  if (c.as_json)
    std::cout
        << json{{"fact", to_string(f)}, {"shapley", rational_json(v)}}.dump(2)
        << "\n";
  else
    std::cout << to_string(f) << " = " << render(v, c.approx) << "\n";
  return 0;
}

int run_shapley_const(const Common& c, const std::string& constant_name,
                      bool all, const std::vector<std::string>& exo_consts) {
  ParsedDatabase pd = load_db(c.db_path);
  Query q = load_query(c);
  FactSet d = pd.partitioned.all();
  ConstantPartition cp;
  cp.exo_consts = ConstantSet(exo_consts.begin(), exo_consts.end());
  for (const auto& name : constants_of(d))
    if (!cp.exo_consts.count(name)) cp.endo_consts.insert(name);
  Budget budget;
  std::vector<std::string> targets;
  if (all)
    targets.assign(cp.endo_consts.begin(), cp.endo_consts.end());
  else if (cp.endo_consts.count(constant_name))
    targets.push_back(constant_name);
  else
    throw std::invalid_argument("constant is not a player: " + constant_name);

  json arr = json::array();
  for (const auto& name : targets) {
    Rational v = shapley_constants(q, d, cp, name, budget);
    if (c.as_json)
      arr.push_back({{"constant", name}, {"shapley", rational_json(v)}});
    else if (all)
      std::cout << name << " = " << render(v, c.approx) << "\n";
    else
      std::cout << render(v, c.approx) << "\n";
  }
  if (c.as_json) std::cout << json{{"values", arr}}.dump(2) << "\n";
  return 0;
}

int run_count(const Common& c, const std::string& cmd, bool vector_out,
              long size, bool size_set) {
  ParsedDatabase pd = load_db(c.db_path);
  Query q = load_query(c);
  PartitionedDatabase db = pd.partitioned;
  bool fixed_size = cmd == "fmc" || cmd == "fgmc";
  if ((cmd == "mc" || cmd == "fmc") && !db.exo.empty())
    throw std::invalid_argument(
        cmd + " requires a database without exogenous facts; use g" + cmd);
  Budget budget;
  if (!fixed_size) {
    Integer total = gmc(q, db, budget);
    if (c.as_json)
      std::cout << json{{"count", total.get_str()}}.dump(2) << "\n";
    else
      std::cout << total.get_str() << "\n";
    return 0;
  }
  if (vector_out == size_set)
    throw std::invalid_argument("specify exactly one of --vector / --size");
  if (vector_out) {
    CountVector v = fgmc_vector(q, db, budget);
    if (c.as_json)
      std::cout << json{{"vector", vector_json(v)}}.dump(2) << "\n";
    else
      std::cout << vector_text(v) << "\n";
  } else {
    if (size < 0) throw std::invalid_argument("--size must be non-negative");
    Integer x = fgmc(q, db, static_cast<size_t>(size), budget);
    if (c.as_json)
      std::cout << json{{"count", x.get_str()}}.dump(2) << "\n";
    else
      std::cout << x.get_str() << "\n";
  }
  return 0;
}

int run_pqe(const Common& c, const std::string& p_text) {
  ParsedDatabase pd = load_db(c.db_path);
  Query q = load_query(c);
  ProbabilisticDatabase prob;
  if (!p_text.empty()) {
    Rational p = parse_rational(p_text);
    if (p <= 0 || p > 1)
      throw std::invalid_argument("--p must lie in (0, 1]");
    for (const auto& f : pd.partitioned.endo) prob.facts[f] = p;
    for (const auto& f : pd.partitioned.exo) prob.facts[f] = 1;
  } else if (pd.has_probabilities) {
    prob = pd.probabilistic;
  } else {
    throw std::invalid_argument(
        "pqe needs --p or a database with probability annotations");
  }
  Budget budget;
  Rational pr = pqe(q, prob, budget);
  if (c.as_json)
    std::cout << json{{"probability", rational_json(pr)}}.dump(2) << "\n";
  else
    std::cout << render(pr, c.approx) << "\n";
  return 0;
}

int run_classify(const Common& c) {
  Query q = load_query(c);
  ClassificationVerdict v = classify(q);
  if (c.as_json) {
    std::cout << json{{"verdict", to_string(v.verdict)},
                      {"rule", to_string(v.rule)},
                      {"witness", v.witness}}
                     .dump(2)
              << "\n";
  } else {
    std::cout << to_string(v.verdict) << " (" << to_string(v.rule) << ")";
    if (!v.witness.empty()) std::cout << " — " << v.witness;
    std::cout << "\n";
  }
  return 0;
}

int run_reduce(const Common& c, const std::string& mode_name,
               const std::string& qprime_text, bool endogenous_only,
               bool experimental, bool trace) {
  ParsedDatabase pd = load_db(c.db_path);
  Query q = load_query(c);
  ReductionMode mode;
  if (mode_name == "pseudo-connected")
    mode = ReductionMode::PseudoConnected;
  else if (mode_name == "leak")
    mode = ReductionMode::Leak;
  else if (mode_name == "decomposable")
    mode = ReductionMode::Decomposable;
  else
    throw std::invalid_argument("unknown reduction mode: " + mode_name);

  ReductionOptions opts;
  if (!qprime_text.empty()) opts.qprime = parse_query(qprime_text);
  opts.endogenous_only = endogenous_only;
  opts.experimental_decompose = experimental;
  if (trace) opts.trace = &std::cerr;

  ShapleyOracle oracle = [](const Query& oq, const PartitionedDatabase& odb,
                            const Fact& alpha) {
    Budget b;
    return shapley_subsets(QueryGame{odb, oq}, alpha, b);
  };
  CountVector v = fgmc_via_shapley(q, mode, pd.partitioned, oracle, opts);
  if (c.as_json)
    std::cout << json{{"mode", mode_name}, {"vector", vector_json(v)}}.dump(2)
              << "\n";
  else
    std::cout << vector_text(v) << "\n";
  return 0;
}

int run_verify(const Common& c) {
  ParsedDatabase pd = load_db(c.db_path);
  Query q = load_query(c);
  PartitionedDatabase db = pd.partitioned;
  struct Check {
    std::string name;
    std::function<bool()> run;
  };
  std::vector<Check> checks;

  checks.push_back({"fgmc-sums-to-gmc", [&] {
                      Budget b;
                      Integer total = 0;
                      for (const auto& x : fgmc_vector(q, db, b)) total += x;
                      Budget b2;
                      return total == gmc(q, db, b2);
                    }});
  checks.push_back({"efficiency-axiom", [&] {
                      Budget b;
                      QueryGame g{db, q};
                      Rational sum = 0;
                      for (const auto& [f, v] : shapley_all(g, b)) sum += v;
                      return sum == wealth(g, g.db.endo);
                    }});
  checks.push_back({"subsets-equals-via-fgmc", [&] {
                      QueryGame g{db, q};
                      for (const auto& f : db.endo) {
                        Budget b1, b2;
                        Rational a = shapley_subsets(g, f, b1);
                        Rational bb = shapley_via_fgmc(
                            g, f, [&](const PartitionedDatabase& d) {
                              return fgmc_vector(q, d, b2);
                            });
                        if (a != bb) return false;
                      }
                      return true;
                    }});
  checks.push_back({"sppqe-matches-pqe-at-half", [&] {
                      if (db.endo.empty()) return true;
                      Budget b1, b2;
                      ProbabilisticDatabase prob;
                      Rational half = make_rational(1, 2);
                      for (const auto& f : db.endo) prob.facts[f] = half;
                      for (const auto& f : db.exo) prob.facts[f] = 1;
                      return sppqe_from_fgmc_vector(fgmc_vector(q, db, b1),
                                                    half) ==
                             pqe(q, prob, b2);
                    }});
  checks.push_back({"pqe-interpolation-roundtrip", [&] {
                      Budget b1, b2;
                      CountVector direct = fgmc_vector(q, db, b1);
                      CountVector via = fgmc_vector_from_pqe(
                          q, db, [&](const ProbabilisticDatabase& p) {
                            return pqe(q, p, b2);
                          });
                      return direct == via;
                    }});
  checks.push_back({"fmc-recursion", [&] {
                      Budget b1, b2;
                      return fgmc_via_fmc(q, db, b1) == fgmc_vector(q, db, b2);
                    }});

  json arr = json::array();
  int failures = 0;
  for (const auto& check : checks) {
    bool ok = check.run();
    if (!ok) ++failures;
    if (c.as_json)
      arr.push_back({{"name", check.name}, {"ok", ok}});
    else
      std::cout << (ok ? "ok:   " : "FAIL: ") << check.name << "\n";
    if (!ok && !c.as_json) break;
  }
  if (c.as_json) std::cout << json{{"checks", arr}}.dump(2) << "\n";
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"exact Shapley values and model counts for Boolean queries"};
  app.require_subcommand(1);

  Common c_sh, c_max, c_const, c_mc, c_gmc, c_fmc, c_fgmc, c_pqe, c_cls,
      c_red, c_ver;

  auto* sh = app.add_subcommand("shapley", "Shapley value of facts");
  add_common(sh, c_sh);
  std::string fact_text;
  bool sh_all = false;
  auto* fact_opt = sh->add_option("--fact", fact_text, "fact, e.g. R(a,b)");
  sh->add_flag("--all", sh_all, "every endogenous fact")->excludes(fact_opt);

  auto* mx = app.add_subcommand("max-shapley", "fact with maximum value");
  add_common(mx, c_max);

  auto* sc = app.add_subcommand("shapley-const", "Shapley value of constants");
  add_common(sc, c_const);
  std::string const_name;
  bool sc_all = false;
  std::vector<std::string> exo_consts;
  auto* const_opt = sc->add_option("--constant", const_name, "the constant");
  sc->add_flag("--all", sc_all, "every endogenous constant")
      ->excludes(const_opt);
  sc->add_option("--exo-const", exo_consts, "exogenous constant (repeatable)");

  CLI::App* count_cmds[4];
  Common* count_common[4] = {&c_mc, &c_gmc, &c_fmc, &c_fgmc};
  const char* count_names[4] = {"mc", "gmc", "fmc", "fgmc"};
  const char* count_help[4] = {"model count", "generalized model count",
                               "fixed-size model count",
                               "fixed-size generalized model count"};
  bool vector_out[4] = {};
  long sizes[4] = {};
  bool size_set[4] = {};
  for (int i = 0; i < 4; ++i) {
    count_cmds[i] = app.add_subcommand(count_names[i], count_help[i]);
    add_common(count_cmds[i], *count_common[i]);
    if (i >= 2) {
      count_cmds[i]->add_flag("--vector", vector_out[i],
                              "all sizes 0..|Dn| as a vector");
      count_cmds[i]
          ->add_option("--size", sizes[i], "support size k")
          ->each([&, i](const std::string&) { size_set[i] = true; });
    }
  }

  auto* pq = app.add_subcommand("pqe", "probability that the query holds");
  add_common(pq, c_pqe);
  std::string p_text;
  pq->add_option("--p", p_text, "uniform probability for endogenous facts");

  auto* cl = app.add_subcommand("classify", "complexity classification");
  add_common(cl, c_cls, /*need_db=*/false);

  auto* rd = app.add_subcommand(
      "reduce", "count vector through Shapley-value oracle calls");
  add_common(rd, c_red);
  std::string mode_name, qprime_text;
  bool endo_only = false, experimental = false, trace = false;
  rd->add_option("--mode", mode_name,
                 "pseudo-connected | leak | decomposable")
      ->required();
  rd->add_option("--qprime", qprime_text, "conjunct query for leak mode");
  rd->add_flag("--endogenous-only", endo_only,
               "require a gadget without exogenous facts");
  rd->add_flag("--experimental", experimental,
               "enable the experimental decomposition for constants");
  rd->add_flag("--trace", trace, "dump each gadget database to stderr");

  auto* vf = app.add_subcommand("verify", "run the invariant suites");
  add_common(vf, c_ver);

  CLI11_PARSE(app, argc, argv);

  try {
    if (sh->parsed()) {
      if (!sh_all && fact_text.empty())
        throw std::invalid_argument("need --fact or --all");
      return run_shapley(c_sh, fact_text, sh_all);
    }
    if (mx->parsed()) return run_max_shapley(c_max);
    if (sc->parsed()) {
      if (!sc_all && const_name.empty())
        throw std::invalid_argument("need --constant or --all");
      return run_shapley_const(c_const, const_name, sc_all, exo_consts);
    }
    for (int i = 0; i < 4; ++i)
      if (count_cmds[i]->parsed())
        return run_count(*count_common[i], count_names[i], vector_out[i],
                         sizes[i], size_set[i]);
    if (pq->parsed()) return run_pqe(c_pqe, p_text);
    if (cl->parsed()) return run_classify(c_cls);
    if (rd->parsed())
      return run_reduce(c_red, mode_name, qprime_text, endo_only, experimental,
                        trace);
    if (vf->parsed()) return run_verify(c_ver);
  } catch (const BudgetExceeded& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const HypothesisError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
