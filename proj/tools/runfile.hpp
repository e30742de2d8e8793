#pragma once

#include <yaml-cpp/yaml.h>

#include <cstdlib>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "qnmlpt/error.hpp"

namespace qnmlpt::cli {

using Real = long double;

struct PotentialSection {
  std::string kind = "step";  // step | poschl_teller
  Real v0 = 100;
  Real b = 1;
  int tail_terms = 4;
};

struct ModeSection {
  std::vector<int> indices{1};  // step root index (from 1) or P-T j (from 0)
  int branch = 1;
};

struct PerturbationSection {
  std::string kind = "none";  // none | bump | pt-width
  Real x0 = Real(3) / 10;
  Real w = Real(1) / 10;
  std::optional<Real> mu;
};

struct DomainSection {
  std::optional<Real> a;  // outer radius of the half-line problems
  std::optional<Real> L;  // matching radius of tailed problems
};

struct SweepSection {
  std::string kind;  // bump-x0 | mu-scaling
  std::vector<Real> values;
  std::optional<Real> from, to;
  std::optional<int> count;
};

struct SolverSection {
  std::optional<Real> tol;
  bool subtract_asymptotics = true;
  Real subtract_threshold = 4;
  std::optional<int> order;  // 1 for pt-width, 2 otherwise
  bool seed_from_exact = true;
  std::optional<Real> series_fill_from;
  Real contour_angle = 60;
  int l_sweep_tail_terms = 10;  // tail order of the demo's L sweep
};

struct OutputSection {
  std::optional<std::string> csv;
  std::optional<std::string> json;
};

struct RunFile {
  std::string scenario;
  PotentialSection potential;
  ModeSection mode;
  PerturbationSection perturbation;
  DomainSection domain;
  SweepSection sweep;
  SolverSection solver;
  OutputSection output;
};

namespace detail {

inline std::string where(const YAML::Node& n) {
  const auto m = n.Mark();
  if (m.is_null()) return "";
  return " at line " + std::to_string(m.line + 1) + ", column " + std::to_string(m.column + 1);
}

[[noreturn]] inline void bad(const YAML::Node& n, const std::string& what) {
  fail(ErrorCode::parse_error, what + where(n));
}

inline void check_keys(const YAML::Node& map, const std::set<std::string>& allowed, const std::string& section) {
  if (!map.IsMap()) bad(map, "section '" + section + "' must be a mapping");
  for (const auto& kv : map) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) bad(kv.first, "unknown key '" + key + "' in " + section);
  }
}

inline Real real(const YAML::Node& n, const std::string& name) {
  if (!n.IsScalar()) bad(n, "'" + name + "' must be a number");
  const auto s = n.Scalar();
  char* end = nullptr;
  const Real v = std::strtold(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) bad(n, "'" + name + "' is not a number: '" + s + "'");
  return v;
}

inline int integer(const YAML::Node& n, const std::string& name) {
  if (!n.IsScalar()) bad(n, "'" + name + "' must be an integer");
  const auto s = n.Scalar();
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size()) bad(n, "'" + name + "' is not an integer: '" + s + "'");
  return static_cast<int>(v);
}

inline bool boolean(const YAML::Node& n, const std::string& name) {
  if (!n.IsScalar()) bad(n, "'" + name + "' must be true or false");
  const auto s = n.Scalar();
  if (s == "true" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "no" || s == "off") return false;
  bad(n, "'" + name + "' must be true or false");
}

inline std::string text(const YAML::Node& n, const std::string& name, const std::set<std::string>& choices = {}) {
  if (!n.IsScalar()) bad(n, "'" + name + "' must be a string");
  const auto s = n.Scalar();
  if (!choices.empty() && !choices.count(s)) {
    std::string opts;
    for (const auto& c : choices) opts += (opts.empty() ? "" : ", ") + c;
    bad(n, "'" + name + "' must be one of " + opts + " (got '" + s + "')");
  }
  return s;
}

inline Real positive(const YAML::Node& n, const std::string& name) {
  const Real v = real(n, name);
  if (!(v > 0)) bad(n, "'" + name + "' must be positive");
  return v;
}

}  // namespace detail

/// Parses a run file. Every section is optional; unknown keys and
/// non-positive tolerances are rejected with their position.
inline RunFile parse_runfile_text(const std::string& content) {
  using namespace detail;
  YAML::Node root;
  try {
    root = YAML::Load(content);
  } catch (const YAML::Exception& e) {
    fail(ErrorCode::parse_error, "malformed run file at line " + std::to_string(e.mark.line + 1) + ", column " +
                                     std::to_string(e.mark.column + 1) + ": " + e.msg);
  }
  RunFile rf;
  if (root.IsNull()) return rf;
  check_keys(root, {"scenario", "potential", "mode", "perturbation", "domain", "sweep", "solver", "output"}, "run file");
  if (auto n = root["scenario"]) rf.scenario = text(n, "scenario", {"solve", "perturb", "sweep", "demo"});
  if (auto p = root["potential"]) {
    check_keys(p, {"kind", "v0", "b", "tail_terms"}, "potential");
    if (auto n = p["kind"]) {
      rf.potential.kind = text(n, "kind", {"step", "poschl_teller", "poschl-teller"});
      if (rf.potential.kind == "poschl-teller") rf.potential.kind = "poschl_teller";
    }
    if (auto n = p["v0"]) rf.potential.v0 = real(n, "v0");
    if (auto n = p["b"]) rf.potential.b = positive(n, "b");
    if (auto n = p["tail_terms"]) {
      rf.potential.tail_terms = integer(n, "tail_terms");
      if (rf.potential.tail_terms < 1) bad(n, "'tail_terms' must be at least 1");
    }
  }
  if (auto m = root["mode"]) {
    check_keys(m, {"index", "indices", "branch"}, "mode");
    if (auto n = m["index"]) rf.mode.indices = {integer(n, "index")};
    if (auto n = m["indices"]) {
      if (!n.IsSequence() || n.size() == 0) bad(n, "'indices' must be a non-empty list");
      rf.mode.indices.clear();
      for (const auto& e : n) rf.mode.indices.push_back(integer(e, "indices"));
    }
    if (auto n = m["branch"]) rf.mode.branch = integer(n, "branch") >= 0 ? 1 : -1;
  }
  if (auto p = root["perturbation"]) {
    check_keys(p, {"kind", "x0", "w", "mu"}, "perturbation");
    if (auto n = p["kind"]) rf.perturbation.kind = text(n, "kind", {"none", "bump", "pt-width"});
    if (auto n = p["x0"]) rf.perturbation.x0 = real(n, "x0");
    if (auto n = p["w"]) rf.perturbation.w = positive(n, "w");
    if (auto n = p["mu"]) rf.perturbation.mu = real(n, "mu");
  }
  if (auto d = root["domain"]) {
    check_keys(d, {"a", "L"}, "domain");
    if (auto n = d["a"]) rf.domain.a = positive(n, "a");
    if (auto n = d["L"]) rf.domain.L = positive(n, "L");
  }
  if (auto s = root["sweep"]) {
    check_keys(s, {"kind", "values", "from", "to", "count"}, "sweep");
    if (auto n = s["kind"]) rf.sweep.kind = text(n, "kind", {"bump-x0", "mu-scaling"});
    if (auto n = s["values"]) {
      if (!n.IsSequence()) bad(n, "'values' must be a list");
      for (const auto& e : n) rf.sweep.values.push_back(real(e, "values"));
    }
    if (auto n = s["from"]) rf.sweep.from = real(n, "from");
    if (auto n = s["to"]) rf.sweep.to = real(n, "to");
    if (auto n = s["count"]) rf.sweep.count = integer(n, "count");
  }
  if (auto s = root["solver"]) {
    check_keys(s, {"tol", "subtract_asymptotics", "subtract_threshold", "order", "seed_from_exact",
                   "series_fill_from", "contour_angle", "l_sweep_tail_terms"},
               "solver");
    if (auto n = s["tol"]) rf.solver.tol = positive(n, "tol");
    if (auto n = s["subtract_asymptotics"]) rf.solver.subtract_asymptotics = boolean(n, "subtract_asymptotics");
    if (auto n = s["subtract_threshold"]) rf.solver.subtract_threshold = positive(n, "subtract_threshold");
    if (auto n = s["order"]) {
      rf.solver.order = integer(n, "order");
      if (*rf.solver.order < 1) bad(n, "'order' must be at least 1");
    }
    if (auto n = s["seed_from_exact"]) rf.solver.seed_from_exact = boolean(n, "seed_from_exact");
    if (auto n = s["series_fill_from"]) rf.solver.series_fill_from = positive(n, "series_fill_from");
    if (auto n = s["contour_angle"]) rf.solver.contour_angle = real(n, "contour_angle");
    if (auto n = s["l_sweep_tail_terms"]) {
      rf.solver.l_sweep_tail_terms = integer(n, "l_sweep_tail_terms");
      if (rf.solver.l_sweep_tail_terms < 1) bad(n, "'l_sweep_tail_terms' must be at least 1");
    }
  }
  if (auto o = root["output"]) {
    check_keys(o, {"csv", "json"}, "output");
    if (auto n = o["csv"]) rf.output.csv = text(n, "csv");
    if (auto n = o["json"]) rf.output.json = text(n, "json");
  }
  return rf;
}

inline RunFile parse_runfile(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::parse_error, "cannot open run file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_runfile_text(ss.str());
}

}  // namespace qnmlpt::cli
