#pragma once

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "qnmlpt/qnmlpt.hpp"
#include "runfile.hpp"

namespace qnmlpt::cli {

using C = Complex<Real>;
using json = nlohmann::json;

enum ExitCode { exit_ok = 0, exit_input = 2, exit_solver = 3, exit_precision = 4 };

inline int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::parse_error:
    case ErrorCode::invalid_argument:
    case ErrorCode::regime_violation:
    case ErrorCode::unsupported_configuration:
      return exit_input;
    case ErrorCode::precision_exhausted:
      return exit_precision;
    default:
      return exit_solver;
  }
}

/// CSV with a header row, LF line endings, 17 significant digits and
/// '#'-prefixed comment rows.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != header_.size())
      fail(ErrorCode::invalid_argument, "CSV row has " + std::to_string(cells.size()) + " cells, header has " +
                                            std::to_string(header_.size()));
    rows_.push_back(cells);
  }
  void comment(const std::string& text) { comments_.push_back(text); }

  std::string str() const {
    std::ostringstream os;
    os << join(header_) << '\n';
    for (const auto& r : rows_) os << join(r) << '\n';
    for (const auto& c : comments_) os << "# " << c << '\n';
    return os.str();
  }

  static std::string num(Real v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
  }
  static std::string num(int v) { return std::to_string(v); }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
    return out;
  }

  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
  std::vector<std::string> comments_;
};

inline json cjson(C z) { return json::array({static_cast<double>(z.real()), static_cast<double>(z.imag())}); }
inline double rjson(Real v) { return std::isfinite(static_cast<double>(v)) ? static_cast<double>(v) : -1.0; }

struct Options {
  std::string runfile;
  std::optional<std::string> out;
  std::optional<std::string> json_out;
  std::optional<int> order;
  std::optional<bool> subtract;
  std::optional<Real> tol;
  std::optional<bool> seed_from_exact;
  std::optional<std::string> sweep_kind;
};

struct Output {
  CsvTable table;
  json diagnostics = json::object();
};

namespace detail {

inline bool is_step(const RunFile& rf) { return rf.potential.kind == "step"; }

inline Real outer_radius(const RunFile& rf) {
  const Real a = rf.domain.a.value_or(Real(16) / 10 * rf.potential.b);
  require(a > rf.potential.b, ErrorCode::invalid_argument, "domain.a must exceed potential.b");
  return a;
}

inline Real matching_radius(const RunFile& rf) { return rf.domain.L.value_or(5 * rf.potential.b); }

inline ProfileOptions<Real> profile_options(const RunFile& rf, const Options& o) {
  ProfileOptions<Real> po;
  const auto tol = o.tol ? o.tol : rf.solver.tol;
  if (!is_step(rf)) {
    po.ode.abs_tol = po.ode.rel_tol = Real(1e-15);
    po.quad_tol = Real(1e-18);
    po.tail_k_max = rf.potential.tail_terms;
    po.series_fill_from = rf.solver.series_fill_from.value_or(3 * rf.potential.b);
  }
  if (tol) po.ode.abs_tol = po.ode.rel_tol = *tol;
  return po;
}

inline NormOptions<Real> norm_options(const RunFile& rf, const Options& o) {
  NormOptions<Real> no;
  no.auto_subtract = o.subtract.value_or(rf.solver.subtract_asymptotics);
  no.subtract_threshold = rf.solver.subtract_threshold;
  return no;
}

/// Problem, unperturbed frequency and domain for the configured mode.
struct Setup {
  Perturbation<Real> problem;
  C omega0;
  Domain<Real> domain;
  int mode_index = 0;
};

inline Setup setup(const RunFile& rf, int mode_index) {
  Setup s;
  s.mode_index = mode_index;
  const auto& p = rf.potential;
  const auto& pert = rf.perturbation;
  if (is_step(rf)) {
    require(pert.kind != "pt-width", ErrorCode::unsupported_configuration, "pt-width needs the poschl_teller potential");
    const Real a = outer_radius(rf);
    s.problem.base = step_potential<Real>(p.v0, p.b);
    if (pert.kind == "bump") {
      StepBumpConfig<Real> cfg;
      cfg.v0 = p.v0;
      cfg.b = p.b;
      cfg.w = pert.w;
      cfg.a = a;
      s.problem = step_bump_problem(cfg, pert.x0);
    } else {
      s.problem.first_order = zero_potential<Real>();
    }
    s.omega0 = step_eigenvalue<Real>(p.v0, p.b, mode_index).value;
    s.domain.lo = 0;
    s.domain.hi = a;
    s.domain.left = LeftBoundary::dirichlet;
    return s;
  }
  require(mode_index >= 0, ErrorCode::invalid_argument, "P-T mode index j must be non-negative");
  if (pert.kind == "pt-width") {
    require(p.b == Real(1), ErrorCode::unsupported_configuration, "the width perturbation is defined for b = 1");
    s.problem = pt_width_perturbation<Real>(p.v0, p.tail_terms);
  } else {
    require(pert.kind == "none", ErrorCode::unsupported_configuration, "bump perturbations need the step potential");
    s.problem.base = poschl_teller<Real>(p.v0, p.b, p.tail_terms);
    s.problem.first_order = zero_potential<Real>();
  }
  s.omega0 = pt_eigenvalue<Real>(p.v0, p.b, mode_index, rf.mode.branch).value;
  s.domain.lo = 0;
  s.domain.hi = matching_radius(rf);
  s.domain.left = mode_index % 2 == 1 ? LeftBoundary::dirichlet : LeftBoundary::neumann;
  s.domain.mirror_factor = 2;
  return s;
}

inline ShootingOptions<Real> shooting_options(const RunFile& rf, const Setup& s, const Options& o) {
  ShootingOptions<Real> so;
  so.lo = s.domain.lo;
  so.hi = s.domain.hi;
  so.left = s.domain.left;
  so.ode.abs_tol = so.ode.rel_tol = o.tol.value_or(rf.solver.tol.value_or(Real(1e-17)));
  if (!is_step(rf)) {
    so.hi = pt_shooting_radius(rf.potential.b, s.domain.hi);
    so.tail_k_max = std::max(rf.potential.tail_terms,
                             pt_tail_order_for<Real>(rf.potential.v0, rf.potential.b, so.hi, Real(1e-20)));
  }
  return so;
}

inline Real shooting_tol(const ShootingOptions<Real>& so) {
  return std::max(Real(1e-15), Real(100) * so.ode.abs_tol);
}

inline std::vector<Real> sweep_values(const RunFile& rf, const std::string& kind) {
  const auto& sw = rf.sweep;
  if (!sw.values.empty()) return sw.values;
  require(sw.from && sw.to && sw.count, ErrorCode::invalid_argument, "sweep needs values or from/to/count");
  require(*sw.count >= 1, ErrorCode::invalid_argument, "empty sweep range");
  require(*sw.to >= *sw.from, ErrorCode::invalid_argument, "empty sweep range (to < from)");
  if (kind == "mu-scaling") return log_grid<Real>(*sw.from, *sw.to, *sw.count);
  std::vector<Real> out;
  for (int i = 0; i < *sw.count; ++i)
    out.push_back(*sw.count == 1 ? *sw.from : *sw.from + (*sw.to - *sw.from) * Real(i) / Real(*sw.count - 1));
  return out;
}

}  // namespace detail

inline Output cmd_solve(const RunFile& rf, const Options& o) {
  Output out{CsvTable({"mode_index", "re_omega", "im_omega", "residual"})};
  json modes = json::array();
  for (int idx : rf.mode.indices) {
    if (detail::is_step(rf)) {
      const auto root = step_root<Real>(rf.potential.v0, rf.potential.b, idx);
      out.table.row({CsvTable::num(idx), CsvTable::num(root.omega.value.real()),
                     CsvTable::num(root.omega.value.imag()), CsvTable::num(root.omega.residual)});
      modes.push_back({{"mode_index", idx}, {"omega", cjson(root.omega.value)}, {"q", cjson(root.q)},
                       {"iterations", root.omega.iterations}});
      continue;
    }
    auto s = detail::setup(rf, idx);
    const auto so = detail::shooting_options(rf, s, o);
    const auto v = poschl_teller<Real>(rf.potential.v0, rf.potential.b, so.tail_k_max);
    const auto root = shoot_eigenvalue(v, s.omega0, (so.lo + so.hi) / 2, detail::shooting_tol(so), so);
    out.table.row({CsvTable::num(idx), CsvTable::num(root.value.real()), CsvTable::num(root.value.imag()),
                   CsvTable::num(root.residual)});
    modes.push_back({{"mode_index", idx},
                     {"omega", cjson(root.value)},
                     {"closed_form", cjson(s.omega0)},
                     {"deviation", rjson(std::abs(root.value - s.omega0))},
                     {"iterations", root.iterations}});
  }
  out.diagnostics["modes"] = modes;
  return out;
}

inline Output cmd_perturb(const RunFile& rf, const Options& o) {
  Output out{CsvTable({"order", "re_omega_n", "im_omega_n", "digits_lost", "L_independence_residual"})};
  const int idx = rf.mode.indices.front();
  auto s = detail::setup(rf, idx);
  PerturbOptions<Real> po;
  po.order = o.order.value_or(rf.solver.order.value_or(rf.perturbation.kind == "pt-width" ? 1 : 2));
  require(po.order >= 1, ErrorCode::invalid_argument, "order must be at least 1");
  po.profile = detail::profile_options(rf, o);
  po.norm = detail::norm_options(rf, o);
  const auto res = perturb(s.problem, s.omega0, s.domain, po);
  json orders = json::array();
  for (std::size_t n = 0; n < res.orders.size(); ++n) {
    const auto& od = res.orders[n];
    const Real lost = std::max(od.me.digits_lost, res.norm.digits_lost);
    out.table.row({CsvTable::num(od.n), CsvTable::num(od.omega.real()), CsvTable::num(od.omega.imag()),
                   CsvTable::num(lost), CsvTable::num(res.l_residual[n])});
    orders.push_back({{"order", od.n},
                      {"omega", cjson(od.omega)},
                      {"matrix_element", cjson(od.me.value)},
                      {"me_integral", cjson(od.me.integral_part)},
                      {"me_surface", cjson(od.me.surface_part)},
                      {"me_digits_lost", rjson(od.me.digits_lost)},
                      {"delta_plus", cjson(od.delta_plus)},
                      {"delta_minus", cjson(od.delta_minus)},
                      {"boundary_consistency", rjson(od.boundary_consistency)},
                      {"L_independence_residual", rjson(res.l_residual[n])}});
  }
  auto& d = out.diagnostics;
  d["omega0"] = cjson(s.omega0);
  d["mode_index"] = idx;
  d["orders"] = orders;
  d["norm"] = {{"value", cjson(res.norm.value)},
               {"integral", cjson(res.norm.integral_part)},
               {"surface", cjson(res.norm.surface_part)},
               {"digits_lost", rjson(res.norm.digits_lost)},
               {"digits_lost_raw", rjson(res.norm.raw_digits_lost)},
               {"subtracted", res.norm.subtracted},
               {"L_minus", rjson(res.norm.L_minus)},
               {"L_plus", rjson(res.norm.L_plus)},
               {"L_independence_residual", rjson(res.norm_l_residual)}};
  d["profile"] = {{"panels", res.profile.panels.size()},
                  {"max_riccati_residual", rjson(res.profile.max_residual)},
                  {"boundary_mismatch", rjson(res.profile.boundary_mismatch)},
                  {"real_nodes", count_real_nodes(res.profile)}};
  if (rf.perturbation.mu) {
    const Real mu = *rf.perturbation.mu;
    json partial = json::array();
    for (int n = 0; n <= static_cast<int>(res.orders.size()); ++n) partial.push_back(cjson(res.omega(mu, n)));
    d["mu"] = rjson(mu);
    d["partial_sums"] = partial;
    out.table.comment("mu=" + CsvTable::num(mu));
    if (detail::is_step(rf)) {
      const auto so = detail::shooting_options(rf, s, o);
      const auto exact = shoot_eigenvalue(s.problem.at(mu), res.omega(mu), rf.potential.b / 2, detail::shooting_tol(so), so);
      d["exact"] = cjson(exact.value);
      json errors = json::array();
      for (int n = 0; n <= static_cast<int>(res.orders.size()); ++n)
        errors.push_back(rjson(std::abs(exact.value - res.omega(mu, n))));
      d["errors"] = errors;
      out.table.comment("re_exact=" + CsvTable::num(exact.value.real()) + " im_exact=" +
                        CsvTable::num(exact.value.imag()));
    }
  }
  return out;
}

inline void sweep_rows(Output& out, const SweepResult<Real>& r) {
  json pts = json::array();
  for (const auto& p : r.points) {
    out.table.row({CsvTable::num(p.parameter), CsvTable::num(p.x0), CsvTable::num(p.mu),
                   CsvTable::num(p.exact.real()), CsvTable::num(p.exact.imag()), CsvTable::num(p.first.real()),
                   CsvTable::num(p.first.imag()), CsvTable::num(p.second.real()), CsvTable::num(p.second.imag()),
                   CsvTable::num(p.err0), CsvTable::num(p.err1), CsvTable::num(p.err2),
                   CsvTable::num(p.converged ? 1 : 0), CsvTable::num(p.residual), CsvTable::num(p.nodes)});
    json j = {{"parameter", rjson(p.parameter)}, {"converged", p.converged}, {"omega1", cjson(p.omega1)},
              {"omega2", cjson(p.omega2)}, {"max_riccati_residual", rjson(p.max_residual)}};
    if (!p.converged) j["failure"] = p.failure;
    pts.push_back(j);
  }
  out.diagnostics["omega0"] = cjson(r.omega0);
  out.diagnostics["points"] = pts;
}

inline Output cmd_sweep(const RunFile& rf, const Options& o) {
  Output out{CsvTable({"parameter", "x0", "mu", "re_exact", "im_exact", "re_first", "im_first", "re_second",
                       "im_second", "err0", "err1", "err2", "converged", "residual", "nodes"})};
  const std::string kind = o.sweep_kind.value_or(rf.sweep.kind);
  require(kind == "bump-x0" || kind == "mu-scaling", ErrorCode::invalid_argument,
          "sweep kind must be bump-x0 or mu-scaling");
  require(detail::is_step(rf), ErrorCode::unsupported_configuration, "sweeps run on the step potential");
  StepBumpConfig<Real> cfg;
  cfg.v0 = rf.potential.v0;
  cfg.b = rf.potential.b;
  cfg.w = rf.perturbation.w;
  cfg.a = detail::outer_radius(rf);
  cfg.root_index = rf.mode.indices.front();
  cfg.chain_seeds = o.seed_from_exact.value_or(rf.solver.seed_from_exact);
  cfg.profile = detail::profile_options(rf, o);
  const auto values = detail::sweep_values(rf, kind);
  out.diagnostics["kind"] = kind;
  if (kind == "bump-x0") {
    cfg.mu = rf.perturbation.mu.value_or(10);
    const auto r = run_bump_sweep(cfg, values);
    sweep_rows(out, r);
    out.table.comment("sweep=bump-x0 mu=" + CsvTable::num(cfg.mu) + " w=" + CsvTable::num(cfg.w) +
                      " a=" + CsvTable::num(cfg.a));
    return out;
  }
  const auto r = run_mu_scaling(cfg, rf.perturbation.x0, values);
  sweep_rows(out, r);
  out.table.comment("sweep=mu-scaling x0=" + CsvTable::num(rf.perturbation.x0) + " w=" + CsvTable::num(cfg.w));
  json fits = json::array();
  for (int k = 0; k < 3; ++k) {
    if (!r.slopes[k]) {
      out.table.comment("fit order=" + std::to_string(k) + " none (single point)");
      continue;
    }
    const auto& f = *r.slopes[k];
    out.table.comment("fit order=" + std::to_string(k) + " slope=" + CsvTable::num(f.slope) + " intercept=" +
                      CsvTable::num(f.intercept) + " points=" + std::to_string(f.points) +
                      " degenerate=" + (f.degenerate ? "1" : "0"));
    fits.push_back({{"order", k}, {"slope", rjson(f.slope)}, {"points", f.points}, {"degenerate", f.degenerate}});
  }
  out.diagnostics["fits"] = fits;
  return out;
}

inline Output cmd_demo(const RunFile& rf, const Options& o) {
  Output out{CsvTable({"L", "re_omega1", "im_omega1", "re_norm", "im_norm", "re_me", "im_me", "digits_lost"})};
  require(!detail::is_step(rf), ErrorCode::unsupported_configuration, "the demo runs on the poschl_teller potential");
  require(rf.potential.b == Real(1), ErrorCode::unsupported_configuration, "the demo is defined for b = 1");
  PtDemoOptions<Real> dopt;
  if (o.tol || rf.solver.tol) dopt.profile.ode.abs_tol = dopt.profile.ode.rel_tol = o.tol ? *o.tol : *rf.solver.tol;
  if (rf.solver.series_fill_from) dopt.profile.series_fill_from = rf.solver.series_fill_from;
  dopt.contour_angle_deg = rf.solver.contour_angle;
  dopt.l_sweep_k_max = rf.solver.l_sweep_tail_terms;
  if (!rf.sweep.values.empty()) dopt.l_values = rf.sweep.values;
  const int j = rf.mode.indices.front();
  const Real L = detail::matching_radius(rf);
  const auto r = run_pt_demo<Real>(rf.potential.v0, j, L, rf.potential.tail_terms, dopt);
  for (const auto& p : r.l_sweep)
    out.table.row({CsvTable::num(p.L), CsvTable::num(p.omega1.real()), CsvTable::num(p.omega1.imag()),
                   CsvTable::num(p.norm.real()), CsvTable::num(p.norm.imag()), CsvTable::num(p.matrix_element.real()),
                   CsvTable::num(p.matrix_element.imag()), CsvTable::num(p.digits_lost)});
  auto rel = [](C a, C b) { return std::abs(a - b) / std::abs(b); };
  out.table.comment("omega1 closed_form=" + CsvTable::num(r.omega1_exact.real()) + "," +
                    CsvTable::num(r.omega1_exact.imag()));
  out.table.comment("omega1 surface_term rel_dev=" + CsvTable::num(rel(r.omega1_surface, r.omega1_exact)));
  out.table.comment("omega1 rotated_contour rel_dev=" + CsvTable::num(rel(r.omega1_contour, r.omega1_exact)));
  out.table.comment("digits_lost before=" + CsvTable::num(r.digits_lost_before) +
                    " after=" + CsvTable::num(r.digits_lost_after));
  out.table.comment("L_variation omega1=" + CsvTable::num(r.l_variation_omega1) +
                    " norm=" + CsvTable::num(r.l_variation_norm) + " me=" + CsvTable::num(r.l_variation_me));
  auto& d = out.diagnostics;
  d["j"] = j;
  d["V0"] = rjson(r.v0);
  d["L"] = rjson(r.L);
  d["k_max"] = r.k_max;
  d["omega0"] = {{"closed_form", cjson(r.omega0_exact)},
                 {"shooting", cjson(r.omega0_shooting)},
                 {"relative_deviation", rjson(r.omega0_deviation)}};
  d["omega1"] = {{"closed_form", cjson(r.omega1_exact)},
                 {"surface_term", cjson(r.omega1_surface)},
                 {"rotated_contour", cjson(r.omega1_contour)}};
  d["norm"] = {{"closed_form", cjson(r.norm_exact)}, {"numeric", cjson(r.norm_numeric)}};
  d["matrix_element"] = {{"closed_form", cjson(r.me_exact)},
                         {"surface_term", cjson(r.me_surface)},
                         {"rotated_contour", cjson(r.me_contour)}};
  d["cancellation"] = {{"digits_lost_before", rjson(r.digits_lost_before)},
                       {"digits_lost_after", rjson(r.digits_lost_after)},
                       {"relative_change", rjson(r.subtraction_change)}};
  d["L_variation"] = {{"omega1", rjson(r.l_variation_omega1)},
                      {"norm", rjson(r.l_variation_norm)},
                      {"matrix_element", rjson(r.l_variation_me)}};
  d["real_nodes"] = r.nodes;
  d["max_riccati_residual"] = rjson(r.max_residual);
  return out;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::invalid_argument, "cannot write '" + path + "'");
  f << text;
}

/// Runs one command line; returns the process exit status.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Quasinormal-mode logarithmic perturbation theory"};
  app.require_subcommand(1);
  Options o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--runfile", o.runfile, "run file (YAML)")->required();
    sub->add_option("--out", o.out, "CSV output path (stdout when absent)");
    sub->add_option("--json", o.json_out, "diagnostics path (defaults to <out>.json)");
    sub->add_option("--tol", o.tol, "integrator tolerance")->check(CLI::PositiveNumber);
    sub->add_option("--subtract-asymptotics", o.subtract, "asymptotic subtraction when cancellation is large");
  };
  auto* solve = app.add_subcommand("solve", "unperturbed quasinormal frequencies");
  auto* pert = app.add_subcommand("perturb", "perturbative shifts order by order");
  auto* sweep = app.add_subcommand("sweep", "bump-x0 or mu-scaling sweeps");
  auto* demo = app.add_subcommand("demo", "width perturbation of the cosh^-2 potential");
  for (auto* s : {solve, pert, sweep, demo}) add_common(s);
  pert->add_option("--order", o.order, "highest order")->check(CLI::PositiveNumber);
  sweep->add_option("--kind", o.sweep_kind, "bump-x0 | mu-scaling");
  sweep->add_option("--seed-from-exact", o.seed_from_exact, "chain exact roots along the sweep");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return exit_ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return exit_input;
  }
  try {
    const auto rf = parse_runfile(o.runfile);
    Output result{CsvTable({})};
    if (*solve)
      result = cmd_solve(rf, o);
    else if (*pert)
      result = cmd_perturb(rf, o);
    else if (*sweep)
      result = cmd_sweep(rf, o);
    else
      result = cmd_demo(rf, o);
    const auto csv_path = o.out ? o.out : rf.output.csv;
    auto json_path = o.json_out ? o.json_out : rf.output.json;
    if (!json_path && csv_path) json_path = *csv_path + ".json";
    if (csv_path)
      write_text(*csv_path, result.table.str());
    else
      out << result.table.str();
    if (json_path) write_text(*json_path, result.diagnostics.dump(2) + "\n");
    return exit_ok;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_solver;
  }
}

}  // namespace qnmlpt::cli
