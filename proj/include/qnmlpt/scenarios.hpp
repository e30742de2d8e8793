#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "qnmlpt/error.hpp"
#include "qnmlpt/lpt.hpp"
#include "qnmlpt/numeric.hpp"
#include "qnmlpt/oracles.hpp"
#include "qnmlpt/potentials.hpp"
#include "qnmlpt/riccati.hpp"

namespace qnmlpt {

/// Half-line step V0 on (0, b) with a bump of width w at x0 and strength mu,
/// wall at the origin and free propagation beyond a.
template <class Real>
struct StepBumpConfig {
  Real v0 = 100;
  Real b = 1;
  Real mu = 10;
  Real w = Real(1) / 10;
  Real a = Real(16) / 10;
  int root_index = 1;
  Real shoot_tol = 0;  // 0 selects a tolerance near the working precision
  bool chain_seeds = true;
  ProfileOptions<Real> profile{};
};

template <class Real>
struct SweepPoint {
  Real parameter = 0;  // x0 or mu
  Real x0 = 0;
  Real mu = 0;
  Complex<Real> omega1, omega2;
  Complex<Real> exact, first, second;
  Real err0 = 0, err1 = 0, err2 = 0;
  Real residual = 0;   // shooting mismatch at the exact root
  int nodes = -1;      // real nodes of the exact mode
  Real max_residual = 0;
  bool converged = false;
  std::string failure;
};

template <class Real>
struct SlopeFit {
  Real slope = 0;
  Real intercept = 0;
  int points = 0;
  bool degenerate = true;
};

template <class Real>
struct SweepResult {
  Complex<Real> omega0;
  std::vector<SweepPoint<Real>> points;
  std::optional<SlopeFit<Real>> slopes[3];  // errors of orders 0, 1, 2
};

namespace detail {

template <class Real>
Real default_shoot_tol() {
  return std::max(Real(1e-17), Real(1e3) * std::numeric_limits<Real>::epsilon());
}

template <class Real>
Domain<Real> half_line(Real a) {
  Domain<Real> d;
  d.lo = 0;
  d.hi = a;
  d.left = LeftBoundary::dirichlet;
  return d;
}

template <class Real>
ShootingOptions<Real> half_line_shooting(const StepBumpConfig<Real>& cfg) {
  ShootingOptions<Real> so;
  so.lo = 0;
  so.hi = cfg.a;
  so.left = LeftBoundary::dirichlet;
  so.ode = cfg.profile.ode;
  const Real t = std::max(Real(1e-17), Real(10) * std::numeric_limits<Real>::epsilon());
  so.ode.abs_tol = std::min(so.ode.abs_tol, t);
  so.ode.rel_tol = std::min(so.ode.rel_tol, t);
  return so;
}

template <class Real>
void validate_bump(const StepBumpConfig<Real>& cfg, Real x0) {
  require(cfg.v0 > 0 && cfg.b > 0 && cfg.a > cfg.b, ErrorCode::invalid_argument, "needs V0 > 0 and 0 < b < a");
  require(cfg.w > 0, ErrorCode::invalid_argument, "bump width must be positive");
  const Real slack = Real(16) * std::numeric_limits<Real>::epsilon() * (Real(1) + cfg.a);
  require(x0 - cfg.w / 2 >= -slack && x0 + cfg.w / 2 < cfg.a, ErrorCode::invalid_argument,
          "bump at x0 = " + std::to_string(static_cast<double>(x0)) + " leaves (0, a)");
}

/// Exact root of the perturbed step, its residual and the node count of the
/// perturbed mode.
template <class Real>
void solve_exact(const StepBumpConfig<Real>& cfg, const Perturbation<Real>& prob, Real mu, Complex<Real> seed,
                 SweepPoint<Real>& pt) {
  const auto so = half_line_shooting(cfg);
  const Real tol = cfg.shoot_tol > 0 ? cfg.shoot_tol : default_shoot_tol<Real>();
  try {
    const auto v = prob.at(mu);
    const auto root = shoot_eigenvalue(v, seed, cfg.b / 2, tol, so);
    pt.exact = root.value;
    pt.residual = root.residual;
    auto po = cfg.profile;
    for (Real x : prob.first_order.breakpoints(0, cfg.a)) po.extra_breaks.push_back(x);
    const auto prof = build_profile(v, root.value, Real(0), cfg.a, LeftBoundary::dirichlet, po);
    pt.nodes = count_real_nodes(prof);
    pt.max_residual = prof.max_residual;
    pt.converged = true;
  } catch (const Error& e) {
    pt.converged = false;
    pt.failure = e.what();
  }
}

template <class Real>
void fill_errors(SweepPoint<Real>& pt, Complex<Real> omega0) {
  if (!pt.converged) return;
  pt.err0 = std::abs(pt.exact - omega0);
  pt.err1 = std::abs(pt.exact - pt.first);
  pt.err2 = std::abs(pt.exact - pt.second);
}

}  // namespace detail

template <class Real>
Perturbation<Real> step_bump_problem(const StepBumpConfig<Real>& cfg, Real x0) {
  detail::validate_bump(cfg, x0);
  Perturbation<Real> p;
  p.base = step_potential<Real>(cfg.v0, cfg.b);
  p.first_order = bump<Real>(x0, cfg.w);
  return p;
}

/// First and second order for one bump position: the recursive path for
/// omega1 and the explicit double integral for omega2.
template <class Real>
std::pair<Complex<Real>, Complex<Real>> step_bump_shifts(const StepBumpConfig<Real>& cfg, Real x0,
                                                          Complex<Real> omega0) {
  const auto prob = step_bump_problem(cfg, x0);
  PerturbOptions<Real> po;
  po.order = 1;
  po.profile = cfg.profile;
  po.l_shift = 0;
  const auto res = perturb(prob, omega0, detail::half_line(cfg.a), po);
  const auto& prof = res.profile;
  std::vector<Complex<Real>> w(prof.size());
  for (std::size_t i = 0; i < w.size(); ++i)
    w[i] = (res.orders[0].v[i] - Real(2) * omega0 * res.orders[0].omega) * prof.node(i).phi_sq;
  const auto w2 = second_order_explicit(prof, res.norm, w, res.orders[0].omega, cfg.a);
  return {res.orders[0].omega, w2};
}

/// Trajectory of the lowest step mode as the bump moves through x0_values.
template <class Real>
SweepResult<Real> run_bump_sweep(const StepBumpConfig<Real>& cfg, const std::vector<Real>& x0_values) {
  require(!x0_values.empty(), ErrorCode::invalid_argument, "empty x0 range");
  for (Real x0 : x0_values) detail::validate_bump(cfg, x0);
  SweepResult<Real> out;
  out.omega0 = step_eigenvalue<Real>(cfg.v0, cfg.b, cfg.root_index).value;
  std::vector<Real> xs = x0_values;
  std::sort(xs.begin(), xs.end());
  std::optional<std::pair<Complex<Real>, Complex<Real>>> last;  // (exact, second) of the previous point
  for (Real x0 : xs) {
    SweepPoint<Real> pt;
    pt.parameter = x0;
    pt.x0 = x0;
    pt.mu = cfg.mu;
    try {
      const auto [w1, w2] = step_bump_shifts(cfg, x0, out.omega0);
      pt.omega1 = w1;
      pt.omega2 = w2;
      pt.first = out.omega0 + cfg.mu * w1;
      pt.second = pt.first + cfg.mu * cfg.mu * w2;
      Complex<Real> seed = pt.second;
      if (cfg.chain_seeds && last) seed = last->first + (pt.second - last->second);
      detail::solve_exact(cfg, step_bump_problem(cfg, x0), cfg.mu, seed, pt);
      if (!pt.converged && cfg.chain_seeds && last)
        detail::solve_exact(cfg, step_bump_problem(cfg, x0), cfg.mu, pt.second, pt);
      if (pt.converged) last = std::pair{pt.exact, pt.second};
    } catch (const Error& e) {
      pt.converged = false;
      pt.failure = e.what();
    }
    detail::fill_errors(pt, out.omega0);
    out.points.push_back(pt);
  }
  return out;
}

/// Least-squares slope of log10(err) against log10(mu); points at the
/// round-off floor are dropped.
template <class Real>
SlopeFit<Real> fit_slope(const std::vector<Real>& mu, const std::vector<Real>& err, Real floor) {
  SlopeFit<Real> fit;
  std::vector<std::pair<Real, Real>> pts;
  for (std::size_t i = 0; i < mu.size(); ++i)
    if (err[i] > floor && mu[i] > 0) pts.emplace_back(std::log10(mu[i]), std::log10(err[i]));
  fit.points = static_cast<int>(pts.size());
  if (pts.size() < 2) return fit;
  Real sx = 0, sy = 0;
  for (const auto& [x, y] : pts) {
    sx += x;
    sy += y;
  }
  const Real n = Real(pts.size());
  const Real mx = sx / n, my = sy / n;
  Real sxx = 0, sxy = 0;
  for (const auto& [x, y] : pts) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }
  if (sxx == Real(0)) return fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.degenerate = false;
  return fit;
}

template <class Real>
std::vector<Real> log_grid(Real lo, Real hi, int count) {
  require(lo > 0 && hi >= lo && count >= 1, ErrorCode::invalid_argument, "log grid needs 0 < lo <= hi and count >= 1");
  std::vector<Real> out;
  if (count == 1) return {lo};
  for (int i = 0; i < count; ++i)
    out.push_back(std::pow(Real(10), std::log10(lo) + (std::log10(hi) - std::log10(lo)) * Real(i) / Real(count - 1)));
  return out;
}

/// Errors of the zeroth, first and second order predictions against exact
/// roots over a grid of strengths, with fitted log-log slopes.
template <class Real>
SweepResult<Real> run_mu_scaling(const StepBumpConfig<Real>& cfg, Real x0, const std::vector<Real>& mu_values) {
  require(!mu_values.empty(), ErrorCode::invalid_argument, "empty mu grid");
  for (Real mu : mu_values) require(mu > 0, ErrorCode::invalid_argument, "mu values must be positive");
  SweepResult<Real> out;
  out.omega0 = step_eigenvalue<Real>(cfg.v0, cfg.b, cfg.root_index).value;
  const auto [w1, w2] = step_bump_shifts(cfg, x0, out.omega0);
  const auto prob = step_bump_problem(cfg, x0);
  std::vector<Real> mus = mu_values;
  std::sort(mus.begin(), mus.end());
  for (Real mu : mus) {
    SweepPoint<Real> pt;
    pt.parameter = mu;
    pt.x0 = x0;
    pt.mu = mu;
    pt.omega1 = w1;
    pt.omega2 = w2;
    pt.first = out.omega0 + mu * w1;
    pt.second = pt.first + mu * mu * w2;
    detail::solve_exact(cfg, prob, mu, pt.second, pt);
    detail::fill_errors(pt, out.omega0);
    out.points.push_back(pt);
  }
  if (mus.size() >= 2) {
    const Real floor = Real(100) * std::numeric_limits<Real>::epsilon() * std::abs(out.omega0);
    for (int k = 0; k < 3; ++k) {
      std::vector<Real> m, e;
      for (const auto& p : out.points) {
        if (!p.converged) continue;
        m.push_back(p.mu);
        e.push_back(k == 0 ? p.err0 : k == 1 ? p.err1 : p.err2);
      }
      out.slopes[k] = fit_slope(m, e, floor);
    }
  }
  return out;
}

template <class Real>
struct PtLPoint {
  Real L = 0;
  Complex<Real> omega1, norm, matrix_element;
  Real digits_lost = 0;
};

template <class Real>
struct PtDemoResult {
  int j = 0;
  Real v0 = 0, L = 0;
  int k_max = 0;
  Complex<Real> omega0_exact, omega0_shooting;
  Real omega0_deviation = 0;
  // omega1 by the closed form, by surface-term regularisation and with the
  // matrix element from a rotated contour.
  Complex<Real> omega1_exact, omega1_surface, omega1_contour;
  Complex<Real> norm_exact, norm_numeric;
  Complex<Real> me_exact, me_surface, me_contour;
  Real digits_lost_before = 0, digits_lost_after = 0;
  Complex<Real> norm_subtracted;
  Real subtraction_change = 0;
  std::vector<PtLPoint<Real>> l_sweep;
  Real l_variation_omega1 = 0, l_variation_norm = 0, l_variation_me = 0;
  int nodes = -1;
  Real max_residual = 0;
};

template <class Real>
struct PtDemoOptions {
  ProfileOptions<Real> profile = [] {
    ProfileOptions<Real> p;
    const Real t = std::max(Real(1e-15), Real(100) * std::numeric_limits<Real>::epsilon());
    p.ode.abs_tol = p.ode.rel_tol = t;
    p.quad_tol = std::max(Real(1e-18), Real(10) * std::numeric_limits<Real>::epsilon());
    p.series_fill_from = Real(3);
    return p;
  }();
  Real contour_angle_deg = 60;
  std::vector<Real> l_values{3, 4, 5, 6, 7, 8};
  int l_sweep_k_max = 0;  // 0 keeps the demo's k_max
  bool shoot = true;
};

/// Outer radius for shooting Poschl-Teller modes. The tail series still
/// converges at 2b, and mismatch errors there are amplified far less than at
/// large L, where phi0^2 grows as exp(2 |Im omega| x).
template <class Real>
Real pt_shooting_radius(Real b, Real L) {
  return std::min(L, Real(2) * b);
}

namespace detail {

template <class Real>
Real max_relative_spread(const std::vector<Complex<Real>>& v) {
  Real out = 0;
  for (const auto& a : v)
    for (const auto& b : v) out = std::max(out, std::abs(a - b) / std::abs(v.front()));
  return out;
}

template <class Real>
PerturbationResult<Real> pt_first_order(const Perturbation<Real>& prob, Complex<Real> omega0, int j, Real L,
                                        const ProfileOptions<Real>& po) {
  Domain<Real> d;
  d.lo = 0;
  d.hi = L;
  d.left = j % 2 == 1 ? LeftBoundary::dirichlet : LeftBoundary::neumann;
  d.mirror_factor = 2;
  PerturbOptions<Real> opts;
  opts.order = 1;
  opts.profile = po;
  opts.l_shift = 0;
  return perturb(prob, omega0, d, opts);
}

}  // namespace detail

/// Width perturbation of V0 cosh^-2 x for the j-th mode: closed form,
/// surface-term and rotated-contour first-order shifts, cancellation
/// diagnostics and an L sweep.
template <class Real>
PtDemoResult<Real> run_pt_demo(Real v0, int j, Real L, int k_max, const PtDemoOptions<Real>& opts = {}) {
  using C = Complex<Real>;
  require(v0 > Real(0.25), ErrorCode::regime_violation, "needs V0 > 1/4");
  require(j == 0 || j == 1, ErrorCode::invalid_argument, "j must be 0 or 1");
  const auto ex = pt_exact<Real>(j, v0);
  const auto prob = pt_width_perturbation<Real>(v0, k_max);
  auto po = opts.profile;
  po.tail_k_max = k_max;

  PtDemoResult<Real> r;
  r.j = j;
  r.v0 = v0;
  r.L = L;
  r.k_max = k_max;
  r.omega0_exact = ex.omega0;
  r.omega0_shooting = ex.omega0;
  if (opts.shoot) {
    ShootingOptions<Real> so;
    so.lo = 0;
    so.hi = pt_shooting_radius(Real(1), L);
    so.left = j == 1 ? LeftBoundary::dirichlet : LeftBoundary::neumann;
    so.tail_k_max = std::max(k_max, pt_tail_order_for<Real>(v0, 1, so.hi, std::numeric_limits<Real>::epsilon()));
    so.ode = po.ode;
    const Real t = std::max(Real(1e-17), Real(10) * std::numeric_limits<Real>::epsilon());
    so.ode.abs_tol = so.ode.rel_tol = t;
    const auto v = poschl_teller<Real>(v0, 1, so.tail_k_max);
    r.omega0_shooting = shoot_eigenvalue(v, ex.omega0 * Real(1.001), so.hi / 2, Real(100) * t, so).value;
  }
  r.omega0_deviation = std::abs(r.omega0_shooting - ex.omega0) / std::abs(ex.omega0);

  const auto res = detail::pt_first_order(prob, ex.omega0, j, L, po);
  r.omega1_exact = ex.omega1;
  r.omega1_surface = res.orders[0].omega;
  r.norm_exact = ex.norm;
  r.norm_numeric = res.norm.value;
  r.me_exact = ex.matrix_element;
  r.me_surface = res.orders[0].me.value;
  r.nodes = count_real_nodes(res.profile);
  r.max_residual = res.profile.max_residual;
  const std::function<C(C)> vfn = [&](C z) { return ex.first_order(z); };
  const std::function<C(C)> pfn = [&](C z) { return ex.phi_sq(z); };
  r.me_contour = Real(2) * rotated_contour_me<Real>(vfn, pfn, opts.contour_angle_deg * pi_v<Real> / 180);
  r.omega1_contour = order_shift(r.me_contour, res.norm, ex.omega0);

  // Cancellation diagnostics on a profile without the series fill.
  auto raw_opts = po;
  raw_opts.series_fill_from.reset();
  const auto prof = build_reduced_profile(prob.base, ex.omega0, L, j == 1 ? Parity::odd : Parity::even, true, raw_opts);
  const auto md = match_data(prob.base, ex.omega0, Side::right, L, k_max);
  NormOptions<Real> raw;
  raw.auto_subtract = false;
  raw.precision_limit = std::numeric_limits<Real>::digits10;
  const auto before = generalized_norm(prof, md, std::nullopt, raw, &prob.base);
  const auto after = generalized_norm_subtracted(prof, md, prob.base);
  r.digits_lost_before = before.raw_digits_lost;
  r.digits_lost_after = after.digits_lost;
  r.norm_subtracted = after.value;
  r.subtraction_change = std::abs(after.value - before.value) / std::abs(before.value);

  std::vector<C> w1s, norms, mes;
  const int lk = opts.l_sweep_k_max > 0 ? opts.l_sweep_k_max : k_max;
  const auto lprob = pt_width_perturbation<Real>(v0, lk);
  auto lpo = po;
  lpo.tail_k_max = lk;
  for (Real l : opts.l_values) {
    const auto lr = detail::pt_first_order(lprob, ex.omega0, j, l, lpo);
    r.l_sweep.push_back({l, lr.orders[0].omega, lr.norm.value, lr.orders[0].me.value, lr.norm.digits_lost});
    w1s.push_back(lr.orders[0].omega);
    norms.push_back(lr.norm.value);
    mes.push_back(lr.orders[0].me.value);
  }
  if (!w1s.empty()) {
    r.l_variation_omega1 = detail::max_relative_spread(w1s);
    r.l_variation_norm = detail::max_relative_spread(norms);
    r.l_variation_me = detail::max_relative_spread(mes);
  }
  return r;
}

}  // namespace qnmlpt
