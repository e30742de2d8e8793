#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qnmlpt/born_tail.hpp"
#include "qnmlpt/error.hpp"
#include "qnmlpt/numeric.hpp"
#include "qnmlpt/ode.hpp"
#include "qnmlpt/potentials.hpp"
#include "qnmlpt/quadrature.hpp"
#include "qnmlpt/roots.hpp"

namespace qnmlpt {

enum class Parity { even, odd, none };

template <class Real>
struct ComplexFrequency {
  Complex<Real> value;
  int mode_index = 0;
  Parity parity = Parity::none;
  int branch = 1;  // sign of Re omega
  Real residual = 0;
  int iterations = 0;
};

/// Condition imposed at the left end of a profile. Dirichlet and Neumann are
/// the odd and even parity reductions of symmetric problems (or a physical
/// wall); outgoing starts from the left log-derivative D_-.
enum class LeftBoundary { dirichlet, neumann, outgoing };

template <class Real>
struct ProfileNode {
  Real x;
  Complex<Real> v;  // unperturbed potential
  Complex<Real> phi, dphi, f, phi_sq;
};

template <class Real>
struct ProfilePanel {
  Real lo, hi;
  std::array<ProfileNode<Real>, kPanelNodes> nodes;
  Real quad_error = 0;   // |K15 - G7| of phi^2
  Real quad_scale = 0;   // integral of |phi^2|
  Real residual = 0;     // max Riccati residual over the nodes
  bool linear_residual = false;
  bool series_filled = false;

  Real half_width() const { return (hi - lo) / 2; }
};

template <class Real>
struct EdgeValue {
  Real x;
  Complex<Real> phi, dphi;

  Complex<Real> phi_sq() const { return phi * phi; }
  Complex<Real> f() const { return dphi / phi; }
};

/// Sampled solution at a fixed omega on [lo, hi] with panel-wise Kronrod
/// nodes. The grid, phi^2 and f are shared by every perturbative order.
template <class Real>
struct LogDerivProfile {
  Complex<Real> omega;
  std::vector<ProfilePanel<Real>> panels;
  std::vector<EdgeValue<Real>> edges;
  LeftBoundary left = LeftBoundary::outgoing;
  // 2 when [lo, hi] is the positive half of a parity-reduced symmetric problem.
  Real mirror_factor = 1;
  Real anchor_x = 0;
  Complex<Real> anchor_phi;
  Real boundary_mismatch = 0;
  bool converged = false;
  Real max_residual = 0;
  std::optional<Real> series_fill_from;

  Real lo() const { return edges.front().x; }
  Real hi() const { return edges.back().x; }
  std::size_t size() const { return panels.size() * kPanelNodes; }

  std::vector<Real> grid() const {
    std::vector<Real> g;
    g.reserve(size());
    for (const auto& p : panels)
      for (const auto& n : p.nodes) g.push_back(n.x);
    return g;
  }
  std::vector<Complex<Real>> f_values() const {
    std::vector<Complex<Real>> g;
    for (const auto& p : panels)
      for (const auto& n : p.nodes) g.push_back(n.f);
    return g;
  }
  std::vector<Complex<Real>> phi_sq_values() const {
    std::vector<Complex<Real>> g;
    for (const auto& p : panels)
      for (const auto& n : p.nodes) g.push_back(n.phi_sq);
    return g;
  }
  const ProfileNode<Real>& node(std::size_t i) const { return panels[i / kPanelNodes].nodes[i % kPanelNodes]; }
  Complex<Real> phi_sq_lo() const { return edges.front().phi_sq(); }
  Complex<Real> phi_sq_hi() const { return edges.back().phi_sq(); }
  Complex<Real> f_hi() const { return edges.back().f(); }
  Complex<Real> f_lo() const { return edges.front().f(); }

  /// Kronrod quadrature of per-node samples over [lo, hi].
  Complex<Real> integrate(const std::vector<Complex<Real>>& samples) const {
    require(samples.size() == size(), ErrorCode::grid_mismatch, "samples do not match the profile grid");
    const auto& rule = panel_rule<Real>();
    CompensatedComplexSum<Real> acc;
    for (std::size_t p = 0; p < panels.size(); ++p) {
      CompensatedComplexSum<Real> part;
      for (std::size_t i = 0; i < kPanelNodes; ++i) part.add(samples[p * kPanelNodes + i] * rule.kronrod[i]);
      acc.add(part.value() * panels[p].half_width());
    }
    return acc.value();
  }

  /// Cumulative integral from lo to every node, plus the total at hi.
  std::pair<std::vector<Complex<Real>>, Complex<Real>> cumulative(const std::vector<Complex<Real>>& samples) const {
    require(samples.size() == size(), ErrorCode::grid_mismatch, "samples do not match the profile grid");
    const auto& rule = panel_rule<Real>();
    std::vector<Complex<Real>> out(samples.size());
    CompensatedComplexSum<Real> running;
    for (std::size_t p = 0; p < panels.size(); ++p) {
      const Real hw = panels[p].half_width();
      const Complex<Real> base = running.value();
      for (std::size_t i = 0; i < kPanelNodes; ++i) {
        CompensatedComplexSum<Real> s;
        for (std::size_t j = 0; j < kPanelNodes; ++j) s.add(rule.cumulative[i][j] * samples[p * kPanelNodes + j]);
        out[p * kPanelNodes + i] = base + s.value() * hw;
      }
      CompensatedComplexSum<Real> total;
      for (std::size_t j = 0; j < kPanelNodes; ++j) total.add(rule.kronrod[j] * samples[p * kPanelNodes + j]);
      running.add(total.value() * hw);
    }
    return {out, running.value()};
  }

  template <class F>
  std::vector<Complex<Real>> sample(const F& fn) const {
    std::vector<Complex<Real>> out;
    out.reserve(size());
    for (const auto& p : panels)
      for (const auto& n : p.nodes) out.push_back(Complex<Real>(fn(n.x)));
    return out;
  }
};

template <class Real>
struct ProfileOptions {
  OdeOptions<Real> ode{};
  Real quad_tol = Real(1e-12);      // per-panel |K15 - G7| relative to the integral of |phi^2|
  Real max_panel_width = 0;         // 0 selects min(0.5, 3 / |omega|)
  Real min_panel_width = Real(1e-6);
  Real mismatch_tol = Real(1e-6);   // relative log-derivative mismatch at outgoing ends
  int tail_k_max = 4;               // terms of the tail series used for D_+-
  std::vector<Real> extra_breaks;
  // Beyond this abscissa the profile is taken from the exact tail series,
  // matched in amplitude to the integrated solution.
  std::optional<Real> series_fill_from;
  Real series_fill_tol = Real(1e-20);
};

/// Outgoing log-derivative at radius L on the given side for arbitrary omega:
/// tail series when the side has a tail, the free wave otherwise.
template <class Real>
Complex<Real> outgoing_logderiv(const PotentialSpec<Real>& v, Complex<Real> omega, Side side, Real L, int k_max) {
  const auto& tail = v.tail(side);
  if (!tail) return (side == Side::right ? Real(1) : Real(-1)) * Complex<Real>(0, 1) * omega;
  return series_logderiv(series_coefficients(*tail, omega, k_max, side), L);
}

template <class Real>
MatchData<Real> match_data(const PotentialSpec<Real>& v, Complex<Real> omega0, Side side, Real L, int k_max,
                           const std::optional<TailPerturbation<Real>>& perturbation = std::nullopt) {
  const auto& tail = v.tail(side);
  if (!tail) return free_wave_match(omega0, side, L);
  return matchdata_from_tail(*tail, omega0, L, k_max, side, perturbation);
}

namespace detail {

template <class Real>
WaveState<Real> initial_state(LeftBoundary bc, Complex<Real> anchor, Complex<Real> left_logderiv) {
  using C = Complex<Real>;
  switch (bc) {
    case LeftBoundary::dirichlet: return WaveState<Real>::from_values(C(0), anchor);
    case LeftBoundary::neumann: return WaveState<Real>::from_values(anchor, C(0));
    case LeftBoundary::outgoing: break;
  }
  return WaveState<Real>::from_log_derivative(left_logderiv, std::log(anchor));
}

/// Smallest series order whose first omitted term at distance s is below tol,
/// relative to the leading term.
template <class Real>
int series_fill_order(const TailExpansion<Real>& tail, Complex<Real> omega, Real s, Real tol) {
  for (int k = 2; k <= 80; ++k) {
    const auto sol = series_coefficients(tail, omega, k);
    if (std::abs(sol.d.back()) * std::exp(-tail.alpha * Real(k) * s) < tol) return k;
  }
  return 80;
}

template <class Real>
void panel_residual(ProfilePanel<Real>& panel, Complex<Real> omega, Real switch_threshold, bool zero_at_edge) {
  const auto& rule = panel_rule<Real>();
  const Real scale = Real(2) / (panel.hi - panel.lo);
  const Complex<Real> w2 = omega * omega;
  Real min_phi = std::numeric_limits<Real>::infinity(), max_phi = 0, max_f = 0;
  for (const auto& n : panel.nodes) {
    min_phi = std::min(min_phi, std::abs(n.phi));
    max_phi = std::max(max_phi, std::abs(n.phi));
    max_f = std::max(max_f, std::abs(n.f));
  }
  panel.linear_residual = zero_at_edge || min_phi < Real(0.1) * max_phi || max_f > switch_threshold;
  // f' is taken as phi''/phi - f^2 with phi'' differentiated from the smooth
  // phi' samples; f itself can carry nearby complex poles.
  Real worst = 0, size = std::max(Real(1), std::abs(w2));
  for (const auto& n : panel.nodes) size = std::max(size, std::abs(n.v));
  for (std::size_t i = 0; i < kPanelNodes; ++i) {
    Complex<Real> d2{};
    for (std::size_t j = 0; j < kPanelNodes; ++j) d2 += rule.derivative[i][j] * panel.nodes[j].dphi;
    d2 *= scale;
    const auto& n = panel.nodes[i];
    if (panel.linear_residual)
      worst = std::max(worst, std::abs(d2 - (n.v - w2) * n.phi) / max_phi);
    else
      worst = std::max(worst, std::abs(d2 / n.phi - n.v + w2));  // f' + f^2 = phi''/phi
  }
  panel.residual = worst / size;
}

}  // namespace detail

/// Integrates from the left boundary at lo to hi, building panels adaptively
/// so that the Kronrod estimate of each panel's phi^2 integral meets quad_tol.
template <class Real>
LogDerivProfile<Real> build_profile(const PotentialSpec<Real>& v, Complex<Real> omega, Real lo, Real hi,
                                    LeftBoundary left, const ProfileOptions<Real>& opts = {},
                                    Complex<Real> anchor = Complex<Real>(1), Real mirror_factor = 1) {
  using C = Complex<Real>;
  require(hi > lo, ErrorCode::invalid_argument, "profile interval must be non-empty");
  const auto& rule = panel_rule<Real>();
  const C left_d = left == LeftBoundary::outgoing ? outgoing_logderiv(v, omega, Side::left, lo, opts.tail_k_max) : C(0);
  WaveState<Real> state = detail::initial_state(left, anchor, left_d);
  WavePropagator<Real> prop(v, omega, opts.ode);

  std::vector<Real> cuts = v.breakpoints(lo, hi);
  for (Real b : opts.extra_breaks)
    if (b > lo && b < hi) cuts.push_back(b);
  std::optional<Real> fill;
  if (opts.series_fill_from && v.right_tail && *opts.series_fill_from < hi) {
    fill = std::max(*opts.series_fill_from, lo);
    if (*fill > lo) cuts.push_back(*fill);
  }
  cuts.push_back(lo);
  cuts.push_back(hi);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end(),
                         [](Real x, Real y) {
                           // Slivers from inexact inputs; the propagator still honours the true cut.
                           return std::abs(y - x) <= Real(1024) * std::numeric_limits<Real>::epsilon() *
                                                         (Real(1) + std::abs(x));
                         }),
             cuts.end());
  cuts.back() = hi;
  const Real max_width = opts.max_panel_width > 0
                             ? opts.max_panel_width
                             : std::min(Real(0.5), Real(3) / std::max(Real(1), std::abs(omega)));
  std::deque<std::pair<Real, Real>> todo;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const Real a = cuts[i], b = cuts[i + 1];
    const int pieces = std::max(1, static_cast<int>(std::ceil((b - a) / max_width)));
    for (int k = 0; k < pieces; ++k)
      todo.emplace_back(a + (b - a) * Real(k) / Real(pieces), k + 1 == pieces ? b : a + (b - a) * Real(k + 1) / Real(pieces));
  }

  LogDerivProfile<Real> prof;
  prof.omega = omega;
  prof.left = left;
  prof.mirror_factor = mirror_factor;
  prof.anchor_x = lo;
  prof.anchor_phi = anchor;
  prof.series_fill_from = fill;
  prof.edges.push_back({lo, state.phi(), state.dphi()});

  std::optional<SeriesSolution<Real>> series;
  std::optional<C> series_amp;
  Real fill_mismatch = 0;
  if (fill) {
    const int order = detail::series_fill_order(*v.right_tail, omega, *fill, opts.series_fill_tol);
    series = series_coefficients(*v.right_tail, omega, order);
  }

  while (!todo.empty()) {
    const auto [a, b] = todo.front();
    todo.pop_front();
    ProfilePanel<Real> panel;
    panel.lo = a;
    panel.hi = b;
    const Real mid = (a + b) / 2, hw = (b - a) / 2;
    WaveState<Real> s = state;
    const bool from_series = fill && a >= *fill;
    if (from_series && !series_amp) {
      const auto w = series_wave(*series, a);
      series_amp = state.phi() / w.phi;
      fill_mismatch = std::abs(state.f() - w.dphi / w.phi) / std::max(Real(1), std::abs(w.dphi / w.phi));
    }
    Real x = a;
    for (std::size_t i = 0; i < kPanelNodes; ++i) {
      const Real xi = mid + hw * rule.nodes[i];
      auto& n = panel.nodes[i];
      n.x = xi;
      n.v = v(xi);
      if (from_series) {
        const auto w = series_wave(*series, xi);
        n.phi = *series_amp * w.phi;
        n.dphi = *series_amp * w.dphi;
      } else {
        s = prop.advance(s, x, xi);
        x = xi;
        n.phi = s.phi();
        n.dphi = s.dphi();
      }
      n.phi_sq = n.phi * n.phi;
      n.f = n.dphi / n.phi;
    }
    EdgeValue<Real> end{b, {}, {}};
    if (from_series) {
      const auto w = series_wave(*series, b);
      end.phi = *series_amp * w.phi;
      end.dphi = *series_amp * w.dphi;
      panel.series_filled = true;
    } else {
      s = prop.advance(s, x, b);
      end.phi = s.phi();
      end.dphi = s.dphi();
    }
    std::array<C, kPanelNodes> sq{};
    for (std::size_t i = 0; i < kPanelNodes; ++i) sq[i] = panel.nodes[i].phi_sq;
    const auto est = panel_estimate<Real>(sq.data(), hw);
    panel.quad_error = est.error();
    panel.quad_scale = est.absolute;
    if (panel.quad_error > opts.quad_tol * est.absolute && (b - a) > 2 * opts.min_panel_width) {
      todo.emplace_front(mid, b);
      todo.emplace_front(a, mid);
      continue;
    }
    const bool zero_edge = std::abs(prof.edges.back().phi) == Real(0) || std::abs(end.phi) == Real(0);
    detail::panel_residual(panel, omega, opts.ode.switch_threshold, zero_edge);
    prof.max_residual = std::max(prof.max_residual, panel.residual);
    prof.panels.push_back(panel);
    prof.edges.push_back(end);
    if (!from_series) state = s;
  }

  Real mismatch = fill_mismatch;
  const C d_hi = outgoing_logderiv(v, omega, Side::right, hi, opts.tail_k_max);
  mismatch = std::max(mismatch, std::abs(prof.f_hi() - d_hi) / std::max(Real(1), std::abs(d_hi)));
  prof.boundary_mismatch = mismatch;
  prof.converged = mismatch < opts.mismatch_tol;
  return prof;
}

/// Profile for the standard reductions: half line with a wall (factor 1) or
/// the positive half of a symmetric problem of the given parity (factor 2).
template <class Real>
LogDerivProfile<Real> build_reduced_profile(const PotentialSpec<Real>& v, Complex<Real> omega, Real L, Parity parity,
                                            bool parity_reduced, const ProfileOptions<Real>& opts = {},
                                            Complex<Real> anchor = Complex<Real>(1)) {
  require(parity != Parity::none, ErrorCode::invalid_argument, "reduced profile needs a parity");
  return build_profile(v, omega, Real(0), L, parity == Parity::odd ? LeftBoundary::dirichlet : LeftBoundary::neumann,
                       opts, anchor, parity_reduced ? Real(2) : Real(1));
}

/// Integrates the outgoing solution from `from` to `to`, starting from the
/// side's outgoing log-derivative at `from`, and samples it on a profile.
template <class Real>
LogDerivProfile<Real> integrate_outgoing(const PotentialSpec<Real>& v, Complex<Real> omega, Side side, Real from,
                                         Real to, Real tol, int k_max = 4) {
  ProfileOptions<Real> opts;
  opts.ode.abs_tol = opts.ode.rel_tol = tol;
  opts.tail_k_max = k_max;
  const Real lo = std::min(from, to), hi = std::max(from, to);
  if (side == Side::left) {
    require(from <= to, ErrorCode::invalid_argument, "left outgoing integration runs rightwards");
    auto prof = build_profile(v, omega, lo, hi, LeftBoundary::outgoing, opts);
    return prof;
  }
  // Right side: mirror the problem so the outgoing end becomes the left end.
  require(from >= to, ErrorCode::invalid_argument, "right outgoing integration runs leftwards");
  PotentialSpec<Real> mirrored;
  const Real inf = std::numeric_limits<Real>::infinity();
  for (auto it = v.segments.rbegin(); it != v.segments.rend(); ++it) {
    auto ev = it->eval;
    mirrored.segments.push_back({-it->hi, -it->lo, [ev](Real x) { return ev(-x); }, it->constant});
  }
  mirrored.segments.front().lo = -inf;
  mirrored.segments.back().hi = inf;
  mirrored.left_tail = v.right_tail;
  mirrored.right_tail = v.left_tail;
  mirrored.support_lo = -v.support_hi;
  mirrored.support_hi = -v.support_lo;
  auto m = build_profile(mirrored, omega, -hi, -lo, LeftBoundary::outgoing, opts);
  // Map back: x -> -x, f -> -f, phi' -> -phi'.
  LogDerivProfile<Real> out = m;
  out.panels.clear();
  out.edges.clear();
  for (auto it = m.panels.rbegin(); it != m.panels.rend(); ++it) {
    ProfilePanel<Real> p = *it;
    p.lo = -it->hi;
    p.hi = -it->lo;
    for (std::size_t i = 0; i < kPanelNodes; ++i) {
      const auto& src = it->nodes[kPanelNodes - 1 - i];
      p.nodes[i] = src;
      p.nodes[i].x = -src.x;
      p.nodes[i].dphi = -src.dphi;
      p.nodes[i].f = -src.f;
    }
    out.panels.push_back(p);
  }
  for (auto it = m.edges.rbegin(); it != m.edges.rend(); ++it) out.edges.push_back({-it->x, it->phi, -it->dphi});
  out.anchor_x = from;
  // The mirrored build checked the far end against the mirrored right tail;
  // for an integration that merely leaves the region this is informational.
  out.converged = true;
  return out;
}

template <class Real>
struct ShootingOptions {
  Real lo = 0;                       // L_- (or the reduction point)
  Real hi = 0;                       // L_+
  LeftBoundary left = LeftBoundary::outgoing;
  int tail_k_max = 4;
  OdeOptions<Real> ode{};
  int max_iterations = 60;
};

/// Complex shooting: integrate from the left boundary and from the outgoing
/// right end to the match point and drive the log-derivative mismatch to zero.
template <class Real>
ComplexFrequency<Real> shoot_eigenvalue(const PotentialSpec<Real>& v, Complex<Real> guess, Real match_point, Real tol,
                                        const ShootingOptions<Real>& opts) {
  using C = Complex<Real>;
  require(tol > 0, ErrorCode::invalid_argument, "tolerance must be positive");
  require(guess.imag() < 0, ErrorCode::invalid_argument, "seed must lie in the lower half plane");
  require(opts.hi > opts.lo && match_point >= opts.lo && match_point <= opts.hi, ErrorCode::invalid_argument,
          "match point must lie in [L-, L+]");
  auto sides = [&](C omega) {
    WavePropagator<Real> prop(v, omega, opts.ode);
    const C dl = opts.left == LeftBoundary::outgoing
                     ? outgoing_logderiv(v, omega, Side::left, opts.lo, opts.tail_k_max)
                     : C(0);
    WaveState<Real> l = detail::initial_state(opts.left, C(1), dl);
    l = prop.advance(l, opts.lo, match_point);
    WaveState<Real> r =
        WaveState<Real>::from_log_derivative(outgoing_logderiv(v, omega, Side::right, opts.hi, opts.tail_k_max));
    r = prop.advance(r, opts.hi, match_point);
    return std::pair{l, r};
  };
  auto inverse_f = [](const WaveState<Real>& s) {
    if (s.mode == WaveMode::riccati) return C(1) / s.a;
    return s.a / s.b;
  };
  const auto [l0, r0] = sides(guess);
  const Real scale = Real(10) * std::max(Real(1), std::abs(guess));
  const bool reciprocal = std::abs(l0.f()) > scale || std::abs(r0.f()) > scale;
  auto mismatch = [&](C omega) {
    const auto [l, r] = sides(omega);
    if (reciprocal) return inverse_f(r) - inverse_f(l);
    return r.f() - l.f();
  };
  RootOptions<Real> ro;
  ro.tol = tol;
  ro.max_iterations = opts.max_iterations;
  const auto root = find_root<Real>(mismatch, guess, ro);
  if (!(root.root.imag() < 0))
    fail(ErrorCode::rejected_root, "converged root has Im omega >= 0");
  ComplexFrequency<Real> out;
  out.value = root.root;
  out.residual = std::abs(root.residual);
  out.iterations = root.iterations;
  out.branch = root.root.real() >= 0 ? 1 : -1;
  out.parity = opts.left == LeftBoundary::dirichlet ? Parity::odd
               : opts.left == LeftBoundary::neumann ? Parity::even
                                                    : Parity::none;
  return out;
}

/// Residual of q cos(qb) - i sqrt(q^2 + V0) sin(qb), the pole-free form of
/// q cot(qb) = i omega0.
template <class Real>
Complex<Real> step_residual(Complex<Real> q, Real v0, Real b) {
  const Complex<Real> w = std::sqrt(q * q + v0);
  return q * std::cos(q * b) - Complex<Real>(0, 1) * w * std::sin(q * b);
}

template <class Real>
struct StepRoot {
  Complex<Real> q;
  ComplexFrequency<Real> omega;
};

/// Lowest-lying roots of the half-line step problem by complex Newton.
template <class Real>
StepRoot<Real> step_root(Real v0, Real b, int root_index) {
  using C = Complex<Real>;
  require(v0 > 0 && b > 0, ErrorCode::invalid_argument, "step needs V0 > 0 and b > 0");
  require(root_index >= 1, ErrorCode::invalid_argument, "root index starts at 1");
  const Real n_pi = Real(root_index) * pi_v<Real>;
  C q = n_pi / (b + C(0, 1) / std::sqrt(v0 + (n_pi / b) * (n_pi / b)));
  auto deriv = [&](C z) {
    const C w = std::sqrt(z * z + v0);
    const C s = std::sin(z * b), c = std::cos(z * b);
    return c - z * b * s - C(0, 1) * (z / w * s + w * b * c);
  };
  C r = step_residual(q, v0, b);
  int it = 0;
  Real last = std::numeric_limits<Real>::infinity();
  for (; it < 100; ++it) {
    const C step = -r / deriv(q);
    q += step;
    r = step_residual(q, v0, b);
    const Real s = std::abs(step);
    if (s <= Real(4) * std::numeric_limits<Real>::epsilon() * std::abs(q) || (s >= last / 2 && s < Real(1e-6)))
      break;
    last = s;
  }
  if (it == 100 || !std::isfinite(std::abs(q)))
    fail(ErrorCode::no_root, "step eigenvalue Newton diverged; last q = " + std::to_string(static_cast<double>(q.real())) +
                                 " + " + std::to_string(static_cast<double>(q.imag())) + "i");
  StepRoot<Real> out;
  out.q = q;
  out.omega.value = std::sqrt(q * q + v0);
  out.omega.mode_index = root_index;
  out.omega.parity = Parity::odd;
  out.omega.branch = 1;
  out.omega.residual = std::abs(q / std::tan(q * b) - C(0, 1) * out.omega.value);
  out.omega.iterations = it + 1;
  return out;
}

template <class Real>
ComplexFrequency<Real> step_eigenvalue(Real v0, Real b, int root_index) {
  return step_root(v0, b, root_index).omega;
}

template <class Real>
ComplexFrequency<Real> pt_eigenvalue(Real v0, Real b, int j, int branch = 1) {
  require(Real(4) * v0 * b * b > Real(1), ErrorCode::regime_violation, "needs 4 V0 b^2 > 1");
  require(j >= 0, ErrorCode::invalid_argument, "mode index must be non-negative");
  ComplexFrequency<Real> out;
  const Real s = std::sqrt(v0 * b * b - Real(0.25));
  out.value = Complex<Real>((branch >= 0 ? s : -s) / b, -(Real(j) + Real(0.5)) / b);
  out.mode_index = j;
  out.parity = j % 2 == 0 ? Parity::even : Parity::odd;
  out.branch = branch >= 0 ? 1 : -1;
  return out;
}

/// Number of real zeros of phi: interior zeros located by minimising the
/// Hermite cubic between neighbouring samples, plus a node imposed by a
/// Dirichlet condition at the left end.
template <class Real>
int count_real_nodes(const LogDerivProfile<Real>& prof, Real rel_threshold = Real(1e-6)) {
  struct Sample {
    Real x;
    Complex<Real> phi, dphi;
  };
  std::vector<Sample> s;
  s.push_back({prof.edges.front().x, prof.edges.front().phi, prof.edges.front().dphi});
  for (std::size_t p = 0; p < prof.panels.size(); ++p) {
    for (const auto& n : prof.panels[p].nodes) s.push_back({n.x, n.phi, n.dphi});
    const auto& e = prof.edges[p + 1];
    s.push_back({e.x, e.phi, e.dphi});
  }
  int count = prof.left == LeftBoundary::dirichlet ? 1 : 0;
  Real last_zero = -std::numeric_limits<Real>::infinity();
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    const auto& A = s[i];
    const auto& B = s[i + 1];
    const Real h = B.x - A.x;
    if (h <= 0) continue;
    const Real scale = std::max({std::abs(A.phi), std::abs(B.phi), std::abs(A.dphi) * h, std::abs(B.dphi) * h});
    auto hermite = [&](Real t) {
      const Real t2 = t * t, t3 = t2 * t;
      return (2 * t3 - 3 * t2 + 1) * A.phi + (t3 - 2 * t2 + t) * h * A.dphi + (-2 * t3 + 3 * t2) * B.phi +
             (t3 - t2) * h * B.dphi;
    };
    Real best_t = 0, best = std::abs(A.phi);
    for (int k = 1; k <= 32; ++k) {
      const Real t = Real(k) / 32;
      const Real m = std::abs(hermite(t));
      if (m < best) {
        best = m;
        best_t = t;
      }
    }
    Real lo = std::max(Real(0), best_t - Real(1) / 32), hi = std::min(Real(1), best_t + Real(1) / 32);
    for (int k = 0; k < 60; ++k) {
      const Real m1 = lo + (hi - lo) * Real(0.381966), m2 = hi - (hi - lo) * Real(0.381966);
      if (std::abs(hermite(m1)) < std::abs(hermite(m2)))
        hi = m2;
      else
        lo = m1;
    }
    const Real t = (lo + hi) / 2;
    best = std::min(best, std::abs(hermite(t)));
    if (scale > 0 && best <= rel_threshold * scale) {
      const Real xz = A.x + t * h;
      const bool at_left_end = prof.left == LeftBoundary::dirichlet && std::abs(xz - prof.lo()) <= 1e-9 * (1 + std::abs(h));
      if (!at_left_end && xz - last_zero > Real(1e-9) * (1 + std::abs(xz)) && xz < prof.hi()) {
        ++count;
        last_zero = xz;
      }
    }
  }
  return count;
}

}  // namespace qnmlpt
