#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include "qnmlpt/born_tail.hpp"
#include "qnmlpt/error.hpp"
#include "qnmlpt/numeric.hpp"
#include "qnmlpt/potentials.hpp"
#include "qnmlpt/quadrature.hpp"
#include "qnmlpt/riccati.hpp"

namespace qnmlpt {

template <class Real>
Real digits_lost(const Complex<Real>& integral, const Complex<Real>& surface, const Complex<Real>& total) {
  const Real big = std::max(std::abs(integral), std::abs(surface));
  if (big == Real(0)) return 0;
  if (std::abs(total) == Real(0)) return std::numeric_limits<Real>::infinity();
  return std::max(Real(0), std::log10(big / std::abs(total)));
}

/// Leading (and optionally subasymptotic) outgoing behaviour of phi0^2 on the
/// right, A^2 exp(2 i omega0 x) sum_m e_m exp(-m alpha x), together with its
/// closed-form integral over [from, L].
template <class Real>
struct AsymptoticSubtraction {
  Complex<Real> omega0;
  Complex<Real> amplitude;
  Real alpha = 0;
  std::vector<Complex<Real>> e;  // e_0 = 1, e_m = sum_{k+l=m} d_k d_l
  Real from = 0;
  Real L = 0;
  Complex<Real> surface_correction;

  Complex<Real> operator()(Real x) const {
    CompensatedComplexSum<Real> acc;
    for (std::size_t m = 0; m < e.size(); ++m)
      acc.add(e[m] * std::exp((Complex<Real>(0, 2) * omega0 - alpha * Real(m)) * x));
    return amplitude * amplitude * acc.value();
  }

  /// A^2 exp(2 i omega0 x) s(x)^2 minus the subtracted terms, summed directly
  /// from the series so no cancellation occurs where phi0 = A s(x) exp(i omega0 x).
  Complex<Real> remainder(const SeriesSolution<Real>& series, Real x) const {
    CompensatedComplexSum<Real> acc;
    const std::size_t first = e.size();
    for (std::size_t k = 0; k < series.d.size(); ++k)
      for (std::size_t l = 0; l < series.d.size(); ++l)
        if (k + l >= first) acc.add(series.d[k] * series.d[l] * std::exp(-series.alpha * Real(k + l) * x));
    return amplitude * amplitude * std::exp(Complex<Real>(0, 2) * omega0 * x) * acc.value();
  }

  /// Right surface term D_+' phi0^2(L) / (2 omega0) plus surface_correction
  /// with the growing parts cancelled in closed form, for phi0(L) = A s(L)
  /// exp(i omega0 L) and D_+' = i + excess.
  Complex<Real> combined_surface(const SeriesSolution<Real>& series, Complex<Real> excess) const {
    using C = Complex<Real>;
    const C i(0, 1);
    CompensatedComplexSum<Real> s2m1;
    for (std::size_t k = 0; k < series.d.size(); ++k)
      for (std::size_t l = 0; l < series.d.size(); ++l)
        if (k + l >= 1) s2m1.add(series.d[k] * series.d[l] * std::exp(-series.alpha * Real(k + l) * L));
    const C two_w = Real(2) * omega0;
    CompensatedComplexSum<Real> bracket;
    bracket.add(i * s2m1.value() / two_w);
    bracket.add(excess * (Real(1) + s2m1.value()) / two_w);
    CompensatedComplexSum<Real> lower;
    for (std::size_t m = 0; m < e.size(); ++m) {
      const C k = C(0, 2) * omega0 - alpha * Real(m);
      if (m >= 1) bracket.add(e[m] * std::exp(-alpha * Real(m) * L) / k);
      lower.add(e[m] * std::exp(k * from) / k);
    }
    return amplitude * amplitude * (std::exp(C(0, 2) * omega0 * L) * bracket.value() - lower.value());
  }
};

/// Builds the subtraction term. `series` supplies d_k for the subasymptotic
/// terms (terms = 0 keeps the leading exponential only).
template <class Real>
AsymptoticSubtraction<Real> asymptotic_subtraction(const LogDerivProfile<Real>& prof, Complex<Real> omega0,
                                                   Complex<Real> amplitude, Real L, int terms = 0,
                                                   const SeriesSolution<Real>* series = nullptr,
                                                   Real amplitude_tol = Real(1e-6)) {
  using C = Complex<Real>;
  require(terms == 0 || series != nullptr, ErrorCode::invalid_argument, "subasymptotic terms need series data");
  AsymptoticSubtraction<Real> s;
  s.omega0 = omega0;
  s.amplitude = amplitude;
  s.alpha = series ? series->alpha : Real(0);
  s.L = L;
  s.from = prof.lo();
  s.e.assign(static_cast<std::size_t>(terms) + 1, C(0));
  for (int m = 0; m <= terms; ++m) {
    C acc = 0;
    for (int k = 0; k <= m; ++k) {
      const auto dk = series && static_cast<std::size_t>(k) < series->d.size() ? series->d[k] : C(k == 0 ? 1 : 0);
      const auto dl = series && static_cast<std::size_t>(m - k) < series->d.size() ? series->d[m - k]
                                                                                   : C(m - k == 0 ? 1 : 0);
      acc += dk * dl;
    }
    s.e[m] = acc;
  }
  // Amplitude consistency with the profile end.
  C expected = 1;
  if (series) {
    CompensatedComplexSum<Real> sum;
    for (std::size_t k = 0; k < series->d.size(); ++k) sum.add(series->d[k] * std::exp(-series->alpha * Real(k) * L));
    expected = sum.value();
  }
  const C measured = prof.edges.back().phi * std::exp(-C(0, 1) * omega0 * prof.hi());
  if (std::abs(measured - amplitude * expected) > amplitude_tol * std::abs(amplitude))
    fail(ErrorCode::bad_amplitude, "outgoing amplitude inconsistent with the profile end");
  CompensatedComplexSum<Real> corr;
  for (std::size_t m = 0; m < s.e.size(); ++m) {
    const C k = C(0, 2) * omega0 - s.alpha * Real(m);
    corr.add(s.e[m] * (std::exp(k * L) - std::exp(k * s.from)) / k);
  }
  s.surface_correction = amplitude * amplitude * corr.value();
  return s;
}

/// Outgoing amplitude A with phi0(x) ~ A exp(i omega0 x): read off the series
/// solution at the profile end, or fitted over the last tenth of a tail-free
/// profile (consistency checked to amplitude_tol).
template <class Real>
Complex<Real> outgoing_amplitude(const LogDerivProfile<Real>& prof, const SeriesSolution<Real>* series,
                                 Real amplitude_tol = Real(1e-6)) {
  using C = Complex<Real>;
  const C w = prof.omega;
  if (series) {
    const auto sw = series_wave(*series, prof.hi());
    return prof.edges.back().phi / sw.phi;
  }
  const Real start = prof.hi() - (prof.hi() - prof.lo()) / 10;
  CompensatedComplexSum<Real> acc;
  std::vector<C> vals;
  for (const auto& p : prof.panels)
    for (const auto& n : p.nodes)
      if (n.x >= start) vals.push_back(n.phi * std::exp(-C(0, 1) * w * n.x));
  vals.push_back(prof.edges.back().phi * std::exp(-C(0, 1) * w * prof.hi()));
  for (const auto& v : vals) acc.add(v);
  const C mean = acc.value() / Real(vals.size());
  for (const auto& v : vals)
    if (std::abs(v - mean) > amplitude_tol * std::abs(mean))
      fail(ErrorCode::bad_amplitude, "phi0 exp(-i omega0 x) is not constant near the profile end");
  return mean;
}

template <class Real>
struct GeneralizedNorm {
  Complex<Real> value;
  Complex<Real> integral_part;
  Complex<Real> surface_part;
  Real L_minus = 0, L_plus = 0;
  Real digits_lost = 0;
  // Before any asymptotic subtraction.
  Complex<Real> raw_integral;
  Complex<Real> raw_surface;
  Real raw_digits_lost = 0;
  bool subtracted = false;
  int subasymptotic_terms = 0;
  Complex<Real> amplitude;
};

template <class Real>
struct NormOptions {
  bool auto_subtract = true;
  Real subtract_threshold = 4;  // digits
  Real precision_limit = 12;    // digits
  int subasymptotic_terms = 0;
  Real degenerate_ratio = Real(1e-10);
  Real amplitude_tol = Real(1e-6);
  int series_terms = 8;  // d_k used for the amplitude and subasymptotic terms
};

namespace detail {

template <class Real>
std::optional<SeriesSolution<Real>> right_series(const PotentialSpec<Real>* v, Complex<Real> omega, int terms) {
  if (!v || !v->right_tail) return std::nullopt;
  return series_coefficients(*v->right_tail, omega, terms);
}

template <class Real>
bool left_is_outgoing(const LogDerivProfile<Real>& prof) {
  return prof.left == LeftBoundary::outgoing;
}

}  // namespace detail

/// Generalized norm: integral of phi0^2 over the profile plus the surface
/// terms (D_+' phi0^2(L_+) - D_-' phi0^2(L_-)) / (2 omega0), scaled to the
/// full line for parity-reduced profiles. Asymptotic subtraction engages when
/// the two parts cancel by more than the configured number of digits.
template <class Real>
GeneralizedNorm<Real> generalized_norm(const LogDerivProfile<Real>& prof, const MatchData<Real>& right,
                                       const std::type_identity_t<std::optional<MatchData<Real>>>& left = std::nullopt,
                                       const std::type_identity_t<NormOptions<Real>>& opts = {},
                                       const std::type_identity_t<PotentialSpec<Real>>* potential = nullptr) {
  using C = Complex<Real>;
  require(prof.converged, ErrorCode::non_converged_profile,
          "profile does not satisfy the outgoing condition (mismatch " +
              std::to_string(static_cast<double>(prof.boundary_mismatch)) + ")");
  const C w0 = prof.omega;
  const Real m = prof.mirror_factor;
  GeneralizedNorm<Real> g;
  g.L_minus = prof.lo();
  g.L_plus = prof.hi();
  g.raw_integral = m * prof.integrate(prof.phi_sq_values());
  const C right_surface = right.d_omega * prof.phi_sq_hi() / (Real(2) * w0);
  C left_surface = 0;
  if (detail::left_is_outgoing(prof)) {
    require(left.has_value(), ErrorCode::invalid_argument, "outgoing left end needs left match data");
    left_surface = -left->d_omega * prof.phi_sq_lo() / (Real(2) * w0);
  }
  g.raw_surface = m * (right_surface + left_surface);
  g.integral_part = g.raw_integral;
  g.surface_part = g.raw_surface;
  g.value = g.raw_integral + g.raw_surface;
  g.raw_digits_lost = digits_lost(g.raw_integral, g.raw_surface, g.value);
  g.digits_lost = g.raw_digits_lost;
  Real abs_integrand = 0;
  for (const auto& p : prof.panels) abs_integrand += m * p.quad_scale;

  // The subtracted integrand also scales the degeneracy test: the raw
  // integral of |phi0^2| grows without bound with L_+.
  const bool wanted = opts.auto_subtract && g.raw_digits_lost > opts.subtract_threshold;
  std::optional<AsymptoticSubtraction<Real>> sub;
  const auto series = detail::right_series(potential, w0, std::max(opts.series_terms, opts.subasymptotic_terms));
  const SeriesSolution<Real>* sp = series ? &*series : nullptr;
  const int terms = sp ? opts.subasymptotic_terms : 0;
  try {
    const C amp = outgoing_amplitude(prof, sp, opts.amplitude_tol);
    sub = asymptotic_subtraction(prof, w0, amp, prof.hi(), terms, sp, opts.amplitude_tol);
  } catch (const Error& e) {
    if (wanted || e.code() != ErrorCode::bad_amplitude) throw;
  }
  if (sub) {
    const auto samples = prof.phi_sq_values();
    const auto grid = prof.grid();
    const auto& rule = panel_rule<Real>();
    std::vector<C> mod(samples.size());
    Real abs_mod = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const bool filled = sp && prof.panels[i / kPanelNodes].series_filled;
      mod[i] = filled ? sub->remainder(*sp, grid[i]) : samples[i] - (*sub)(grid[i]);
    }
    for (std::size_t p = 0; p < prof.panels.size(); ++p)
      for (std::size_t i = 0; i < kPanelNodes; ++i)
        abs_mod += m * std::abs(mod[p * kPanelNodes + i]) * rule.kronrod[i] * prof.panels[p].half_width();
    abs_integrand = std::min(abs_integrand, abs_mod);
    if (wanted) {
      g.integral_part = m * prof.integrate(mod);
      const bool closed = sp && right.source == MatchSource::tail_series && right.radius == sub->L;
      const C combined = closed ? sub->combined_surface(*sp, right.d_omega_excess)
                                : right_surface + sub->surface_correction;
      g.surface_part = m * (combined + left_surface);
      g.value = g.integral_part + g.surface_part;
      g.digits_lost = digits_lost(g.integral_part, g.surface_part, g.value);
      g.subtracted = true;
      g.subasymptotic_terms = terms;
      g.amplitude = sub->amplitude;
    }
  }
  if (std::abs(g.value) < opts.degenerate_ratio * abs_integrand)
    fail(ErrorCode::degenerate_norm, "generalized norm " + std::to_string(static_cast<double>(std::abs(g.value))) +
                                         " vanishes relative to its integrand " +
                                         std::to_string(static_cast<double>(abs_integrand)));
  if (g.digits_lost > opts.precision_limit)
    fail(ErrorCode::precision_exhausted, std::to_string(static_cast<double>(g.digits_lost)) +
                                             " digits lost in the generalized norm; enable asymptotic subtraction");
  return g;
}

/// Same norm with the leading (and optional subasymptotic) outgoing terms
/// removed explicitly, independent of the cancellation threshold.
template <class Real>
GeneralizedNorm<Real> generalized_norm_subtracted(const LogDerivProfile<Real>& prof, const MatchData<Real>& right,
                                                  const PotentialSpec<Real>& potential, int subasymptotic_terms = 0,
                                                  NormOptions<Real> opts = {}) {
  opts.auto_subtract = true;
  opts.subtract_threshold = -1;
  opts.subasymptotic_terms = subasymptotic_terms;
  return generalized_norm(prof, right, std::nullopt, opts, &potential);
}

template <class Real>
struct MatrixElement {
  Complex<Real> value;
  Complex<Real> integral_part;
  Complex<Real> surface_part;
  Real digits_lost = 0;
};

/// <phi0|Vn|phi0> = integral of Vn phi0^2 - Delta_+ phi0^2(L_+) + Delta_- phi0^2(L_-).
template <class Real>
MatrixElement<Real> matrix_element(const std::vector<Complex<Real>>& vn, const LogDerivProfile<Real>& prof,
                                   Complex<Real> delta_plus, Complex<Real> delta_minus) {
  using C = Complex<Real>;
  require(prof.converged, ErrorCode::non_converged_profile, "profile does not satisfy the outgoing condition");
  require(vn.size() == prof.size(), ErrorCode::grid_mismatch, "V_n samples do not match the profile grid");
  const Real m = prof.mirror_factor;
  std::vector<C> integrand(vn.size());
  for (std::size_t i = 0; i < vn.size(); ++i) integrand[i] = vn[i] * prof.node(i).phi_sq;
  MatrixElement<Real> me;
  me.integral_part = m * prof.integrate(integrand);
  C surface = -delta_plus * prof.phi_sq_hi();
  if (detail::left_is_outgoing(prof)) surface += delta_minus * prof.phi_sq_lo();
  me.surface_part = m * surface;
  me.value = me.integral_part + me.surface_part;
  me.digits_lost = digits_lost(me.integral_part, me.surface_part, me.value);
  return me;
}

template <class Real>
Complex<Real> order_shift(Complex<Real> me, const GeneralizedNorm<Real>& norm, Complex<Real> omega0) {
  if (!(std::abs(norm.value) > Real(0)) || !std::isfinite(std::abs(norm.value)))
    fail(ErrorCode::degenerate_norm, "generalized norm vanishes");
  return me / (Real(2) * omega0 * norm.value);
}

template <class Real>
struct OrderData {
  int n = 0;
  Complex<Real> omega;
  std::vector<Complex<Real>> f;        // f_n at the profile nodes
  Complex<Real> f_hi;                  // f_n at L_+
  std::vector<Complex<Real>> v;        // V_n at the profile nodes
  Complex<Real> delta_plus, delta_minus;
  MatrixElement<Real> me;
  Real boundary_consistency = 0;       // relative mismatch of f_n at L_+
};

/// V_n = -sum_{i=1}^{n-1} [f_i f_{n-i} + omega_i omega_{n-i}] on the shared grid.
template <class Real>
std::vector<Complex<Real>> effective_potential(const std::vector<OrderData<Real>>& lower) {
  using C = Complex<Real>;
  const std::size_t n = lower.size() + 1;
  require(n >= 2, ErrorCode::invalid_argument, "effective potential needs at least one lower order");
  const std::size_t size = lower.front().f.size();
  for (const auto& o : lower)
    require(o.f.size() == size, ErrorCode::grid_mismatch, "lower orders live on different grids");
  std::vector<C> out(size, C(0));
  for (std::size_t i = 1; i < n; ++i) {
    const auto& a = lower[i - 1];
    const auto& b = lower[n - i - 1];
    const C ww = a.omega * b.omega;
    for (std::size_t k = 0; k < size; ++k) out[k] -= a.f[k] * b.f[k] + ww;
  }
  return out;
}

/// Delta_n for one side: the mu^n coefficient of D(omega(mu), mu) - D_0(omega0)
/// without its omega_n D_0' part. `omegas` holds omega_1 ... omega_{n-1}.
template <class Real>
Complex<Real> delta_n(int n, const MatchData<Real>& d, const std::vector<Complex<Real>>& omegas) {
  require(n >= 1, ErrorCode::invalid_argument, "order must be positive");
  if (d.exact_all_orders) return Complex<Real>(0);
  if (n > d.mu_orders || n > 2)
    fail(ErrorCode::missing_derivative, "tail data do not provide order " + std::to_string(n));
  if (n == 1) return d.mu1;
  require(omegas.size() >= 1, ErrorCode::invalid_argument, "second order needs omega_1");
  const auto w1 = omegas[0];
  return d.mu2 + w1 * d.mu1_omega + w1 * w1 * d.d2_omega / Real(2);
}

template <class Real>
struct WavefunctionCorrection {
  std::vector<Complex<Real>> f;
  Complex<Real> f_hi;
  Real consistency = 0;
};

/// f_n phi0^2(x) = [omega_n D_-' + Delta_-n] phi0^2(L_-) + integral from L_- to x
/// of (V_n - 2 omega0 omega_n) phi0^2, checked against the right matching
/// condition f_n(L_+) = omega_n D_+' + Delta_+n.
template <class Real>
WavefunctionCorrection<Real> wavefunction_correction(const std::vector<Complex<Real>>& vn,
                                                     const LogDerivProfile<Real>& prof, Complex<Real> omega_n,
                                                     Complex<Real> delta_minus, Complex<Real> d_minus,
                                                     Complex<Real> delta_plus, Complex<Real> d_plus,
                                                     Real tol = Real(1e-6)) {
  using C = Complex<Real>;
  require(vn.size() == prof.size(), ErrorCode::grid_mismatch, "V_n samples do not match the profile grid");
  const C w0 = prof.omega;
  std::vector<C> integrand(vn.size());
  Real scale = 0;
  for (std::size_t i = 0; i < vn.size(); ++i) {
    integrand[i] = (vn[i] - Real(2) * w0 * omega_n) * prof.node(i).phi_sq;
    scale = std::max(scale, std::abs(integrand[i]));
  }
  const C start = detail::left_is_outgoing(prof) ? (omega_n * d_minus + delta_minus) * prof.phi_sq_lo() : C(0);
  auto [cum, total] = prof.cumulative(integrand);
  WavefunctionCorrection<Real> out;
  out.f.resize(vn.size());
  for (std::size_t i = 0; i < vn.size(); ++i) out.f[i] = (start + cum[i]) / prof.node(i).phi_sq;
  const C end = start + total;
  out.f_hi = end / prof.phi_sq_hi();
  const C expected = (omega_n * d_plus + delta_plus) * prof.phi_sq_hi();
  const Real mag = std::max({std::abs(start), std::abs(total), std::abs(expected),
                             scale * (prof.hi() - prof.lo()), std::numeric_limits<Real>::min()});
  out.consistency = std::abs(end - expected) / mag;
  if (out.consistency > tol)
    fail(ErrorCode::inconsistent_shift, "f_n misses the right matching condition by " +
                                            std::to_string(static_cast<double>(out.consistency)) + " (relative)");
  return out;
}

/// Mirror form integrated from L_+ inwards; agrees with wavefunction_correction
/// when omega_n is right.
template <class Real>
std::vector<Complex<Real>> wavefunction_correction_from_right(const std::vector<Complex<Real>>& vn,
                                                              const LogDerivProfile<Real>& prof,
                                                              Complex<Real> omega_n, Complex<Real> delta_plus,
                                                              Complex<Real> d_plus) {
  using C = Complex<Real>;
  const C w0 = prof.omega;
  std::vector<C> integrand(vn.size());
  for (std::size_t i = 0; i < vn.size(); ++i) integrand[i] = (vn[i] - Real(2) * w0 * omega_n) * prof.node(i).phi_sq;
  auto [cum, total] = prof.cumulative(integrand);
  const C end = (omega_n * d_plus + delta_plus) * prof.phi_sq_hi();
  std::vector<C> f(vn.size());
  for (std::size_t i = 0; i < vn.size(); ++i) f[i] = (end - (total - cum[i])) / prof.node(i).phi_sq;
  return f;
}

/// Second-order shift as a single quadrature on the half line with a wall at
/// the origin and a free region beyond a:
///   omega2 = (2 omega0 N)^-1 int W G Psi2 - omega1^2/(2 omega0)
///            + i omega1^2 phi0^2(a) / (4 omega0^2 N),
/// with G(y) = int_0^y W and Psi2(y) = -2 int_y^a phi0^-2.
template <class Real>
Complex<Real> second_order_explicit(const LogDerivProfile<Real>& prof, const GeneralizedNorm<Real>& norm,
                                    const std::vector<Complex<Real>>& w, Complex<Real> omega1, Real a) {
  using C = Complex<Real>;
  if (prof.left != LeftBoundary::dirichlet || prof.mirror_factor != Real(1) ||
      std::abs(prof.hi() - a) > Real(1e-12) * (Real(1) + std::abs(a)) || prof.lo() != Real(0))
    fail(ErrorCode::unsupported_configuration, "explicit second order needs the half line [0, a] with phi(0) = 0");
  require(w.size() == prof.size(), ErrorCode::grid_mismatch, "W samples do not match the profile grid");
  const C w0 = prof.omega;
  const C p = prof.edges.front().dphi;  // phi0'(0)
  const auto grid = prof.grid();
  std::vector<C> regular(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i)
    regular[i] = C(1) / prof.node(i).phi_sq - C(1) / (p * p * grid[i] * grid[i]);
  auto [ucum, utotal] = prof.cumulative(regular);
  auto [gcum, gtotal] = prof.cumulative(w);
  (void)gtotal;
  std::vector<C> kernel(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const C psi2 = Real(-2) * ((utotal - ucum[i]) + (Real(1) / grid[i] - Real(1) / a) / (p * p));
    kernel[i] = w[i] * gcum[i] * psi2;
  }
  const C n = norm.value;
  return prof.integrate(kernel) / (Real(2) * w0 * n) - omega1 * omega1 / (Real(2) * w0) +
         C(0, 1) * omega1 * omega1 * prof.phi_sq_hi() / (Real(4) * w0 * w0 * n);
}

/// phi0^2(x) / <phi0|phi0>, with phi0 interpolated within the profile panels.
template <class Real>
Complex<Real> susceptibility(const LogDerivProfile<Real>& prof, const GeneralizedNorm<Real>& norm, Real x) {
  require(x >= prof.lo() && x <= prof.hi(), ErrorCode::invalid_argument, "x outside the profile");
  const auto& rule = panel_rule<Real>();
  for (const auto& p : prof.panels) {
    if (x < p.lo || x > p.hi) continue;
    std::array<Complex<Real>, kPanelNodes> v{};
    for (std::size_t i = 0; i < kPanelNodes; ++i) v[i] = p.nodes[i].phi;
    const Real t = (x - (p.lo + p.hi) / 2) / p.half_width();
    const Complex<Real> phi = interpolate_panel(rule, v.data(), t);
    return phi * phi / norm.value;
  }
  return prof.phi_sq_hi() / norm.value;
}

template <class Real>
struct ContourOptions {
  Real panel_width = Real(0.5);
  Real rel_tol = Real(1e-14);
  Real growth_limit = Real(1e8);
  int max_panels = 2000;
};

/// Integral of e^{i theta} phi0^2(u e^{i theta}) V(u e^{i theta}) over u in
/// [0, inf), truncated once the integrand has decayed below rel_tol.
template <class Real>
Complex<Real> rotated_contour_me(const std::function<Complex<Real>(Complex<Real>)>& v,
                                 const std::function<Complex<Real>(Complex<Real>)>& phi_sq, Real theta,
                                 const ContourOptions<Real>& opts = {}) {
  using C = Complex<Real>;
  const C dir = std::polar(Real(1), theta);
  auto g = [&](Real u) {
    const C z = u * dir;
    return dir * phi_sq(z) * v(z);
  };
  QuadratureOptions<Real> qo;
  qo.rel_tol = opts.rel_tol;
  CompensatedComplexSum<Real> total;
  Real peak = std::abs(g(Real(0)));
  int quiet = 0;
  for (int k = 0; k < opts.max_panels; ++k) {
    const Real a = opts.panel_width * Real(k), b = a + opts.panel_width;
    qo.abs_tol = opts.rel_tol * std::abs(total.value());
    const auto r = integrate_adaptive<Real>(g, a, b, qo);
    total.add(r.value);
    const Real end = std::abs(g(b));
    if (!std::isfinite(end) || (k > 8 && end > opts.growth_limit * std::max(peak, std::numeric_limits<Real>::min())))
      fail(ErrorCode::bad_angle, "integrand grows along the ray at theta = " + std::to_string(static_cast<double>(theta)));
    peak = std::max(peak, end);
    if (r.absolute <= opts.rel_tol * std::abs(total.value()) && end < peak)
      ++quiet;
    else
      quiet = 0;
    if (quiet >= 3) return total.value();
  }
  fail(ErrorCode::bad_angle, "integrand does not decay along the ray at theta = " +
                                 std::to_string(static_cast<double>(theta)));
}

/// Where a perturbative calculation is carried out.
template <class Real>
struct Domain {
  Real lo = 0;
  Real hi = 0;
  LeftBoundary left = LeftBoundary::outgoing;
  Real mirror_factor = 1;
  Complex<Real> anchor = Complex<Real>(1);
};

template <class Real>
struct PerturbOptions {
  int order = 2;
  ProfileOptions<Real> profile{};
  NormOptions<Real> norm{};
  Real consistency_tol = Real(1e-6);
  // Recompute with L_+ moved by this amount to report L-independence (0 skips).
  Real l_shift = 1;
};

template <class Real>
struct PerturbationResult {
  Complex<Real> omega0;
  std::vector<OrderData<Real>> orders;
  GeneralizedNorm<Real> norm;
  LogDerivProfile<Real> profile;
  MatchData<Real> right;
  std::optional<MatchData<Real>> left;
  Real norm_l_residual = 0;
  std::vector<Real> l_residual;  // per order, relative change of omega_n

  /// Partial sum omega0 + sum_{n <= upto} mu^n omega_n (all orders when upto < 0).
  Complex<Real> omega(Real mu, int upto = -1) const {
    CompensatedComplexSum<Real> acc;
    acc.add(omega0);
    Real p = 1;
    const int n = upto < 0 ? static_cast<int>(orders.size()) : std::min<int>(upto, static_cast<int>(orders.size()));
    for (int k = 0; k < n; ++k) {
      p *= mu;
      acc.add(p * orders[k].omega);
    }
    return acc.value();
  }
};

namespace detail {

template <class Real>
PerturbationResult<Real> perturb_once(const Perturbation<Real>& problem, Complex<Real> omega0,
                                      const Domain<Real>& dom, const PerturbOptions<Real>& opts) {
  using C = Complex<Real>;
  require(opts.order >= 1, ErrorCode::invalid_argument, "order must be at least 1");
  ProfileOptions<Real> po = opts.profile;
  for (Real b : problem.first_order.breakpoints(dom.lo, dom.hi)) po.extra_breaks.push_back(b);
  PerturbationResult<Real> res;
  res.omega0 = omega0;
  res.profile = build_profile(problem.base, omega0, dom.lo, dom.hi, dom.left, po, dom.anchor, dom.mirror_factor);
  const auto& prof = res.profile;
  res.right = match_data(problem.base, omega0, Side::right, dom.hi, po.tail_k_max, problem.tail(Side::right));
  if (dom.left == LeftBoundary::outgoing)
    res.left = match_data(problem.base, omega0, Side::left, dom.lo, po.tail_k_max, problem.tail(Side::left));
  res.norm = generalized_norm(prof, res.right, res.left, opts.norm, &problem.base);
  const C dm = res.left ? res.left->d_omega : C(0);
  std::vector<C> omegas;
  if (opts.order >= 2 && problem.exact)
    fail(ErrorCode::missing_derivative, "the potential is not linear in mu; second-order data are unavailable");
  for (int n = 1; n <= opts.order; ++n) {
    OrderData<Real> od;
    od.n = n;
    od.v = n == 1 ? prof.sample([&](Real x) { return problem.first_order(x); }) : effective_potential(res.orders);
    od.delta_plus = delta_n(n, res.right, omegas);
    od.delta_minus = res.left ? delta_n(n, *res.left, omegas) : C(0);
    od.me = matrix_element(od.v, prof, od.delta_plus, od.delta_minus);
    od.omega = order_shift(od.me.value, res.norm, omega0);
    const auto wc = wavefunction_correction(od.v, prof, od.omega, od.delta_minus, dm, od.delta_plus,
                                            res.right.d_omega, opts.consistency_tol);
    od.f = wc.f;
    od.f_hi = wc.f_hi;
    od.boundary_consistency = wc.consistency;
    omegas.push_back(od.omega);
    res.orders.push_back(std::move(od));
  }
  return res;
}

}  // namespace detail

/// Runs the LPT recursion to the requested order and reports the
/// L-independence of the norm and of every omega_n.
template <class Real>
PerturbationResult<Real> perturb(const Perturbation<Real>& problem, Complex<Real> omega0, const Domain<Real>& dom,
                                 const PerturbOptions<Real>& opts = {}) {
  auto res = detail::perturb_once(problem, omega0, dom, opts);
  res.l_residual.assign(res.orders.size(), Real(0));
  if (opts.l_shift != Real(0)) {
    Domain<Real> moved = dom;
    moved.hi = dom.hi + opts.l_shift;
    PerturbOptions<Real> o2 = opts;
    o2.l_shift = 0;
    const auto alt = detail::perturb_once(problem, omega0, moved, o2);
    res.norm_l_residual = std::abs(alt.norm.value - res.norm.value) / std::abs(res.norm.value);
    for (std::size_t n = 0; n < res.orders.size(); ++n) {
      const Real mag = std::max(std::abs(res.orders[n].omega), std::numeric_limits<Real>::min());
      res.l_residual[n] = std::abs(alt.orders[n].omega - res.orders[n].omega) / mag;
      if (res.orders[n].omega == Complex<Real>(0) && alt.orders[n].omega == Complex<Real>(0)) res.l_residual[n] = 0;
    }
  }
  return res;
}

}  // namespace qnmlpt
