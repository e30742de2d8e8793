#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "qnmlpt/error.hpp"
#include "qnmlpt/numeric.hpp"
#include "qnmlpt/potentials.hpp"

namespace qnmlpt {

/// Outgoing solution in an exponential tail,
///   phi(x) = exp(i omega s) sum_k d_k exp(-k alpha s),   s = x (right), s = -x (left).
template <class Real>
struct SeriesSolution {
  Real alpha = 0;
  std::vector<Complex<Real>> d;
  Complex<Real> omega;
  Side side = Side::right;
};

namespace detail {

template <class Real>
Real resonance_guard(const Complex<Real>& omega) {
  return Real(1e-8) * std::max(Real(1), std::abs(omega));
}

template <class Real>
const Complex<Real>& leading(const Complex<Real>& v) {
  return v;
}
template <class Real>
const Complex<Real>& leading(const Taylor2<Complex<Real>>& v) {
  return v.c00;
}

template <class Real>
Complex<Real> one_like(const Complex<Real>&) {
  return Complex<Real>(1);
}
template <class Real>
Taylor2<Complex<Real>> one_like(const Taylor2<Complex<Real>>&) {
  return Taylor2<Complex<Real>>::constant(Complex<Real>(1));
}

/// d_k = scale / (alpha k (alpha k - 2 i omega)) sum_{m<k} d_m c_{k-m}, generic
/// over plain complex values and Taylor jets.
template <class Real, class T>
std::vector<T> series_recursion(const T& omega, const T& alpha, const T& scale, const std::vector<T>& c,
                                std::size_t k_max) {
  using C = Complex<Real>;
  const C i(0, 1);
  const Real guard = resonance_guard<Real>(leading<Real>(omega));
  std::vector<T> d;
  d.reserve(k_max + 1);
  d.push_back(one_like(omega));
  for (std::size_t k = 1; k <= k_max; ++k) {
    const T ak = alpha * C(Real(k));
    const T den = ak * (ak - omega * (C(2) * i));
    const C den_lead = leading<Real>(ak) - C(2) * i * leading<Real>(omega);
    if (std::abs(den_lead) < guard)
      fail(ErrorCode::resonant_denominator, "k alpha - 2 i omega vanishes at k = " + std::to_string(k));
    T acc{};
    for (std::size_t m = 0; m < k; ++m) {
      const std::size_t j = k - m;
      if (j <= c.size()) acc += d[m] * c[j - 1];
    }
    d.push_back(scale * acc / den);
  }
  return d;
}

/// Right-side logarithmic derivative of the truncated series at distance s.
template <class Real, class T>
T series_ratio(const std::vector<T>& d, const T& omega, const T& alpha, Real s) {
  using C = Complex<Real>;
  using std::exp;
  const C i(0, 1);
  T num{}, den{};
  Real magnitude = 0;
  for (std::size_t k = 0; k < d.size(); ++k) {
    const T e = exp(alpha * C(-Real(k) * s));
    const T term = d[k] * e;
    den += term;
    num += (omega * i - alpha * C(Real(k))) * term;
    magnitude += std::abs(leading<Real>(term));
  }
  if (!(std::abs(leading<Real>(den)) > Real(1e-12) * magnitude))
    fail(ErrorCode::pole_in_tail, "series denominator vanishes at s = " + std::to_string(static_cast<double>(s)));
  return num / den;
}

/// series_ratio minus its free value i omega, summed without that term.
template <class Real, class T>
T series_ratio_excess(const std::vector<T>& d, const T& alpha, Real s) {
  using C = Complex<Real>;
  using std::exp;
  T num{}, den{};
  for (std::size_t k = 0; k < d.size(); ++k) {
    const T term = d[k] * exp(alpha * C(-Real(k) * s));
    den += term;
    num += alpha * C(-Real(k)) * term;
  }
  return num / den;
}

}  // namespace detail

template <class Real>
SeriesSolution<Real> series_coefficients(const TailExpansion<Real>& tail, Complex<Real> omega, int k_max,
                                         Side side = Side::right) {
  using C = Complex<Real>;
  require(k_max >= 0, ErrorCode::invalid_argument, "k_max must be non-negative");
  require(tail.alpha > 0, ErrorCode::invalid_argument, "tail exponent must be positive");
  std::vector<C> c(tail.coefficients.begin(), tail.coefficients.end());
  SeriesSolution<Real> sol;
  sol.alpha = tail.alpha;
  sol.omega = omega;
  sol.side = side;
  sol.d = detail::series_recursion<Real, C>(omega, C(tail.alpha), C(tail.scale), c, static_cast<std::size_t>(k_max));
  return sol;
}

/// phi, phi' and phi'' of the series solution at x (unit leading amplitude).
template <class Real>
struct SeriesWave {
  Complex<Real> phi, dphi, d2phi;
};

template <class Real>
SeriesWave<Real> series_wave(const SeriesSolution<Real>& sol, Real x) {
  using C = Complex<Real>;
  const C i(0, 1);
  const Real sign = sol.side == Side::right ? Real(1) : Real(-1);
  const Real s = sign * x;
  CompensatedComplexSum<Real> p, dp, d2p;
  for (std::size_t k = 0; k < sol.d.size(); ++k) {
    const C rate = i * sol.omega - sol.alpha * Real(k);
    const C term = sol.d[k] * std::exp(rate * s);
    p.add(term);
    dp.add(rate * term);
    d2p.add(rate * rate * term);
  }
  return {p.value(), sign * dp.value(), d2p.value()};
}

template <class Real>
Complex<Real> series_logderiv(const SeriesSolution<Real>& sol, Real x) {
  using C = Complex<Real>;
  const Real sign = sol.side == Side::right ? Real(1) : Real(-1);
  return sign * detail::series_ratio<Real, C>(sol.d, sol.omega, C(sol.alpha), sign * x);
}

/// Born iterates of the right-side log-derivative as exponential sums.
template <class Real>
struct BornTerms {
  struct Term {
    Real exponent;
    Complex<Real> coefficient;
  };
  int order = 0;
  Complex<Real> omega;
  std::vector<Term> first;
  std::vector<Term> second;

  Complex<Real> evaluate(Real s, int upto) const {
    CompensatedComplexSum<Real> acc;
    acc.add(Complex<Real>(0, 1) * omega);
    if (upto >= 1)
      for (const auto& t : first) acc.add(t.coefficient * std::exp(-t.exponent * s));
    if (upto >= 2)
      for (const auto& t : second) acc.add(t.coefficient * std::exp(-t.exponent * s));
    return acc.value();
  }
};

template <class Real>
BornTerms<Real> born_terms(const TailExpansion<Real>& tail, Complex<Real> omega, int order) {
  using C = Complex<Real>;
  require(order >= 0 && order <= 2, ErrorCode::invalid_argument, "Born order must be 0, 1 or 2");
  const C two_i_omega = C(0, 2) * omega;
  const Real guard = detail::resonance_guard<Real>(omega);
  auto denominator = [&](Real exponent, std::size_t label) {
    const C den = exponent - two_i_omega;
    if (std::abs(den) < guard)
      fail(ErrorCode::resonant_denominator, "Born denominator vanishes at k = " + std::to_string(label));
    return den;
  };
  BornTerms<Real> bt;
  bt.order = order;
  bt.omega = omega;
  const std::size_t n = tail.coefficients.size();
  if (order >= 1)
    for (std::size_t k = 1; k <= n; ++k) {
      const Real ak = tail.alpha * Real(k);
      bt.first.push_back({ak, -tail.scale * tail.coefficients[k - 1] / denominator(ak, k)});
    }
  if (order >= 2)
    for (std::size_t k = 1; k <= n; ++k)
      for (std::size_t l = 1; l <= n; ++l) {
        const Real ak = tail.alpha * Real(k), al = tail.alpha * Real(l);
        const C coef = tail.scale * tail.scale * tail.coefficients[k - 1] * tail.coefficients[l - 1] /
                       (denominator(ak, k) * denominator(al, l) * denominator(ak + al, k + l));
        bt.second.push_back({ak + al, coef});
      }
  return bt;
}

/// Born approximation of the outgoing log-derivative at x, valid where the
/// tail is weak compared with |alpha - 2 i omega|.
template <class Real>
Complex<Real> born_logderiv(const TailExpansion<Real>& tail, Complex<Real> omega, Real x, int order,
                            Side side = Side::right) {
  using C = Complex<Real>;
  const Real sign = side == Side::right ? Real(1) : Real(-1);
  const Real s = sign * x;
  if (order == 0) return sign * C(0, 1) * omega;
  const auto terms = born_terms(tail, omega, order);
  Real strength = 0;
  for (std::size_t k = 1; k <= tail.coefficients.size(); ++k)
    strength += std::abs(tail.scale * tail.coefficients[k - 1]) * std::exp(-tail.alpha * Real(k) * s);
  if (!(strength < std::abs(tail.alpha - C(0, 2) * omega)))
    fail(ErrorCode::tail_region_too_close, "tail too strong for the Born series at x = " +
                                               std::to_string(static_cast<double>(x)));
  return sign * terms.evaluate(s, order);
}

enum class MatchSource { tail_series, born, exact, free_wave };

/// Outgoing log-derivative at a matching radius together with its Taylor
/// coefficients in omega (about omega0) and in the perturbation strength mu.
template <class Real>
struct MatchData {
  Side side = Side::right;
  Real radius = 0;
  MatchSource source = MatchSource::free_wave;
  Complex<Real> value;     // D(omega0)
  Complex<Real> d_omega;   // D'(omega0)
  Complex<Real> d_omega_excess;  // D'(omega0) minus the free-wave value, summed directly
  Complex<Real> d2_omega;  // D''(omega0)
  Complex<Real> mu1;       // D_1(omega0)
  Complex<Real> mu1_omega; // D_1'(omega0)
  Complex<Real> mu2;       // D_2(omega0)
  int mu_orders = 0;       // highest mu order with exact data
  bool exact_all_orders = false;  // every higher coefficient vanishes

  Taylor2<Complex<Real>> jet() const {
    return {value, d_omega, mu1, d2_omega / Real(2), mu1_omega, mu2};
  }
};

template <class Real>
MatchData<Real> free_wave_match(Complex<Real> omega0, Side side, Real radius) {
  const Real sign = side == Side::right ? Real(1) : Real(-1);
  MatchData<Real> m;
  m.side = side;
  m.radius = radius;
  m.source = MatchSource::free_wave;
  m.value = sign * Complex<Real>(0, 1) * omega0;
  m.d_omega = sign * Complex<Real>(0, 1);
  m.mu_orders = std::numeric_limits<int>::max();
  m.exact_all_orders = true;
  return m;
}

/// Match data from the tail series with derivatives obtained by propagating
/// Taylor jets in (omega, mu) through the recursion.
template <class Real>
MatchData<Real> matchdata_from_tail(const TailExpansion<Real>& tail, Complex<Real> omega0, Real L, int k_max,
                                    Side side = Side::right,
                                    const std::optional<TailPerturbation<Real>>& perturbation = std::nullopt) {
  using C = Complex<Real>;
  using J = Taylor2<C>;
  require(k_max >= 0, ErrorCode::invalid_argument, "k_max must be non-negative");
  const Real sign = side == Side::right ? Real(1) : Real(-1);
  const Real s = sign * L;
  J omega = J::variable_w(omega0);
  J alpha = J::constant(C(tail.alpha));
  J scale = J::constant(C(tail.scale));
  std::vector<J> c;
  for (const auto& ck : tail.coefficients) c.push_back(J::constant(ck));
  if (perturbation) {
    alpha.c01 = C(perturbation->d_alpha);
    scale.c01 = C(perturbation->d_scale);
    for (std::size_t k = 0; k < c.size() && k < perturbation->d_coefficients.size(); ++k)
      c[k].c01 = perturbation->d_coefficients[k];
  }
  const auto d = detail::series_recursion<Real, J>(omega, alpha, scale, c, static_cast<std::size_t>(k_max));
  const J f = detail::series_ratio<Real, J>(d, omega, alpha, s);
  MatchData<Real> m;
  m.side = side;
  m.radius = L;
  m.source = MatchSource::tail_series;
  m.value = sign * f.c00;
  m.d_omega = sign * f.c10;
  m.d_omega_excess = sign * detail::series_ratio_excess<Real, J>(d, alpha, s).c10;
  m.d2_omega = sign * Real(2) * f.c20;
  m.mu1 = sign * f.c01;
  m.mu1_omega = sign * f.c11;
  m.mu2 = sign * f.c02;
  m.mu_orders = (!perturbation || perturbation->linear_in_mu()) ? 2 : 1;
  return m;
}

}  // namespace qnmlpt
