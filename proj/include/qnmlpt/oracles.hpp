#pragma once

#include <cmath>

#include "qnmlpt/error.hpp"
#include "qnmlpt/numeric.hpp"
#include "qnmlpt/riccati.hpp"
#include "qnmlpt/special_functions.hpp"

namespace qnmlpt {

/// Closed forms for the j = 0, 1 states of V0 cosh^-2 x and its width
/// perturbation. All integrals are full-line values continued analytically
/// to the quasinormal frequency.
template <class Real>
struct PtExact {
  using C = Complex<Real>;
  int j = 0;
  Real v0 = 0;
  Real sigma = 0;
  C omega0, omega1, norm, matrix_element;
  C amplitude;  // phi0(x) ~ amplitude * exp(i omega0 x) as x -> +inf

  static C tanh_of(C z) {
    const Real sgn = z.real() >= 0 ? Real(1) : Real(-1);
    const C e = std::exp(Real(-2) * sgn * z);
    return sgn * (Real(1) - e) / (Real(1) + e);
  }
  static C sech_sq(C z) {
    const Real sgn = z.real() >= 0 ? Real(1) : Real(-1);
    const C e = std::exp(Real(-2) * sgn * z);
    return Real(4) * e / ((Real(1) + e) * (Real(1) + e));
  }

  C phi(C z) const {
    const C base = std::exp(C(0, 1) * omega0 * log_cosh(z));
    return j == 0 ? base : tanh_of(z) * base;
  }
  C phi_sq(C z) const {
    const C base = std::exp(C(0, 2) * omega0 * log_cosh(z));
    if (j == 0) return base;
    const C t = tanh_of(z);
    return t * t * base;
  }
  C log_derivative(C z) const {
    const C t = tanh_of(z);
    const C f0 = C(0, 1) * omega0 * t;
    if (j == 0) return f0;
    return sech_sq(z) / t + f0;
  }
  C potential(C z) const { return v0 * sech_sq(z); }
  C first_order(C z) const { return Real(-2) * v0 * z * tanh_of(z) * sech_sq(z); }
};

template <class Real>
PtExact<Real> pt_exact(int j, Real v0) {
  using C = Complex<Real>;
  require(j == 0 || j == 1, ErrorCode::invalid_argument, "closed forms exist for j = 0 and j = 1");
  require(v0 > Real(0.25), ErrorCode::regime_violation, "needs V0 > 1/4");
  PtExact<Real> e;
  e.j = j;
  e.v0 = v0;
  e.sigma = std::sqrt(v0 - Real(0.25));
  const Real s = e.sigma;
  const C is(0, s);
  const Real half = Real(0.5);
  const Real sqrt_pi = std::sqrt(pi_v<Real>);
  e.omega0 = C(s, -(Real(j) + half));
  // d omega / d mu of sqrt(V0 - (1+mu)^2/4) - i (j + 1/2)(1 + mu) at mu = 0.
  e.omega1 = C(Real(-1) / (Real(4) * s), -(Real(j) + half));
  if (j == 0) {
    e.norm = complex_beta(C(half), -half - is);
    e.matrix_element = -sqrt_pi * v0 * complex_gamma(half - is) / ((half - is) * complex_gamma(C(1) - is));
  } else {
    e.norm = complex_beta(C(Real(1.5)), Real(-1.5) - is);
    e.matrix_element = (v0 / (is - half)) * (complex_beta(C(Real(1.5)), -half - is) -
                                             sqrt_pi * complex_gamma(-half - is) / ((half + is) * complex_gamma(-is)));
  }
  e.amplitude = std::exp(-C(0, 1) * e.omega0 * std::log(Real(2)));
  return e;
}

/// Closed forms for the half-line step V0 on (0, b) with outer radius a,
/// normalised so that phi0 = sin(qx) inside the step.
template <class Real>
struct StepExact {
  using C = Complex<Real>;
  Real v0 = 0, b = 0, a = 0;
  C q, omega0, norm;

  C phi(Real x) const {
    if (x <= b) return std::sin(q * x);
    return std::sin(q * b) * std::exp(C(0, 1) * omega0 * (x - b));
  }
  C phi_sq(Real x) const {
    const C p = phi(x);
    return p * p;
  }

  C psi2_constant() const {
    const C s = std::sin(q * b);
    return C(0, 1) / (omega0 * s * s);
  }

  /// -2 times the integral of phi0^-2 from y to a.
  C psi2(Real y) const {
    const C c = psi2_constant();
    if (y < b)
      return (Real(2) / q) * (Real(1) / std::tan(q * b) - Real(1) / std::tan(q * y)) +
             c * (Real(1) - std::exp(C(0, 2) * omega0 * (b - a)));
    return c * (std::exp(C(0, -2) * omega0 * (y - b)) - std::exp(C(0, -2) * omega0 * (a - b)));
  }

  /// Integral of phi0^2 over (lo, hi), split at b.
  C phi_sq_integral(Real lo, Real hi) const {
    C total = 0;
    const Real in_hi = std::min(hi, b);
    if (lo < in_hi) {
      auto prim = [&](Real x) { return x / Real(2) - std::sin(Real(2) * q * x) / (Real(4) * q); };
      total += prim(in_hi) - prim(lo);
    }
    const Real out_lo = std::max(lo, b);
    if (out_lo < hi) {
      const C s = std::sin(q * b);
      const C k = C(0, 2) * omega0;
      total += s * s * (std::exp(k * (hi - b)) - std::exp(k * (out_lo - b))) / k;
    }
    return total;
  }

  /// First-order shift for a unit bump of width w at x0 inside (0, a).
  C first_order_bump(Real x0, Real w) const {
    return phi_sq_integral(x0 - w / 2, x0 + w / 2) / (Real(2) * omega0 * norm);
  }
};

template <class Real>
StepExact<Real> step_exact(Real v0, Real b, Real a, int root_index) {
  require(v0 > 0 && b > 0 && a > b, ErrorCode::invalid_argument, "step needs V0 > 0 and 0 < b < a");
  const auto root = step_root(v0, b, root_index);
  StepExact<Real> e;
  e.v0 = v0;
  e.b = b;
  e.a = a;
  e.q = root.q;
  e.omega0 = root.omega.value;
  const auto qb = e.q * b;
  const auto s = std::sin(qb);
  e.norm = (b / Real(2)) * (Real(1) - std::sin(Real(2) * qb) / (Real(2) * qb) - s * s * std::tan(qb) / qb);
  return e;
}

}  // namespace qnmlpt
