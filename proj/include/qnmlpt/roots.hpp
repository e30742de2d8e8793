#pragma once

#include <cmath>
#include <limits>
#include <string>

#include "qnmlpt/error.hpp"
#include "qnmlpt/numeric.hpp"

namespace qnmlpt {

template <class Real>
struct RootOptions {
  Real tol = Real(1e-10);  // on |m(omega)|
  int max_iterations = 60;
  Real derivative_step = Real(1e-7);  // relative to max(1, |omega|)
};

template <class Real>
struct RootResult {
  Complex<Real> root;
  Complex<Real> residual;
  int iterations = 0;
  bool used_muller = false;
};

namespace detail {

template <class Real, class F>
RootResult<Real> muller(const F& m, Complex<Real> x0, Complex<Real> x1, Complex<Real> x2,
                        const RootOptions<Real>& opts, int used) {
  using C = Complex<Real>;
  C f0 = m(x0), f1 = m(x1), f2 = m(x2);
  Real last_step = std::numeric_limits<Real>::infinity();
  for (int it = used; it < opts.max_iterations; ++it) {
    const C h1 = x1 - x0, h2 = x2 - x1;
    const C d1 = (f1 - f0) / h1, d2 = (f2 - f1) / h2;
    const C a = (d2 - d1) / (h2 + h1);
    const C b = a * h2 + d2;
    const C disc = std::sqrt(b * b - Real(4) * f2 * a);
    const C den = std::abs(b + disc) > std::abs(b - disc) ? b + disc : b - disc;
    const C step = den == C(0) ? C(std::abs(x2) + 1) * Real(1e-3) : Real(-2) * f2 / den;
    x0 = x1;
    f0 = f1;
    x1 = x2;
    f1 = f2;
    x2 += step;
    if (!std::isfinite(std::abs(x2))) break;
    f2 = m(x2);
    const Real s = std::abs(step);
    if (std::abs(f2) <= opts.tol &&
        (s <= Real(8) * std::numeric_limits<Real>::epsilon() * std::abs(x2) || s >= last_step / 2))
      return {x2, f2, it + 1, true};
    last_step = s;
  }
  fail(ErrorCode::no_root, "Muller iteration did not converge; last iterate " +
                               std::to_string(static_cast<double>(x2.real())) + " + " +
                               std::to_string(static_cast<double>(x2.imag())) + "i");
}

}  // namespace detail

/// Complex root of an analytic mismatch function: Newton with a central
/// difference derivative, falling back to Muller's method on stall.
template <class Real, class F>
RootResult<Real> find_root(const F& m, Complex<Real> guess, const RootOptions<Real>& opts = {}) {
  using C = Complex<Real>;
  C x = guess;
  C fx = m(x);
  Real last_step = std::numeric_limits<Real>::infinity();
  for (int it = 0; it < opts.max_iterations; ++it) {
    if (fx == C(0)) return {x, fx, it, false};
    const Real h = opts.derivative_step * std::max(Real(1), std::abs(x));
    const C d = (m(x + h) - m(x - h)) / (Real(2) * h);
    if (d == C(0) || !std::isfinite(std::abs(d)))
      return detail::muller(m, x - h, x + h, x, opts, it);
    C step = -fx / d;
    C xn = x + step;
    C fn = m(xn);
    int halvings = 0;
    while (!(std::abs(fn) < std::abs(fx)) && halvings < 8 && std::abs(fx) > opts.tol) {
      step /= Real(2);
      xn = x + step;
      fn = m(xn);
      ++halvings;
    }
    if (!(std::abs(fn) < std::abs(fx)) && std::abs(fx) > opts.tol)
      return detail::muller(m, x - h, x + h, x, opts, it);
    const Real s = std::abs(step);
    const bool floor = s <= Real(8) * std::numeric_limits<Real>::epsilon() * std::abs(xn) || s >= last_step / 2;
    if (std::abs(fx) <= opts.tol && floor) {
      if (std::abs(fn) <= std::abs(fx)) return {xn, fn, it + 1, false};
      return {x, fx, it + 1, false};
    }
    last_step = s;
    x = xn;
    fx = fn;
  }
  if (std::abs(fx) <= opts.tol) return {x, fx, opts.max_iterations, false};
  fail(ErrorCode::no_root, "Newton iteration did not converge; last iterate " +
                               std::to_string(static_cast<double>(x.real())) + " + " +
                               std::to_string(static_cast<double>(x.imag())) + "i");
}

}  // namespace qnmlpt
