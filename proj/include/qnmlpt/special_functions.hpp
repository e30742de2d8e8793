#pragma once

#include <cmath>
#include <string>

#include "qnmlpt/error.hpp"
#include "qnmlpt/numeric.hpp"

namespace qnmlpt {

template <class Real>
struct SpecialFunctionResult {
  Complex<Real> value;
  Real estimated_error;
};

namespace detail {

// Lanczos approximation, g = 7, nine coefficients.
inline constexpr double kLanczosG = 7.0;
inline constexpr double kLanczos[9] = {
    0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
    771.32342877765313,   -176.61502916214059,   12.507343278686905,
    -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7,
};

template <class Real>
void check_pole(const Complex<Real>& z) {
  if (z.real() <= Real(0.5)) {
    const Real n = std::round(z.real());
    if (n <= 0 && std::abs(z - Complex<Real>(n, 0)) < Real(64) * std::numeric_limits<Real>::epsilon() * (1 + std::abs(n)))
      fail(ErrorCode::pole, "gamma has a pole at z = " + std::to_string(static_cast<long long>(n)));
  }
}

}  // namespace detail

template <class Real>
Complex<Real> complex_gamma(Complex<Real> z) {
  using C = Complex<Real>;
  detail::check_pole(z);
  const Real pi = pi_v<Real>;
  if (z.real() < Real(0.5)) return pi / (std::sin(pi * z) * complex_gamma(C(1) - z));
  z -= Real(1);
  C x = C(Real(detail::kLanczos[0]));
  for (int i = 1; i < 9; ++i) x += Real(detail::kLanczos[i]) / (z + Real(i));
  const C t = z + Real(detail::kLanczosG) + Real(0.5);
  return std::sqrt(Real(2) * pi) * std::exp((z + Real(0.5)) * std::log(t) - t) * x;
}

template <class Real>
Complex<Real> complex_beta(Complex<Real> a, Complex<Real> b) {
  return complex_gamma(a) * complex_gamma(b) / complex_gamma(a + b);
}

/// log cosh z on the branch continuous from the real axis, for any z off the
/// zeros of cosh: uses z + log(1 + e^{-2z}) - log 2 and its mirror image.
template <class Real>
Complex<Real> log_cosh(Complex<Real> z) {
  const Real sgn = z.real() >= 0 ? Real(1) : Real(-1);
  const Complex<Real> w = sgn * z;
  return w + std::log(Real(1) + std::exp(Real(-2) * w)) - std::log(Real(2));
}

}  // namespace qnmlpt
