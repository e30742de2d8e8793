#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <algorithm>
#include <limits>
#include <utility>
#include <vector>

#include "qnmlpt/qnmlpt.hpp"

namespace qnmlpt::test {

using LD = long double;
using CL = std::complex<long double>;
using CD = std::complex<double>;

template <class Real>
Real rel(std::complex<Real> a, std::complex<Real> b) {
  return std::abs(a - b) / std::abs(b);
}

/// Minimises |r| over a box by repeated 2-d bisection: a coarse scan, then a
/// 5x5 stencil around the best point with the box halved every round.
template <class Real>
std::complex<Real> box_minimum(const std::function<Real(std::complex<Real>)>& r, std::complex<Real> lo,
                               std::complex<Real> hi, int coarse = 200, int rounds = 120) {
  using C = std::complex<Real>;
  C best = lo;
  Real best_v = std::numeric_limits<Real>::infinity();
  for (int i = 0; i <= coarse; ++i)
    for (int k = 0; k <= coarse; ++k) {
      const C z(lo.real() + (hi.real() - lo.real()) * i / coarse, lo.imag() + (hi.imag() - lo.imag()) * k / coarse);
      const Real v = r(z);
      if (v < best_v) best_v = v, best = z;
    }
  Real hx = (hi.real() - lo.real()) / coarse, hy = (hi.imag() - lo.imag()) / coarse;
  for (int round = 0; round < rounds; ++round) {
    C centre = best;
    for (int i = -2; i <= 2; ++i)
      for (int k = -2; k <= 2; ++k) {
        const C z = centre + C(hx * i / 2, hy * k / 2);
        const Real v = r(z);
        if (v < best_v) best_v = v, best = z;
      }
    hx /= 2;
    hy /= 2;
  }
  return best;
}

/// Step root q of q cot(qb) = i sqrt(q^2 + V0) near the given box.
template <class Real>
std::complex<Real> step_q_by_bisection(Real v0, Real b, std::complex<Real> lo, std::complex<Real> hi) {
  using C = std::complex<Real>;
  auto r = [&](C q) -> Real { return std::abs(q * std::cos(q * b) - C(0, 1) * std::sqrt(q * q + v0) * std::sin(q * b)); };
  return box_minimum<Real>(r, lo, hi);
}

/// Central difference of a complex function of a real variable.
template <class Real, class F>
auto central_difference(const F& f, Real x, Real h) {
  return (f(x + h) - f(x - h)) / (Real(2) * h);
}

/// Direct numerical wave-equation residual |phi'' - (V - omega^2) phi| / |phi|
/// by a fourth-order finite-difference stencil.
template <class Real, class Phi, class V>
Real wave_residual(const Phi& phi, const V& v, std::complex<Real> omega, Real x, Real h) {
  const auto d2 = (-phi(x + 2 * h) + Real(16) * phi(x + h) - Real(30) * phi(x) + Real(16) * phi(x - h) - phi(x - 2 * h)) /
                  (Real(12) * h * h);
  return std::abs(d2 - (v(x) - omega * omega) * phi(x)) / std::abs(phi(x));
}

/// Outgoing mismatch of phi'' = (V - w^2) phi, phi(0) = 0, for a piecewise
/// constant V given as (end, value) segments, propagated by exact transfer
/// matrices and measured at a beyond which V = 0.
inline LD transfer_residual(const std::vector<std::pair<LD, LD>>& segments, CL w, LD a) {
  CL phi = 0, dphi = 1;
  LD x = 0;
  auto step = [&](CL k, LD h) {
    const CL c = std::cos(k * h), s = std::sin(k * h);
    const CL p = phi * c + dphi * s / k;
    dphi = -phi * k * s + dphi * c;
    phi = p;
  };
  for (const auto& [end, v] : segments) {
    step(std::sqrt(w * w - v), end - x);
    x = end;
  }
  step(w, a - x);
  return std::abs(dphi - CL(0, 1) * w * phi) / (std::abs(dphi) + std::abs(w * phi));
}

/// transfer_residual for a step V0 on (0, b) plus a bump of height mu and
/// width w centred at x0.
inline LD step_bump_residual(LD v0, LD b, LD a, LD x0, LD w, LD mu, CL omega) {
  const LD lo = x0 - w / 2, hi = x0 + w / 2;
  auto v_at = [&](LD x) { return (x < b ? v0 : 0) + (x > lo && x < hi ? mu : 0); };
  std::vector<LD> cuts{lo, hi, b};
  std::sort(cuts.begin(), cuts.end());
  std::vector<std::pair<LD, LD>> seg;
  LD prev = 0;
  for (LD c : cuts) {
    if (c > prev) seg.push_back({c, v_at((prev + c) / 2)});
    prev = std::max(prev, c);
  }
  return transfer_residual(seg, omega, a);
}

}  // namespace qnmlpt::test
