#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "qnmlpt/error.hpp"
#include "qnmlpt/numeric.hpp"
#include "qnmlpt/potentials.hpp"

namespace qnmlpt {

template <class Real>
struct OdeOptions {
  Real abs_tol = Real(1e-10);
  Real rel_tol = Real(1e-10);
  // |f| above which the linear (phi, phi') form takes over; the Riccati form
  // is resumed once |f| drops below switch_threshold / hysteresis.
  Real switch_threshold = Real(1e3);
  Real hysteresis = Real(10);
  std::size_t max_steps = 4000000;
  // Propagate across segments with constant V by the exact cosh/sinh transfer.
  bool exact_constant_segments = true;
};

enum class WaveMode { riccati, linear };

/// Solution state of phi'' = (V - omega^2) phi at one point. In Riccati mode
/// (a, b) = (f, ln phi); in linear mode (a, b) = (phi, phi') exp(-log_scale).
template <class Real>
struct WaveState {
  using C = Complex<Real>;
  WaveMode mode = WaveMode::riccati;
  C a{}, b{};
  C log_scale{};

  static WaveState from_log_derivative(C f, C log_phi = C(0)) {
    return {WaveMode::riccati, f, log_phi, C(0)};
  }
  static WaveState from_values(C phi, C dphi) {
    WaveState s{WaveMode::linear, phi, dphi, C(0)};
    s.normalize();
    return s;
  }

  C f() const {
    if (mode == WaveMode::riccati) return a;
    if (a == C(0)) return C(std::numeric_limits<Real>::infinity(), 0);
    return b / a;
  }
  C phi() const { return mode == WaveMode::riccati ? std::exp(b) : a * std::exp(log_scale); }
  C dphi() const { return mode == WaveMode::riccati ? a * std::exp(b) : b * std::exp(log_scale); }
  C phi_sq() const {
    return mode == WaveMode::riccati ? std::exp(Real(2) * b) : a * a * std::exp(Real(2) * log_scale);
  }

  void normalize() {
    if (mode != WaveMode::linear) return;
    const Real m = std::max(std::abs(a), std::abs(b));
    if (m == Real(0) || !std::isfinite(m)) return;
    const Real lm = std::log(m);
    a /= m;
    b /= m;
    log_scale += lm;
  }

  WaveState to_linear() const {
    if (mode == WaveMode::linear) return *this;
    WaveState s{WaveMode::linear, C(1), a, b};
    s.normalize();
    return s;
  }

  WaveState to_riccati() const {
    if (mode == WaveMode::riccati) return *this;
    return {WaveMode::riccati, b / a, log_scale + std::log(a), C(0)};
  }
};

namespace detail {

// Dormand-Prince 5(4) tableau.
template <class Real>
struct Dopri5 {
  static constexpr Real c2 = Real(1) / 5, c3 = Real(3) / 10, c4 = Real(4) / 5, c5 = Real(8) / 9;
  static constexpr Real a21 = Real(1) / 5;
  static constexpr Real a31 = Real(3) / 40, a32 = Real(9) / 40;
  static constexpr Real a41 = Real(44) / 45, a42 = Real(-56) / 15, a43 = Real(32) / 9;
  static constexpr Real a51 = Real(19372) / 6561, a52 = Real(-25360) / 2187, a53 = Real(64448) / 6561,
                        a54 = Real(-212) / 729;
  static constexpr Real a61 = Real(9017) / 3168, a62 = Real(-355) / 33, a63 = Real(46732) / 5247,
                        a64 = Real(49) / 176, a65 = Real(-5103) / 18656;
  static constexpr Real a71 = Real(35) / 384, a73 = Real(500) / 1113, a74 = Real(125) / 192,
                        a75 = Real(-2187) / 6784, a76 = Real(11) / 84;
  static constexpr Real e1 = Real(71) / 57600, e3 = Real(-71) / 16695, e4 = Real(71) / 1920,
                        e5 = Real(-17253) / 339200, e6 = Real(22) / 525, e7 = Real(-1) / 40;
};

}  // namespace detail

/// Integrates the wave equation at fixed omega through a piecewise potential,
/// stopping exactly at segment boundaries so each interval uses the evaluator
/// of its own segment.
template <class Real>
class WavePropagator {
 public:
  using C = Complex<Real>;

  WavePropagator(const PotentialSpec<Real>& v, C omega, OdeOptions<Real> opts = {})
      : v_(&v), omega_sq_(omega * omega), opts_(opts) {
    h_ = Real(0.02) / std::max(Real(1), std::abs(omega));
  }

  WaveState<Real> advance(WaveState<Real> s, Real from, Real to) {
    if (from == to) return s;
    std::vector<Real> cuts = v_->breakpoints(std::min(from, to), std::max(from, to));
    if (to < from) std::reverse(cuts.begin(), cuts.end());
    cuts.push_back(to);
    Real x = from;
    for (Real next : cuts) {
      const auto& seg = v_->segment_at((x + next) / 2);
      if (seg.constant && opts_.exact_constant_segments)
        advance_constant(s, x, next, *seg.constant);
      else
        advance_dopri(s, x, next, seg);
      x = next;
    }
    return s;
  }

  std::size_t steps() const { return steps_; }
  const OdeOptions<Real>& options() const { return opts_; }

 private:
  void choose_mode(WaveState<Real>& s) const {
    if (s.mode == WaveMode::riccati) {
      if (std::abs(s.a) > opts_.switch_threshold) s = s.to_linear();
    } else {
      s.normalize();
      if (s.a != C(0) && std::abs(s.b / s.a) < opts_.switch_threshold / opts_.hysteresis) s = s.to_riccati();
    }
  }

  void advance_constant(WaveState<Real>& s, Real from, Real to, C v) {
    const C k2 = v - omega_sq_;
    const C kappa = std::sqrt(k2);
    Real remaining = to - from;
    WaveState<Real> lin = s.to_linear();
    while (remaining != Real(0)) {
      Real d = remaining;
      const Real limit = Real(20) / std::max(std::abs(kappa.real()), Real(1e-30));
      if (std::abs(d) > limit) d = std::copysign(limit, remaining);
      const C z = kappa * d;
      const C ch = std::cosh(z);
      C sinhc;  // sinh(kappa d) / kappa
      if (std::abs(z) < Real(1e-2)) {
        const C z2 = z * z;
        sinhc = d * (Real(1) + z2 / Real(6) * (Real(1) + z2 / Real(20) * (Real(1) + z2 / Real(42) *
                                                                              (Real(1) + z2 / Real(72)))));
      } else {
        sinhc = std::sinh(z) / kappa;
      }
      const C p = ch * lin.a + sinhc * lin.b;
      const C dp = k2 * sinhc * lin.a + ch * lin.b;
      lin.a = p;
      lin.b = dp;
      lin.normalize();
      remaining -= d;
      if (std::abs(remaining) < std::numeric_limits<Real>::epsilon() * (std::abs(to) + 1)) remaining = 0;
    }
    ++steps_;
    s = lin;
    if (s.a == C(0)) return;
    s = s.to_riccati();
    choose_mode(s);
  }

  void rhs(const WaveState<Real>& s, const C& y0, const C& y1, const C& vm, C& d0, C& d1) const {
    if (s.mode == WaveMode::riccati) {
      d0 = vm - y0 * y0;
      d1 = y0;
    } else {
      d0 = y1;
      d1 = vm * y0;
    }
  }

  void advance_dopri(WaveState<Real>& s, Real from, Real to, const Segment<Real>& seg) {
    using T = detail::Dopri5<Real>;
    const Real dir = to > from ? Real(1) : Real(-1);
    Real x = from;
    Real h = std::min(h_, std::abs(to - from)) * dir;
    Real err_old = Real(1e-4);
    choose_mode(s);
    auto vm = [&](Real t) { return seg.eval(t) - omega_sq_; };
    C k0a, k0b;
    rhs(s, s.a, s.b, vm(x), k0a, k0b);
    while ((to - x) * dir > 0) {
      if (++steps_ > opts_.max_steps) failure(x, "step budget exhausted");
      if ((x + h - to) * dir > 0) h = to - x;
      const C ya = s.a, yb = s.b;
      C k2a, k2b, k3a, k3b, k4a, k4b, k5a, k5b, k6a, k6b, k7a, k7b;
      rhs(s, ya + h * T::a21 * k0a, yb + h * T::a21 * k0b, vm(x + T::c2 * h), k2a, k2b);
      rhs(s, ya + h * (T::a31 * k0a + T::a32 * k2a), yb + h * (T::a31 * k0b + T::a32 * k2b), vm(x + T::c3 * h),
          k3a, k3b);
      rhs(s, ya + h * (T::a41 * k0a + T::a42 * k2a + T::a43 * k3a),
          yb + h * (T::a41 * k0b + T::a42 * k2b + T::a43 * k3b), vm(x + T::c4 * h), k4a, k4b);
      rhs(s, ya + h * (T::a51 * k0a + T::a52 * k2a + T::a53 * k3a + T::a54 * k4a),
          yb + h * (T::a51 * k0b + T::a52 * k2b + T::a53 * k3b + T::a54 * k4b), vm(x + T::c5 * h), k5a, k5b);
      const Real xn = (x + h - to) * dir >= 0 ? to : x + h;
      rhs(s, ya + h * (T::a61 * k0a + T::a62 * k2a + T::a63 * k3a + T::a64 * k4a + T::a65 * k5a),
          yb + h * (T::a61 * k0b + T::a62 * k2b + T::a63 * k3b + T::a64 * k4b + T::a65 * k5b), vm(xn), k6a, k6b);
      const C na = ya + h * (T::a71 * k0a + T::a73 * k3a + T::a74 * k4a + T::a75 * k5a + T::a76 * k6a);
      const C nb = yb + h * (T::a71 * k0b + T::a73 * k3b + T::a74 * k4b + T::a75 * k5b + T::a76 * k6b);
      WaveState<Real> trial = s;
      trial.a = na;
      trial.b = nb;
      rhs(trial, na, nb, vm(xn), k7a, k7b);
      const C ea = h * (T::e1 * k0a + T::e3 * k3a + T::e4 * k4a + T::e5 * k5a + T::e6 * k6a + T::e7 * k7a);
      const C eb = h * (T::e1 * k0b + T::e3 * k3b + T::e4 * k4b + T::e5 * k5b + T::e6 * k6b + T::e7 * k7b);
      Real sa, sb;
      if (s.mode == WaveMode::riccati) {
        sa = opts_.abs_tol + opts_.rel_tol * std::max(std::abs(ya), std::abs(na));
        sb = opts_.abs_tol + opts_.rel_tol;  // error in ln phi is a relative error in phi
      } else {
        const Real m = std::max({std::abs(ya), std::abs(yb), std::abs(na), std::abs(nb)});
        sa = sb = opts_.abs_tol + opts_.rel_tol * m;
      }
      const Real ra = std::abs(ea) / sa, rb = std::abs(eb) / sb;
      Real err = std::sqrt((ra * ra + rb * rb) / 2);
      if (!std::isfinite(err)) err = Real(1e10);
      if (err <= Real(1)) {
        x = xn;
        s = trial;
        k0a = k7a;
        k0b = k7b;
        const WaveMode before = s.mode;
        choose_mode(s);
        if (s.mode != before || s.mode == WaveMode::linear) rhs(s, s.a, s.b, vm(x), k0a, k0b);
        const Real e = std::max(err, Real(1e-10));
        Real fac = Real(0.9) * std::pow(e, Real(-0.17)) * std::pow(err_old, Real(0.04));
        fac = std::clamp(fac, Real(0.2), Real(5));
        err_old = std::max(err, Real(1e-4));
        h_ = std::abs(h) * fac;
        h = h_ * dir;
      } else {
        h *= std::clamp(Real(0.9) * std::pow(err, Real(-0.2)), Real(0.1), Real(0.9));
        if (std::abs(h) < Real(64) * std::numeric_limits<Real>::epsilon() * (Real(1) + std::abs(x))) {
          if (s.mode == WaveMode::riccati) {
            s = s.to_linear();
            rhs(s, s.a, s.b, vm(x), k0a, k0b);
            h = (std::abs(to - x) < h_ ? to - x : h_ * dir);
            continue;
          }
          failure(x, "step size underflow in linear representation");
        }
      }
    }
  }

  [[noreturn]] static void failure(Real x, const char* what) {
    std::ostringstream os;
    os << what << " at x = " << static_cast<double>(x);
    fail(ErrorCode::integration_failure, os.str());
  }

  const PotentialSpec<Real>* v_;
  C omega_sq_;
  OdeOptions<Real> opts_;
  Real h_;
  std::size_t steps_ = 0;
};

}  // namespace qnmlpt
