#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "qnmlpt/error.hpp"
#include "qnmlpt/numeric.hpp"

namespace qnmlpt {

enum class Side { left, right };

/// Exponential tail V(x) = scale * sum_k c_k exp(-k alpha s), where s = x on
/// the right and s = -x on the left.
template <class Real>
struct TailDescriptor {
  Real alpha = 0;
  std::vector<Complex<Real>> coefficients;  // c_1 ... c_kmax
  Real scale = 0;
  // |c_{kmax+1}| when the coefficient law is known, zero otherwise.
  Real next_coefficient = 0;

  std::size_t k_max() const { return coefficients.size(); }

  Complex<Real> partial_sum(Real s) const {
    CompensatedComplexSum<Real> acc;
    for (std::size_t k = 1; k <= coefficients.size(); ++k)
      acc.add(coefficients[k - 1] * std::exp(-Real(k) * alpha * s));
    return acc.value() * scale;
  }

  Real truncation_bound(Real s) const {
    const Real kn = Real(coefficients.size() + 1);
    const Real factor = next_coefficient > 0 ? std::abs(scale) * next_coefficient : Real(1);
    return factor * std::exp(-kn * alpha * s);
  }
};

template <class Real>
using TailExpansion = TailDescriptor<Real>;

/// First-order change of a tail under the perturbation: derivatives of the
/// scale, base exponent and coefficients with respect to the strength mu.
template <class Real>
struct TailPerturbation {
  Real d_scale = 0;
  Real d_alpha = 0;
  std::vector<Complex<Real>> d_coefficients;
  // True when the perturbed tail is exactly linear in mu, so second-order
  // tail data are available.
  bool linear_in_mu() const { return d_alpha == Real(0); }
};

template <class Real>
struct Segment {
  Real lo;
  Real hi;
  std::function<Complex<Real>(Real)> eval;
  std::optional<Complex<Real>> constant;  // set when V is constant on the segment
};

/// Piecewise description of V(x) covering the whole real line.
template <class Real>
struct PotentialSpec {
  std::vector<Segment<Real>> segments;
  Real support_lo = 0;
  Real support_hi = 0;
  std::optional<TailDescriptor<Real>> left_tail;
  std::optional<TailDescriptor<Real>> right_tail;

  const Segment<Real>& segment_at(Real x) const {
    auto it = std::upper_bound(segments.begin(), segments.end(), x,
                               [](Real v, const Segment<Real>& s) { return v < s.hi; });
    if (it == segments.end()) return segments.back();
    return *it;
  }

  Complex<Real> operator()(Real x) const { return segment_at(x).eval(x); }

  /// Interior segment boundaries strictly inside (lo, hi).
  std::vector<Real> breakpoints(Real lo, Real hi) const {
    std::vector<Real> out;
    for (std::size_t i = 0; i + 1 < segments.size(); ++i) {
      const Real b = segments[i].hi;
      if (b > lo && b < hi) out.push_back(b);
    }
    return out;
  }

  const std::optional<TailDescriptor<Real>>& tail(Side side) const {
    return side == Side::right ? right_tail : left_tail;
  }

  bool symmetric_hint = false;  // V(-x) = V(x)
};

template <class Real>
Complex<Real> eval_potential(const PotentialSpec<Real>& spec, Real x) {
  return spec(x);
}

namespace detail {

template <class Real>
void validate_cover(const PotentialSpec<Real>& spec) {
  require(!spec.segments.empty(), ErrorCode::invalid_argument, "potential has no segments");
  require(spec.segments.front().lo == -std::numeric_limits<Real>::infinity() &&
              spec.segments.back().hi == std::numeric_limits<Real>::infinity(),
          ErrorCode::invalid_argument, "segments must cover the real line");
  for (std::size_t i = 0; i + 1 < spec.segments.size(); ++i)
    require(spec.segments[i].hi == spec.segments[i + 1].lo && spec.segments[i].lo < spec.segments[i].hi,
            ErrorCode::invalid_argument, "segments must be contiguous and ordered");
}

template <class Real>
Segment<Real> constant_segment(Real lo, Real hi, Complex<Real> v) {
  return {lo, hi, [v](Real) { return v; }, v};
}

}  // namespace detail

/// V0 on |x| < b, zero elsewhere. Its odd sector is the half-line step with a
/// node at the origin.
template <class Real>
PotentialSpec<Real> step_potential(Real v0, Real b) {
  require(b > 0, ErrorCode::invalid_argument, "step width must be positive");
  const Real inf = std::numeric_limits<Real>::infinity();
  PotentialSpec<Real> spec;
  spec.segments = {detail::constant_segment<Real>(-inf, -b, 0), detail::constant_segment<Real>(-b, b, v0),
                   detail::constant_segment<Real>(b, inf, 0)};
  spec.support_lo = -b;
  spec.support_hi = b;
  spec.symmetric_hint = true;
  return spec;
}

/// Rectangular bump of the given height on (x0 - w/2, x0 + w/2).
template <class Real>
PotentialSpec<Real> bump(Real x0, Real w, Real height = 1) {
  require(w > 0, ErrorCode::invalid_argument, "bump width must be positive");
  const Real inf = std::numeric_limits<Real>::infinity();
  const Real lo = x0 - w / 2, hi = x0 + w / 2;
  PotentialSpec<Real> spec;
  spec.segments = {detail::constant_segment<Real>(-inf, lo, 0), detail::constant_segment<Real>(lo, hi, height),
                   detail::constant_segment<Real>(hi, inf, 0)};
  spec.support_lo = lo;
  spec.support_hi = hi;
  return spec;
}

template <class Real>
PotentialSpec<Real> zero_potential() {
  const Real inf = std::numeric_limits<Real>::infinity();
  PotentialSpec<Real> spec;
  spec.segments = {detail::constant_segment<Real>(-inf, inf, 0)};
  spec.symmetric_hint = true;
  return spec;
}

/// Coefficients of V0 cosh^-2(x/b) = V0 sum_k (-1)^{k+1} 4k exp(-2k|x|/b).
template <class Real>
TailExpansion<Real> pt_tail_expansion(Real v0, Real b, int k_max) {
  require(k_max >= 1, ErrorCode::invalid_argument, "k_max must be at least 1");
  require(b > 0, ErrorCode::invalid_argument, "width must be positive");
  TailExpansion<Real> t;
  t.alpha = Real(2) / b;
  t.scale = v0;
  for (int k = 1; k <= k_max; ++k) t.coefficients.emplace_back(Real(k % 2 == 1 ? 4 : -4) * Real(k), Real(0));
  t.next_coefficient = Real(4) * Real(k_max + 1);
  return t;
}

/// Smallest k_max whose first omitted term at radius L is below tau.
template <class Real>
int pt_tail_order_for(Real v0, Real b, Real L, Real tau, int k_cap = 64) {
  require(tau > 0 && L > 0, ErrorCode::invalid_argument, "tolerance and radius must be positive");
  const Real alpha = Real(2) / b;
  for (int k = 1; k <= k_cap; ++k) {
    if (std::abs(v0) * Real(4) * Real(k + 1) * std::exp(-Real(k + 1) * alpha * L) < tau) return k;
  }
  fail(ErrorCode::invalid_argument, "no tail order below cap meets tolerance");
}

template <class Real>
Real pt_profile(Real x, Real b) {
  const Real c = std::cosh(x / b);
  return Real(1) / (c * c);
}

/// V0 cosh^-2(x/b) with exponential tails on both sides.
template <class Real>
PotentialSpec<Real> poschl_teller(Real v0, Real b, int k_max = 4, Real support = Real(3)) {
  require(b > 0, ErrorCode::invalid_argument, "width must be positive");
  const Real inf = std::numeric_limits<Real>::infinity();
  PotentialSpec<Real> spec;
  spec.segments = {{-inf, inf, [v0, b](Real x) { return Complex<Real>(v0 * pt_profile(x, b)); }, std::nullopt}};
  spec.support_lo = -support;
  spec.support_hi = support;
  spec.left_tail = spec.right_tail = pt_tail_expansion<Real>(v0, b, k_max);
  spec.symmetric_hint = true;
  return spec;
}

/// Pointwise sum a + mu * b, merging breakpoints. Tails must agree in their
/// base exponent when both are present.
template <class Real>
PotentialSpec<Real> sum(const PotentialSpec<Real>& a, const PotentialSpec<Real>& b, Real mu) {
  detail::validate_cover(a);
  detail::validate_cover(b);
  std::vector<Real> cuts;
  for (const auto& s : a.segments) cuts.push_back(s.lo);
  for (const auto& s : b.segments) cuts.push_back(s.lo);
  cuts.push_back(std::numeric_limits<Real>::infinity());
  std::sort(cuts.begin(), cuts.end());
  // Cuts closer than a few ulps are one cut.
  cuts.erase(std::unique(cuts.begin(), cuts.end(),
                         [](Real x, Real y) {
                           return x == y || (std::isfinite(x) && std::isfinite(y) &&
                                             std::abs(y - x) <= Real(64) * std::numeric_limits<Real>::epsilon() *
                                                                    (Real(1) + std::abs(x)));
                         }),
             cuts.end());
  PotentialSpec<Real> out;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const Real lo = cuts[i], hi = cuts[i + 1];
    const Real probe = std::isfinite(lo) ? (std::isfinite(hi) ? (lo + hi) / 2 : lo + 1) : hi - 1;
    const auto& sa = a.segment_at(probe);
    const auto& sb = b.segment_at(probe);
    std::optional<Complex<Real>> c;
    if (sa.constant && sb.constant) c = *sa.constant + mu * *sb.constant;
    if (c) {
      out.segments.push_back(detail::constant_segment<Real>(lo, hi, *c));
    } else {
      auto ea = sa.eval, eb = sb.eval;
      out.segments.push_back({lo, hi, [ea, eb, mu](Real x) { return ea(x) + mu * eb(x); }, std::nullopt});
    }
  }
  out.support_lo = std::min(a.support_lo, b.support_lo);
  out.support_hi = std::max(a.support_hi, b.support_hi);
  auto merge_tail = [mu](const std::optional<TailDescriptor<Real>>& ta,
                         const std::optional<TailDescriptor<Real>>& tb) -> std::optional<TailDescriptor<Real>> {
    if (!tb || mu == Real(0)) return ta;
    if (!ta) {
      auto t = *tb;
      t.scale *= mu;
      return t;
    }
    require(ta->alpha == tb->alpha, ErrorCode::unsupported_configuration,
            "tails with different base exponents cannot be merged");
    TailDescriptor<Real> t;
    t.alpha = ta->alpha;
    t.scale = 1;
    const std::size_t n = std::max(ta->k_max(), tb->k_max());
    for (std::size_t k = 0; k < n; ++k) {
      Complex<Real> c = 0;
      if (k < ta->k_max()) c += ta->scale * ta->coefficients[k];
      if (k < tb->k_max()) c += mu * tb->scale * tb->coefficients[k];
      t.coefficients.push_back(c);
    }
    return t;
  };
  out.left_tail = merge_tail(a.left_tail, b.left_tail);
  out.right_tail = merge_tail(a.right_tail, b.right_tail);
  out.symmetric_hint = a.symmetric_hint && b.symmetric_hint;
  return out;
}

/// A perturbation problem V(x; mu) = V0(x) + mu V1(x) + O(mu^2).
template <class Real>
struct Perturbation {
  PotentialSpec<Real> base;
  PotentialSpec<Real> first_order;
  std::optional<TailPerturbation<Real>> left_tail;
  std::optional<TailPerturbation<Real>> right_tail;
  // Full potential at finite mu when it is not linear in mu.
  std::function<PotentialSpec<Real>(Real)> exact;

  const std::optional<TailPerturbation<Real>>& tail(Side side) const {
    return side == Side::right ? right_tail : left_tail;
  }

  PotentialSpec<Real> at(Real mu) const { return exact ? exact(mu) : sum(base, first_order, mu); }
};

/// Width perturbation of V0 cosh^-2 x: V(x; mu) = V0 cosh^-2((1 + mu) x),
/// whose first-order term is V1(x) = -2 V0 x sinh x cosh^-3 x.
template <class Real>
Perturbation<Real> pt_width_perturbation(Real v0, int k_max = 4) {
  require(v0 > Real(0.25), ErrorCode::regime_violation, "width perturbation needs 4 V0 b^2 > 1");
  const Real inf = std::numeric_limits<Real>::infinity();
  Perturbation<Real> p;
  p.base = poschl_teller<Real>(v0, 1, k_max);
  p.first_order.segments = {{-inf, inf,
                             [v0](Real x) {
                               const Real c = std::cosh(x);
                               return Complex<Real>(-2 * v0 * x * std::sinh(x) / (c * c * c));
                             },
                             std::nullopt}};
  p.first_order.support_lo = -3;
  p.first_order.support_hi = 3;
  p.first_order.symmetric_hint = true;
  TailPerturbation<Real> tp;
  tp.d_alpha = 2;
  tp.d_coefficients.assign(static_cast<std::size_t>(k_max), Complex<Real>(0));
  p.left_tail = p.right_tail = tp;
  p.exact = [v0, k_max](Real mu) {
    auto spec = poschl_teller<Real>(v0, Real(1) / (1 + mu), k_max);
    return spec;
  };
  return p;
}

/// V1(x) of the width perturbation as a plain function.
template <class Real>
Real pt_width_first_order(Real v0, Real x) {
  const Real c = std::cosh(x);
  return -2 * v0 * x * std::sinh(x) / (c * c * c);
}

}  // namespace qnmlpt
