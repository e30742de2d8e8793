#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <queue>
#include <vector>

#include "qnmlpt/error.hpp"
#include "qnmlpt/numeric.hpp"

namespace qnmlpt {

inline constexpr std::size_t kPanelNodes = 15;

namespace detail {

// 15-point Kronrod extension of the 7-point Gauss rule on [-1, 1], nodes
// ascending, 36 significant digits.
inline constexpr long double kKronrodPositive[8] = {
    0.0L,
    0.207784955007898467600689403773244913L,
    0.405845151377397166906606412076961463L,
    0.586087235467691130294144838258729598L,
    0.741531185599394439863864773280788407L,
    0.864864423359769072789712788640926201L,
    0.949107912342758524526189684047851262L,
    0.991455371120812639206854697526328517L,
};
inline constexpr long double kKronrodWeights[8] = {
    0.209482141084727828012999174891714264L,
    0.204432940075298892414161999234649085L,
    0.190350578064785409913256402421013683L,
    0.169004726639267902826583426598550284L,
    0.140653259715525918745189590510237920L,
    0.104790010322250183839876322541518017L,
    0.0630920926299785532907006631892042867L,
    0.0229353220105292249637320080589695920L,
};
// Gauss weights for the even positive indices (0, 2, 4, 6) above.
inline constexpr long double kGaussWeights[4] = {
    0.417959183673469387755102040816326531L,
    0.381830050505118944950369775488975134L,
    0.279705391489276667901467771423779582L,
    0.129484966168869693270611432679082018L,
};

struct LegendreValues {
  long double p, dp, integral;  // P_n(t), P_n'(t), int_{-1}^t P_n
};

inline std::array<LegendreValues, kPanelNodes> legendre_table(long double t) {
  std::array<long double, kPanelNodes + 1> p{};
  std::array<long double, kPanelNodes + 1> dp{};
  p[0] = 1.0L;
  p[1] = t;
  dp[0] = 0.0L;
  dp[1] = 1.0L;
  for (std::size_t n = 1; n < kPanelNodes; ++n) {
    p[n + 1] = ((2.0L * n + 1.0L) * t * p[n] - n * p[n - 1]) / (n + 1.0L);
    dp[n + 1] = dp[n - 1] + (2.0L * n + 1.0L) * p[n];
  }
  std::array<LegendreValues, kPanelNodes> out{};
  for (std::size_t n = 0; n < kPanelNodes; ++n) {
    const long double integral =
        n == 0 ? t + 1.0L : (p[n + 1] - p[n - 1]) / (2.0L * n + 1.0L);
    out[n] = {p[n], dp[n], integral};
  }
  return out;
}

using SquareMatrix = std::array<std::array<long double, kPanelNodes>, kPanelNodes>;

inline SquareMatrix invert(SquareMatrix a) {
  SquareMatrix inv{};
  for (std::size_t i = 0; i < kPanelNodes; ++i) inv[i][i] = 1.0L;
  for (std::size_t col = 0; col < kPanelNodes; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < kPanelNodes; ++r)
      if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
    std::swap(a[col], a[piv]);
    std::swap(inv[col], inv[piv]);
    const long double d = a[col][col];
    for (std::size_t c = 0; c < kPanelNodes; ++c) {
      a[col][c] /= d;
      inv[col][c] /= d;
    }
    for (std::size_t r = 0; r < kPanelNodes; ++r) {
      if (r == col) continue;
      const long double m = a[r][col];
      if (m == 0.0L) continue;
      for (std::size_t c = 0; c < kPanelNodes; ++c) {
        a[r][c] -= m * a[col][c];
        inv[r][c] -= m * inv[col][c];
      }
    }
  }
  return inv;
}

}  // namespace detail

/// Node set, weights and the spectral operators of one quadrature panel on the
/// reference interval [-1, 1]. `cumulative[i][j]` integrates the interpolant
/// of the node values from -1 to node i, `derivative[i][j]` differentiates it
/// at node i.
template <class Real>
struct PanelRule {
  std::array<Real, kPanelNodes> nodes{};
  std::array<Real, kPanelNodes> kronrod{};
  std::array<Real, kPanelNodes> gauss{};
  std::array<Real, kPanelNodes> barycentric{};
  std::array<std::array<Real, kPanelNodes>, kPanelNodes> cumulative{};
  std::array<std::array<Real, kPanelNodes>, kPanelNodes> derivative{};

  PanelRule() {
    std::array<long double, kPanelNodes> t{};
    std::array<long double, kPanelNodes> wk{};
    std::array<long double, kPanelNodes> wg{};
    for (std::size_t i = 0; i < 8; ++i) {
      t[7 + i] = detail::kKronrodPositive[i];
      t[7 - i] = -detail::kKronrodPositive[i];
      wk[7 + i] = wk[7 - i] = detail::kKronrodWeights[i];
      if (i % 2 == 0) wg[7 + i] = wg[7 - i] = detail::kGaussWeights[i / 2];
    }
    detail::SquareMatrix vand{}, integ{}, deriv{};
    for (std::size_t i = 0; i < kPanelNodes; ++i) {
      const auto row = detail::legendre_table(t[i]);
      for (std::size_t j = 0; j < kPanelNodes; ++j) {
        vand[i][j] = row[j].p;
        integ[i][j] = row[j].integral;
        deriv[i][j] = row[j].dp;
      }
    }
    const auto inv = detail::invert(vand);
    for (std::size_t i = 0; i < kPanelNodes; ++i) {
      nodes[i] = static_cast<Real>(t[i]);
      kronrod[i] = static_cast<Real>(wk[i]);
      gauss[i] = static_cast<Real>(wg[i]);
      long double w = 1.0L;
      for (std::size_t j = 0; j < kPanelNodes; ++j)
        if (j != i) w /= (t[i] - t[j]);
      barycentric[i] = static_cast<Real>(w);
      for (std::size_t j = 0; j < kPanelNodes; ++j) {
        long double s = 0.0L, d = 0.0L;
        for (std::size_t k = 0; k < kPanelNodes; ++k) {
          s += integ[i][k] * inv[k][j];
          d += deriv[i][k] * inv[k][j];
        }
        cumulative[i][j] = static_cast<Real>(s);
        derivative[i][j] = static_cast<Real>(d);
      }
    }
  }
};

template <class Real>
const PanelRule<Real>& panel_rule() {
  static const PanelRule<Real> rule;
  return rule;
}

/// Evaluates the degree-14 interpolant through the panel nodes at reference
/// coordinate t (second barycentric form).
template <class Real, class Value>
Value interpolate_panel(const PanelRule<Real>& rule, const Value* values, Real t) {
  Value num{};
  Real den = 0;
  for (std::size_t i = 0; i < kPanelNodes; ++i) {
    const Real d = t - rule.nodes[i];
    if (d == Real(0)) return values[i];
    const Real c = rule.barycentric[i] / d;
    num += values[i] * c;
    den += c;
  }
  return num / den;
}

template <class Real>
struct PanelEstimate {
  Complex<Real> kronrod;
  Complex<Real> gauss;
  Real absolute;  // integral of |f|, used to scale tolerances

  Real error() const { return std::abs(kronrod - gauss); }
};

template <class Real>
PanelEstimate<Real> panel_estimate(const Complex<Real>* values, Real half_width) {
  const auto& rule = panel_rule<Real>();
  CompensatedComplexSum<Real> k, g;
  CompensatedSum<Real> a;
  for (std::size_t i = 0; i < kPanelNodes; ++i) {
    k.add(values[i] * rule.kronrod[i]);
    g.add(values[i] * rule.gauss[i]);
    a.add(std::abs(values[i]) * rule.kronrod[i]);
  }
  return {k.value() * half_width, g.value() * half_width, a.value() * half_width};
}

template <class Real, class F>
PanelEstimate<Real> gauss_kronrod(const F& f, Real lo, Real hi) {
  const auto& rule = panel_rule<Real>();
  const Real mid = (lo + hi) / 2, half = (hi - lo) / 2;
  std::array<Complex<Real>, kPanelNodes> v{};
  for (std::size_t i = 0; i < kPanelNodes; ++i) v[i] = Complex<Real>(f(mid + half * rule.nodes[i]));
  return panel_estimate<Real>(v.data(), half);
}

template <class Real>
struct QuadratureResult {
  Complex<Real> value;
  Real error = 0;
  Real absolute = 0;
  std::size_t panels = 0;
};

template <class Real>
struct QuadratureOptions {
  Real rel_tol = Real(1e-11);
  Real abs_tol = Real(0);
  std::size_t max_panels = 4000;
};

/// Globally adaptive Gauss-Kronrod integration of a complex-valued integrand
/// over a finite real interval. The panel with the largest error estimate is
/// bisected until the summed estimate meets the tolerance.
template <class Real, class F>
QuadratureResult<Real> integrate_adaptive(const F& f, Real lo, Real hi,
                                          const QuadratureOptions<Real>& opts = {}) {
  struct Item {
    Real lo, hi;
    PanelEstimate<Real> est;
    bool operator<(const Item& o) const { return est.error() < o.est.error(); }
  };
  std::priority_queue<Item> heap;
  heap.push({lo, hi, gauss_kronrod<Real>(f, lo, hi)});
  auto totals = [&heap] {
    auto copy = heap;
    CompensatedComplexSum<Real> v;
    CompensatedSum<Real> e, a;
    while (!copy.empty()) {
      v.add(copy.top().est.kronrod);
      e.add(copy.top().est.error());
      a.add(copy.top().est.absolute);
      copy.pop();
    }
    return QuadratureResult<Real>{v.value(), e.value(), a.value(), 0};
  };
  Real err = heap.top().est.error();
  Complex<Real> value = heap.top().est.kronrod;
  Real absolute = heap.top().est.absolute;
  while (err > std::max(opts.abs_tol, opts.rel_tol * std::abs(value)) &&
         heap.size() < opts.max_panels) {
    const Item worst = heap.top();
    heap.pop();
    const Real mid = (worst.lo + worst.hi) / 2;
    if (!(mid > worst.lo && mid < worst.hi)) {
      heap.push(worst);
      break;
    }
    Item left{worst.lo, mid, gauss_kronrod<Real>(f, worst.lo, mid)};
    Item right{mid, worst.hi, gauss_kronrod<Real>(f, mid, worst.hi)};
    err += left.est.error() + right.est.error() - worst.est.error();
    value += left.est.kronrod + right.est.kronrod - worst.est.kronrod;
    absolute += left.est.absolute + right.est.absolute - worst.est.absolute;
    heap.push(left);
    heap.push(right);
  }
  auto result = totals();
  result.panels = heap.size();
  return result;
}

}  // namespace qnmlpt
