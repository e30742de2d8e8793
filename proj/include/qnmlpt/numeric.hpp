#pragma once

#include <cmath>
#include <complex>
#include <numbers>

namespace qnmlpt {

template <class Real>
using Complex = std::complex<Real>;

template <class Real>
inline constexpr Real pi_v = std::numbers::pi_v<Real>;

template <class Real>
constexpr Complex<Real> imag_unit() {
  return Complex<Real>(0, 1);
}

/// Neumaier-compensated running sum. The integrals in this library routinely
/// cancel against surface terms of much larger magnitude, so accumulation
/// error is kept below one ulp of the largest partial sum.
template <class Real>
class CompensatedSum {
 public:
  void add(Real v) {
    const Real t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v))
      carry_ += (sum_ - t) + v;
    else
      carry_ += (v - t) + sum_;
    sum_ = t;
  }
  Real value() const { return sum_ + carry_; }

 private:
  Real sum_ = 0;
  Real carry_ = 0;
};

template <class Real>
class CompensatedComplexSum {
 public:
  void add(const Complex<Real>& v) {
    re_.add(v.real());
    im_.add(v.imag());
  }
  Complex<Real> value() const { return {re_.value(), im_.value()}; }

 private:
  CompensatedSum<Real> re_;
  CompensatedSum<Real> im_;
};

/// Truncated bivariate Taylor polynomial in (dw, mu) through total degree 2:
///   c00 + c10 dw + c01 mu + c20 dw^2 + c11 dw mu + c02 mu^2.
/// Propagating these through the tail-series recursion yields the exact
/// term-wise derivatives of the logarithmic derivative in frequency and in the
/// perturbation strength.
template <class T>
struct Taylor2 {
  T c00{}, c10{}, c01{}, c20{}, c11{}, c02{};

  static Taylor2 constant(T v) { return {v, T{}, T{}, T{}, T{}, T{}}; }
  static Taylor2 variable_w(T v) { return {v, T(1), T{}, T{}, T{}, T{}}; }
  static Taylor2 variable_mu(T v) { return {v, T{}, T(1), T{}, T{}, T{}}; }

  Taylor2& operator+=(const Taylor2& o) {
    c00 += o.c00; c10 += o.c10; c01 += o.c01;
    c20 += o.c20; c11 += o.c11; c02 += o.c02;
    return *this;
  }
  Taylor2& operator-=(const Taylor2& o) {
    c00 -= o.c00; c10 -= o.c10; c01 -= o.c01;
    c20 -= o.c20; c11 -= o.c11; c02 -= o.c02;
    return *this;
  }
  Taylor2& operator*=(const T& s) {
    c00 *= s; c10 *= s; c01 *= s; c20 *= s; c11 *= s; c02 *= s;
    return *this;
  }

  friend Taylor2 operator+(Taylor2 a, const Taylor2& b) { return a += b; }
  friend Taylor2 operator-(Taylor2 a, const Taylor2& b) { return a -= b; }
  friend Taylor2 operator*(Taylor2 a, const T& s) { return a *= s; }
  friend Taylor2 operator*(const T& s, Taylor2 a) { return a *= s; }
  friend Taylor2 operator-(const Taylor2& a) { return a * T(-1); }

  friend Taylor2 operator*(const Taylor2& a, const Taylor2& b) {
    Taylor2 r;
    r.c00 = a.c00 * b.c00;
    r.c10 = a.c10 * b.c00 + a.c00 * b.c10;
    r.c01 = a.c01 * b.c00 + a.c00 * b.c01;
    r.c20 = a.c20 * b.c00 + a.c10 * b.c10 + a.c00 * b.c20;
    r.c11 = a.c11 * b.c00 + a.c10 * b.c01 + a.c01 * b.c10 + a.c00 * b.c11;
    r.c02 = a.c02 * b.c00 + a.c01 * b.c01 + a.c00 * b.c02;
    return r;
  }

  Taylor2 reciprocal() const {
    const T r0 = T(1) / c00;
    Taylor2 r;
    r.c00 = r0;
    r.c10 = -c10 * r0 * r0;
    r.c01 = -c01 * r0 * r0;
    r.c20 = (c10 * c10 * r0 - c20) * r0 * r0;
    r.c11 = (T(2) * c10 * c01 * r0 - c11) * r0 * r0;
    r.c02 = (c01 * c01 * r0 - c02) * r0 * r0;
    return r;
  }

  friend Taylor2 operator/(const Taylor2& a, const Taylor2& b) { return a * b.reciprocal(); }

  friend Taylor2 exp(const Taylor2& a) {
    using std::exp;
    const T e = exp(a.c00);
    Taylor2 r;
    r.c00 = e;
    r.c10 = e * a.c10;
    r.c01 = e * a.c01;
    r.c20 = e * (a.c20 + a.c10 * a.c10 / T(2));
    r.c11 = e * (a.c11 + a.c10 * a.c01);
    r.c02 = e * (a.c02 + a.c01 * a.c01 / T(2));
    return r;
  }
};

}  // namespace qnmlpt
