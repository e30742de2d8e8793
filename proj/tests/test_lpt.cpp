#include <gtest/gtest.h>

#include <optional>
#include <random>

#include "support.hpp"

using namespace qnmlpt;
using namespace qnmlpt::test;

namespace {

const LD kSigma = std::sqrt(4.75L);

template <class F>
CL simpson(const F& f, LD lo, LD hi, int n = 4000) {
  const LD h = (hi - lo) / n;
  CL acc = f(lo) + f(hi);
  for (int i = 1; i < n; ++i) acc += LD(i % 2 ? 4 : 2) * f(lo + h * i);
  return acc * h / LD(3);
}

ProfileOptions<LD> tight() {
  ProfileOptions<LD> po;
  po.ode.abs_tol = po.ode.rel_tol = 1e-16L;
  po.quad_tol = 1e-18L;
  return po;
}

ProfileOptions<LD> pt_options(int k) {
  auto po = tight();
  po.ode.abs_tol = po.ode.rel_tol = 1e-15L;
  po.tail_k_max = k;
  po.series_fill_from = 3;
  return po;
}

Domain<LD> step_domain(CL anchor, LD a = 1.6L) {
  Domain<LD> d;
  d.lo = 0;
  d.hi = a;
  d.left = LeftBoundary::dirichlet;
  d.anchor = anchor;
  return d;
}

PerturbationResult<LD> step_run(LD x0, int order, LD l_shift = 0, LD v0 = 100, CL anchor = 0) {
  StepBumpConfig<LD> cfg;
  cfg.v0 = v0;
  const auto root = step_root<LD>(v0, 1, 1);
  PerturbOptions<LD> opts;
  opts.order = order;
  opts.profile = tight();
  opts.l_shift = l_shift;
  return perturb(step_bump_problem(cfg, x0), root.omega.value, step_domain(anchor == CL(0) ? root.q : anchor), opts);
}

PerturbationResult<LD> pt_run(int j, LD L, int k = 10, LD l_shift = 0) {
  Domain<LD> d;
  d.lo = 0;
  d.hi = L;
  d.left = j ? LeftBoundary::dirichlet : LeftBoundary::neumann;
  d.mirror_factor = 2;
  PerturbOptions<LD> opts;
  opts.order = 1;
  opts.profile = pt_options(k);
  opts.l_shift = l_shift;
  return perturb(pt_width_perturbation<LD>(5, k), pt_exact<LD>(j, 5).omega0, d, opts);
}

template <class F>
std::optional<ErrorCode> code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

}  // namespace

TEST(Norm, DigitsLostFormula) {
  EXPECT_NEAR(digits_lost(CL(1e6L), CL(-1e6L + 1), CL(1)), 6.0, 1e-12);
  EXPECT_EQ(digits_lost(CL(2), CL(1), CL(3)), 0);
  EXPECT_EQ(digits_lost(CL(0), CL(0), CL(0)), 0);
}

TEST(Norm, StepMatchesClosedForm) {
  const auto res = step_run(0.3L, 1);
  const auto e = step_exact<LD>(100, 1, 1.6L, 1);
  EXPECT_LT(rel(res.norm.value, e.norm), 1e-9);
  EXPECT_EQ(res.norm.value, res.norm.integral_part + res.norm.surface_part);
  EXPECT_EQ(res.norm.L_plus, 1.6L);
  EXPECT_FALSE(res.norm.subtracted);
}

TEST(Norm, ScalesWithAnchorShiftDoesNot) {
  const auto a = step_run(0.3L, 1, 0, 100, CL(1));
  const auto b = step_run(0.3L, 1, 0, 100, CL(2, 1));
  EXPECT_LT(rel(b.norm.value, CL(2, 1) * CL(2, 1) * a.norm.value), 1e-12);
  EXPECT_LT(rel(a.orders[0].omega, b.orders[0].omega), 1e-12);
}

TEST(Norm, PoschlTellerClosedForms) {
  for (int j : {0, 1}) {
    const auto res = pt_run(j, 5);
    EXPECT_LT(rel(res.norm.value, pt_exact<LD>(j, 5).norm), 1e-8) << "j = " << j;
  }
}

TEST(Norm, FullLineAgreesWithReducedLine) {
  // Outgoing on both ends, no parity reduction: the norm differs from the
  // closed form only by the anchor normalisation.
  const auto ex = pt_exact<LD>(0, 5);
  Domain<LD> d;
  d.lo = -5;
  d.hi = 5;
  d.left = LeftBoundary::outgoing;
  PerturbOptions<LD> opts;
  opts.order = 1;
  opts.profile = pt_options(10);
  opts.profile.series_fill_from.reset();
  opts.l_shift = 0;
  const auto res = perturb(pt_width_perturbation<LD>(5, 10), ex.omega0, d, opts);
  const auto& n = res.profile.node(res.profile.size() / 2);
  const CL scale = n.phi_sq / ex.phi_sq(CL(n.x));
  EXPECT_LT(rel(res.norm.value, scale * ex.norm), 1e-8);
  EXPECT_LT(rel(res.orders[0].omega, ex.omega1), 1e-7);
}

TEST(Norm, RejectsNonConvergedProfile) {
  const auto root = step_root<LD>(100, 1, 1);
  const auto prof = build_profile(step_potential<LD>(100, 1), root.omega.value * LD(1.01), LD(0), LD(1.6),
                                  LeftBoundary::dirichlet, tight());
  ASSERT_FALSE(prof.converged);
  const auto md = free_wave_match(root.omega.value, Side::right, LD(1.6));
  EXPECT_EQ(code_of([&] { generalized_norm(prof, md); }), ErrorCode::non_converged_profile);
  EXPECT_EQ(code_of([&] { matrix_element(std::vector<CL>(prof.size()), prof, CL(0), CL(0)); }),
            ErrorCode::non_converged_profile);
}

TEST(Norm, PrecisionExhaustedWithoutSubtraction) {
  const auto ex = pt_exact<LD>(1, 5);
  const auto v = poschl_teller<LD>(5, 1, 10);
  const auto prof = build_reduced_profile(v, ex.omega0, LD(14), Parity::odd, true, pt_options(10));
  const auto md = match_data(v, ex.omega0, Side::right, LD(14), 10);
  NormOptions<LD> off;
  off.auto_subtract = false;
  EXPECT_EQ(code_of([&] { generalized_norm(prof, md, std::nullopt, off, &v); }), ErrorCode::precision_exhausted);
  const auto on = generalized_norm(prof, md, std::nullopt, NormOptions<LD>{}, &v);
  EXPECT_TRUE(on.subtracted);
  EXPECT_LT(on.digits_lost, 12);
  EXPECT_LT(rel(on.value, ex.norm), 1e-8);
}

TEST(Subtraction, ExactAndReducesCancellation) {
  const auto ex = pt_exact<LD>(1, 5);
  const auto v = poschl_teller<LD>(5, 1, 10);
  auto po = pt_options(10);
  po.series_fill_from.reset();
  const auto prof = build_reduced_profile(v, ex.omega0, LD(5), Parity::odd, true, po);
  const auto md = match_data(v, ex.omega0, Side::right, LD(5), 10);
  NormOptions<LD> off;
  off.auto_subtract = false;
  off.precision_limit = 18;
  const auto raw = generalized_norm(prof, md, std::nullopt, off, &v);
  const auto lead = generalized_norm_subtracted(prof, md, v);
  const auto sub = generalized_norm_subtracted(prof, md, v, 3);
  EXPECT_GE(raw.raw_digits_lost, 5);
  EXPECT_LE(lead.digits_lost, raw.raw_digits_lost - 3);
  EXPECT_LE(sub.digits_lost, lead.digits_lost);
  EXPECT_EQ(sub.subasymptotic_terms, 3);
  EXPECT_LT(rel(lead.value, raw.value), 1e-12);
  EXPECT_LT(rel(sub.value, raw.value), 1e-12);
}

TEST(Subtraction, RejectsWrongAmplitude) {
  const auto ex = pt_exact<LD>(0, 5);
  const auto v = poschl_teller<LD>(5, 1, 10);
  auto po = pt_options(10);
  const auto prof = build_reduced_profile(v, ex.omega0, LD(5), Parity::even, true, po);
  const auto series = series_coefficients(*v.right_tail, ex.omega0, 10);
  const CL amp = outgoing_amplitude(prof, &series);
  EXPECT_NO_THROW(asymptotic_subtraction(prof, ex.omega0, amp, LD(5), 0, &series));
  EXPECT_EQ(code_of([&] { asymptotic_subtraction(prof, ex.omega0, amp * LD(1.1), LD(5), 0, &series); }),
            ErrorCode::bad_amplitude);
  EXPECT_EQ(code_of([&] { asymptotic_subtraction<LD>(prof, ex.omega0, amp, LD(5), 2); }),
            ErrorCode::invalid_argument);
}

TEST(MatrixElement, FiniteSupportIsPlainIntegral) {
  const auto res = step_run(0.3L, 1);
  const auto e = step_exact<LD>(100, 1, 1.6L, 1);
  const auto& me = res.orders[0].me;
  EXPECT_EQ(me.surface_part, CL(0));
  EXPECT_EQ(me.digits_lost, 0);
  EXPECT_LT(rel(me.value, e.phi_sq_integral(0.25L, 0.35L)), 1e-10);
  EXPECT_LT(rel(res.orders[0].omega, e.first_order_bump(0.3L, 0.1L)), 1e-9);
}

TEST(MatrixElement, PoschlTellerClosedForms) {
  for (int j : {0, 1}) {
    const auto res = pt_run(j, 5);
    const auto ex = pt_exact<LD>(j, 5);
    EXPECT_LT(rel(res.orders[0].me.value, ex.matrix_element), 1e-8) << "j = " << j;
    EXPECT_LT(rel(res.orders[0].omega, ex.omega1), 1e-8) << "j = " << j;
  }
}

TEST(MatrixElement, GridMismatch) {
  const auto res = step_run(0.3L, 1);
  EXPECT_EQ(code_of([&] { matrix_element(std::vector<CL>(3), res.profile, CL(0), CL(0)); }), ErrorCode::grid_mismatch);
}

TEST(OrderShift, ZeroAndDegenerate) {
  GeneralizedNorm<LD> n;
  n.value = CL(2, 1);
  EXPECT_EQ(order_shift(CL(0), n, CL(3, -1)), CL(0));
  n.value = 0;
  EXPECT_EQ(code_of([&] { order_shift(CL(1), n, CL(3, -1)); }), ErrorCode::degenerate_norm);
}

TEST(EffectivePotential, LowOrders) {
  OrderData<LD> o1;
  o1.omega = 3;
  o1.f = {CL(1), CL(0, 2)};
  const auto v2 = effective_potential<LD>({o1});
  EXPECT_EQ(v2[0], CL(-10));
  EXPECT_EQ(v2[1], CL(-5));
  OrderData<LD> o2;
  o2.omega = CL(0, 1);
  o2.f = {CL(2), CL(1)};
  const auto v3 = effective_potential<LD>({o1, o2});
  // -(2 f1 f2 + 2 omega1 omega2)
  EXPECT_EQ(v3[0], CL(-4, -6));
  EXPECT_EQ(v3[1], CL(0, -10));
  EXPECT_EQ(code_of([] { effective_potential<LD>({}); }), ErrorCode::invalid_argument);
}

TEST(EffectivePotential, VanishesInFreeRegion) {
  // Beyond the step f1 = i omega1 exactly, so V2 = -(f1^2 + omega1^2) = 0.
  const auto res = step_run(0.3L, 2);
  const LD scale = std::norm(res.orders[0].omega);
  for (std::size_t i = 0; i < res.profile.size(); ++i) {
    const auto x = res.profile.node(i).x;
    if (x > 1) EXPECT_LT(std::abs(res.orders[1].v[i]), 1e-9 * scale) << double(x);
  }
}

TEST(DeltaN, Cases) {
  MatchData<LD> m;
  m.mu1 = CL(0.5, 1);
  m.mu2 = 1;
  m.mu1_omega = 3;
  m.d2_omega = 0.5L;
  m.mu_orders = 2;
  EXPECT_EQ(delta_n<LD>(1, m, {}), CL(0.5, 1));
  EXPECT_LT(std::abs(delta_n<LD>(2, m, {CL(0, 2)}) - CL(0, 6)), 1e-18);
  EXPECT_EQ(code_of([&] { delta_n<LD>(3, m, {CL(0, 2), CL(1)}); }), ErrorCode::missing_derivative);
  m.mu_orders = 1;
  EXPECT_EQ(code_of([&] { delta_n<LD>(2, m, {CL(0, 2)}); }), ErrorCode::missing_derivative);
  const auto free = free_wave_match(CL(10, -0.1L), Side::right, LD(1.6));
  EXPECT_TRUE(free.exact_all_orders);
  EXPECT_EQ(delta_n<LD>(3, free, {CL(1), CL(2)}), CL(0));
}

TEST(WavefunctionCorrection, MatchesIntegralOfSource) {
  // f1 phi0^2 (x) = int_0^x (V1 - 2 omega0 omega1) phi0^2.
  const auto res = step_run(0.3L, 1);
  const auto e = step_exact<LD>(100, 1, 1.6L, 1);
  const CL w1 = res.orders[0].omega;
  for (std::size_t i = 0; i < res.profile.size(); i += 5) {
    const auto& n = res.profile.node(i);
    if (n.x < 0.05L) continue;
    CL expected = -LD(2) * e.omega0 * w1 * e.phi_sq_integral(0, n.x);
    if (n.x > 0.25L) expected += e.phi_sq_integral(0.25L, std::min(n.x, 0.35L));
    EXPECT_LT(std::abs(res.orders[0].f[i] * n.phi_sq - expected), 1e-10 * std::abs(e.phi_sq_integral(0, 1.6L)))
        << double(n.x);
  }
  EXPECT_LT(res.orders[0].boundary_consistency, 1e-10);
}

TEST(WavefunctionCorrection, ZeroPerturbationGivesZero) {
  Perturbation<LD> p;
  p.base = step_potential<LD>(100, 1);
  p.first_order = zero_potential<LD>();
  const auto root = step_root<LD>(100, 1, 1);
  PerturbOptions<LD> opts;
  opts.order = 3;
  opts.profile = tight();
  const auto res = perturb(p, root.omega.value, step_domain(root.q), opts);
  ASSERT_EQ(res.orders.size(), 3u);
  for (const auto& o : res.orders) {
    EXPECT_EQ(o.omega, CL(0));
    for (const auto& f : o.f) EXPECT_EQ(f, CL(0));
  }
}

TEST(WavefunctionCorrection, LeftAndRightFormsAgree) {
  const auto res = step_run(0.7L, 1);
  const auto& o = res.orders[0];
  const auto fr = wavefunction_correction_from_right(o.v, res.profile, o.omega, o.delta_plus, res.right.d_omega);
  for (std::size_t i = 0; i < fr.size(); ++i) {
    if (res.profile.node(i).x < 0.05L) continue;
    EXPECT_LT(std::abs(fr[i] - o.f[i]), 1e-8 * (1 + std::abs(o.f[i])));
  }
}

TEST(WavefunctionCorrection, WrongShiftRejected) {
  const auto res = step_run(0.3L, 1);
  const auto& o = res.orders[0];
  EXPECT_EQ(code_of([&] {
              wavefunction_correction(o.v, res.profile, o.omega * LD(1.5), CL(0), CL(0), o.delta_plus,
                                      res.right.d_omega);
            }),
            ErrorCode::inconsistent_shift);
}

TEST(WavefunctionCorrection, WidthDerivativeOfExactLogDerivative) {
  // f(x; mu) = i omega(mu) tanh((1 + mu) x) for the j = 0 mode.
  const auto res = pt_run(0, 5);
  const auto ex = pt_exact<LD>(0, 5);
  const CL i(0, 1);
  for (std::size_t k = 0; k < res.profile.size(); k += 3) {
    const LD x = res.profile.node(k).x;
    const LD t = std::tanh(x), s = 1 / std::cosh(x);
    const CL expected = i * ex.omega1 * t + i * ex.omega0 * x * s * s;
    EXPECT_LT(std::abs(res.orders[0].f[k] - expected), 1e-6) << double(x);
  }
}

TEST(SecondOrder, ExplicitMatchesRecursive) {
  StepBumpConfig<LD> cfg;
  cfg.profile = tight();
  for (LD x0 : {0.3L, 0.75L, 1.4L}) {
    const auto res = step_run(x0, 2);
    const auto [w1, w2] = step_bump_shifts(cfg, x0, res.omega0);
    EXPECT_LT(rel(w1, res.orders[0].omega), 1e-12);
    EXPECT_LT(rel(w2, res.orders[1].omega), 1e-8) << double(x0);
  }
}

TEST(SecondOrder, ExplicitMatchesIndependentQuadrature) {
  const LD x0 = 0.3L, w = 0.1L, a = 1.6L;
  const auto e = step_exact<LD>(100, 1, a, 1);
  const CL w1 = e.first_order_bump(x0, w);
  auto inside = [&](LD y) { return y > x0 - w / 2 && y < x0 + w / 2; };
  auto big_w = [&](LD y) { return (LD(inside(y) ? 1 : 0) - LD(2) * e.omega0 * w1) * e.phi_sq(y); };
  auto big_g = [&](LD y) {
    CL g = -LD(2) * e.omega0 * w1 * e.phi_sq_integral(0, y);
    if (y > x0 - w / 2) g += e.phi_sq_integral(x0 - w / 2, std::min(y, x0 + w / 2));
    return g;
  };
  auto kernel = [&](LD y) { return big_w(y) * big_g(y) * e.psi2(y); };
  const std::vector<LD> cuts{1e-9L, x0 - w / 2, x0 + w / 2, 1, a};
  CL integral = 0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k)
    integral += simpson([&](LD y) { return kernel(std::clamp(y, cuts[k] + 1e-15L, cuts[k + 1] - 1e-15L)); },
                        cuts[k], cuts[k + 1], 8000);
  const CL n = e.norm;
  const CL expected = integral / (LD(2) * e.omega0 * n) - w1 * w1 / (LD(2) * e.omega0) +
                      CL(0, 1) * w1 * w1 * e.phi_sq(a) / (LD(4) * e.omega0 * e.omega0 * n);
  StepBumpConfig<LD> cfg;
  cfg.profile = tight();
  const auto [s1, s2] = step_bump_shifts(cfg, x0, e.omega0);
  EXPECT_LT(rel(s1, w1), 1e-10);
  EXPECT_LT(rel(s2, expected), 1e-8);
}

TEST(SecondOrder, FreeCaseFormula) {
  // With W = 0 only the boundary terms remain.
  const auto res = step_run(0.3L, 1);
  const std::vector<CL> w(res.profile.size(), CL(0));
  const CL w1(0.2L, -0.1L);
  const CL w0 = res.omega0, n = res.norm.value;
  const CL expected = -w1 * w1 / (LD(2) * w0) + CL(0, 1) * w1 * w1 * res.profile.phi_sq_hi() / (LD(4) * w0 * w0 * n);
  EXPECT_LT(rel(second_order_explicit(res.profile, res.norm, w, w1, 1.6L), expected), 1e-15);
}

TEST(SecondOrder, RequiresHalfLineWithWall) {
  const auto res = pt_run(1, 5);
  const std::vector<CL> w(res.profile.size(), CL(0));
  EXPECT_EQ(code_of([&] { second_order_explicit(res.profile, res.norm, w, CL(1), 5.0L); }),
            ErrorCode::unsupported_configuration);
  const auto step = step_run(0.3L, 1);
  EXPECT_EQ(code_of([&] { second_order_explicit(step.profile, step.norm, std::vector<CL>(step.profile.size()),
                                                CL(1), 2.0L); }),
            ErrorCode::unsupported_configuration);
}

TEST(Susceptibility, IntegratesToFirstOrderShift) {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(0.06, 1.5);
  for (int k = 0; k < 10; ++k) {
    const LD x0 = u(rng);
    const auto res = step_run(x0, 1);
    auto h = [&](LD x) { return susceptibility(res.profile, res.norm, x); };
    // phi0^2 has a kink at the step edge.
    const LD lo = x0 - 0.05L, hi = x0 + 0.05L;
    const CL integral = lo < 1 && hi > 1 ? simpson(h, lo, LD(1), 400) + simpson(h, LD(1), hi, 400) : simpson(h, lo, hi, 400);
    const CL shift = integral / (LD(2) * res.omega0);
    EXPECT_LT(rel(shift, res.orders[0].omega), 1e-10) << double(x0);
  }
}

TEST(Susceptibility, OutgoingPhaseBeyondStep) {
  const auto res = step_run(0.3L, 1);
  const CL hb = susceptibility(res.profile, res.norm, LD(1));
  for (LD x : {1.1L, 1.33L, 1.6L})
    EXPECT_LT(rel(susceptibility(res.profile, res.norm, x), hb * std::exp(CL(0, 2) * res.omega0 * (x - 1))), 1e-10);
  EXPECT_EQ(code_of([&] { susceptibility(res.profile, res.norm, LD(2)); }), ErrorCode::invalid_argument);
}

TEST(Susceptibility, NarrowBumpLimit) {
  // int over the bump minus w H(x0) vanishes as w^3 for a centred bump.
  const LD x0 = 0.5L;
  const auto res = step_run(0.3L, 1);
  auto h = [&](LD x) { return susceptibility(res.profile, res.norm, x); };
  auto err = [&](LD w) { return std::abs(simpson(h, x0 - w / 2, x0 + w / 2, 400) - w * h(x0)); };
  const LD e1 = err(0.08L), e2 = err(0.04L);
  EXPECT_NEAR(std::log2(e1 / e2), 3.0, 0.1);
}

TEST(Contour, AgreesWithRealAxisWhenConvergent) {
  const CL w(1, 0.5L);
  const std::function<CL(CL)> v = [](CL z) { return LD(1) / (std::cosh(z) * std::cosh(z)); };
  const std::function<CL(CL)> p = [&](CL z) { return std::exp(CL(0, 2) * w * z); };
  const CL direct = simpson([&](LD x) { return v(x) * p(x); }, 0, 60, 60000);
  EXPECT_LT(rel(rotated_contour_me<LD>(v, p, 0), direct), 1e-12);
  EXPECT_LT(rel(rotated_contour_me<LD>(v, p, 0.4L), direct), 1e-12);
}

TEST(Contour, AngleIndependentAndMatchesClosedForm) {
  for (int j : {0, 1}) {
    const auto ex = pt_exact<LD>(j, 5);
    const std::function<CL(CL)> v = [&](CL z) { return ex.first_order(z); };
    const std::function<CL(CL)> p = [&](CL z) { return ex.phi_sq(z); };
    const CL a = rotated_contour_me<LD>(v, p, 50 * pi_v<LD> / 180);
    const CL b = rotated_contour_me<LD>(v, p, 70 * pi_v<LD> / 180);
    EXPECT_LT(rel(a, b), 1e-8);
    EXPECT_LT(rel(LD(2) * b, ex.matrix_element), 1e-10) << "j = " << j;
  }
}

TEST(Contour, GrowingRayRejected) {
  const auto ex = pt_exact<LD>(1, 5);
  const std::function<CL(CL)> v = [&](CL z) { return ex.first_order(z); };
  const std::function<CL(CL)> p = [&](CL z) { return ex.phi_sq(z); };
  EXPECT_EQ(code_of([&] { rotated_contour_me<LD>(v, p, 0); }), ErrorCode::bad_angle);
  EXPECT_EQ(code_of([&] { rotated_contour_me<LD>(v, p, -pi_v<LD> / 6); }), ErrorCode::bad_angle);
}

TEST(Invariants, LIndependence) {
  const auto step = step_run(0.3L, 2, 1);
  EXPECT_LT(step.norm_l_residual, 1e-10);
  for (LD r : step.l_residual) EXPECT_LT(r, 1e-10);
  for (int j : {0, 1}) {
    const auto pt = pt_run(j, 5, 10, 1);
    EXPECT_LT(pt.norm_l_residual, 1e-8) << "j = " << j;
    EXPECT_LT(pt.l_residual[0], 1e-8) << "j = " << j;
  }
}

TEST(Invariants, NearClosedLimit) {
  // As the step grows the mode approaches a standing wave: the norm becomes
  // real and the frequency approaches the real axis from below.
  LD prev_phase = 1, prev_leak = 1;
  for (LD v0 : {100.0L, 1000.0L, 10000.0L}) {
    const auto res = step_run(0.3L, 1, 0, v0);
    const LD phase = std::abs(std::arg(res.norm.value));
    const LD leak = -res.omega0.imag() / res.omega0.real();
    EXPECT_GT(leak, 0);
    EXPECT_LT(phase, prev_phase);
    EXPECT_LT(leak, prev_leak);
    prev_phase = phase;
    prev_leak = leak;
  }
  EXPECT_LT(prev_phase, 1e-2);
  EXPECT_LT(prev_leak, 1e-3);
}

TEST(Invariants, PartialSums) {
  const auto res = step_run(0.3L, 2);
  const LD mu = 0.37L;
  EXPECT_EQ(res.omega(mu, 0), res.omega0);
  EXPECT_LT(std::abs(res.omega(mu, 1) - res.omega0 - mu * res.orders[0].omega), 1e-17);
  EXPECT_LT(std::abs(res.omega(mu, 2) - res.omega(mu, 1) - mu * mu * res.orders[1].omega), 1e-17);
  EXPECT_EQ(res.omega(mu), res.omega(mu, 2));
}

TEST(Perturb, WidthPerturbationHasNoSecondOrder) {
  Domain<LD> d;
  d.lo = 0;
  d.hi = 5;
  d.left = LeftBoundary::neumann;
  d.mirror_factor = 2;
  PerturbOptions<LD> opts;
  opts.order = 2;
  opts.profile = pt_options(10);
  EXPECT_EQ(code_of([&] { perturb(pt_width_perturbation<LD>(5, 10), pt_exact<LD>(0, 5).omega0, d, opts); }),
            ErrorCode::missing_derivative);
  opts.order = 0;
  EXPECT_EQ(code_of([&] { perturb(pt_width_perturbation<LD>(5, 10), pt_exact<LD>(0, 5).omega0, d, opts); }),
            ErrorCode::invalid_argument);
}
