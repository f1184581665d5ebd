#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "smolsens/error.hpp"
#include "smolsens/propagator.hpp"
#include "smolsens/sensitivity.hpp"

using namespace smolsens;

namespace {

SolveOptions fine(double dt) {
  SolveOptions o;
  o.rel_tol = 1e-12;
  o.abs_tol = 1e-14;
  o.dt_checkpoint = dt;
  o.overflow_fraction_max = 1.0;
  return o;
}

double sup_abs(const TestFunction& f) {
  double m = 0.0;
  for (double v : f.values()) m = std::max(m, std::fabs(v));
  return m;
}

TestFunction wavy(std::size_t n) {
  return TestFunction::sample(n, [](Mass x) { return std::cos(0.37 * double(x)) + 0.1; });
}

// Lambda f(x) = sum_y (f(x+y) - f(x) - f(y)) K(x,y) mu(y), f = 0 above the grid.
TestFunction lambda_reference(const TestFunction& f, const GridMeasure& mu, const std::function<double(Mass, Mass)>& K) {
  const auto n = static_cast<Mass>(f.n_max());
  auto val = [&](Mass z) { return z <= n ? f.at(z) : 0.0; };
  return TestFunction::sample(f.n_max(), [&](Mass x) {
    double s = 0.0;
    for (Mass y = 1; y <= n; ++y) s += (val(x + y) - val(x) - val(y)) * K(x, y) * mu[y];
    return s;
  });
}

ParametricKernel constant_kernel(std::size_t n) {
  return make_kernel({KernelFamily::constant, {{0.5, 1.5}}}, {1.0}, BoundFunction::affine(), n);
}

GridKernel zero_kernel(std::size_t n) {
  GridKernel g;
  g.value = KernelMatrix(n);
  g.partials = {KernelMatrix(n)};
  return g;
}

}  // namespace

TEST(LambdaApply, IndicatorUnderConstantKernel) {
  const auto out = lambda_apply(TestFunction::indicator(8, 1), GridMeasure::dirac(8, 1), KernelMatrix(8, 1.0));
  EXPECT_EQ(out(1), -2.0);
  for (Mass k = 2; k <= 8; ++k) EXPECT_EQ(out(k), -1.0);
}

TEST(LambdaApply, MassFunctionVanishesAwayFromTheEdge) {
  const auto x = TestFunction::sample(16, [](Mass k) { return double(k); });
  const auto mu = GridMeasure::dirac(16, 1);
  const auto out = lambda_apply(x, mu, KernelMatrix::tabulate(16, [](Mass a, Mass b) { return double(a + b); }));
  for (Mass k = 1; k < 16; ++k) EXPECT_EQ(out(k), 0.0);
}

TEST(LambdaApply, MatchesDirectSum) {
  auto K = [](Mass x, Mass y) { return 1.0 + 0.5 * double(x + y); };
  const auto mu = oracle::random_signed(14, 1).abs();
  const auto f = wavy(14);
  const auto got = lambda_apply(f, mu, KernelMatrix::tabulate(14, K));
  const auto ref = lambda_reference(f, mu, K);
  EXPECT_LE(oracle::max_abs_diff(got.values(), ref.values()), 1e-13);
}

TEST(LambdaApply, AdjointOfCoagApply) {
  const auto F = KernelMatrix::tabulate(20, [](Mass x, Mass y) { return std::sqrt(double(x * y)) + 1.0; });
  const auto mu = oracle::random_signed(20, 2).abs();
  for (std::uint64_t seed = 3; seed < 13; ++seed) {
    const auto rho = oracle::random_signed(20, seed);
    const auto f = wavy(20);
    const double lhs = pair(lambda_apply(f, mu, F), rho);
    const double rhs = pair(f, coag_apply(F, mu, rho));
    EXPECT_NEAR(lhs, rhs, 1e-14 * (1.0 + std::fabs(lhs)));
  }
}

TEST(LambdaPartialApply, ConstantFamilyIsLambdaWithUnitKernel) {
  const auto g = tabulate(constant_kernel(10));
  const auto mu = oracle::random_signed(10, 4).abs();
  const auto f = wavy(10);
  EXPECT_EQ(lambda_partial_apply(f, mu, g, 0).values().size(), 10u);
  EXPECT_LE(oracle::max_abs_diff(lambda_partial_apply(f, mu, g, 0).values(),
                                 lambda_apply(f, mu, KernelMatrix(10, 1.0)).values()),
            0.0);
}

TEST(LambdaPartialApply, ZeroDerivative) {
  const auto out = lambda_partial_apply(wavy(8), GridMeasure::dirac(8, 1), zero_kernel(8), 0);
  for (double v : out.values()) EXPECT_EQ(v, 0.0);
}

TEST(LambdaPartialApply, AdjointIdentity) {
  const auto k = make_kernel({KernelFamily::additive, {{0.5, 1.5}}}, {1.0}, BoundFunction::affine(), 16);
  const auto g = tabulate(k);
  const auto mu = oracle::random_signed(16, 5).abs();
  const auto f = wavy(16);
  const double lhs = pair(lambda_partial_apply(f, mu, g, 0), mu);
  const double rhs = pair(f, coag_apply(g.partials[0], mu, mu));
  EXPECT_NEAR(lhs, rhs, 1e-13 * (1.0 + std::fabs(lhs)));
}

TEST(SplitOperators, LambdaIsJMinusM) {
  const auto F = KernelMatrix::tabulate(12, [](Mass x, Mass y) { return double(x + y); });
  const auto mu = oracle::random_signed(12, 6).abs();
  const SplitOperators ops(mu, F);
  const auto f = wavy(12);
  const auto split = ops.J(f) - ops.M(f);
  EXPECT_LE(oracle::max_abs_diff(split.values(), lambda_apply(f, mu, F).values()), 1e-13);
  const auto j = ops.L(f) - ops.tau() * f;
  EXPECT_LE(oracle::max_abs_diff(j.values(), ops.J(f).values()), 1e-14);
}

TEST(SplitOperators, MNormAndJGrowthOnPhi) {
  const std::size_t n = 10;
  const auto F = KernelMatrix(n, 1.0);
  const auto mu = GridMeasure::dirac(n, 1, 0.5);
  const SplitOperators ops(mu, F);
  const auto h = TestFunction::sample(n, [](Mass x) { return 1.0 + double(x); });
  // M h(x) = h(1) * 0.5 = 1; the norm is max_x 1 / h(x) = 1/2
  EXPECT_DOUBLE_EQ(ops.M_norm(h), 0.5);
  // J h(x) = 0.5 (h(x+1) - h(x)) = 0.5 for x < n, -0.5 h(n) at the edge: c = max 0.5 / h(x) = 0.25
  EXPECT_DOUBLE_EQ(ops.J_growth(h), 0.25);
}

TEST(Backward, IdentityAtTheAnchor) {
  const auto traj = solve_forward(GridMeasure::dirac(16, 1), tabulate(constant_kernel(16)), 1.0, fine(0.125));
  const auto f = wavy(16);
  const auto path = solve_backward(f, traj, tabulate(constant_kernel(16)), 1.0, 1.0);
  ASSERT_EQ(path.values.size(), 1u);
  EXPECT_EQ(path.at_start().values().front(), f.values().front());
  EXPECT_LE(oracle::max_abs_diff(path.at_start().values(), f.values()), 0.0);
}

TEST(Backward, ZeroKernelIsConstant) {
  const auto traj = solve_forward(GridMeasure::dirac(8, 1), zero_kernel(8), 1.0, fine(0.25));
  const auto f = wavy(8);
  const auto path = solve_backward(f, traj, zero_kernel(8), 1.0, 0.0);
  for (const auto& v : path.values) EXPECT_LE(oracle::max_abs_diff(v.values(), f.values()), 0.0);
}

TEST(Backward, DualityWithLinearizedEquation) {
  const std::size_t n = 32;
  const auto k = make_kernel({KernelFamily::additive, {{0.5, 1.5}}}, {1.0}, BoundFunction::affine(), n);
  const auto g = tabulate(k);
  SolveOptions o = fine(1.0 / 256);
  o.overflow_fraction_max = 1.0;
  const auto rho0 = oracle::random_signed(n, 7);
  const auto lin = solve_linearized(GridMeasure::dirac(n, 1), rho0, g, 1.0, o);
  const auto f = wavy(n);
  const auto path = solve_backward(f, lin.mu, g, 1.0, 0.0);
  EXPECT_NEAR(pair(path.at_start(), rho0), pair(f, lin.rho.back()), 1e-7);
}

TEST(Backward, BoundedKernelNormBound) {
  const std::size_t n = 32;
  const auto k = make_kernel({KernelFamily::affine_mix, {{0.5, 1.5}, {0.0, 0.1}, {0.0, 0.01}}}, {1.0, 0.05, 0.005},
                             BoundFunction::affine(), n);
  const auto g = tabulate(k);
  SolveOptions o = fine(1.0 / 64);
  o.overflow_fraction_max = 1.0;
  const auto traj = solve_forward(GridMeasure::dirac(n, 1), g, 1.0, o);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto f = TestFunction::sample(n, [&](Mass x) { return std::sin(double(seed * x)); });
    const auto path = solve_backward(f, traj, g, 1.0, 0.0);
    for (std::size_t i = 0; i < path.times.size(); ++i)
      EXPECT_LE(sup_abs(path.values[i]), bounded_kernel_propagator_bound(traj, g, path.times[i], 1.0) * sup_abs(f));
  }
}

TEST(Backward, CocycleConstantKernel) {
  const auto g = tabulate(constant_kernel(64));
  const auto traj = solve_forward(GridMeasure::dirac(64, 1), g, 2.0, fine(1.0 / 64));
  EXPECT_LE(propagator_cocycle_check(traj, g, 0.0, 1.0, 2.0, wavy(64)), 1e-7);
  EXPECT_LE(propagator_cocycle_check(traj, g, 1.0, 1.0, 1.0, wavy(64)), 1e-15);
}

TEST(Backward, CocycleZeroKernel) {
  const auto traj = solve_forward(GridMeasure::dirac(8, 1), zero_kernel(8), 2.0, fine(0.25));
  EXPECT_EQ(propagator_cocycle_check(traj, zero_kernel(8), 0.0, 1.0, 2.0, wavy(8)), 0.0);
}

TEST(Duhamel, ZeroKernelTerminatesImmediately) {
  const auto traj = solve_forward(GridMeasure::dirac(8, 1), zero_kernel(8), 1.0, fine(0.25));
  const auto f = wavy(8);
  const auto path = solve_backward_duhamel(f, traj, zero_kernel(8), 1.0, 0.0);
  // the leading term is f itself; the first correction is exactly zero and stops the series
  EXPECT_EQ(path.series_terms, 2u);
  for (const auto& v : path.values) EXPECT_LE(oracle::max_abs_diff(v.values(), f.values()), 1e-15);
}

TEST(Duhamel, AgreesWithBackwardOde) {
  const auto g = tabulate(constant_kernel(64));
  const auto traj = solve_forward(GridMeasure::dirac(64, 1), g, 1.0, fine(1.0 / 1024));
  const auto f = wavy(64);
  const auto a = solve_backward(f, traj, g, 1.0, 0.0);
  const auto b = solve_backward_duhamel(f, traj, g, 1.0, 0.0);
  ASSERT_EQ(a.values.size(), b.values.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) worst = std::max(worst, sup_abs(a.values[i] - b.values[i]));
  EXPECT_LE(worst, 1e-6);
}

TEST(Duhamel, RespectsWeightedNormBound) {
  const auto g = tabulate(constant_kernel(64));
  const auto traj = solve_forward(GridMeasure::dirac(64, 1), g, 1.0, fine(1.0 / 256));
  const auto h = TestFunction::sample(64, [](Mass x) { return 1.0 + double(x); });
  const auto f = TestFunction::sample(64, [](Mass x) { return std::sqrt(double(x)); });
  const auto path = solve_backward_duhamel(f, traj, g, 1.0, 0.0);
  for (std::size_t i = 0; i < path.times.size(); ++i) {
    const auto b = propagator_norm_bound(traj, g.value, h, path.times[i], 1.0);
    EXPECT_LE(sup_norm_weighted(path.values[i], h), b.factor(1.0 - path.times[i]) * sup_norm_weighted(f, h) * (1 + 1e-12));
  }
}

TEST(Representation, ConstantKernelNumber) {
  const auto g = tabulate(constant_kernel(64));
  const auto traj = solve_forward(GridMeasure::dirac(64, 1), g, 2.0, fine(1.0 / 512));
  EXPECT_NEAR(representation_sensitivity(TestFunction(64, 1.0), traj, g, 0, 2.0), -0.25, 1e-5);
  EXPECT_EQ(representation_sensitivity(TestFunction(64, 1.0), traj, g, 0, 0.0), 0.0);
}

TEST(Representation, ZeroDerivative) {
  GridKernel g = tabulate(constant_kernel(16));
  g.partials[0] = KernelMatrix(16);
  const auto traj = solve_forward(GridMeasure::dirac(16, 1), g, 1.0, fine(1.0 / 64));
  EXPECT_EQ(representation_sensitivity(wavy(16), traj, g, 0, 1.0), 0.0);
}

TEST(Representation, MatchesDirectRouteOnAdditiveKernel) {
  const std::size_t n = 48;
  const auto k = make_kernel({KernelFamily::additive, {{0.5, 1.5}}}, {1.0}, BoundFunction::affine(), n);
  const auto g = tabulate(k);
  SolveOptions o = fine(1.0 / 512);
  o.overflow_fraction_max = 1.0;
  const auto cs = solve_coupled(GridMeasure::dirac(n, 1), g, 0.5, o);
  const auto f = wavy(n);
  EXPECT_NEAR(representation_sensitivity(f, cs.mu, g, 0, 0.5), pair(f, cs.sigma.component(cs.sigma.size() - 1, 0)),
              1e-5);
}

TEST(Linearized, MassOfRhoIsConserved) {
  const std::size_t n = 24;
  const auto k = make_kernel({KernelFamily::constant, {{0.5, 1.5}}}, {1.0}, BoundFunction::affine(), n);
  const auto rho0 = oracle::random_signed(n, 8);
  const auto lin = solve_linearized(GridMeasure::dirac(n, 1), rho0, tabulate(k), 1.0, fine(0.25));
  const auto x = TestFunction::sample(n, [](Mass m) { return double(m); });
  for (const auto& r : lin.rho) EXPECT_NEAR(pair(x, r) + r.overflow_mass(), pair(x, rho0), 1e-10);
}
