#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "oracles.hpp"
#include "smolsens/error.hpp"
#include "smolsens/forward.hpp"
#include "smolsens/ode.hpp"

using namespace smolsens;

namespace {

ParametricKernel kernel(KernelFamily f, ParamBox box, std::vector<double> lam, std::size_t n,
                        double phi_scale = 1.0) {
  return make_kernel({f, std::move(box)}, std::move(lam), BoundFunction::affine(phi_scale), n);
}

SolveOptions tight() {
  SolveOptions o;
  o.rel_tol = 1e-12;
  o.abs_tol = 1e-14;
  o.dt_checkpoint = 0.25;
  return o;
}

GridKernel zero_kernel(std::size_t n) {
  GridKernel g;
  g.value = KernelMatrix(n);
  g.partials = {KernelMatrix(n)};
  return g;
}

}  // namespace

TEST(Ode, ZeroRhsKeepsState) {
  const std::vector<double> out{0.0, 1.0};
  const auto sol = integrate_ode({1.0, -2.0}, [](double, auto, auto d) { d[0] = d[1] = 0.0; }, 0.0, 1.0, out, {});
  EXPECT_EQ(sol.states.back(), (std::vector<double>{1.0, -2.0}));
}

TEST(Ode, ExponentialGrowth) {
  OdeOptions o;
  o.rel_tol = 1e-10;
  const std::vector<double> out{0.0, 1.0};
  const auto sol = integrate_ode({1.0}, [](double, auto y, auto d) { d[0] = y[0]; }, 0.0, 1.0, out, o);
  EXPECT_LE(std::fabs(sol.states.back()[0] - std::exp(1.0)) / std::exp(1.0), 10 * o.rel_tol);
}

TEST(Ode, RotationAgainstClosedForm) {
  OdeOptions o;
  o.rel_tol = 1e-10;
  o.abs_tol = 1e-12;
  const std::vector<double> out{0.0, 0.5, 1.0, 2.0};
  const auto sol = integrate_ode(
      {1.0, 0.0},
      [](double, auto y, auto d) {
        d[0] = -2.0 * y[0] + y[1];
        d[1] = -y[0] - 2.0 * y[1];
      },
      0.0, 2.0, out, o);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double t = out[i];
    const double e = std::exp(-2.0 * t);
    EXPECT_NEAR(sol.states[i][0], e * std::cos(t), 10 * o.rel_tol);
    EXPECT_NEAR(sol.states[i][1], -e * std::sin(t), 10 * o.rel_tol);
  }
}

TEST(Ode, HitsOutputTimesExactly) {
  const std::vector<double> out{0.0, 0.1, 0.7, 1.3};
  const auto sol = integrate_ode({1.0}, [](double, auto y, auto d) { d[0] = -y[0]; }, 0.0, 1.3, out, {});
  EXPECT_EQ(sol.times, out);
}

TEST(Ode, Rk4FourthOrder) {
  auto err = [](std::size_t sub) {
    const std::vector<double> times{0.0, 1.0};
    const auto ys = integrate_rk4({1.0}, [](double, auto y, auto d) { d[0] = -3.0 * y[0]; }, times, sub);
    return std::fabs(ys.back()[0] - std::exp(-3.0));
  };
  EXPECT_NEAR(err(64) / err(128), 16.0, 0.5);
}

TEST(Rhs, ConstantKernelOnMonodisperse) {
  const auto r = rhs(GridMeasure::dirac(6, 1), KernelMatrix(6, 1.0));
  EXPECT_EQ(r[1], -1.0);
  EXPECT_EQ(r[2], 0.5);
}

TEST(Rhs, ZeroKernel) {
  const auto r = rhs(oracle::random_signed(6, 1), KernelMatrix(6));
  for (double w : r.weights()) EXPECT_EQ(w, 0.0);
}

TEST(Rhs, MassBalanceIncludesOverflow) {
  const std::size_t n = 10;
  const auto F = KernelMatrix::tabulate(n, [](Mass x, Mass y) { return double(x + y); });
  GridMeasure mu(n);
  for (Mass k = 1; k <= 10; ++k) mu[k] = 1.0 / double(k);
  const auto r = rhs(mu, F);
  const auto x = TestFunction::sample(n, [](Mass k) { return double(k); });
  EXPECT_NEAR(pair(x, r) + r.overflow_mass(), 0.0, 1e-13);
}

TEST(Forward, ConstantKernelClosedForm) {
  const auto k = kernel(KernelFamily::constant, {{0.5, 1.5}}, {1.0}, 64);
  const auto traj = solve_forward(GridMeasure::dirac(64, 1), tabulate(k), 2.0, tight());
  const auto exact = oracle::constant_kernel_solution(64, 2.0, 1.0);
  EXPECT_LE(oracle::max_abs_diff(traj.back().weights(), exact), 1e-8);
  EXPECT_NEAR(traj.back()[1], 0.25, 1e-8);
  EXPECT_NEAR(traj.back()[2], 0.125, 1e-8);
  EXPECT_NEAR(traj.back()[3], 0.0625, 1e-8);
  EXPECT_NEAR(pair(TestFunction(64, 1.0), traj.back()), 0.5, 1e-8);
}

TEST(Forward, ClosedFormSatisfiesTheGridEquation) {
  // substitution check of the oracle itself: central difference in t of the
  // closed form against the literal grid vector field
  const std::size_t n = 64;
  auto K = [](Mass, Mass) { return 1.0; };
  const double t = 1.3;
  const double d = 1e-4;
  const auto plus = oracle::constant_kernel_solution(n, t + d, 1.0);
  const auto minus = oracle::constant_kernel_solution(n, t - d, 1.0);
  const auto field = oracle::forward_rhs(K, oracle::constant_kernel_solution(n, t, 1.0));
  for (std::size_t k = 0; k < 32; ++k) EXPECT_NEAR((plus[k] - minus[k]) / (2 * d), field[k], 1e-8);
}

TEST(Forward, AgreesWithFixedStepReference) {
  const std::size_t n = 24;
  const auto k = kernel(KernelFamily::affine_mix, {{0.5, 1.5}, {0.0, 0.5}, {0.0, 0.1}}, {1.0, 0.2, 0.01}, n);
  const GridMeasure mu0(std::vector<double>{0.5, 0.3, 0.2, 0, 0, 0, 0, 0, 0, 0, 0, 0,
                                            0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0});
  SolveOptions o = tight();
  o.overflow_fraction_max = 1.0;
  const auto traj = solve_forward(mu0, tabulate(k), 1.0, o);
  auto K = [&](Mass x, Mass y) { return k.eval(x, y); };
  const auto ref = oracle::forward_rk4(K, {mu0.weights().begin(), mu0.weights().end()}, 1.0, 400);
  EXPECT_LE(oracle::max_abs_diff(traj.back().weights(), ref), 1e-9);
}

TEST(Forward, ZeroKernelIsStationary) {
  const auto mu0 = oracle::random_signed(8, 3).abs();
  const auto traj = solve_forward(mu0, zero_kernel(8), 1.0, tight());
  for (std::size_t i = 0; i < traj.size(); ++i) EXPECT_EQ(traj.state(i), mu0);
}

TEST(Forward, FirstCheckpointIsTheInitialMeasure) {
  const auto k = kernel(KernelFamily::additive, {{0.5, 1.5}}, {1.0}, 32);
  const auto mu0 = GridMeasure::dirac(32, 1);
  SolveOptions o = tight();
  o.overflow_fraction_max = 1.0;
  const auto traj = solve_forward(mu0, tabulate(k), 0.5, o);
  EXPECT_EQ(traj.time(0), 0.0);
  EXPECT_EQ(traj.front(), mu0);
}

TEST(Forward, CheckpointGrid) {
  const auto g = checkpoint_grid(1.0, 0.3);
  ASSERT_EQ(g.size(), 5u);
  EXPECT_EQ(g.back(), 1.0);
  EXPECT_EQ(checkpoint_grid(0.0, 0.1).size(), 1u);
}

TEST(Forward, MultiplicativeBlowUpIsReported) {
  const auto k = kernel(KernelFamily::multiplicative, {{0.0, 1.0}}, {1.0}, 64);
  SolveOptions o;
  try {
    solve_forward(GridMeasure::dirac(64, 1), tabulate(k), 3.0, o);
    FAIL() << "expected BlowUpError";
  } catch (const BlowUpError& e) {
    EXPECT_GT(e.time(), 0.0);
    EXPECT_LT(e.time(), 1.0);
  }
}

TEST(Forward, RejectsNegativeInitialMeasure) {
  const auto k = kernel(KernelFamily::constant, {{0.5, 1.5}}, {1.0}, 4);
  EXPECT_THROW(solve_forward(GridMeasure::dirac(4, 2, -1.0), tabulate(k), 1.0, tight()), NegativityError);
}

TEST(Forward, DeterministicAcrossCalls) {
  const auto k = kernel(KernelFamily::additive, {{0.5, 1.5}}, {1.0}, 32);
  SolveOptions o = tight();
  o.overflow_fraction_max = 1.0;
  const auto a = solve_forward(GridMeasure::dirac(32, 1), tabulate(k), 0.5, o);
  const auto b = solve_forward(GridMeasure::dirac(32, 1), tabulate(k), 0.5, o);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.state(i), b.state(i));
}

TEST(Moments, ZeroKernelConstant) {
  const auto traj = solve_forward(GridMeasure::dirac(8, 2), zero_kernel(8), 1.0, tight());
  const std::vector<double> p{0.0, 1.0, 4.5};
  const auto m = moments_report(traj, BoundFunction::affine(), p);
  for (const auto& row : m.values) EXPECT_EQ(row, m.values.front());
}

TEST(Moments, NumberColumnMatchesClosedForm) {
  const auto k = kernel(KernelFamily::constant, {{0.5, 1.5}}, {1.0}, 64);
  const auto traj = solve_forward(GridMeasure::dirac(64, 1), tabulate(k), 2.0, tight());
  const std::vector<double> p{0.0, 1.0};
  const auto m = moments_report(traj, BoundFunction::affine(), p);
  for (std::size_t i = 0; i < m.times.size(); ++i) {
    EXPECT_NEAR(m.values[i][0], 1.0 / (1.0 + m.times[i] / 2.0), 1e-8);
    // phi = 1 + x: number plus mass on the grid, mass including overflow is 1
    const double mass = m.values[i][1] - m.values[i][0] + traj.state(i).overflow_mass();
    EXPECT_NEAR(mass, 1.0, 1e-10);
  }
}

TEST(Moments, RejectsPowerOutOfRange) {
  const auto traj = solve_forward(GridMeasure::dirac(8, 2), zero_kernel(8), 1.0, tight());
  const std::vector<double> p{9.0};
  EXPECT_THROW(moments_report(traj, BoundFunction::affine(), p), SolverFault);
}

TEST(TrajectoryCsv, RoundTripIsLossless) {
  const auto k = kernel(KernelFamily::additive, {{0.5, 1.5}}, {1.0}, 16);
  SolveOptions o = tight();
  o.overflow_fraction_max = 1.0;
  const auto traj = solve_forward(GridMeasure::dirac(16, 1), tabulate(k), 1.0, o);
  std::stringstream ss;
  write_trajectory_csv(ss, traj);
  const auto back = read_trajectory_csv(ss);
  ASSERT_EQ(back.size(), traj.size());
  for (std::size_t i = 0; i < traj.size(); ++i) {
    EXPECT_EQ(back.time(i), traj.time(i));
    EXPECT_EQ(back.state(i), traj.state(i));
  }
}

TEST(TrajectoryInterpolation, LinearBetweenCheckpoints) {
  const Trajectory tr({0.0, 1.0}, {GridMeasure::dirac(2, 1, 1.0), GridMeasure::dirac(2, 1, 3.0)});
  EXPECT_DOUBLE_EQ(tr.at(0.25)[1], 1.5);
  EXPECT_EQ(tr.index_of(1.0), 1u);
  EXPECT_THROW(tr.index_of(0.5), SolverFault);
}
