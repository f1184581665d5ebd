#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "smolsens/error.hpp"
#include "smolsens/forward.hpp"
#include "smolsens/stochastic.hpp"

using namespace smolsens;

namespace {

KernelFn unit() {
  return [](Mass, Mass) { return 1.0; };
}

ParametricKernel constant_kernel(std::size_t n, double lam = 1.0) {
  return make_kernel({KernelFamily::constant, {{0.5, 1.5}}}, {lam}, BoundFunction::affine(), n);
}

}  // namespace

TEST(Census, RoundsToIntegers) {
  GridMeasure mu0(4);
  mu0[1] = 0.5;
  mu0[2] = 0.25;
  const auto c = make_census(mu0, 10);
  ASSERT_EQ(c.species.size(), 2u);
  EXPECT_EQ(c.species[0], (std::pair<Mass, std::int64_t>{1, 5}));
  EXPECT_EQ(c.species[1], (std::pair<Mass, std::int64_t>{2, 3}));
  EXPECT_EQ(c.particles, 8);
  EXPECT_DOUBLE_EQ(c.n_eff, 8.0 / 0.75);
  EXPECT_DOUBLE_EQ(c.rounding_residual, 0.5);
}

TEST(Census, RejectsDegenerateInput) {
  EXPECT_THROW(make_census(GridMeasure::dirac(4, 1), 1), SolverFault);
  EXPECT_THROW(make_census(GridMeasure::dirac(4, 1, -1.0), 100), SolverFault);
  EXPECT_THROW(make_census(GridMeasure::dirac(4, 1, 0.01), 100), SolverFault);
}

TEST(UniformStream, ReproducibleAndInRange) {
  UniformStream a(42, 3);
  UniformStream b(42, 3);
  UniformStream c(42, 4);
  bool differs = false;
  for (int i = 0; i < 1000; ++i) {
    const double x = a.next();
    EXPECT_EQ(x, b.next());
    EXPECT_GE(x, 0.0);
    EXPECT_LT(x, 1.0);
    differs = differs || x != c.next();
  }
  EXPECT_TRUE(differs);
  EXPECT_EQ(a.draws(), 1000u);
}

TEST(ParticleSystem, TwoParticleSingleJump) {
  const auto census = make_census(GridMeasure::dirac(4, 1), 2);
  double mean_wait = 0.0;
  const int trials = 4000;
  for (int s = 0; s < trials; ++s) {
    ParticleSystem sys(census, unit(), 7, static_cast<std::uint64_t>(s));
    EXPECT_DOUBLE_EQ(sys.total_rate(), 0.5);
    sys.advance_to(1e9);
    EXPECT_EQ(sys.jumps(), 1u);
    EXPECT_EQ(sys.uniforms(), 2u);
    const auto e = sys.empirical(4);
    EXPECT_EQ(e[2], 0.5);
    EXPECT_EQ(e[1], 0.0);
  }
  // the jump time is exponential with rate 1/2: check the mean on fresh runs
  for (int s = 0; s < trials; ++s) {
    ParticleSystem sys(census, unit(), 11, static_cast<std::uint64_t>(s));
    double lo = 0.0;
    double hi = 64.0;
    // bisection on the jump time using advance_to
    for (int it = 0; it < 40; ++it) {
      ParticleSystem probe(census, unit(), 11, static_cast<std::uint64_t>(s));
      const double mid = 0.5 * (lo + hi);
      probe.advance_to(mid);
      (probe.jumps() == 0 ? lo : hi) = mid;
    }
    mean_wait += hi / trials;
  }
  EXPECT_NEAR(mean_wait, 2.0, 4.0 * 2.0 / std::sqrt(double(trials)));
}

TEST(ParticleSystem, ZeroKernelNeverJumps) {
  const auto census = make_census(GridMeasure::dirac(8, 1), 100);
  ParticleSystem sys(census, [](Mass, Mass) { return 0.0; }, 1);
  sys.advance_to(10.0);
  EXPECT_EQ(sys.jumps(), 0u);
  EXPECT_EQ(sys.time(), 10.0);
  EXPECT_EQ(sys.empirical(8), GridMeasure::dirac(8, 1));
}

TEST(ParticleSystem, ConservesMassAndOverflowsAboveGrid) {
  const auto census = make_census(GridMeasure::dirac(4, 1), 400);
  ParticleSystem sys(census, unit(), 3);
  sys.advance_to(20.0);
  EXPECT_EQ(sys.total_mass(), 400);
  const auto e = sys.empirical(4);
  double mass = e.overflow_mass();
  for (Mass k = 1; k <= 4; ++k) mass += double(k) * e[k];
  EXPECT_DOUBLE_EQ(mass, 1.0);
  EXPECT_GT(e.overflow_number(), 0.0);
}

TEST(MlRun, NumberDensityNearDeterministic) {
  const auto mu0 = GridMeasure::dirac(64, 1);
  const std::vector<double> times{0.0, 1.0, 2.0};
  const auto runs = ml_replicas(mu0, 10000, unit(), times, 12345, 32, 1);
  const TestFunction one(64, 1.0);
  const auto est = observable_estimate(runs, one, 2);
  EXPECT_NEAR(est.mean, 0.5, 3.0 * est.std_error);
  EXPECT_GT(est.std_error, 0.0);
}

TEST(MlRun, ThreadCountDoesNotChangeOutput) {
  const auto mu0 = GridMeasure::dirac(32, 1);
  const std::vector<double> times{0.0, 0.5, 1.0};
  const auto a = ml_replicas(mu0, 2000, unit(), times, 99, 6, 1);
  const auto b = ml_replicas(mu0, 2000, unit(), times, 99, 6, 3);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t r = 0; r < a.size(); ++r)
    for (std::size_t i = 0; i < times.size(); ++i) EXPECT_EQ(a[r].empirical.state(i), b[r].empirical.state(i));
}

TEST(MlRun, SameSeedSameRun) {
  const auto mu0 = GridMeasure::dirac(32, 1);
  const std::vector<double> times{0.0, 1.0};
  const auto a = ml_run(mu0, 1000, unit(), times, 5, 2);
  const auto b = ml_run(mu0, 1000, unit(), times, 5, 2);
  EXPECT_EQ(a.empirical.back(), b.empirical.back());
  // two draws per jump, plus the waiting time that overshoots the horizon
  EXPECT_EQ(a.uniforms, 2 * a.jumps + 1);
}

TEST(MeanEstimate, Basics) {
  const std::vector<double> xs{1.0, 2.0, 3.0, 4.0};
  const auto e = estimate_mean(xs);
  EXPECT_DOUBLE_EQ(e.mean, 2.5);
  EXPECT_NEAR(e.std_error, std::sqrt(5.0 / 3.0 / 4.0), 1e-15);
  EXPECT_TRUE(e.covers(2.5, 0.0));
  const std::vector<double> one{7.0};
  EXPECT_TRUE(std::isinf(estimate_mean(one).std_error));
}

TEST(CoupledFd, ParameterFreeLegsAreIdentical) {
  const auto mu0 = GridMeasure::dirac(32, 1);
  const std::vector<double> times{0.0, 1.0, 2.0};
  const auto est = coupled_fd(mu0, 2000, unit(), unit(), 0.05, times, 8, 8, 1);
  for (const auto& rep : est.per_replica)
    for (const auto& m : rep)
      for (double w : m.weights()) EXPECT_EQ(w, 0.0);
}

TEST(CoupledFd, CoversAnalyticSensitivity) {
  const auto k = constant_kernel(64);
  const std::vector<double> times{0.0, 1.0, 2.0};
  const auto est = coupled_fd_sensitivity(GridMeasure::dirac(64, 1), 10000, k, 0, 0.05, times, 2024, 64, 1);
  const auto e = est.observable(TestFunction(64, 1.0), 2);
  EXPECT_TRUE(e.covers(-0.25, est.z)) << e.mean << " +- " << e.std_error;
}

TEST(CoupledFd, HalfWidthShrinksWithReplicas) {
  const auto k = constant_kernel(64);
  const std::vector<double> times{0.0, 2.0};
  const auto mu0 = GridMeasure::dirac(64, 1);
  const auto small = coupled_fd_sensitivity(mu0, 10000, k, 0, 0.05, times, 77, 16, 1);
  const auto large = coupled_fd_sensitivity(mu0, 10000, k, 0, 0.05, times, 78, 64, 1);
  const TestFunction one(64, 1.0);
  const double ratio = small.observable(one, 1).std_error / large.observable(one, 1).std_error;
  EXPECT_GT(ratio, 1.4);
  EXPECT_LT(ratio, 2.8);
}

TEST(CoupledFd, LegOutsideBox) {
  const auto k = constant_kernel(8, 1.48);
  const std::vector<double> times{0.0, 1.0};
  EXPECT_THROW(coupled_fd_sensitivity(GridMeasure::dirac(8, 1), 100, k, 0, 0.05, times, 1, 2, 1), BoxError);
}

TEST(StochasticCsv, Headers) {
  const auto mu0 = GridMeasure::dirac(8, 1);
  const std::vector<double> times{0.0, 1.0};
  const auto runs = ml_replicas(mu0, 100, unit(), times, 1, 2, 1);
  std::stringstream a;
  write_replicas_csv(a, runs);
  std::string h;
  std::getline(a, h);
  EXPECT_EQ(h, "t,replica,mass,weight,overflow_mass,overflow_number");
  std::stringstream b;
  write_ensemble_csv(b, summarize_runs(runs));
  std::getline(b, h);
  EXPECT_EQ(h, "t,mass,weight,stderr,replicas");
}
