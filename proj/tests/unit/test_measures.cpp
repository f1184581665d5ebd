#include <gtest/gtest.h>

#include <sstream>

#include "oracles.hpp"
#include "smolsens/error.hpp"
#include "smolsens/measures.hpp"

using namespace smolsens;

namespace {

GridMeasure from(std::size_t n, std::initializer_list<std::pair<Mass, double>> atoms) {
  GridMeasure mu(n);
  for (auto [m, w] : atoms) mu[m] += w;
  return mu;
}

}  // namespace

TEST(Pair, AffinePhiAgainstTwoAtoms) {
  const auto phi = BoundFunction::affine();
  const auto f = TestFunction::sample(8, [&](Mass x) { return phi(x); });
  EXPECT_DOUBLE_EQ(pair(f, from(8, {{1, 2.0}, {3, 1.0}})), 8.0);
}

TEST(Pair, ZeroFunction) {
  EXPECT_EQ(pair(TestFunction(8), oracle::random_signed(8, 1)), 0.0);
}

TEST(Pair, MassFunction) {
  const auto x = TestFunction::sample(8, [](Mass k) { return static_cast<double>(k); });
  EXPECT_DOUBLE_EQ(pair(x, from(8, {{1, 1.0}, {2, 1.0}})), 3.0);
}

TEST(Pair, RejectsGridMismatch) {
  EXPECT_THROW(pair(TestFunction(4), GridMeasure(5)), DimensionError);
}

TEST(Curly, MassIsAdditive) {
  const auto x = TestFunction::sample(16, [](Mass k) { return static_cast<double>(k); });
  for (Mass a = 1; a <= 16; ++a)
    for (Mass b = 1; a + b <= 16; ++b) EXPECT_EQ(curly(x, a, b), 0.0);
}

TEST(Curly, IndicatorOfOne) {
  EXPECT_EQ(curly(TestFunction::indicator(8, 1), 1, 1), -2.0);
}

TEST(Curly, AffinePhi) {
  const auto phi = BoundFunction::affine();
  const auto f = TestFunction::sample(8, [&](Mass x) { return phi(x); });
  EXPECT_DOUBLE_EQ(curly(f, 2, 3), -1.0);
}

TEST(Curly, ZeroAboveGrid) {
  const TestFunction one(4, 1.0);
  EXPECT_EQ(curly(one, 3, 3), -2.0);
}

TEST(CoagApply, ConstantOnMonodisperse) {
  const KernelMatrix F(4, 1.0);
  const auto mu = GridMeasure::dirac(4, 1);
  const auto out = coag_apply(F, mu, mu);
  EXPECT_EQ(out[1], -2.0);
  EXPECT_EQ(out[2], 1.0);
  EXPECT_EQ(out[3], 0.0);
}

TEST(CoagApply, MultiplicativeTwoAtoms) {
  const auto F = KernelMatrix::tabulate(6, [](Mass x, Mass y) { return double(x * y); });
  const auto mu = from(6, {{1, 1.0}, {2, 1.0}});
  const auto out = coag_apply(F, mu, mu);
  EXPECT_DOUBLE_EQ(out[1], -6.0);
  EXPECT_DOUBLE_EQ(out[2], -11.0);
  EXPECT_DOUBLE_EQ(out[3], 4.0);
  EXPECT_DOUBLE_EQ(out[4], 4.0);
  const TestFunction one(6, 1.0);
  const auto x = TestFunction::sample(6, [](Mass k) { return double(k); });
  EXPECT_DOUBLE_EQ(pair(one, out), -9.0);
  EXPECT_DOUBLE_EQ(pair(x, out), 0.0);
}

TEST(CoagApply, ZeroKernel) {
  const auto out = coag_apply(KernelMatrix(8), oracle::random_signed(8, 2), oracle::random_signed(8, 3));
  for (double w : out.weights()) EXPECT_EQ(w, 0.0);
  EXPECT_EQ(out.overflow_mass(), 0.0);
}

TEST(CoagApply, MatchesBruteForceWithOverflow) {
  const std::size_t n = 12;
  auto K = [](Mass x, Mass y) { return 1.0 + 0.3 * double(x + y) + 0.01 * double(x * y); };
  const auto F = KernelMatrix::tabulate(n, K);
  const auto mu = oracle::random_signed(n, 4);
  const auto nu = oracle::random_signed(n, 5);
  const auto ref = oracle::to_grid(
      oracle::coag(K, {mu.weights().begin(), mu.weights().end()}, {nu.weights().begin(), nu.weights().end()}), n);
  const auto out = coag_apply(F, mu, nu);
  EXPECT_LE(oracle::max_abs_diff(out.weights(), ref.weights()), 1e-14);
  EXPECT_NEAR(out.overflow_mass(), ref.overflow_mass(), 1e-13);
  EXPECT_NEAR(out.overflow_number(), ref.overflow_number(), 1e-14);
}

TEST(CoagApply, SwappingArgumentsIsBitwiseSymmetric) {
  const auto F = KernelMatrix::tabulate(20, [](Mass x, Mass y) { return std::sqrt(double(x * y)); });
  const auto mu = oracle::random_signed(20, 6);
  const auto nu = oracle::random_signed(20, 7);
  EXPECT_EQ(coag_apply(F, mu, nu), coag_apply(F, nu, mu));
}

TEST(NormP, WeightedAbsoluteSum) {
  const auto phi = BoundFunction::affine();
  const auto mu = from(8, {{1, 2.0}, {3, -1.0}});
  EXPECT_DOUBLE_EQ(norm_p(mu, 1.0, phi), 8.0);
  EXPECT_DOUBLE_EQ(norm_p(mu, 0.0, phi), 3.0);
}

TEST(NormP, MonotoneInP) {
  const auto phi = BoundFunction::affine();
  const auto mu = oracle::random_signed(32, 8);
  double prev = 0.0;
  for (double p : {0.0, 0.5, 1.0, 2.0, 2.5, 4.5}) {
    const double v = norm_p(mu, p, phi);
    EXPECT_GE(v, prev);
    prev = v;
  }
}

TEST(SignDensity, Componentwise) {
  const auto eps = sign_density(from(5, {{1, 2.0}, {3, -1.0}}));
  EXPECT_EQ(eps(1), 1.0);
  EXPECT_EQ(eps(2), 0.0);
  EXPECT_EQ(eps(3), -1.0);
  EXPECT_EQ(eps(4), 0.0);
}

TEST(SignDensity, ZeroHasZeroSign) {
  const auto eps = sign_density(GridMeasure(6));
  for (double v : eps.values()) EXPECT_EQ(v, 0.0);
}

TEST(SignDensity, WeightedPairingEqualsNorm) {
  const auto phi = BoundFunction::affine();
  const auto rho = from(6, {{1, 2.0}, {3, -1.0}});
  const auto phif = TestFunction::sample(6, [&](Mass x) { return phi(x); });
  EXPECT_DOUBLE_EQ(pair(phif * sign_density(rho), rho), 8.0);
  EXPECT_DOUBLE_EQ(pair(phif * sign_density(rho), rho), norm_p(rho, 1.0, phi));
}

TEST(SupNorm, WeightedMax) {
  const auto phi = BoundFunction::affine();
  const auto f = TestFunction::sample(4, [](Mass x) { return x == 3 ? -8.0 : 1.0; });
  EXPECT_DOUBLE_EQ(sup_norm_p(f, 1.0, phi), 2.0);
}

TEST(FormatDouble, RoundTrips) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng) * std::pow(10.0, (i % 40) - 20);
    EXPECT_EQ(parse_double(format_double(v)), v);
  }
  EXPECT_THROW(parse_double("1.5x"), FormatError);
  EXPECT_THROW(parse_double(""), FormatError);
}

TEST(MeasureCsv, RoundTripIsLossless) {
  auto mu = oracle::random_signed(17, 10);
  mu.set_overflow(1.0 / 3.0, 1e-17);
  std::stringstream ss;
  write_csv(ss, mu);
  EXPECT_EQ(read_csv(ss), mu);
}

TEST(MeasureCsv, RejectsBadHeader) {
  std::stringstream ss("m,w\n1,2\n");
  EXPECT_THROW(read_csv(ss), FormatError);
}
