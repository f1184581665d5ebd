#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "smolsens/forward.hpp"
#include "smolsens/kernels.hpp"
#include "smolsens/measures.hpp"

namespace smolsens {

/// K = lam, mu_0 = delta_1: c_k(t) = a^{k-1} / (1 + a)^{k+1} with a = lam t / 2.
GridMeasure analytic_constant_kernel(std::size_t n_max, double t, double lam);

/// d c_k / d lam of the closed form above.
GridMeasure analytic_sensitivity_constant(std::size_t n_max, double t, double lam);

/// Eight probes used for route comparisons: one, mass, phi, phi^2, the
/// indicators of masses 1, 2, 3, and the truncated identity min(x, 8).
std::vector<std::pair<std::string, TestFunction>> spanning_test_functions(std::size_t n_max,
                                                                          const BoundFunction& phi);

/// Central difference (mu^{l + h e_m} - mu^{l - h e_m}) / (2h) of two forward
/// solves, at the checkpoints of [0, T]. Throws BoxError if a leg leaves the box.
Trajectory fd_oracle(const ParametricKernel& k, const GridMeasure& mu0, std::size_t m, double h,
                     double T, const SolveOptions& opts);

struct ConvergenceRow {
  double level = 0.0;
  /// sup_t ||mu^N_t - mu_t||_{2+eps}
  double err_mu = 0.0;
  /// sup_t max_m ||sigma^{N,(m)}_t - sigma^{(m)}_t||_1
  double err_sigma = 0.0;
};

struct ConvergenceTable {
  double epsilon = 0.5;
  std::vector<ConvergenceRow> rows;
};

/// Coupled solves with truncate(k, N) for every N against the untruncated grid
/// run. N_list must increase. Levels run concurrently on `threads` workers.
ConvergenceTable truncation_sweep(const ParametricKernel& k, const GridMeasure& mu0, double T,
                                  std::span<const double> levels, const SolveOptions& opts,
                                  std::size_t threads = 0);

/// CSV `N,err_mu_2eps,err_sigma_1`.
void write_convergence_csv(std::ostream& out, const ConvergenceTable& table);

struct Finding {
  std::string check;
  bool passed = true;
  std::string detail;
};

struct HypothesisReport {
  std::vector<Finding> findings;
  std::vector<BoundViolation> kernel_violations;
  std::vector<BoundViolation> partial_violations;
  /// (phi^{4+eps}, mu_0)
  double moment = 0.0;

  bool passed() const;
  const Finding* find(const std::string& check) const;
  /// One `[PASS]`/`[FAIL]` line per finding.
  std::string text() const;
};

/// Exhaustive grid verification of K <= phi phi and |dK| <= phi phi over the
/// box corners (and lambda0), phi >= 1, phi sub-additivity on grid pairs,
/// and finiteness of (phi^{4+eps}, mu_0). Never throws for a failing check.
HypothesisReport hypothesis_check(const KernelSpec& spec, std::span<const double> lambda0,
                                  const BoundFunction& phi, const GridMeasure& mu0,
                                  double epsilon);

/// Time-indexed signed measures with their time derivatives.
struct MeasurePath {
  std::vector<double> times;
  std::vector<GridMeasure> values;
  std::vector<GridMeasure> derivatives;
};

struct TvCheck {
  /// residual[i] = | ||rho_{t_i}||_0 - ||rho_0||_0 - int_0^{t_i} (sgn rho_s, rho'_s) ds |
  std::vector<double> residuals;
  double max_residual = 0.0;
  /// max over checkpoints and probes of |(f, |rho_t|) - (f sgn rho_t, rho_t)|
  double max_pointwise = 0.0;
};

/// Trapezoid quadrature of (sgn rho_s, rho'_s) per mass, with each interval
/// split where that mass's weight changes sign (crossing located by linear
/// interpolation).
TvCheck tv_identity_check(const MeasurePath& path, std::span<const TestFunction> probes = {});

/// Grid instance of |{f}(x, y)| <= 2^p ||f||_p (phi^p(x) + phi^p(y)) over all pairs.
struct CurlyBoundCheck {
  std::size_t violations = 0;
  /// max of |{f}| / bound over pairs
  double worst_ratio = 0.0;
};

CurlyBoundCheck curly_bound_check(const TestFunction& f, double p, const BoundFunction& phi);

/// Central time differences of mu in ||.||_{2+eps} against the vector field:
/// residual(d) = || (mu_{t+d} - mu_{t-d}) / 2d - rhs(mu_t) ||_{2+eps} for d and d/2.
struct TimeRegularity {
  double residual_coarse = 0.0;
  double residual_fine = 0.0;
  double ratio() const { return residual_coarse / residual_fine; }
};

TimeRegularity time_regularity_check(const GridMeasure& mu0, const GridKernel& k, double t,
                                     double delta, const SolveOptions& opts);

}  // namespace smolsens
