#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <vector>

namespace smolsens {

struct OdeOptions {
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  /// Upper bound on the step; forcing it below the controller's choice turns
  /// the integrator into a fixed-step method (used by step-halving studies).
  double max_step = std::numeric_limits<double>::infinity();
  /// 0 picks a starting step from the initial derivative.
  double initial_step = 0.0;
  std::size_t max_steps = 50'000'000;
};

struct OdeStats {
  std::size_t steps = 0;
  std::size_t rejected = 0;
  std::size_t rhs_evals = 0;
  /// Largest accepted normalized local error estimate (<= 1 by construction).
  double max_local_error = 0.0;
};

using OdeRhs = std::function<void(double t, std::span<const double> y, std::span<double> dydt)>;
/// Called after every accepted step; may throw to abort the integration.
using StepObserver = std::function<void(double t, std::span<const double> y)>;

struct OdeSolution {
  std::vector<double> times;
  std::vector<std::vector<double>> states;
  OdeStats stats;
};

/// Dormand-Prince 5(4) with local extrapolation, FSAL, and step acceptance on
/// the RMS of e_i / (abs_tol + rel_tol max(|y_i|, |y_i'|)). Steps are clipped
/// so that each of `output_times` is hit exactly; the state there is recorded.
/// Deterministic given its inputs.
OdeSolution integrate_ode(std::vector<double> y0, const OdeRhs& rhs, double t0, double t1,
                          std::span<const double> output_times, const OdeOptions& opts,
                          const StepObserver& observer = {});

/// One classical fourth-order Runge-Kutta step of size h (h may be negative).
void rk4_step(const OdeRhs& rhs, double t, std::span<double> y, double h);

/// Classical RK4 through consecutive `times`, `substeps` equal steps per
/// interval; returns the state at every entry of `times`.
std::vector<std::vector<double>> integrate_rk4(std::vector<double> y0, const OdeRhs& rhs,
                                               std::span<const double> times,
                                               std::size_t substeps = 1);

}  // namespace smolsens
