#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <span>
#include <vector>

#include "smolsens/kernels.hpp"
#include "smolsens/measures.hpp"
#include "smolsens/ode.hpp"

namespace smolsens {

struct SolveOptions {
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  double dt_checkpoint = 0.05;
  /// Blow-up guard on (phi^{4+epsilon}, mu_t).
  double moment_ceiling = 1e15;
  /// Blow-up guard on overflow_number / (1, mu_0).
  double overflow_fraction_max = 1e-9;
  double epsilon = 0.5;
  double max_step = std::numeric_limits<double>::infinity();

  OdeOptions ode() const;
  /// Throws SolverFault unless every tolerance and epsilon is positive.
  void validate() const;
};

/// Uniform checkpoint grid 0 = t_0 < ... < t_n = T with n = ceil(T / dt).
std::vector<double> checkpoint_grid(double T, double dt);

/// Checkpointed solution {mu_s}, 0 <= s <= T, on a uniform time grid.
class Trajectory {
 public:
  Trajectory() = default;
  Trajectory(std::vector<double> times, std::vector<GridMeasure> states, OdeStats stats = {});

  std::size_t size() const { return times_.size(); }
  double t0() const { return times_.front(); }
  double t1() const { return times_.back(); }
  double dt_checkpoint() const { return size() > 1 ? times_[1] - times_[0] : 0.0; }
  double time(std::size_t i) const { return times_[i]; }
  const GridMeasure& state(std::size_t i) const { return states_[i]; }
  std::span<const double> times() const { return times_; }
  const std::vector<GridMeasure>& states() const { return states_; }
  const GridMeasure& front() const { return states_.front(); }
  const GridMeasure& back() const { return states_.back(); }
  std::size_t n_max() const { return states_.front().n_max(); }
  const OdeStats& stats() const { return stats_; }

  /// Piecewise-linear interpolation in t between checkpoints.
  GridMeasure at(double t) const;
  /// Index of the checkpoint at time t; throws SolverFault if t is not one.
  std::size_t index_of(double t) const;

  /// Smallest weight seen at a checkpoint before clamping (0 if none negative).
  double min_weight_before_clamp = 0.0;

 private:
  std::vector<double> times_;
  std::vector<GridMeasure> states_;
  OdeStats stats_;
};

/// mu' = 1/2 K(mu, mu), with the overflow increments of the gain term.
GridMeasure rhs(const GridMeasure& mu, const KernelMatrix& k);

/// Integrates the coagulation equation on [0, T] with the adaptive integrator.
/// Weights in [-10 abs_tol, 0) are clamped to 0 at checkpoints; anything more
/// negative raises NegativityError. Moment ceiling or overflow fraction
/// violations raise BlowUpError carrying the time.
Trajectory solve_forward(const GridMeasure& mu0, const GridKernel& k, double T,
                         const SolveOptions& opts);

struct MomentsTable {
  std::vector<double> powers;
  std::vector<double> times;
  /// values[i][j] = (phi^{powers[j]}, mu_{times[i]})
  std::vector<std::vector<double>> values;
  /// running maximum over checkpoints <= times[i]: the observed C(T)
  std::vector<std::vector<double>> running_max;
};

/// Per-checkpoint (phi^p, mu_t) and running maxima; powers must lie in [0, 8].
MomentsTable moments_report(const Trajectory& traj, const BoundFunction& phi,
                            std::span<const double> powers);

/// CSV `t,mass,weight,overflow_mass,overflow_number`, one row per (t, mass).
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);
Trajectory read_trajectory_csv(std::istream& in);
/// CSV `t,p,value`.
void write_moments_csv(std::ostream& out, const MomentsTable& table);

}  // namespace smolsens
