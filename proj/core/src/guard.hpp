#pragma once

#include <span>
#include <vector>

#include "smolsens/forward.hpp"

namespace smolsens::detail {

/// Step observer shared by the forward and coupled solves. Looks only at the
/// leading mu block of the state.
class ForwardGuard {
 public:
  ForwardGuard(const GridMeasure& mu0, const BoundFunction& phi, const SolveOptions& opts);
  void operator()(double t, std::span<const double> state) const;

 private:
  std::vector<double> moment_weight_;
  double initial_number_;
  SolveOptions opts_;
};

/// Copies the mu block at every checkpoint into a Trajectory, clamping
/// roundoff-level negatives.
Trajectory collect_trajectory(const OdeSolution& sol, std::size_t n_max, double abs_tol);

}  // namespace smolsens::detail
