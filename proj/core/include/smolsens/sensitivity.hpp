#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "smolsens/forward.hpp"
#include "smolsens/kernels.hpp"
#include "smolsens/measures.hpp"

namespace smolsens {

/// sigma^{(m)} for every parameter component m at one time.
struct SensitivityBlock {
  std::vector<GridMeasure> components;

  std::size_t param_dim() const { return components.size(); }
  const GridMeasure& operator[](std::size_t m) const { return components[m]; }
};

/// Sensitivity blocks at the checkpoints of the companion Trajectory.
class SensitivityTrajectory {
 public:
  SensitivityTrajectory() = default;
  SensitivityTrajectory(std::vector<double> times, std::vector<SensitivityBlock> blocks);

  std::size_t size() const { return times_.size(); }
  std::size_t param_dim() const { return blocks_.front().param_dim(); }
  double time(std::size_t i) const { return times_[i]; }
  std::span<const double> times() const { return times_; }
  const SensitivityBlock& block(std::size_t i) const { return blocks_[i]; }
  const GridMeasure& component(std::size_t i, std::size_t m) const { return blocks_[i][m]; }

 private:
  std::vector<double> times_;
  std::vector<SensitivityBlock> blocks_;
};

/// sigma' = K(mu, sigma) + 1/2 dK_m(mu, mu), overflow metered.
GridMeasure sensitivity_rhs(const GridMeasure& mu, const GridMeasure& sigma, const GridKernel& k,
                            std::size_t m);

struct CoupledSolution {
  Trajectory mu;
  SensitivityTrajectory sigma;
};

/// Integrates (mu, sigma^{(1..p)}) jointly under one step controller whose
/// error norm spans the concatenated state. sigma(0) = 0 unless `sigma0`
/// supplies one measure per parameter component.
CoupledSolution solve_coupled(const GridMeasure& mu0, const GridKernel& k, double T,
                              const SolveOptions& opts,
                              std::span<const GridMeasure> sigma0 = {});

/// CSV `t,param_index,mass,weight` (param_index is 0-based).
void write_sensitivity_csv(std::ostream& out, const SensitivityTrajectory& sigma);

}  // namespace smolsens
