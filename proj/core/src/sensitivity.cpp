#include "smolsens/sensitivity.hpp"

#include <ostream>

#include "guard.hpp"
#include "smolsens/error.hpp"
#include "state.hpp"

namespace smolsens {

SensitivityTrajectory::SensitivityTrajectory(std::vector<double> times,
                                             std::vector<SensitivityBlock> blocks)
    : times_(std::move(times)), blocks_(std::move(blocks)) {
  if (times_.empty() || times_.size() != blocks_.size())
    throw SolverFault("SensitivityTrajectory: times and blocks must be non-empty and aligned");
}

GridMeasure sensitivity_rhs(const GridMeasure& mu, const GridMeasure& sigma, const GridKernel& k,
                            std::size_t m) {
  if (m >= k.param_dim()) throw DimensionError("sensitivity_rhs: parameter index out of range");
  GridMeasure out = coag_apply(k.value, mu, sigma);
  GridMeasure source = coag_apply(k.partials[m], mu, mu);
  source *= 0.5;
  out += source;
  return out;
}

CoupledSolution solve_coupled(const GridMeasure& mu0, const GridKernel& k, double T,
                              const SolveOptions& opts, std::span<const GridMeasure> sigma0) {
  opts.validate();
  if (!(T >= 0.0)) throw SolverFault("solve_coupled: horizon must be non-negative");
  if (mu0.n_max() != k.n_max()) throw DimensionError("solve_coupled: grid size mismatch");
  if (!mu0.is_nonnegative())
    throw NegativityError("solve_coupled: initial measure has negative weights", 0.0);
  const std::size_t p = k.param_dim();
  if (!sigma0.empty() && sigma0.size() != p)
    throw DimensionError("solve_coupled: sigma0 needs one measure per parameter component");

  const std::size_t n = mu0.n_max();
  const std::size_t bs = detail::block_size(n);
  std::vector<double> y0(bs * (p + 1), 0.0);
  detail::pack(mu0, std::span<double>(y0).subspan(0, bs));
  for (std::size_t m = 0; m < sigma0.size(); ++m) {
    if (sigma0[m].n_max() != n) throw DimensionError("solve_coupled: sigma0 grid size mismatch");
    detail::pack(sigma0[m], std::span<double>(y0).subspan(bs * (m + 1), bs));
  }

  const OdeRhs field = [&](double, std::span<const double> y, std::span<double> dy) {
    const GridMeasure mu = detail::unpack(y.subspan(0, bs), n);
    detail::pack(rhs(mu, k.value), dy.subspan(0, bs));
    for (std::size_t m = 0; m < p; ++m) {
      const GridMeasure sigma = detail::unpack(y.subspan(bs * (m + 1), bs), n);
      detail::pack(sensitivity_rhs(mu, sigma, k, m), dy.subspan(bs * (m + 1), bs));
    }
  };

  const auto times = checkpoint_grid(T, opts.dt_checkpoint);
  const detail::ForwardGuard guard(mu0, k.phi, opts);
  const auto sol = integrate_ode(std::move(y0), field, 0.0, T, times, opts.ode(),
                                 [&](double t, std::span<const double> y) { guard(t, y); });

  CoupledSolution out;
  out.mu = detail::collect_trajectory(sol, n, opts.abs_tol);
  std::vector<SensitivityBlock> blocks;
  blocks.reserve(sol.states.size());
  for (const auto& s : sol.states) {
    SensitivityBlock b;
    for (std::size_t m = 0; m < p; ++m)
      b.components.push_back(detail::unpack(std::span<const double>(s).subspan(bs * (m + 1), bs), n));
    blocks.push_back(std::move(b));
  }
  out.sigma = SensitivityTrajectory(sol.times, std::move(blocks));
  return out;
}

void write_sensitivity_csv(std::ostream& out, const SensitivityTrajectory& sigma) {
  out << "t,param_index,mass,weight\n";
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    const std::string t = format_double(sigma.time(i));
    for (std::size_t m = 0; m < sigma.param_dim(); ++m) {
      const auto w = sigma.component(i, m).weights();
      for (std::size_t k = 0; k < w.size(); ++k)
        out << t << ',' << m << ',' << (k + 1) << ',' << format_double(w[k]) << '\n';
    }
  }
}

}  // namespace smolsens
