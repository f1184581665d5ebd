#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "smolsens/forward.hpp"
#include "smolsens/kernels.hpp"
#include "smolsens/measures.hpp"

namespace smolsens {

// Dual (function-side) machinery of the linearized coagulation equation.
//
// Every test function lives on the grid and reads as 0 above n_max, which is
// the same convention coag_apply uses for gains leaving the grid, so
// (Lambda_s f, rho) = (f, K(mu_s, rho)) holds exactly on the grid.

/// Lambda_s f(x) = sum_y {f}(x, y) K(x, y) mu_s(y).
TestFunction lambda_apply(const TestFunction& f, const GridMeasure& mu_s, const KernelMatrix& k);

/// Lambda_s with the m-th partial derivative of the kernel in place of K.
TestFunction lambda_partial_apply(const TestFunction& f, const GridMeasure& mu_s,
                                  const GridKernel& k, std::size_t m);

/// The split Lambda_s = J_s - M_s with J_s = L_s - tau_s at one fixed time s.
class SplitOperators {
 public:
  SplitOperators(const GridMeasure& mu_s, const KernelMatrix& k);

  /// tau_s(x) = sum_y K(x, y) mu_s(y)
  const TestFunction& tau() const { return tau_; }
  /// L_s f(x) = sum_y f(x+y) K(x, y) mu_s(y)
  TestFunction L(const TestFunction& f) const;
  /// M_s f(x) = sum_y f(y) K(x, y) mu_s(y)
  TestFunction M(const TestFunction& f) const;
  /// J_s f = L_s f - tau_s f
  TestFunction J(const TestFunction& f) const;
  /// Operator norm of M_s on (B_h, ||.||_h): max_x sum_y h(y) K(x,y) |mu_s(y)| / h(x).
  double M_norm(const TestFunction& h) const;
  /// Smallest c with J_s h <= c h pointwise (may be negative).
  double J_growth(const TestFunction& h) const;

 private:
  std::reference_wrapper<const KernelMatrix> k_;
  GridMeasure mu_;
  TestFunction tau_;
};

/// T_s(x) = int_0^s tau_r(x) dr at every checkpoint, composite trapezoid.
std::vector<TestFunction> tau_integral_profile(const Trajectory& traj, const KernelMatrix& k);

/// f_s = U_{s,t} f on the checkpoints s_lo <= s <= t (ascending times).
struct DualPath {
  double anchor = 0.0;
  std::vector<double> times;
  std::vector<TestFunction> values;
  /// Perturbation-series terms summed (Duhamel route only).
  std::size_t series_terms = 0;
  /// Picard sweeps over all series terms (Duhamel route only).
  std::size_t picard_iterations = 0;

  const TestFunction& at_anchor() const { return values.back(); }
  const TestFunction& at_start() const { return values.front(); }
};

/// Integrates f' = -Lambda_s f backward from the checkpoint t to the
/// checkpoint s_lo with classical RK4, `substeps` steps per checkpoint
/// interval. Intermediate mu_s come from the cubic Hermite interpolant
/// built from the checkpoints and the vector field there. Raises SolverFault
/// if ||f_s||_0 exceeds 10x the bound exp(3 M (1, mu_0) (t - s)) ||f_t||_0.
DualPath solve_backward(const TestFunction& f_t, const Trajectory& traj, const GridKernel& k,
                        double t, double s_lo, std::size_t substeps = 1);

struct DuhamelOptions {
  std::size_t max_iters = 400;
  /// Stop when successive iterates / series terms are below
  /// series_tol * ||f_t||_h in ||.||_h.
  double series_tol = 1e-14;
};

/// Same propagator through the perturbative route: Picard iteration (from the
/// zero iterate) on the integral equation of the S-propagator
///   w_s = e^{T_s - T_t} w_t + int_s^t e^{T_s - T_r} (L_r w_r + g_r) dr,
/// then the alternating series U = S - int S M S + int int S M S M S - ...
/// Norms use h = phi. Raises SeriesDivergenceError with the last two
/// distances if either loop exceeds max_iters.
DualPath solve_backward_duhamel(const TestFunction& f_t, const Trajectory& traj,
                                const GridKernel& k, double t, double s_lo,
                                const DuhamelOptions& opts = {});

/// (f, sigma_t^{(m)}) = 1/2 int_0^t (Lambda_s^{dm} U_{s,t} f, mu_s) ds by one
/// backward pass and the composite trapezoid on the checkpoints.
double representation_sensitivity(const TestFunction& f, const Trajectory& traj,
                                  const GridKernel& k, std::size_t m, double t);

/// ||U_{s,t}(U_{t,r} f) - U_{s,r} f||_0.
double propagator_cocycle_check(const Trajectory& traj, const GridKernel& k, double s, double t,
                                double r, const TestFunction& f);

/// exp(3 M (1, mu_0) (t - s)) with M the grid maximum of K.
double bounded_kernel_propagator_bound(const Trajectory& traj, const GridKernel& k, double s,
                                       double t);

/// Ingredients of exp((c + sup_r ||M_r||_h)(t - s)), the norm bound of the
/// propagator on B_h, measured over the checkpoints in [s, t].
struct PropagatorNormBound {
  double c = 0.0;
  double m_norm_sup = 0.0;
  double rate() const { return c + m_norm_sup; }
  double factor(double duration) const;
};

PropagatorNormBound propagator_norm_bound(const Trajectory& traj, const KernelMatrix& k,
                                          const TestFunction& h, double s, double t);

/// Forward solution of the linearized equation rho' = K(mu_s, rho), co-integrated
/// with mu by the adaptive integrator, at the checkpoints of [0, T].
struct LinearizedSolution {
  Trajectory mu;
  std::vector<GridMeasure> rho;
};

LinearizedSolution solve_linearized(const GridMeasure& mu0, const GridMeasure& rho0,
                                    const GridKernel& k, double T, const SolveOptions& opts);

}  // namespace smolsens
