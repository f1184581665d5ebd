#include "smolsens/propagator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "guard.hpp"
#include "smolsens/error.hpp"
#include "state.hpp"

namespace smolsens {

namespace {

void require_grid(std::size_t a, std::size_t b, const char* where) {
  if (a != b) throw DimensionError(std::string(where) + ": grid size mismatch");
}

// Lambda with an arbitrary kernel table (K itself or one of its partials).
TestFunction lambda_with(const TestFunction& f, const GridMeasure& mu, const KernelMatrix& k) {
  const std::size_t n = f.n_max();
  const auto w = mu.weights();
  TestFunction out(n);
  for (std::size_t x = 1; x <= n; ++x) {
    const auto row = k.row(static_cast<Mass>(x));
    const double fx = f.at(static_cast<Mass>(x));
    double acc = 0.0;
    for (std::size_t y = 1; y <= n; ++y) {
      const double kw = row[y - 1] * w[y - 1];
      if (kw == 0.0) continue;
      const double fxy = x + y <= n ? f.at(static_cast<Mass>(x + y)) : 0.0;
      acc += (fxy - fx - f.at(static_cast<Mass>(y))) * kw;
    }
    out.at(static_cast<Mass>(x)) = acc;
  }
  return out;
}

double initial_number(const Trajectory& traj) {
  double s = 0.0;
  for (double w : traj.front().weights()) s += std::fabs(w);
  return s;
}

double sup_abs(const TestFunction& f) {
  double m = 0.0;
  for (double v : f.values()) m = std::max(m, std::fabs(v));
  return m;
}

// mu on [t_i, t_{i+1}] at fraction theta from the cubic Hermite interpolant.
GridMeasure hermite(const GridMeasure& a, const GridMeasure& da, const GridMeasure& b,
                    const GridMeasure& db, double dt, double theta) {
  const double t2 = theta * theta;
  const double t3 = t2 * theta;
  const double h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
  const double h10 = t3 - 2.0 * t2 + theta;
  const double h01 = -2.0 * t3 + 3.0 * t2;
  const double h11 = t3 - t2;
  GridMeasure out = h00 * a;
  out += (h10 * dt) * da;
  out += h01 * b;
  out += (h11 * dt) * db;
  return out;
}

struct NodeRange {
  std::size_t lo;
  std::size_t hi;
};

NodeRange node_range(const Trajectory& traj, double s_lo, double t, const char* where) {
  if (!(s_lo <= t)) throw SolverFault(std::string(where) + ": need s_lo <= t");
  return {traj.index_of(s_lo), traj.index_of(t)};
}

}  // namespace

TestFunction lambda_apply(const TestFunction& f, const GridMeasure& mu_s, const KernelMatrix& k) {
  require_grid(f.n_max(), mu_s.n_max(), "lambda_apply");
  require_grid(f.n_max(), k.n_max(), "lambda_apply");
  return lambda_with(f, mu_s, k);
}

TestFunction lambda_partial_apply(const TestFunction& f, const GridMeasure& mu_s,
                                  const GridKernel& k, std::size_t m) {
  if (m >= k.param_dim()) throw DimensionError("lambda_partial_apply: parameter index out of range");
  require_grid(f.n_max(), mu_s.n_max(), "lambda_partial_apply");
  require_grid(f.n_max(), k.n_max(), "lambda_partial_apply");
  return lambda_with(f, mu_s, k.partials[m]);
}

// ---------------------------------------------------------------------------
// J / L / M / tau

SplitOperators::SplitOperators(const GridMeasure& mu_s, const KernelMatrix& k)
    : k_(k), mu_(mu_s), tau_(mu_s.n_max()) {
  require_grid(mu_s.n_max(), k.n_max(), "SplitOperators");
  const auto w = mu_.weights();
  for (std::size_t x = 1; x <= w.size(); ++x) {
    const auto row = k.row(static_cast<Mass>(x));
    double acc = 0.0;
    for (std::size_t y = 0; y < w.size(); ++y) acc += row[y] * w[y];
    tau_.at(static_cast<Mass>(x)) = acc;
  }
}

TestFunction SplitOperators::L(const TestFunction& f) const {
  const std::size_t n = f.n_max();
  require_grid(n, mu_.n_max(), "SplitOperators::L");
  const auto w = mu_.weights();
  TestFunction out(n);
  for (std::size_t x = 1; x < n; ++x) {
    const auto row = k_.get().row(static_cast<Mass>(x));
    double acc = 0.0;
    for (std::size_t y = 1; x + y <= n; ++y)
      acc += f.at(static_cast<Mass>(x + y)) * row[y - 1] * w[y - 1];
    out.at(static_cast<Mass>(x)) = acc;
  }
  return out;
}

TestFunction SplitOperators::M(const TestFunction& f) const {
  const std::size_t n = f.n_max();
  require_grid(n, mu_.n_max(), "SplitOperators::M");
  const auto w = mu_.weights();
  TestFunction out(n);
  for (std::size_t x = 1; x <= n; ++x) {
    const auto row = k_.get().row(static_cast<Mass>(x));
    double acc = 0.0;
    for (std::size_t y = 0; y < n; ++y) acc += f.values()[y] * row[y] * w[y];
    out.at(static_cast<Mass>(x)) = acc;
  }
  return out;
}

TestFunction SplitOperators::J(const TestFunction& f) const {
  TestFunction out = L(f);
  out -= tau_ * f;
  return out;
}

double SplitOperators::M_norm(const TestFunction& h) const {
  const std::size_t n = h.n_max();
  require_grid(n, mu_.n_max(), "SplitOperators::M_norm");
  const auto w = mu_.weights();
  double best = 0.0;
  for (std::size_t x = 1; x <= n; ++x) {
    const auto row = k_.get().row(static_cast<Mass>(x));
    double acc = 0.0;
    for (std::size_t y = 0; y < n; ++y) acc += h.values()[y] * std::fabs(row[y] * w[y]);
    best = std::max(best, acc / h.at(static_cast<Mass>(x)));
  }
  return best;
}

double SplitOperators::J_growth(const TestFunction& h) const {
  const TestFunction jh = J(h);
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t x = 1; x <= h.n_max(); ++x)
    best = std::max(best, jh.at(static_cast<Mass>(x)) / h.at(static_cast<Mass>(x)));
  return best;
}

std::vector<TestFunction> tau_integral_profile(const Trajectory& traj, const KernelMatrix& k) {
  std::vector<TestFunction> out;
  out.reserve(traj.size());
  TestFunction prev_tau = SplitOperators(traj.state(0), k).tau();
  out.emplace_back(traj.n_max());
  for (std::size_t i = 1; i < traj.size(); ++i) {
    TestFunction tau = SplitOperators(traj.state(i), k).tau();
    const double half = 0.5 * (traj.time(i) - traj.time(i - 1));
    TestFunction next = out.back();
    next += half * (prev_tau + tau);
    out.push_back(std::move(next));
    prev_tau = std::move(tau);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Direct backward solve

DualPath solve_backward(const TestFunction& f_t, const Trajectory& traj, const GridKernel& k,
                        double t, double s_lo, std::size_t substeps) {
  require_grid(f_t.n_max(), traj.n_max(), "solve_backward");
  require_grid(f_t.n_max(), k.n_max(), "solve_backward");
  if (substeps == 0) throw SolverFault("solve_backward: substeps must be positive");
  if (!f_t.is_finite()) throw SolverFault("solve_backward: final data is not finite");
  const auto [lo, hi] = node_range(traj, s_lo, t, "solve_backward");

  const std::size_t count = hi - lo + 1;
  DualPath path;
  path.anchor = traj.time(hi);
  path.times.resize(count);
  path.values.resize(count);
  path.times[count - 1] = traj.time(hi);
  path.values[count - 1] = f_t;

  const double rate = 3.0 * k.value.max_abs() * initial_number(traj);
  const double f_norm = sup_abs(f_t);
  const auto& K = k.value;

  GridMeasure d_next = rhs(traj.state(hi), K);
  TestFunction f = f_t;
  for (std::size_t i = hi; i > lo; --i) {
    const GridMeasure& a = traj.state(i - 1);
    const GridMeasure& b = traj.state(i);
    const GridMeasure da = rhs(a, K);
    const double span = traj.time(i) - traj.time(i - 1);
    const double dt = span / static_cast<double>(substeps);
    for (std::size_t j = substeps; j > 0; --j) {
      const double th_hi = static_cast<double>(j) / static_cast<double>(substeps);
      const double th_mid = (static_cast<double>(j) - 0.5) / static_cast<double>(substeps);
      const double th_lo = static_cast<double>(j - 1) / static_cast<double>(substeps);
      const GridMeasure mu_hi = j == substeps ? b : hermite(a, da, b, d_next, span, th_hi);
      const GridMeasure mu_mid = hermite(a, da, b, d_next, span, th_mid);
      const GridMeasure mu_lo = j == 1 ? a : hermite(a, da, b, d_next, span, th_lo);
      // f' = -Lambda f integrated from s to s - dt
      const TestFunction k1 = lambda_with(f, mu_hi, K);
      const TestFunction k2 = lambda_with(f + (0.5 * dt) * k1, mu_mid, K);
      const TestFunction k3 = lambda_with(f + (0.5 * dt) * k2, mu_mid, K);
      const TestFunction k4 = lambda_with(f + dt * k3, mu_lo, K);
      TestFunction incr = k1 + k4;
      incr += 2.0 * (k2 + k3);
      f += (dt / 6.0) * incr;
    }
    if (!f.is_finite()) throw SolverFault("solve_backward: dual state became non-finite");
    const double elapsed = traj.time(hi) - traj.time(i - 1);
    const double bound = std::exp(rate * elapsed) * f_norm;
    if (sup_abs(f) > 10.0 * bound * (1.0 + 1e-12)) {
      std::ostringstream oss;
      oss << "solve_backward: ||f_s||_0 = " << sup_abs(f) << " exceeds 10x the bound " << bound
          << " at s = " << traj.time(i - 1);
      throw SolverFault(oss.str());
    }
    path.times[i - 1 - lo] = traj.time(i - 1);
    path.values[i - 1 - lo] = f;
    d_next = da;
  }
  return path;
}

// ---------------------------------------------------------------------------
// Duhamel / Picard route

namespace {

class DuhamelSolver {
 public:
  DuhamelSolver(const Trajectory& traj, const KernelMatrix& k, std::size_t lo, std::size_t hi,
                const TestFunction& h, const DuhamelOptions& opts, double scale)
      : h_(h), opts_(opts), scale_(scale) {
    const std::size_t count = hi - lo + 1;
    ops_.reserve(count);
    for (std::size_t i = lo; i <= hi; ++i) ops_.emplace_back(traj.state(i), k);
    for (std::size_t i = lo; i < hi; ++i) dt_.push_back(traj.time(i + 1) - traj.time(i));
    // decay[i] = e^{T_i - T_{i+1}}, to_end[i] = e^{T_i - T_hi}
    const std::size_t n = h.n_max();
    decay_.assign(count - 1, TestFunction(n));
    to_end_.assign(count, TestFunction(n, 1.0));
    for (std::size_t i = count - 1; i-- > 0;) {
      for (std::size_t x = 0; x < n; ++x) {
        const double e = std::exp(-0.5 * dt_[i] * (ops_[i].tau().values()[x] + ops_[i + 1].tau().values()[x]));
        decay_[i].values()[x] = e;
        to_end_[i].values()[x] = e * to_end_[i + 1].values()[x];
      }
    }
  }

  std::size_t count() const { return ops_.size(); }
  std::size_t sweeps() const { return sweeps_; }

  double path_norm(const std::vector<TestFunction>& w) const {
    double m = 0.0;
    for (const auto& v : w) m = std::max(m, sup_norm_weighted(v, h_));
    return m;
  }

  /// w_s = e^{T_s - T_t} w_t + int_s^t e^{T_s - T_r} (L_r w_r + g_r) dr by
  /// Picard iteration from zero; `source` may be empty (g = 0).
  std::vector<TestFunction> solve_s(const TestFunction* final_value,
                                    const std::vector<TestFunction>& source) {
    const std::size_t count = ops_.size();
    const std::size_t n = h_.n_max();
    std::vector<TestFunction> w(count, TestFunction(n));
    std::vector<TestFunction> base(count, TestFunction(n));
    if (final_value != nullptr)
      for (std::size_t i = 0; i < count; ++i) base[i] = to_end_[i] * *final_value;

    double prev = std::numeric_limits<double>::infinity();
    double last = std::numeric_limits<double>::infinity();
    for (std::size_t it = 0; it < opts_.max_iters; ++it) {
      ++sweeps_;
      std::vector<TestFunction> q(count);
      for (std::size_t i = 0; i < count; ++i) {
        q[i] = ops_[i].L(w[i]);
        if (!source.empty()) q[i] += source[i];
      }
      std::vector<TestFunction> next(count);
      TestFunction acc(n);
      next[count - 1] = base[count - 1];
      for (std::size_t i = count - 1; i-- > 0;) {
        TestFunction carried = decay_[i] * (acc + (0.5 * dt_[i]) * q[i + 1]);
        acc = carried + (0.5 * dt_[i]) * q[i];
        next[i] = base[i] + acc;
      }
      double dist = 0.0;
      for (std::size_t i = 0; i < count; ++i)
        dist = std::max(dist, sup_norm_weighted(next[i] - w[i], h_));
      w = std::move(next);
      prev = last;
      last = dist;
      if (!std::isfinite(dist)) break;
      if (dist <= opts_.series_tol * scale_) return w;
    }
    throw SeriesDivergenceError("Picard iteration for the S-propagator did not converge", prev,
                                last);
  }

  std::vector<TestFunction> apply_m(const std::vector<TestFunction>& v) const {
    std::vector<TestFunction> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = ops_[i].M(v[i]);
    return out;
  }

 private:
  TestFunction h_;
  DuhamelOptions opts_;
  double scale_;
  std::vector<SplitOperators> ops_;
  std::vector<double> dt_;
  std::vector<TestFunction> decay_;
  std::vector<TestFunction> to_end_;
  std::size_t sweeps_ = 0;
};

}  // namespace

DualPath solve_backward_duhamel(const TestFunction& f_t, const Trajectory& traj,
                                const GridKernel& k, double t, double s_lo,
                                const DuhamelOptions& opts) {
  require_grid(f_t.n_max(), traj.n_max(), "solve_backward_duhamel");
  require_grid(f_t.n_max(), k.n_max(), "solve_backward_duhamel");
  if (opts.max_iters == 0 || !(opts.series_tol > 0.0))
    throw SolverFault("solve_backward_duhamel: max_iters and series_tol must be positive");
  const auto [lo, hi] = node_range(traj, s_lo, t, "solve_backward_duhamel");

  const TestFunction h = TestFunction::sample(f_t.n_max(), [&](Mass x) { return k.phi(x); });
  const double scale = std::max(sup_norm_weighted(f_t, h), std::numeric_limits<double>::min());
  DuhamelSolver solver(traj, k.value, lo, hi, h, opts, scale);

  std::vector<TestFunction> term = solver.solve_s(&f_t, {});
  std::vector<TestFunction> sum = term;
  std::size_t terms = 1;
  double prev = std::numeric_limits<double>::infinity();
  double last = solver.path_norm(term);
  bool converged = last <= opts.series_tol * scale;
  while (!converged) {
    if (terms >= opts.max_iters)
      throw SeriesDivergenceError("perturbation series for U did not converge", prev, last);
    term = solver.solve_s(nullptr, solver.apply_m(term));
    const double sign = terms % 2 == 1 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += sign * term[i];
    ++terms;
    prev = last;
    last = solver.path_norm(term);
    if (!std::isfinite(last))
      throw SeriesDivergenceError("perturbation series for U produced non-finite terms", prev, last);
    converged = last <= opts.series_tol * scale;
  }

  DualPath path;
  path.anchor = traj.time(hi);
  for (std::size_t i = lo; i <= hi; ++i) path.times.push_back(traj.time(i));
  path.values = std::move(sum);
  path.values.back() = f_t;
  path.series_terms = terms;
  path.picard_iterations = solver.sweeps();
  return path;
}

// ---------------------------------------------------------------------------

double representation_sensitivity(const TestFunction& f, const Trajectory& traj,
                                  const GridKernel& k, std::size_t m, double t) {
  if (m >= k.param_dim())
    throw DimensionError("representation_sensitivity: parameter index out of range");
  const std::size_t hi = traj.index_of(t);
  if (hi == 0) return 0.0;
  const DualPath path = solve_backward(f, traj, k, t, traj.t0());
  double acc = 0.0;
  for (std::size_t i = 0; i <= hi; ++i) {
    const GridMeasure& mu = traj.state(i);
    const double integrand = pair(lambda_with(path.values[i], mu, k.partials[m]), mu);
    const double left = i > 0 ? traj.time(i) - traj.time(i - 1) : 0.0;
    const double right = i < hi ? traj.time(i + 1) - traj.time(i) : 0.0;
    acc += 0.5 * (left + right) * integrand;
  }
  return 0.5 * acc;
}

double propagator_cocycle_check(const Trajectory& traj, const GridKernel& k, double s, double t,
                                double r, const TestFunction& f) {
  if (!(s <= t && t <= r)) throw SolverFault("propagator_cocycle_check: need s <= t <= r");
  const TestFunction g = solve_backward(f, traj, k, r, t).at_start();
  const TestFunction two = solve_backward(g, traj, k, t, s).at_start();
  const TestFunction one = solve_backward(f, traj, k, r, s).at_start();
  return sup_abs(two - one);
}

double bounded_kernel_propagator_bound(const Trajectory& traj, const GridKernel& k, double s,
                                       double t) {
  return std::exp(3.0 * k.value.max_abs() * initial_number(traj) * (t - s));
}

double PropagatorNormBound::factor(double duration) const { return std::exp(rate() * duration); }

PropagatorNormBound propagator_norm_bound(const Trajectory& traj, const KernelMatrix& k,
                                          const TestFunction& h, double s, double t) {
  const auto [lo, hi] = node_range(traj, s, t, "propagator_norm_bound");
  PropagatorNormBound b;
  for (std::size_t i = lo; i <= hi; ++i) {
    const SplitOperators ops(traj.state(i), k);
    b.c = std::max(b.c, ops.J_growth(h));
    b.m_norm_sup = std::max(b.m_norm_sup, ops.M_norm(h));
  }
  return b;
}

// ---------------------------------------------------------------------------

LinearizedSolution solve_linearized(const GridMeasure& mu0, const GridMeasure& rho0,
                                    const GridKernel& k, double T, const SolveOptions& opts) {
  opts.validate();
  if (!(T >= 0.0)) throw SolverFault("solve_linearized: horizon must be non-negative");
  require_grid(mu0.n_max(), k.n_max(), "solve_linearized");
  require_grid(rho0.n_max(), k.n_max(), "solve_linearized");
  if (!mu0.is_nonnegative())
    throw NegativityError("solve_linearized: initial measure has negative weights", 0.0);

  const std::size_t n = mu0.n_max();
  const std::size_t bs = detail::block_size(n);
  std::vector<double> y0(2 * bs);
  detail::pack(mu0, std::span<double>(y0).subspan(0, bs));
  detail::pack(rho0, std::span<double>(y0).subspan(bs, bs));

  const OdeRhs field = [&](double, std::span<const double> y, std::span<double> dy) {
    const GridMeasure mu = detail::unpack(y.subspan(0, bs), n);
    const GridMeasure rho = detail::unpack(y.subspan(bs, bs), n);
    detail::pack(rhs(mu, k.value), dy.subspan(0, bs));
    detail::pack(coag_apply(k.value, mu, rho), dy.subspan(bs, bs));
  };
  const auto times = checkpoint_grid(T, opts.dt_checkpoint);
  const detail::ForwardGuard guard(mu0, k.phi, opts);
  const auto sol = integrate_ode(std::move(y0), field, 0.0, T, times, opts.ode(),
                                 [&](double t, std::span<const double> y) { guard(t, y); });
  LinearizedSolution out;
  out.mu = detail::collect_trajectory(sol, n, opts.abs_tol);
  for (const auto& s : sol.states)
    out.rho.push_back(detail::unpack(std::span<const double>(s).subspan(bs, bs), n));
  return out;
}

}  // namespace smolsens
