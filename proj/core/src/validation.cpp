#include "smolsens/validation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "parallel.hpp"
#include "smolsens/error.hpp"
#include "smolsens/sensitivity.hpp"

namespace smolsens {

GridMeasure analytic_constant_kernel(std::size_t n_max, double t, double lam) {
  if (!(t >= 0.0) || !(lam > 0.0)) throw SolverFault("analytic_constant_kernel: need t >= 0, lam > 0");
  const double a = 0.5 * lam * t;
  GridMeasure mu(n_max);
  // c_1 = 1/(1+a)^2, c_{k+1} = c_k a/(1+a)
  double c = 1.0 / ((1.0 + a) * (1.0 + a));
  const double r = a / (1.0 + a);
  for (std::size_t k = 1; k <= n_max; ++k) {
    mu[static_cast<Mass>(k)] = c;
    c *= r;
  }
  return mu;
}

GridMeasure analytic_sensitivity_constant(std::size_t n_max, double t, double lam) {
  if (!(t >= 0.0) || !(lam > 0.0))
    throw SolverFault("analytic_sensitivity_constant: need t >= 0, lam > 0");
  const double a = 0.5 * lam * t;
  GridMeasure s(n_max);
  for (std::size_t k = 1; k <= n_max; ++k) {
    const double kk = static_cast<double>(k);
    const double first = k == 1 ? 0.0 : (kk - 1.0) * std::pow(a, kk - 2.0) * std::pow(1.0 + a, -(kk + 1.0));
    const double second = (kk + 1.0) * std::pow(a, kk - 1.0) * std::pow(1.0 + a, -(kk + 2.0));
    s[static_cast<Mass>(k)] = 0.5 * t * (first - second);
  }
  return s;
}

std::vector<std::pair<std::string, TestFunction>> spanning_test_functions(std::size_t n_max,
                                                                          const BoundFunction& phi) {
  std::vector<std::pair<std::string, TestFunction>> out;
  out.emplace_back("one", TestFunction(n_max, 1.0));
  out.emplace_back("mass", TestFunction::sample(n_max, [](Mass x) { return static_cast<double>(x); }));
  out.emplace_back("phi", TestFunction::sample(n_max, [&](Mass x) { return phi(x); }));
  out.emplace_back("phi2", TestFunction::sample(n_max, [&](Mass x) { return phi.pow(x, 2.0); }));
  for (Mass k = 1; k <= 3; ++k)
    out.emplace_back("ind" + std::to_string(k), TestFunction::indicator(n_max, k));
  out.emplace_back("trunc_id8", TestFunction::sample(n_max, [](Mass x) {
                     return static_cast<double>(std::min<Mass>(x, 8));
                   }));
  return out;
}

Trajectory fd_oracle(const ParametricKernel& k, const GridMeasure& mu0, std::size_t m, double h,
                     double T, const SolveOptions& opts) {
  if (m >= k.param_dim()) throw DimensionError("fd_oracle: parameter index out of range");
  if (!(h > 0.0)) throw SolverFault("fd_oracle: h must be positive");
  std::vector<double> up(k.param().begin(), k.param().end());
  std::vector<double> down = up;
  up[m] += h;
  down[m] -= h;
  if (!k.in_box(up) || !k.in_box(down))
    throw BoxError("fd_oracle: lambda +- h e_m leaves the parameter box");
  const Trajectory plus = solve_forward(mu0, tabulate(k.at(up)), T, opts);
  const Trajectory minus = solve_forward(mu0, tabulate(k.at(down)), T, opts);
  std::vector<GridMeasure> diff;
  diff.reserve(plus.size());
  for (std::size_t i = 0; i < plus.size(); ++i) {
    GridMeasure d = plus.state(i) - minus.state(i);
    d *= 1.0 / (2.0 * h);
    diff.push_back(std::move(d));
  }
  return Trajectory(std::vector<double>(plus.times().begin(), plus.times().end()), std::move(diff));
}

// ---------------------------------------------------------------------------

ConvergenceTable truncation_sweep(const ParametricKernel& k, const GridMeasure& mu0, double T,
                                  std::span<const double> levels, const SolveOptions& opts,
                                  std::size_t threads) {
  for (std::size_t i = 1; i < levels.size(); ++i)
    if (!(levels[i] > levels[i - 1])) throw SolverFault("truncation_sweep: levels must increase");
  const CoupledSolution ref = solve_coupled(mu0, tabulate(k), T, opts);
  const double p_mu = 2.0 + opts.epsilon;

  ConvergenceTable table;
  table.epsilon = opts.epsilon;
  table.rows.resize(levels.size());
  detail::parallel_for(levels.size(), threads, [&](std::size_t j) {
    const CoupledSolution run = solve_coupled(mu0, tabulate(truncate(k, levels[j])), T, opts);
    ConvergenceRow row;
    row.level = levels[j];
    for (std::size_t i = 0; i < ref.mu.size(); ++i) {
      row.err_mu = std::max(row.err_mu, norm_p(run.mu.state(i) - ref.mu.state(i), p_mu, k.phi()));
      for (std::size_t m = 0; m < k.param_dim(); ++m)
        row.err_sigma = std::max(
            row.err_sigma,
            norm_p(run.sigma.component(i, m) - ref.sigma.component(i, m), 1.0, k.phi()));
    }
    table.rows[j] = row;
  });
  return table;
}

void write_convergence_csv(std::ostream& out, const ConvergenceTable& table) {
  out << "N,err_mu_2eps,err_sigma_1\n";
  for (const auto& r : table.rows)
    out << format_double(r.level) << ',' << format_double(r.err_mu) << ','
        << format_double(r.err_sigma) << '\n';
}

// ---------------------------------------------------------------------------

bool HypothesisReport::passed() const {
  return std::all_of(findings.begin(), findings.end(), [](const Finding& f) { return f.passed; });
}

const Finding* HypothesisReport::find(const std::string& check) const {
  for (const auto& f : findings)
    if (f.check == check) return &f;
  return nullptr;
}

std::string HypothesisReport::text() const {
  std::ostringstream oss;
  for (const auto& f : findings)
    oss << (f.passed ? "[PASS] " : "[FAIL] ") << f.check << ": " << f.detail << '\n';
  return oss.str();
}

namespace {

std::string describe(const BoundViolation& v) {
  std::ostringstream oss;
  oss << (v.component < 0 ? std::string("K") : "dK/dl" + std::to_string(v.component)) << "("
      << v.x << ", " << v.y << ") = " << v.value << " > " << v.bound;
  return oss.str();
}

}  // namespace

HypothesisReport hypothesis_check(const KernelSpec& spec, std::span<const double> lambda0,
                                  const BoundFunction& phi, const GridMeasure& mu0,
                                  double epsilon) {
  HypothesisReport rep;
  const std::size_t n = mu0.n_max();
  bool spec_ok = true;
  try {
    validate_kernel_spec(spec);
    rep.findings.push_back({"kernel_spec", true, to_string(spec.family) + " family, box well formed"});
  } catch (const SpecError& e) {
    spec_ok = false;
    rep.findings.push_back({"kernel_spec", false, e.what()});
  }

  if (spec_ok) {
    bool in_box = lambda0.size() == spec.param_box.size();
    for (std::size_t m = 0; in_box && m < lambda0.size(); ++m)
      in_box = lambda0[m] >= spec.param_box[m].first && lambda0[m] <= spec.param_box[m].second;
    rep.findings.push_back({"lambda_in_box", in_box, in_box ? "lambda0 inside the box" : "lambda0 outside the box"});

    const auto extra = in_box ? lambda0 : std::span<const double>{};
    for (auto& v : scan_bounds(spec, phi, n, extra, n * n)) {
      if (v.component < 0)
        rep.kernel_violations.push_back(std::move(v));
      else
        rep.partial_violations.push_back(std::move(v));
    }
    const auto summarize = [](const std::vector<BoundViolation>& vs, const char* ok) {
      if (vs.empty()) return std::string(ok);
      return std::to_string(vs.size()) + " violation(s), first " + describe(vs.front());
    };
    rep.findings.push_back({"kernel_bound", rep.kernel_violations.empty(),
                            summarize(rep.kernel_violations, "K <= phi(x) phi(y) on every grid pair")});
    rep.findings.push_back({"partial_bound", rep.partial_violations.empty(),
                            summarize(rep.partial_violations, "|dK| <= phi(x) phi(y) on every grid pair")});
  }

  Mass below_one = 0;
  for (Mass x = 1; x <= static_cast<Mass>(n) && below_one == 0; ++x)
    if (phi(x) < 1.0) below_one = x;
  rep.findings.push_back({"phi_at_least_one", below_one == 0,
                          below_one == 0 ? "phi >= 1 on the grid"
                                         : "phi(" + std::to_string(below_one) + ") < 1"});

  std::string sub_detail = "phi(x+y) <= phi(x) + phi(y) on every grid pair";
  bool sub_ok = true;
  for (Mass x = 1; x <= static_cast<Mass>(n) && sub_ok; ++x)
    for (Mass y = x; y <= static_cast<Mass>(n) && sub_ok; ++y)
      if (phi(x + y) > phi(x) + phi(y) * (1.0 + 1e-15)) {
        sub_ok = false;
        sub_detail = "fails at (" + std::to_string(x) + ", " + std::to_string(y) + ")";
      }
  rep.findings.push_back({"phi_subadditive", sub_ok, sub_detail});

  rep.moment = 0.0;
  for (std::size_t k = 1; k <= n; ++k)
    rep.moment += phi.pow(static_cast<Mass>(k), 4.0 + epsilon) * std::fabs(mu0[static_cast<Mass>(k)]);
  const bool moment_ok = std::isfinite(rep.moment) && mu0.is_nonnegative();
  std::ostringstream m;
  m << "(phi^" << 4.0 + epsilon << ", mu0) = " << format_double(rep.moment);
  if (!mu0.is_nonnegative()) m << " but mu0 has negative weights";
  rep.findings.push_back({"initial_moment", moment_ok, m.str()});
  return rep;
}

// ---------------------------------------------------------------------------

namespace {

double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

double norm0(const GridMeasure& rho) {
  double s = 0.0;
  for (double w : rho.weights()) s += std::fabs(w);
  return s;
}

// Cubic interpolation of the derivative samples through up to four nodes around
// interval [i, i+1]; integrated with 3-point Gauss-Legendre, exact for cubics.
struct LocalQuadrature {
  std::vector<std::size_t> nodes;
  std::span<const double> times;

  LocalQuadrature(std::span<const double> t, std::size_t i) : times(t) {
    const std::size_t n = t.size();
    const std::size_t width = std::min<std::size_t>(4, n);
    std::size_t first = i > 0 ? i - 1 : 0;
    if (first + width > n) first = n - width;
    for (std::size_t j = 0; j < width; ++j) nodes.push_back(first + j);
  }

  double basis(std::size_t j, double s) const {
    double v = 1.0;
    for (std::size_t m = 0; m < nodes.size(); ++m)
      if (m != j) v *= (s - times[nodes[m]]) / (times[nodes[j]] - times[nodes[m]]);
    return v;
  }

  // weights w_j with int_a^b d(s) ds = sum_j w_j d(nodes[j])
  std::vector<double> weights(double a, double b) const {
    static constexpr double x[3] = {-0.7745966692414834, 0.0, 0.7745966692414834};
    static constexpr double g[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
    std::vector<double> w(nodes.size(), 0.0);
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    for (int q = 0; q < 3; ++q)
      for (std::size_t j = 0; j < nodes.size(); ++j) w[j] += g[q] * half * basis(j, mid + half * x[q]);
    return w;
  }
};

// root in (0, 1) of the cubic Hermite interpolant of r on an interval where r changes sign
double hermite_root(double r0, double r1, double d0, double d1, double dt) {
  auto h = [&](double u) {
    const double u2 = u * u;
    const double u3 = u2 * u;
    return (2 * u3 - 3 * u2 + 1) * r0 + (u3 - 2 * u2 + u) * dt * d0 + (-2 * u3 + 3 * u2) * r1 +
           (u3 - u2) * dt * d1;
  };
  double lo = 0.0;
  double hi = 1.0;
  const bool neg_lo = r0 < 0.0;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    ((h(mid) < 0.0) == neg_lo ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double dot(const std::vector<double>& w, const std::vector<std::span<const double>>& d, std::size_t k) {
  double s = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) s += w[j] * d[j][k];
  return s;
}

}  // namespace

TvCheck tv_identity_check(const MeasurePath& path, std::span<const TestFunction> probes) {
  const std::size_t count = path.times.size();
  if (count == 0 || path.values.size() != count || path.derivatives.size() != count)
    throw SolverFault("tv_identity_check: times, values and derivatives must align");
  TvCheck out;
  out.residuals.assign(count, 0.0);
  const double base = norm0(path.values.front());
  double integral = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    if (i > 0) {
      const double t0 = path.times[i - 1];
      const double t1 = path.times[i];
      const LocalQuadrature quad(path.times, i - 1);
      const auto whole = quad.weights(t0, t1);
      std::vector<std::span<const double>> d;
      for (std::size_t j : quad.nodes) d.push_back(path.derivatives[j].weights());
      const auto r0 = path.values[i - 1].weights();
      const auto r1 = path.values[i].weights();
      const auto dl = path.derivatives[i - 1].weights();
      const auto dr = path.derivatives[i].weights();
      for (std::size_t k = 0; k < r0.size(); ++k) {
        if (r0[k] * r1[k] < 0.0) {
          const double tc = t0 + hermite_root(r0[k], r1[k], dl[k], dr[k], t1 - t0) * (t1 - t0);
          integral += sgn(r0[k]) * dot(quad.weights(t0, tc), d, k) + sgn(r1[k]) * dot(quad.weights(tc, t1), d, k);
        } else {
          // same sign or touching zero: sgn of the open interval from whichever end is non-zero
          integral += (r0[k] != 0.0 ? sgn(r0[k]) : sgn(r1[k])) * dot(whole, d, k);
        }
      }
    }
    out.residuals[i] = std::fabs(norm0(path.values[i]) - base - integral);
    out.max_residual = std::max(out.max_residual, out.residuals[i]);

    const GridMeasure& rho = path.values[i];
    const TestFunction eps = sign_density(rho);
    const GridMeasure mag = rho.abs();
    for (const auto& f : probes)
      out.max_pointwise = std::max(out.max_pointwise, std::fabs(pair(f, mag) - pair(f * eps, rho)));
  }
  return out;
}

CurlyBoundCheck curly_bound_check(const TestFunction& f, double p, const BoundFunction& phi) {
  CurlyBoundCheck out;
  const double fn = sup_norm_p(f, p, phi);
  const double factor = std::pow(2.0, p) * fn;
  const auto n = static_cast<Mass>(f.n_max());
  for (Mass x = 1; x <= n; ++x)
    for (Mass y = 1; y <= n; ++y) {
      const double lhs = std::fabs(curly(f, x, y));
      const double bound = factor * (phi.pow(x, p) + phi.pow(y, p));
      if (lhs > bound) ++out.violations;
      if (bound > 0.0) out.worst_ratio = std::max(out.worst_ratio, lhs / bound);
      else if (lhs > 0.0) out.worst_ratio = std::numeric_limits<double>::infinity();
    }
  return out;
}

TimeRegularity time_regularity_check(const GridMeasure& mu0, const GridKernel& k, double t,
                                     double delta, const SolveOptions& opts) {
  if (!(delta > 0.0) || !(t >= delta)) throw SolverFault("time_regularity_check: need t >= delta > 0");
  SolveOptions o = opts;
  o.dt_checkpoint = 0.5 * delta;
  const Trajectory traj = solve_forward(mu0, k, t + delta, o);
  const std::size_t c = traj.index_of(t);
  const double p = 2.0 + opts.epsilon;
  const GridMeasure field = rhs(traj.state(c), k.value);
  const auto residual = [&](std::size_t steps, double d) {
    GridMeasure diff = traj.state(c + steps) - traj.state(c - steps);
    diff *= 1.0 / (2.0 * d);
    return norm_p(diff - field, p, k.phi);
  };
  TimeRegularity out;
  out.residual_coarse = residual(2, delta);
  out.residual_fine = residual(1, 0.5 * delta);
  return out;
}

}  // namespace smolsens
