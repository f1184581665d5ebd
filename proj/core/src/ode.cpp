#include "smolsens/ode.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "smolsens/error.hpp"

namespace smolsens {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
// b - b_hat (error weights)
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

double error_norm(std::span<const double> err, std::span<const double> y0,
                  std::span<const double> y1, const OdeOptions& o) {
  double s = 0.0;
  for (std::size_t i = 0; i < err.size(); ++i) {
    const double sc = o.abs_tol + o.rel_tol * std::max(std::fabs(y0[i]), std::fabs(y1[i]));
    const double r = err[i] / sc;
    s += r * r;
  }
  return err.empty() ? 0.0 : std::sqrt(s / static_cast<double>(err.size()));
}

double rms(std::span<const double> v, std::span<const double> y, const OdeOptions& o) {
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double r = v[i] / (o.abs_tol + o.rel_tol * std::fabs(y[i]));
    s += r * r;
  }
  return v.empty() ? 0.0 : std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

OdeSolution integrate_ode(std::vector<double> y, const OdeRhs& rhs, double t0, double t1,
                          std::span<const double> output_times, const OdeOptions& opts,
                          const StepObserver& observer) {
  if (!(t1 >= t0)) throw SolverFault("integrate_ode: t1 < t0");
  if (!(opts.rel_tol > 0.0) || !(opts.abs_tol > 0.0))
    throw SolverFault("integrate_ode: tolerances must be positive");
  for (std::size_t i = 0; i < output_times.size(); ++i) {
    if (output_times[i] < t0 || output_times[i] > t1 || (i && output_times[i] <= output_times[i - 1]))
      throw SolverFault("integrate_ode: output times must be increasing inside [t0, t1]");
  }

  const std::size_t n = y.size();
  OdeSolution sol;
  std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), tmp(n), y_new(n), err(n);

  std::size_t next_out = 0;
  auto record = [&](double t) {
    while (next_out < output_times.size() && output_times[next_out] <= t) {
      sol.times.push_back(output_times[next_out]);
      sol.states.push_back(y);
      ++next_out;
    }
  };

  double t = t0;
  record(t);
  if (n == 0 || t1 == t0) {
    while (next_out < output_times.size()) record(output_times[next_out]);
    return sol;
  }

  rhs(t, y, k1);
  ++sol.stats.rhs_evals;

  double h = opts.initial_step;
  if (!(h > 0.0)) {
    const double d0 = rms(y, y, opts);
    const double d1 = rms(k1, y, opts);
    h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h = std::min(h, 0.1 * (t1 - t0));
  }
  h = std::min(h, opts.max_step);

  constexpr double safety = 0.9;
  constexpr double min_factor = 0.2;
  constexpr double max_factor = 5.0;
  bool last_rejected = false;

  while (t < t1) {
    if (sol.stats.steps + sol.stats.rejected >= opts.max_steps)
      throw SolverFault("integrate_ode: step budget exhausted at t = " + std::to_string(t));

    // land exactly on the next output time (or t1)
    const double target = next_out < output_times.size() ? output_times[next_out] : t1;
    bool hits_target = false;
    double step = std::min(h, opts.max_step);
    if (t + step >= target || target - (t + step) < 1e-12 * std::max(1.0, std::fabs(target))) {
      step = target - t;
      hits_target = true;
    }
    if (!(step > 0.0) || t + step == t)
      throw SolverFault("integrate_ode: step size underflow at t = " + std::to_string(t));

    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + step * a21 * k1[i];
    rhs(t + c2 * step, tmp, k2);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + step * (a31 * k1[i] + a32 * k2[i]);
    rhs(t + c3 * step, tmp, k3);
    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = y[i] + step * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    rhs(t + c4 * step, tmp, k4);
    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = y[i] + step * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    rhs(t + c5 * step, tmp, k5);
    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = y[i] + step * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
    rhs(t + step, tmp, k6);
    for (std::size_t i = 0; i < n; ++i)
      y_new[i] = y[i] + step * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
    const double t_new = hits_target ? target : t + step;
    rhs(t_new, y_new, k7);
    sol.stats.rhs_evals += 6;

    for (std::size_t i = 0; i < n; ++i)
      err[i] = step * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
    const double en = error_norm(err, y, y_new, opts);

    if (!std::isfinite(en)) {
      ++sol.stats.rejected;
      h = step * min_factor;
      last_rejected = true;
      continue;
    }
    if (en <= 1.0) {
      ++sol.stats.steps;
      sol.stats.max_local_error = std::max(sol.stats.max_local_error, en);
      t = t_new;
      y.swap(y_new);
      k1.swap(k7);
      if (observer) observer(t, y);
      record(t);
      double factor = en == 0.0 ? max_factor : safety * std::pow(en, -0.2);
      factor = std::clamp(factor, min_factor, last_rejected ? 1.0 : max_factor);
      // a clipped step says nothing about the controller's preferred size
      h = hits_target ? std::max(h, step * factor) : step * factor;
      last_rejected = false;
    } else {
      ++sol.stats.rejected;
      h = step * std::max(min_factor, safety * std::pow(en, -0.2));
      last_rejected = true;
    }
  }
  while (next_out < output_times.size()) record(output_times[next_out]);
  return sol;
}

void rk4_step(const OdeRhs& rhs, double t, std::span<double> y, double h) {
  const std::size_t n = y.size();
  std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n);
  rhs(t, y, k1);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
  rhs(t + 0.5 * h, tmp, k2);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
  rhs(t + 0.5 * h, tmp, k3);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * k3[i];
  rhs(t + h, tmp, k4);
  for (std::size_t i = 0; i < n; ++i) y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

std::vector<std::vector<double>> integrate_rk4(std::vector<double> y0, const OdeRhs& rhs,
                                               std::span<const double> times,
                                               std::size_t substeps) {
  std::vector<std::vector<double>> out;
  if (times.empty()) return out;
  out.push_back(y0);
  for (std::size_t i = 1; i < times.size(); ++i) {
    const double h = (times[i] - times[i - 1]) / static_cast<double>(substeps);
    for (std::size_t s = 0; s < substeps; ++s)
      rk4_step(rhs, times[i - 1] + static_cast<double>(s) * h, y0, h);
    out.push_back(y0);
  }
  return out;
}

}  // namespace smolsens
