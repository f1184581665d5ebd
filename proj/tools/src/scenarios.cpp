#include "scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <future>
#include <random>

#include "smolsens/error.hpp"
#include "smolsens/forward.hpp"
#include "smolsens/propagator.hpp"
#include "smolsens/sensitivity.hpp"
#include "smolsens/stochastic.hpp"
#include "smolsens/validation.hpp"

namespace smolsens::app {

namespace fs = std::filesystem;
using nlohmann::json;

bool ScenarioResult::passed() const {
  return std::all_of(checks.begin(), checks.end(),
                     [](const Check& c) { return c.passed || !c.gating; });
}

namespace {

void write_artifact(ScenarioResult& res, const fs::path& dir, const std::string& name,
                    const std::function<void(std::ostream&)>& body) {
  std::ofstream out(dir / name, std::ios::binary);
  if (!out) throw SolverFault("cannot write artifact " + (dir / name).string());
  body(out);
  res.artifacts.push_back(name);
}

Check at_most(const std::string& name, double value, double threshold) {
  return {name, value, threshold, value <= threshold, true};
}

ParametricKernel build_kernel(const RunConfig& cfg) {
  return make_kernel(cfg.kernel.spec, cfg.kernel.lambda, cfg.phi(), cfg.n_max);
}

bool analytic_applicable(const RunConfig& cfg) {
  const auto mu0 = cfg.initial_measure();
  return cfg.kernel.spec.family == KernelFamily::constant && mu0 == GridMeasure::dirac(cfg.n_max, 1);
}

double number(const GridMeasure& mu) {
  double s = 0.0;
  for (double w : mu.weights()) s += w;
  return s;
}

double mass_with_overflow(const GridMeasure& mu) {
  double s = mu.overflow_mass();
  const auto w = mu.weights();
  for (std::size_t k = 0; k < w.size(); ++k) s += static_cast<double>(k + 1) * w[k];
  return s;
}

// Positivity, monotone number and mass conservation along a forward run.
void conservation_checks(ScenarioResult& res, const Trajectory& traj, double abs_tol,
                         const std::string& prefix) {
  double min_weight = 0.0;
  double increase = 0.0;
  double drift_rate = 0.0;
  const double mass0 = mass_with_overflow(traj.front());
  for (std::size_t i = 0; i < traj.size(); ++i) {
    for (double w : traj.state(i).weights()) min_weight = std::min(min_weight, w);
    if (i > 0) increase = std::max(increase, number(traj.state(i)) - number(traj.state(i - 1)));
    const double drift = std::fabs(mass_with_overflow(traj.state(i)) - mass0);
    drift_rate = std::max(drift_rate, drift / (std::max(1.0, mass0) * std::max(1.0, traj.time(i))));
  }
  res.add({prefix + "min_weight", min_weight, 0.0, min_weight >= 0.0, true});
  res.add({prefix + "min_weight_before_clamp", traj.min_weight_before_clamp, -10.0 * abs_tol,
           traj.min_weight_before_clamp >= -10.0 * abs_tol, true});
  res.add(at_most(prefix + "number_increase", increase, 0.0));
  res.add(at_most(prefix + "mass_drift_per_unit_time", drift_rate, 1e-10));
}

std::size_t checkpoint_index(const Trajectory& traj, double t) {
  try {
    return traj.index_of(t);
  } catch (const SolverFault&) {
    throw ConfigError("analysis time " + format_double(t) +
                      " is not on the checkpoint grid; adjust solver.dt_checkpoint or --checkpoints");
  }
}

std::vector<double> analysis_times(const RunConfig& cfg) {
  return cfg.analysis.times.empty() ? std::vector<double>{cfg.horizon} : cfg.analysis.times;
}

// ---------------------------------------------------------------------------

ScenarioResult run_forward(const RunConfig& cfg, const fs::path& out) {
  ScenarioResult res;
  const auto k = build_kernel(cfg);
  const auto gk = tabulate(k);
  const auto traj = solve_forward(cfg.initial_measure(), gk, cfg.horizon, cfg.solver);
  write_artifact(res, out, "trajectory.csv", [&](std::ostream& o) { write_trajectory_csv(o, traj); });
  const std::vector<double> powers{0.0, 1.0, 2.0, 2.0 + cfg.solver.epsilon, 4.0 + cfg.solver.epsilon};
  const auto moments = moments_report(traj, k.phi(), powers);
  write_artifact(res, out, "moments.csv", [&](std::ostream& o) { write_moments_csv(o, moments); });

  conservation_checks(res, traj, cfg.solver.abs_tol, "");
  res.summary["number_final"] = number(traj.back());
  res.summary["mass_final"] = mass_with_overflow(traj.back());
  res.summary["overflow_number_final"] = traj.back().overflow_number();
  res.summary["moment_4eps_max"] = moments.running_max.back().back();
  res.summary["steps"] = traj.stats().steps;
  res.summary["rejected_steps"] = traj.stats().rejected;
  if (analytic_applicable(cfg)) {
    const auto exact = analytic_constant_kernel(cfg.n_max, cfg.horizon, cfg.kernel.lambda[0]);
    double err = 0.0;
    for (std::size_t j = 0; j < cfg.n_max; ++j)
      err = std::max(err, std::fabs(traj.back().weights()[j] - exact.weights()[j]));
    res.add(at_most("analytic_max_abs_error", err, 1e-8));
  }
  return res;
}

ScenarioResult run_sensitivity(const RunConfig& cfg, const fs::path& out) {
  ScenarioResult res;
  const auto k = build_kernel(cfg);
  const auto gk = tabulate(k);
  const auto mu0 = cfg.initial_measure();
  const auto cs = solve_coupled(mu0, gk, cfg.horizon, cfg.solver);
  write_artifact(res, out, "trajectory.csv", [&](std::ostream& o) { write_trajectory_csv(o, cs.mu); });
  write_artifact(res, out, "sensitivity.csv", [&](std::ostream& o) { write_sensitivity_csv(o, cs.sigma); });
  conservation_checks(res, cs.mu, cfg.solver.abs_tol, "");

  const std::size_t m = cfg.analysis.param_index;
  const std::size_t last = cs.sigma.size() - 1;
  TestFunction one(cfg.n_max, 1.0);
  json sigma_number = json::array();
  for (std::size_t c = 0; c < k.param_dim(); ++c) sigma_number.push_back(pair(one, cs.sigma.component(last, c)));
  res.summary["sigma_number_final"] = sigma_number;
  res.summary["sigma_norm1_final"] = norm_p(cs.sigma.component(last, m), 1.0, k.phi());

  std::vector<double> up(k.param().begin(), k.param().end());
  std::vector<double> down = up;
  up[m] += cfg.analysis.fd_h;
  down[m] -= cfg.analysis.fd_h;
  if (k.in_box(up) && k.in_box(down)) {
    const auto fd = fd_oracle(k, mu0, m, cfg.analysis.fd_h, cfg.horizon, cfg.solver);
    double err = 0.0;
    for (std::size_t i = 0; i < fd.size(); ++i)
      err = std::max(err, norm_p(fd.state(i) - cs.sigma.component(i, m), 1.0, k.phi()));
    res.add(at_most("fd_oracle_norm1_gap", err, cfg.analysis.tolerance));
  } else {
    res.summary["fd_oracle"] = "skipped: lambda +- fd_h leaves the parameter box";
  }

  MeasurePath path;
  for (std::size_t i = 0; i < cs.sigma.size(); ++i) {
    path.times.push_back(cs.sigma.time(i));
    path.values.push_back(cs.sigma.component(i, m));
    path.derivatives.push_back(sensitivity_rhs(cs.mu.state(i), cs.sigma.component(i, m), gk, m));
  }
  res.summary["tv_identity_residual"] = tv_identity_check(path).max_residual;

  if (analytic_applicable(cfg)) {
    const auto exact = analytic_sensitivity_constant(cfg.n_max, cfg.horizon, cfg.kernel.lambda[0]);
    res.add(at_most("analytic_sigma_norm1_error",
                    norm_p(cs.sigma.component(last, 0) - exact, 1.0, k.phi()), 1e-6));
  }
  return res;
}

ScenarioResult run_representation(const RunConfig& cfg, const fs::path& out) {
  ScenarioResult res;
  const auto k = build_kernel(cfg);
  const auto gk = tabulate(k);
  const auto cs = solve_coupled(cfg.initial_measure(), gk, cfg.horizon, cfg.solver);
  const std::size_t m = cfg.analysis.param_index;
  const auto probes = spanning_test_functions(cfg.n_max, k.phi());
  const auto times = analysis_times(cfg);
  for (double t : times) checkpoint_index(cs.mu, t);

  struct Row {
    double t;
    std::string id;
    double direct;
    double rep;
  };
  // one task per anchor time against the shared immutable trajectory
  std::vector<std::future<std::vector<Row>>> tasks;
  for (double t : times) {
    tasks.push_back(std::async(std::launch::async, [&, t] {
      std::vector<Row> rows;
      const std::size_t i = cs.mu.index_of(t);
      for (const auto& [id, f] : probes)
        rows.push_back({t, id, pair(f, cs.sigma.component(i, m)),
                        representation_sensitivity(f, cs.mu, gk, m, t)});
      return rows;
    }));
  }
  std::vector<Row> rows;
  for (auto& task : tasks)
    for (auto& r : task.get()) rows.push_back(std::move(r));

  double worst = 0.0;
  write_artifact(res, out, "routes.csv", [&](std::ostream& o) {
    o << "t,f_id,direct,representation,abs_diff\n";
    for (const auto& r : rows) {
      const double d = std::fabs(r.direct - r.rep);
      worst = std::max(worst, d);
      o << format_double(r.t) << ',' << r.id << ',' << format_double(r.direct) << ','
        << format_double(r.rep) << ',' << format_double(d) << '\n';
    }
  });
  write_artifact(res, out, "sensitivity.csv", [&](std::ostream& o) { write_sensitivity_csv(o, cs.sigma); });
  res.add(at_most("route_max_abs_diff", worst, cfg.analysis.tolerance));
  res.summary["route_pairs"] = rows.size();
  return res;
}

ScenarioResult run_truncation(const RunConfig& cfg, const fs::path& out) {
  ScenarioResult res;
  const auto k = build_kernel(cfg);
  const auto table = truncation_sweep(k, cfg.initial_measure(), cfg.horizon,
                                      cfg.analysis.truncation_levels, cfg.solver,
                                      cfg.stochastic.threads);
  write_artifact(res, out, "convergence.csv", [&](std::ostream& o) { write_convergence_csv(o, table); });
  double worst_mu = 0.0;
  double worst_sigma = 0.0;
  for (std::size_t i = 1; i < table.rows.size(); ++i) {
    worst_mu = std::max(worst_mu, table.rows[i].err_mu - table.rows[i - 1].err_mu);
    worst_sigma = std::max(worst_sigma, table.rows[i].err_sigma - table.rows[i - 1].err_sigma);
  }
  res.add(at_most("err_mu_increase", worst_mu, 0.0));
  res.add(at_most("err_sigma_increase", worst_sigma, 0.0));
  if (!table.rows.empty()) {
    const auto& last = table.rows.back();
    const double top = k.phi()(static_cast<Mass>(cfg.n_max));
    res.summary["final_level_covers_grid"] = last.level >= top * top;
    res.summary["err_mu_final"] = last.err_mu;
    res.summary["err_sigma_final"] = last.err_sigma;
    if (last.level >= top * top) {
      res.add(at_most("err_mu_final", last.err_mu, 1e-8));
      res.add(at_most("err_sigma_final", last.err_sigma, 1e-8));
    }
  }
  return res;
}

ScenarioResult run_mlsim(const RunConfig& cfg, const fs::path& out) {
  ScenarioResult res;
  const auto k = build_kernel(cfg);
  const auto mu0 = cfg.initial_measure();
  const auto times = checkpoint_grid(cfg.horizon, cfg.solver.dt_checkpoint);
  const auto& st = cfg.stochastic;
  const auto runs = ml_replicas(mu0, st.n, kernel_fn(k), times, st.seed, st.replicas, st.threads);
  const auto det = solve_forward(mu0, tabulate(k), cfg.horizon, cfg.solver);
  write_artifact(res, out, "ml_replicas.csv", [&](std::ostream& o) { write_replicas_csv(o, runs); });
  const auto ensemble = summarize_runs(runs);
  write_artifact(res, out, "ml_ensemble.csv", [&](std::ostream& o) { write_ensemble_csv(o, ensemble); });
  // trajectory.csv holds the replica mean so that `compare` against a
  // deterministic run measures the Monte Carlo gap
  write_artifact(res, out, "trajectory.csv", [&](std::ostream& o) {
    write_trajectory_csv(o, Trajectory(ensemble.times, ensemble.mean));
  });
  write_artifact(res, out, "deterministic.csv", [&](std::ostream& o) { write_trajectory_csv(o, det); });

  double mass_gap = 0.0;
  double count_increase = 0.0;
  for (const auto& r : runs) {
    const auto& e = r.empirical;
    const double m0 = mass_with_overflow(e.front());
    for (std::size_t i = 0; i < e.size(); ++i) {
      mass_gap = std::max(mass_gap, std::fabs(mass_with_overflow(e.state(i)) - m0) / m0);
      if (i > 0)
        count_increase = std::max(count_increase,
                                  number(e.state(i)) + e.state(i).overflow_number() -
                                      number(e.state(i - 1)) - e.state(i - 1).overflow_number());
    }
  }
  res.add(at_most("ml_relative_mass_gap", mass_gap, 1e-12));
  res.add(at_most("ml_particle_count_increase", count_increase, 0.0));

  TestFunction one(cfg.n_max, 1.0);
  json rows = json::array();
  bool covered = true;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const auto est = observable_estimate(runs, one, i);
    const double target = pair(one, det.state(i));
    const bool ok = std::fabs(est.mean - target) <= 3.0 * est.std_error;
    covered = covered && ok;
    rows.push_back({{"t", times[i]}, {"mean", est.mean}, {"stderr", est.std_error},
                    {"deterministic", target}, {"within_3se", ok}});
  }
  res.summary["number_vs_deterministic"] = rows;
  res.summary["within_3se_all_checkpoints"] = covered;
  res.summary["n_eff"] = runs.front().census.n_eff;
  res.summary["census_rounding_residual"] = runs.front().census.rounding_residual;
  res.add({"within_3se_all_checkpoints", covered ? 1.0 : 0.0, 1.0, covered, false});
  return res;
}

ScenarioResult run_coupled_fd(const RunConfig& cfg, const fs::path& out) {
  ScenarioResult res;
  const auto k = build_kernel(cfg);
  const auto mu0 = cfg.initial_measure();
  const auto& st = cfg.stochastic;
  const std::size_t m = cfg.analysis.param_index;
  const auto times = checkpoint_grid(cfg.horizon, cfg.solver.dt_checkpoint);
  const auto est = coupled_fd_sensitivity(mu0, st.n, k, m, st.h, times, st.seed, st.replicas, st.threads);
  const auto direct = solve_coupled(mu0, tabulate(k), cfg.horizon, cfg.solver);
  write_artifact(res, out, "fd_ensemble.csv", [&](std::ostream& o) { write_ensemble_csv(o, est.summary); });
  write_artifact(res, out, "sensitivity.csv", [&](std::ostream& o) { write_sensitivity_csv(o, direct.sigma); });

  TestFunction one(cfg.n_max, 1.0);
  json rows = json::array();
  bool covered = true;
  bool finite = true;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const auto e = est.observable(one, i);
    const double target = pair(one, direct.sigma.component(i, m));
    const bool ok = e.covers(target, est.z);
    covered = covered && ok;
    finite = finite && std::isfinite(e.mean);
    rows.push_back({{"t", times[i]}, {"estimate", e.mean}, {"stderr", e.std_error},
                    {"direct", target}, {"ci_covers", ok}});
  }
  res.summary["number_sensitivity"] = rows;
  res.summary["z"] = est.z;
  res.summary["fd_step"] = st.h;
  res.summary["ci_covers_all_checkpoints"] = covered;
  res.add({"estimator_finite", finite ? 1.0 : 0.0, 1.0, finite, true});
  res.add({"ci_covers_all_checkpoints", covered ? 1.0 : 0.0, 1.0, covered, false});
  return res;
}

// ---------------------------------------------------------------------------
// validate-all: a compact self-test on the configured grid

ScenarioResult run_validate_all(const RunConfig& cfg, const fs::path& out) {
  ScenarioResult res;
  const std::size_t n = cfg.n_max;
  const auto mu0 = GridMeasure::dirac(n, 1);
  const auto phi = BoundFunction::affine();
  TestFunction one(n, 1.0);

  // closed forms for K = lambda
  const auto kc = make_kernel({KernelFamily::constant, {{0.5, 1.5}}}, {1.0}, phi, n);
  const auto gkc = tabulate(kc);
  SolveOptions fine = cfg.solver;
  fine.dt_checkpoint = 1.0 / 512.0;
  const auto cs = solve_coupled(mu0, gkc, 2.0, fine);
  {
    const auto exact = analytic_constant_kernel(n, 2.0, 1.0);
    double err = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      err = std::max(err, std::fabs(cs.mu.back().weights()[j] - exact.weights()[j]));
    res.add(at_most("analytic_forward", err, 1e-8));
    const auto& sig = cs.sigma.component(cs.sigma.size() - 1, 0);
    res.add(at_most("analytic_sensitivity",
                    std::max(std::fabs(sig[1] + 0.25), std::fabs(pair(one, sig) + 0.25)), 1e-6));
  }
  {
    double worst = 0.0;
    for (const auto& [id, f] : spanning_test_functions(n, phi))
      worst = std::max(worst, std::fabs(pair(f, cs.sigma.component(cs.mu.index_of(1.0), 0)) -
                                        representation_sensitivity(f, cs.mu, gkc, 0, 1.0)));
    res.add(at_most("representation_route", worst, 1e-5));
  }
  {
    GridMeasure rho0(n);
    std::mt19937_64 rng(cfg.stochastic.seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (std::size_t j = 1; j <= n; ++j) rho0[static_cast<Mass>(j)] = u(rng) / static_cast<double>(j * j);
    const auto f = TestFunction::sample(n, [](Mass x) { return std::cos(0.37 * static_cast<double>(x)); });
    const auto lin = solve_linearized(mu0, rho0, gkc, 1.0, fine);
    const auto back = solve_backward(f, lin.mu, gkc, 1.0, 0.0);
    res.add(at_most("duality", std::fabs(pair(back.at_start(), rho0) - pair(f, lin.rho.back())), 1e-7));
    res.add(at_most("cocycle", propagator_cocycle_check(cs.mu, gkc, 0.0, 1.0, 2.0, f), 1e-7));
  }
  {
    const auto km = make_kernel({KernelFamily::multiplicative, {{0.0, 1.0}}}, {1.0}, phi, n);
    SolveOptions o = cfg.solver;
    o.dt_checkpoint = 0.01;
    const std::vector<double> levels{16, 64, 256, 1024, 4225};
    const auto table = truncation_sweep(km, mu0, 0.5, levels, o, cfg.stochastic.threads);
    double incr = 0.0;
    for (std::size_t i = 1; i < table.rows.size(); ++i)
      incr = std::max({incr, table.rows[i].err_mu - table.rows[i - 1].err_mu,
                       table.rows[i].err_sigma - table.rows[i - 1].err_sigma});
    res.add(at_most("truncation_monotone", incr, 0.0));
    res.add(at_most("truncation_final",
                    std::max(table.rows.back().err_mu, table.rows.back().err_sigma), 1e-8));
  }
  {
    MeasurePath path;
    for (double t : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      path.times.push_back(t);
      path.values.push_back(GridMeasure::dirac(n, 1, 1.0 - 2.0 * t));
      path.derivatives.push_back(GridMeasure::dirac(n, 1, -2.0));
    }
    res.add(at_most("tv_identity_hand_path", tv_identity_check(path).max_residual, 1e-12));
  }
  {
    std::mt19937_64 rng(cfg.stochastic.seed + 1);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::size_t violations = 0;
    for (int trial = 0; trial < 100; ++trial)
      for (double p : {1.0, 2.0, 3.0}) {
        const auto f = TestFunction::sample(n, [&](Mass x) { return u(rng) * phi.pow(x, p); });
        violations += curly_bound_check(f, p, phi).violations;
      }
    res.add(at_most("curly_bound_violations", static_cast<double>(violations), 0.0));
  }
  {
    // conservation on the configured kernel and horizon
    const auto k = build_kernel(cfg);
    const auto traj = solve_forward(cfg.initial_measure(), tabulate(k), cfg.horizon, cfg.solver);
    conservation_checks(res, traj, cfg.solver.abs_tol, "configured_kernel_");
  }
  write_artifact(res, out, "validate_all.csv", [&](std::ostream& o) {
    o << "check,value,threshold,passed\n";
    for (const auto& c : res.checks)
      o << c.name << ',' << format_double(c.value) << ',' << format_double(c.threshold) << ','
        << (c.passed ? "true" : "false") << '\n';
  });
  return res;
}

}  // namespace

ScenarioResult run_scenario(const RunConfig& cfg, const fs::path& out) {
  switch (cfg.scenario) {
    case Scenario::forward:
      return run_forward(cfg, out);
    case Scenario::sensitivity:
      return run_sensitivity(cfg, out);
    case Scenario::representation:
      return run_representation(cfg, out);
    case Scenario::truncation:
      return run_truncation(cfg, out);
    case Scenario::mlsim:
      return run_mlsim(cfg, out);
    case Scenario::coupled_fd:
      return run_coupled_fd(cfg, out);
    case Scenario::validate_all:
      return run_validate_all(cfg, out);
  }
  throw SolverFault("unknown scenario");
}

}  // namespace smolsens::app
