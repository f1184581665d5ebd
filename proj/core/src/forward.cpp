#include "smolsens/forward.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

#include "guard.hpp"
#include "smolsens/error.hpp"
#include "state.hpp"

namespace smolsens {

OdeOptions SolveOptions::ode() const {
  OdeOptions o;
  o.rel_tol = rel_tol;
  o.abs_tol = abs_tol;
  o.max_step = max_step;
  return o;
}

void SolveOptions::validate() const {
  if (!(rel_tol > 0.0) || !(abs_tol > 0.0) || !(dt_checkpoint > 0.0) || !(epsilon > 0.0) ||
      !(moment_ceiling > 0.0) || !(overflow_fraction_max > 0.0) || !(max_step > 0.0))
    throw SolverFault("solve options: tolerances, dt_checkpoint and epsilon must be positive");
}

std::vector<double> checkpoint_grid(double T, double dt) {
  if (!(T >= 0.0) || !(dt > 0.0)) throw SolverFault("checkpoint_grid: need T >= 0 and dt > 0");
  if (T == 0.0) return {0.0};
  const auto n = static_cast<std::size_t>(std::max(1.0, std::ceil(T / dt - 1e-9)));
  std::vector<double> times(n + 1);
  for (std::size_t i = 0; i <= n; ++i) times[i] = T * static_cast<double>(i) / static_cast<double>(n);
  times.back() = T;
  return times;
}

// ---------------------------------------------------------------------------
// Trajectory

Trajectory::Trajectory(std::vector<double> times, std::vector<GridMeasure> states, OdeStats stats)
    : times_(std::move(times)), states_(std::move(states)), stats_(stats) {
  if (times_.empty() || times_.size() != states_.size())
    throw SolverFault("Trajectory: times and states must be non-empty and of equal length");
  for (std::size_t i = 1; i < times_.size(); ++i)
    if (!(times_[i] > times_[i - 1])) throw SolverFault("Trajectory: times must increase");
}

GridMeasure Trajectory::at(double t) const {
  if (t <= times_.front()) return states_.front();
  if (t >= times_.back()) return states_.back();
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  const std::size_t i = static_cast<std::size_t>(it - times_.begin()) - 1;
  const double theta = (t - times_[i]) / (times_[i + 1] - times_[i]);
  return (1.0 - theta) * states_[i] + theta * states_[i + 1];
}

std::size_t Trajectory::index_of(double t) const {
  const double tol = 1e-9 * std::max(1.0, std::fabs(t));
  const auto it = std::lower_bound(times_.begin(), times_.end(), t - tol);
  if (it == times_.end() || std::fabs(*it - t) > tol) {
    std::ostringstream oss;
    oss << "time " << t << " is not a checkpoint of the trajectory";
    throw SolverFault(oss.str());
  }
  return static_cast<std::size_t>(it - times_.begin());
}

// ---------------------------------------------------------------------------
// Guard and collection

namespace detail {

ForwardGuard::ForwardGuard(const GridMeasure& mu0, const BoundFunction& phi,
                           const SolveOptions& opts)
    : moment_weight_(mu0.n_max()), initial_number_(0.0), opts_(opts) {
  for (std::size_t i = 0; i < mu0.n_max(); ++i) {
    moment_weight_[i] = phi.pow(static_cast<Mass>(i + 1), 4.0 + opts.epsilon);
    initial_number_ += mu0.weights()[i];
  }
}

void ForwardGuard::operator()(double t, std::span<const double> state) const {
  const std::size_t n = moment_weight_.size();
  double moment = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (state[i] < -10.0 * opts_.abs_tol) {
      std::ostringstream oss;
      oss << "weight at mass " << (i + 1) << " fell to " << state[i] << " at t = " << t;
      throw NegativityError(oss.str(), t);
    }
    moment += moment_weight_[i] * state[i];
  }
  if (!(moment <= opts_.moment_ceiling)) {
    std::ostringstream oss;
    oss << "moment (phi^" << 4.0 + opts_.epsilon << ", mu_t) = " << moment
        << " exceeds the ceiling " << opts_.moment_ceiling << " at t = " << t;
    throw BlowUpError(oss.str(), t);
  }
  if (initial_number_ > 0.0 && state[n + 1] / initial_number_ > opts_.overflow_fraction_max) {
    std::ostringstream oss;
    oss << "overflow number fraction " << state[n + 1] / initial_number_ << " exceeds "
        << opts_.overflow_fraction_max << " at t = " << t << " (grid too small or gelation)";
    throw BlowUpError(oss.str(), t);
  }
}

Trajectory collect_trajectory(const OdeSolution& sol, std::size_t n_max, double abs_tol) {
  std::vector<GridMeasure> states;
  states.reserve(sol.states.size());
  double min_weight = 0.0;
  for (const auto& s : sol.states) {
    GridMeasure mu = detail::unpack(s, n_max);
    for (double& w : mu.weights()) {
      if (w < 0.0) {
        min_weight = std::min(min_weight, w);
        if (w >= -10.0 * abs_tol) w = 0.0;
      }
    }
    states.push_back(std::move(mu));
  }
  Trajectory traj(sol.times, std::move(states), sol.stats);
  traj.min_weight_before_clamp = min_weight;
  return traj;
}

}  // namespace detail

// ---------------------------------------------------------------------------

GridMeasure rhs(const GridMeasure& mu, const KernelMatrix& k) {
  GridMeasure out = coag_apply(k, mu, mu);
  out *= 0.5;
  return out;
}

Trajectory solve_forward(const GridMeasure& mu0, const GridKernel& k, double T,
                         const SolveOptions& opts) {
  opts.validate();
  if (!(T >= 0.0)) throw SolverFault("solve_forward: horizon must be non-negative");
  if (mu0.n_max() != k.n_max()) throw DimensionError("solve_forward: grid size mismatch");
  if (!mu0.is_nonnegative()) throw NegativityError("solve_forward: initial measure has negative weights", 0.0);

  const std::size_t n = mu0.n_max();
  std::vector<double> y0(detail::block_size(n));
  detail::pack(mu0, y0);

  const OdeRhs field = [&](double, std::span<const double> y, std::span<double> dy) {
    const GridMeasure mu = detail::unpack(y, n);
    detail::pack(rhs(mu, k.value), dy);
  };
  const auto times = checkpoint_grid(T, opts.dt_checkpoint);
  const detail::ForwardGuard guard(mu0, k.phi, opts);
  const auto sol = integrate_ode(std::move(y0), field, 0.0, T, times, opts.ode(),
                                 [&](double t, std::span<const double> y) { guard(t, y); });
  return detail::collect_trajectory(sol, n, opts.abs_tol);
}

MomentsTable moments_report(const Trajectory& traj, const BoundFunction& phi,
                            std::span<const double> powers) {
  for (double p : powers)
    if (!(p >= 0.0 && p <= 8.0)) throw SolverFault("moments_report: powers must lie in [0, 8]");
  MomentsTable table;
  table.powers.assign(powers.begin(), powers.end());
  table.times.assign(traj.times().begin(), traj.times().end());
  std::vector<double> running(powers.size(), -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < traj.size(); ++i) {
    std::vector<double> row(powers.size());
    for (std::size_t j = 0; j < powers.size(); ++j) {
      // (phi^p, mu) for a non-negative mu: the weighted norm without |.|
      double s = 0.0;
      const auto w = traj.state(i).weights();
      for (std::size_t k = 0; k < w.size(); ++k) s += phi.pow(static_cast<Mass>(k + 1), powers[j]) * w[k];
      row[j] = s;
      running[j] = std::max(running[j], s);
    }
    table.values.push_back(std::move(row));
    table.running_max.push_back(running);
  }
  return table;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  out << "t,mass,weight,overflow_mass,overflow_number\n";
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const auto& mu = traj.state(i);
    const std::string t = format_double(traj.time(i));
    const std::string om = format_double(mu.overflow_mass());
    const std::string on = format_double(mu.overflow_number());
    for (std::size_t k = 0; k < mu.n_max(); ++k)
      out << t << ',' << (k + 1) << ',' << format_double(mu.weights()[k]) << ',' << om << ',' << on
          << '\n';
  }
}

Trajectory read_trajectory_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("t,mass,weight", 0) != 0)
    throw FormatError("trajectory CSV: expected header 't,mass,weight,...'");
  std::vector<double> times;
  std::vector<std::vector<double>> weights;
  std::vector<std::pair<double, double>> overflow;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    for (auto pos = rest.find(','); pos != std::string_view::npos; pos = rest.find(',')) {
      fields.push_back(rest.substr(0, pos));
      rest.remove_prefix(pos + 1);
    }
    fields.push_back(rest);
    if (fields.size() != 5)
      throw FormatError("trajectory CSV: expected 5 fields at line " + std::to_string(line_no));
    const double t = parse_double(fields[0]);
    const double mass = parse_double(fields[1]);
    if (times.empty() || t != times.back()) {
      times.push_back(t);
      weights.emplace_back();
      overflow.emplace_back(parse_double(fields[3]), parse_double(fields[4]));
    }
    if (mass != static_cast<double>(weights.back().size() + 1))
      throw FormatError("trajectory CSV: masses out of order at line " + std::to_string(line_no));
    weights.back().push_back(parse_double(fields[2]));
  }
  if (times.empty()) throw FormatError("trajectory CSV: no rows");
  std::vector<GridMeasure> states;
  for (const auto& w : weights)
    if (w.size() != weights.front().size())
      throw FormatError("trajectory CSV: checkpoints have different grid sizes");
  for (std::size_t i = 0; i < times.size(); ++i) {
    states.emplace_back(std::move(weights[i]), overflow[i].first, overflow[i].second);
  }
  return Trajectory(std::move(times), std::move(states));
}

void write_moments_csv(std::ostream& out, const MomentsTable& table) {
  out << "t,p,value\n";
  for (std::size_t i = 0; i < table.times.size(); ++i)
    for (std::size_t j = 0; j < table.powers.size(); ++j)
      out << format_double(table.times[i]) << ',' << format_double(table.powers[j]) << ','
          << format_double(table.values[i][j]) << '\n';
}

}  // namespace smolsens
