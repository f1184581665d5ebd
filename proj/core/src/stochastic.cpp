#include "smolsens/stochastic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include "parallel.hpp"
#include "smolsens/error.hpp"

namespace smolsens {

namespace {

constexpr Mass kCacheSide = 256;

void check_times(std::span<const double> times) {
  if (times.empty()) throw SolverFault("ml_run: no checkpoint times");
  if (!(times.front() >= 0.0)) throw SolverFault("ml_run: checkpoint times must be >= 0");
  for (std::size_t i = 1; i < times.size(); ++i)
    if (!(times[i] > times[i - 1])) throw SolverFault("ml_run: checkpoint times must increase");
}

}  // namespace

KernelFn kernel_fn(const ParametricKernel& k) {
  return [k](Mass x, Mass y) { return k.eval(x, y); };
}

KernelFn kernel_fn(const ParametricKernel& k, std::span<const double> lambda) {
  return [kk = k.at(lambda)](Mass x, Mass y) { return kk.eval(x, y); };
}

Census make_census(const GridMeasure& mu0, std::int64_t n) {
  if (n < 2) throw SolverFault("make_census: need n >= 2");
  if (!mu0.is_nonnegative()) throw SolverFault("make_census: initial measure must be non-negative");
  Census c;
  double number = 0.0;
  const auto w = mu0.weights();
  for (std::size_t k = 0; k < w.size(); ++k) {
    number += w[k];
    const double target = static_cast<double>(n) * w[k];
    const double rounded = std::round(target);
    c.rounding_residual = std::max(c.rounding_residual, std::fabs(target - rounded));
    if (rounded > 0.0) {
      const auto count = static_cast<std::int64_t>(rounded);
      c.species.emplace_back(static_cast<Mass>(k + 1), count);
      c.particles += count;
    }
  }
  if (c.particles < 2) throw SolverFault("make_census: fewer than two particles after rounding");
  c.n_eff = static_cast<double>(c.particles) / number;
  return c;
}

UniformStream::UniformStream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  engine_.seed(seq);
}

double UniformStream::next() {
  ++draws_;
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

// ---------------------------------------------------------------------------

ParticleSystem::ParticleSystem(const Census& census, KernelFn kernel, std::uint64_t seed,
                               std::uint64_t stream)
    : species_(census.species),
      kernel_(std::move(kernel)),
      rng_(seed, stream),
      n_(census.n_eff),
      particles_(census.particles),
      kernel_cache_(static_cast<std::size_t>(kCacheSide * kCacheSide),
                    std::numeric_limits<double>::quiet_NaN()) {
  if (!(n_ > 0.0)) throw SolverFault("ParticleSystem: census scale must be positive");
  for (const auto& [m, c] : species_) total_mass_ += m * c;
  rebuild_rates();
}

double ParticleSystem::rate_kernel(Mass a, Mass b) {
  if (a < kCacheSide && b < kCacheSide) {
    double& slot = kernel_cache_[static_cast<std::size_t>(a * kCacheSide + b)];
    if (std::isnan(slot)) slot = kernel_(a, b);
    return slot;
  }
  return kernel_(a, b);
}

void ParticleSystem::rebuild_rates() {
  cumulative_.clear();
  pairs_.clear();
  double acc = 0.0;
  for (std::size_t i = 0; i < species_.size(); ++i) {
    const auto [a, ca] = species_[i];
    for (std::size_t j = i; j < species_.size(); ++j) {
      const auto [b, cb] = species_[j];
      const double combos = i == j ? 0.5 * static_cast<double>(ca) * static_cast<double>(ca - 1)
                                   : static_cast<double>(ca) * static_cast<double>(cb);
      if (combos <= 0.0) continue;
      const double r = rate_kernel(a, b) * combos / n_;
      if (r <= 0.0) continue;
      acc += r;
      cumulative_.push_back(acc);
      pairs_.emplace_back(i, j);
    }
  }
}

double ParticleSystem::total_rate() const { return cumulative_.empty() ? 0.0 : cumulative_.back(); }

void ParticleSystem::jump(double u) {
  const double target = u * total_rate();
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
  if (it == cumulative_.end()) --it;
  const auto [i, j] = pairs_[static_cast<std::size_t>(it - cumulative_.begin())];
  const Mass merged = species_[i].first + species_[j].first;
  --species_[i].second;
  --species_[j].second;
  const auto pos = std::lower_bound(species_.begin(), species_.end(), merged,
                                    [](const auto& s, Mass m) { return s.first < m; });
  if (pos != species_.end() && pos->first == merged)
    ++pos->second;
  else
    species_.insert(pos, {merged, 1});
  std::erase_if(species_, [](const auto& s) { return s.second == 0; });
  --particles_;
  ++jumps_;
  rebuild_rates();
}

void ParticleSystem::advance_to(double t_target) {
  for (;;) {
    if (!pending_) {
      const double r = total_rate();
      next_event_ = r > 0.0 ? t_ - std::log1p(-rng_.next()) / r
                            : std::numeric_limits<double>::infinity();
      pending_ = true;
    }
    if (next_event_ > t_target) break;
    t_ = next_event_;
    pending_ = false;
    jump(rng_.next());
  }
  t_ = std::max(t_, t_target);
}

GridMeasure ParticleSystem::empirical(std::size_t n_max) const {
  GridMeasure mu(n_max);
  double om = 0.0;
  double on = 0.0;
  for (const auto& [m, c] : species_) {
    const double w = static_cast<double>(c) / n_;
    if (static_cast<std::size_t>(m) <= n_max) {
      mu[m] = w;
    } else {
      om += static_cast<double>(m) * w;
      on += w;
    }
  }
  mu.set_overflow(om, on);
  return mu;
}

// ---------------------------------------------------------------------------

MLRun ml_run(const GridMeasure& mu0, std::int64_t n, const KernelFn& k,
             std::span<const double> times, std::uint64_t seed, std::uint64_t replica) {
  check_times(times);
  MLRun run;
  run.census = make_census(mu0, n);
  ParticleSystem ps(run.census, k, seed, replica);
  std::vector<GridMeasure> states;
  states.reserve(times.size());
  for (double t : times) {
    ps.advance_to(t);
    states.push_back(ps.empirical(mu0.n_max()));
  }
  run.empirical = Trajectory(std::vector<double>(times.begin(), times.end()), std::move(states));
  run.jumps = ps.jumps();
  run.uniforms = ps.uniforms();
  return run;
}

std::vector<MLRun> ml_replicas(const GridMeasure& mu0, std::int64_t n, const KernelFn& k,
                               std::span<const double> times, std::uint64_t seed,
                               std::size_t replicas, std::size_t threads) {
  check_times(times);
  std::vector<MLRun> runs(replicas);
  detail::parallel_for(replicas, threads, [&](std::size_t r) { runs[r] = ml_run(mu0, n, k, times, seed, r); });
  return runs;
}

MeanEstimate estimate_mean(std::span<const double> samples) {
  MeanEstimate e;
  e.samples = samples.size();
  if (samples.empty()) return e;
  double s = 0.0;
  for (double v : samples) s += v;
  e.mean = s / static_cast<double>(samples.size());
  if (samples.size() < 2) {
    e.std_error = std::numeric_limits<double>::infinity();
    return e;
  }
  double ss = 0.0;
  for (double v : samples) ss += (v - e.mean) * (v - e.mean);
  const double var = ss / static_cast<double>(samples.size() - 1);
  e.std_error = std::sqrt(var / static_cast<double>(samples.size()));
  return e;
}

EnsembleSummary summarize(const std::vector<std::vector<GridMeasure>>& per_replica,
                          std::span<const double> times) {
  EnsembleSummary out;
  out.times.assign(times.begin(), times.end());
  out.replicas = per_replica.size();
  if (per_replica.empty()) return out;
  const std::size_t n = per_replica.front().front().n_max();
  std::vector<double> column(per_replica.size());
  for (std::size_t i = 0; i < times.size(); ++i) {
    GridMeasure mean(n);
    std::vector<double> se(n);
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t r = 0; r < per_replica.size(); ++r) column[r] = per_replica[r][i].weights()[k];
      const auto e = estimate_mean(column);
      mean.weights()[k] = e.mean;
      se[k] = e.std_error;
    }
    double om = 0.0;
    double on = 0.0;
    for (const auto& rep : per_replica) {
      om += rep[i].overflow_mass();
      on += rep[i].overflow_number();
    }
    mean.set_overflow(om / static_cast<double>(per_replica.size()),
                      on / static_cast<double>(per_replica.size()));
    out.mean.push_back(std::move(mean));
    out.std_error.push_back(std::move(se));
  }
  return out;
}

EnsembleSummary summarize_runs(const std::vector<MLRun>& runs) {
  if (runs.empty()) return {};
  std::vector<std::vector<GridMeasure>> rows;
  rows.reserve(runs.size());
  for (const auto& r : runs) rows.push_back(r.empirical.states());
  return summarize(rows, runs.front().empirical.times());
}

MeanEstimate observable_estimate(const std::vector<MLRun>& runs, const TestFunction& f,
                                 std::size_t i) {
  std::vector<double> v;
  v.reserve(runs.size());
  for (const auto& r : runs) v.push_back(pair(f, r.empirical.state(i)));
  return estimate_mean(v);
}

MeanEstimate FdEstimate::observable(const TestFunction& f, std::size_t i) const {
  std::vector<double> v;
  v.reserve(per_replica.size());
  for (const auto& rep : per_replica) v.push_back(pair(f, rep[i]));
  return estimate_mean(v);
}

FdEstimate coupled_fd(const GridMeasure& mu0, std::int64_t n, const KernelFn& plus,
                      const KernelFn& minus, double h, std::span<const double> times,
                      std::uint64_t seed, std::size_t replicas, std::size_t threads) {
  if (!(h > 0.0)) throw SolverFault("coupled_fd: h must be positive");
  if (replicas == 0) throw SolverFault("coupled_fd: need at least one replica");
  check_times(times);
  FdEstimate est;
  est.times.assign(times.begin(), times.end());
  est.per_replica.resize(replicas);
  detail::parallel_for(replicas, threads, [&](std::size_t r) {
    const MLRun up = ml_run(mu0, n, plus, times, seed, r);
    const MLRun down = ml_run(mu0, n, minus, times, seed, r);
    auto& row = est.per_replica[r];
    row.reserve(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) {
      GridMeasure d = up.empirical.state(i) - down.empirical.state(i);
      d *= 1.0 / (2.0 * h);
      row.push_back(std::move(d));
    }
  });
  est.summary = summarize(est.per_replica, times);
  return est;
}

FdEstimate coupled_fd_sensitivity(const GridMeasure& mu0, std::int64_t n,
                                  const ParametricKernel& k, std::size_t m, double h,
                                  std::span<const double> times, std::uint64_t seed,
                                  std::size_t replicas, std::size_t threads) {
  if (m >= k.param_dim()) throw DimensionError("coupled_fd_sensitivity: parameter index out of range");
  if (!(h > 0.0)) throw SolverFault("coupled_fd_sensitivity: h must be positive");
  std::vector<double> up(k.param().begin(), k.param().end());
  std::vector<double> down = up;
  up[m] += h;
  down[m] -= h;
  if (!k.in_box(up) || !k.in_box(down))
    throw BoxError("coupled_fd_sensitivity: lambda +- h e_m leaves the parameter box");
  return coupled_fd(mu0, n, kernel_fn(k, up), kernel_fn(k, down), h, times, seed, replicas,
                    threads);
}

void write_replicas_csv(std::ostream& out, const std::vector<MLRun>& runs) {
  out << "t,replica,mass,weight,overflow_mass,overflow_number\n";
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const auto& traj = runs[r].empirical;
    for (std::size_t i = 0; i < traj.size(); ++i) {
      const auto& mu = traj.state(i);
      const std::string t = format_double(traj.time(i));
      const std::string om = format_double(mu.overflow_mass());
      const std::string on = format_double(mu.overflow_number());
      for (std::size_t k = 0; k < mu.n_max(); ++k)
        out << t << ',' << r << ',' << (k + 1) << ',' << format_double(mu.weights()[k]) << ','
            << om << ',' << on << '\n';
    }
  }
}

void write_ensemble_csv(std::ostream& out, const EnsembleSummary& summary) {
  out << "t,mass,weight,stderr,replicas\n";
  for (std::size_t i = 0; i < summary.times.size(); ++i) {
    const std::string t = format_double(summary.times[i]);
    const auto& mu = summary.mean[i];
    for (std::size_t k = 0; k < mu.n_max(); ++k)
      out << t << ',' << (k + 1) << ',' << format_double(mu.weights()[k]) << ','
          << format_double(summary.std_error[i][k]) << ',' << summary.replicas << '\n';
  }
}

}  // namespace smolsens
