#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "smolsens/forward.hpp"
#include "smolsens/kernels.hpp"
#include "smolsens/measures.hpp"

namespace smolsens {

/// Coagulation rate between two particle masses; masses may exceed the grid.
using KernelFn = std::function<double(Mass, Mass)>;

KernelFn kernel_fn(const ParametricKernel& k);
KernelFn kernel_fn(const ParametricKernel& k, std::span<const double> lambda);

/// Integer particle census built from n * mu0.
struct Census {
  /// (mass, count) with count > 0, masses ascending.
  std::vector<std::pair<Mass, std::int64_t>> species;
  std::int64_t particles = 0;
  /// Scale actually used: particles / (1, mu0).
  double n_eff = 0.0;
  /// max_k |n w_k - round(n w_k)|.
  double rounding_residual = 0.0;
};

/// Rounds n w_k to the nearest integer for every grid mass. Throws SolverFault
/// for a negative mu0, n < 2, or a census with fewer than two particles.
Census make_census(const GridMeasure& mu0, std::int64_t n);

/// Uniform in [0, 1) from the top 53 bits of one 64-bit draw.
class UniformStream {
 public:
  UniformStream(std::uint64_t seed, std::uint64_t stream);
  double next();
  std::uint64_t draws() const { return draws_; }

 private:
  std::mt19937_64 engine_;
  std::uint64_t draws_ = 0;
};

/// Marcus-Lushnikov coalescent with the direct method: an exponential wait at
/// total rate R = sum_{i<j} K(x_i, x_j) / n, then one pair drawn with
/// probability K / (n R). Every jump consumes exactly two uniforms (wait,
/// pair), so two systems on the same stream stay coupled.
class ParticleSystem {
 public:
  ParticleSystem(const Census& census, KernelFn kernel, std::uint64_t seed,
                 std::uint64_t stream = 0);

  double time() const { return t_; }
  double scale() const { return n_; }
  std::int64_t particles() const { return particles_; }
  Mass total_mass() const { return total_mass_; }
  std::size_t jumps() const { return jumps_; }
  std::uint64_t uniforms() const { return rng_.draws(); }
  const std::vector<std::pair<Mass, std::int64_t>>& species() const { return species_; }
  double total_rate() const;

  /// Performs every jump with event time <= t_target; afterwards time() = t_target
  /// unless the system froze earlier (then time() stays at t_target too).
  void advance_to(double t_target);

  /// (1/n) sum_i delta_{x_i}; masses above n_max go to the overflow fields.
  GridMeasure empirical(std::size_t n_max) const;

 private:
  void rebuild_rates();
  void jump(double u);

  std::vector<std::pair<Mass, std::int64_t>> species_;
  KernelFn kernel_;
  UniformStream rng_;
  double n_;
  double t_ = 0.0;
  double next_event_ = 0.0;
  bool pending_ = false;
  std::int64_t particles_ = 0;
  Mass total_mass_ = 0;
  std::size_t jumps_ = 0;
  // cumulative pair rates over (a <= b) in species order
  std::vector<double> cumulative_;
  std::vector<std::pair<std::size_t, std::size_t>> pairs_;
  // K for masses below kCacheSide, filled lazily (NaN = not yet evaluated)
  std::vector<double> kernel_cache_;
  double rate_kernel(Mass a, Mass b);
};

struct MLRun {
  Trajectory empirical;
  Census census;
  std::size_t jumps = 0;
  std::uint64_t uniforms = 0;
};

/// One realization recorded at the given checkpoint times (ascending, >= 0).
MLRun ml_run(const GridMeasure& mu0, std::int64_t n, const KernelFn& k,
             std::span<const double> times, std::uint64_t seed, std::uint64_t replica = 0);

/// Independent replicas 0..replicas-1, each on its own stream derived from
/// (seed, replica). Runs on `threads` workers (0 = hardware concurrency);
/// the output does not depend on the thread count.
std::vector<MLRun> ml_replicas(const GridMeasure& mu0, std::int64_t n, const KernelFn& k,
                               std::span<const double> times, std::uint64_t seed,
                               std::size_t replicas, std::size_t threads = 0);

/// Sample mean and standard error of the mean.
struct MeanEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
  double lower(double z) const { return mean - z * std_error; }
  double upper(double z) const { return mean + z * std_error; }
  bool covers(double value, double z) const { return value >= lower(z) && value <= upper(z); }
};

MeanEstimate estimate_mean(std::span<const double> samples);

/// Mean measure and per-mass standard errors over replicas at every checkpoint.
struct EnsembleSummary {
  std::vector<double> times;
  std::vector<GridMeasure> mean;
  std::vector<std::vector<double>> std_error;
  std::size_t replicas = 0;
};

/// per_replica[r][i] is replica r at checkpoint i.
EnsembleSummary summarize(const std::vector<std::vector<GridMeasure>>& per_replica,
                          std::span<const double> times);
EnsembleSummary summarize_runs(const std::vector<MLRun>& runs);

/// (f, X_t) statistics over replicas at checkpoint i.
MeanEstimate observable_estimate(const std::vector<MLRun>& runs, const TestFunction& f,
                                 std::size_t i);

/// Common-random-number central difference (X^{l + h e_m} - X^{l - h e_m}) / (2h).
struct FdEstimate {
  std::vector<double> times;
  /// per_replica[r][i]: the replica-r difference quotient at checkpoint i
  std::vector<std::vector<GridMeasure>> per_replica;
  EnsembleSummary summary;
  double z = 3.0;

  MeanEstimate observable(const TestFunction& f, std::size_t i) const;
};

/// Central difference between two runs on identical uniform streams, one
/// driven by `plus`, the other by `minus`, divided by 2h.
FdEstimate coupled_fd(const GridMeasure& mu0, std::int64_t n, const KernelFn& plus,
                      const KernelFn& minus, double h, std::span<const double> times,
                      std::uint64_t seed, std::size_t replicas, std::size_t threads = 0);

/// coupled_fd at lambda +- h e_m. Throws BoxError if either leg leaves the box.
FdEstimate coupled_fd_sensitivity(const GridMeasure& mu0, std::int64_t n,
                                  const ParametricKernel& k, std::size_t m, double h,
                                  std::span<const double> times, std::uint64_t seed,
                                  std::size_t replicas, std::size_t threads = 0);

/// CSV `t,replica,mass,weight,overflow_mass,overflow_number`.
void write_replicas_csv(std::ostream& out, const std::vector<MLRun>& runs);
/// CSV `t,mass,weight,stderr,replicas`.
void write_ensemble_csv(std::ostream& out, const EnsembleSummary& summary);

}  // namespace smolsens
