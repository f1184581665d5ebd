#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "smolsens/measures.hpp"

namespace smolsens {

/// Catalog of parametric coagulation kernels.
///
///   constant        K = l1
///   additive        K = l1 (x + y)
///   multiplicative  K = l1 x y
///   affine-mix      K = l1 + l2 (x + y) + l3 x y
///   power           K = l1 (x^a y^b + x^b y^a), parameters (l1, a, b),
///                   a, b >= 0 and a + b <= 1 over the whole box
enum class KernelFamily { constant, additive, multiplicative, affine_mix, power };

std::string to_string(KernelFamily family);
/// Accepts the names above ("affine-mix" and "affine_mix" both work).
KernelFamily parse_kernel_family(const std::string& name);
std::size_t family_param_dim(KernelFamily family);

/// Closed interval [lo, hi] per parameter component.
using ParamBox = std::vector<std::pair<double, double>>;

struct KernelSpec {
  KernelFamily family = KernelFamily::constant;
  ParamBox param_box;
};

/// Throws SpecError for a wrong box dimension, a box that is not a closed
/// non-negative interval, or power exponents with a + b > 1 somewhere in the box.
void validate_kernel_spec(const KernelSpec& spec);

/// A violation of K <= phi phi or |dK| <= phi phi.
struct BoundViolation {
  Mass x = 0;
  Mass y = 0;
  std::vector<double> lambda;
  /// -1 for the kernel itself, m for the m-th partial derivative.
  int component = -1;
  double value = 0.0;
  double bound = 0.0;
};

/// Exhaustive scan over grid pairs x <= y and every corner of the box (plus
/// `extra_point` when given). Returns all violations, capped at `max_reported`.
std::vector<BoundViolation> scan_bounds(const KernelSpec& spec, const BoundFunction& phi,
                                        std::size_t n_max,
                                        std::span<const double> extra_point = {},
                                        std::size_t max_reported = 64);

/// Every corner of the box (2^p points).
std::vector<std::vector<double>> box_corners(const ParamBox& box);

/// Symmetric non-negative kernel K^lambda with analytic lambda-partials,
/// validated against its bound function on the grid 1..n_max over the box.
class ParametricKernel {
 public:
  const KernelSpec& spec() const { return spec_; }
  KernelFamily family() const { return spec_.family; }
  std::size_t param_dim() const { return lambda_.size(); }
  std::span<const double> param() const { return lambda_; }
  const ParamBox& box() const { return spec_.param_box; }
  const BoundFunction& phi() const { return phi_; }
  std::size_t n_max() const { return n_max_; }

  /// K(x, y) at the kernel's own parameter.
  double eval(Mass x, Mass y) const { return eval(x, y, lambda_); }
  double eval(Mass x, Mass y, std::span<const double> lambda) const;
  /// dK/dlambda_m at the kernel's own parameter.
  double partial(Mass x, Mass y, std::size_t m) const { return partial(x, y, m, lambda_); }
  double partial(Mass x, Mass y, std::size_t m, std::span<const double> lambda) const;
  std::vector<double> grad(Mass x, Mass y, std::span<const double> lambda) const;
  /// d2K/dlambda_m dlambda_l.
  double second_partial(Mass x, Mass y, std::size_t m, std::size_t l,
                        std::span<const double> lambda) const;

  /// Same family and box at another parameter inside the box.
  ParametricKernel at(std::span<const double> lambda) const;
  bool in_box(std::span<const double> lambda) const;

  /// Max over grid pairs and box corners of |K|, |dK| and |d2K|: the constant
  /// bounding the kernel and its first two derivatives on the grid.
  double grid_derivative_bound() const;

 private:
  friend ParametricKernel make_kernel(const KernelSpec&, std::vector<double>, BoundFunction,
                                      std::size_t);
  ParametricKernel(KernelSpec spec, std::vector<double> lambda, BoundFunction phi,
                   std::size_t n_max);

  KernelSpec spec_;
  std::vector<double> lambda_;
  BoundFunction phi_;
  std::size_t n_max_;
};

/// Builds a catalog kernel. Throws SpecError for a malformed family/box
/// (wrong dimension, lo > hi, negative box, power exponents out of range) or
/// an asymmetric table, BoxError if lambda0 is outside the box, and
/// HypothesisError naming (x, y, corner) if a domination bound fails.
ParametricKernel make_kernel(const KernelSpec& spec, std::vector<double> lambda0,
                             BoundFunction phi, std::size_t n_max);

/// max over grid pairs and components of |grad_m - central difference|.
/// Requires lambda +- h e_m inside the box.
double grad_check(const ParametricKernel& k, std::span<const double> lambda, double h);

/// K^N = K 1{phi(x) phi(y) < N}; the partials carry the same indicator.
class TruncatedKernel {
 public:
  TruncatedKernel(ParametricKernel base, double level);

  const ParametricKernel& base() const { return base_; }
  double level() const { return level_; }
  bool active(Mass x, Mass y) const { return base_.phi()(x) * base_.phi()(y) < level_; }
  double eval(Mass x, Mass y) const { return active(x, y) ? base_.eval(x, y) : 0.0; }
  double partial(Mass x, Mass y, std::size_t m) const {
    return active(x, y) ? base_.partial(x, y, m) : 0.0;
  }

 private:
  ParametricKernel base_;
  double level_;
};

TruncatedKernel truncate(const ParametricKernel& k, double level);

/// Kernel and its partials tabulated on the grid at a fixed parameter; the
/// form consumed by every deterministic solver.
struct GridKernel {
  KernelMatrix value;
  std::vector<KernelMatrix> partials;
  BoundFunction phi = BoundFunction::affine();

  std::size_t n_max() const { return value.n_max(); }
  std::size_t param_dim() const { return partials.size(); }
};

GridKernel tabulate(const ParametricKernel& k);
GridKernel tabulate(const TruncatedKernel& k);

}  // namespace smolsens
