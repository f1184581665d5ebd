#include "smolsens/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "smolsens/error.hpp"

namespace smolsens {

namespace {

double dbl(Mass x) { return static_cast<double>(x); }

std::string format_point(std::span<const double> lambda) {
  std::ostringstream oss;
  oss << '(';
  for (std::size_t i = 0; i < lambda.size(); ++i) oss << (i ? ", " : "") << lambda[i];
  oss << ')';
  return oss.str();
}

// Family formulas, shared by the kernel class and the pre-construction scans.
double family_eval(KernelFamily family, Mass x, Mass y, std::span<const double> l) {
  switch (family) {
    case KernelFamily::constant:
      return l[0];
    case KernelFamily::additive:
      return l[0] * (dbl(x) + dbl(y));
    case KernelFamily::multiplicative:
      return l[0] * (dbl(x) * dbl(y));
    case KernelFamily::affine_mix:
      return l[0] + l[1] * (dbl(x) + dbl(y)) + l[2] * (dbl(x) * dbl(y));
    case KernelFamily::power:
      return l[0] * (std::pow(dbl(x), l[1]) * std::pow(dbl(y), l[2]) +
                     std::pow(dbl(x), l[2]) * std::pow(dbl(y), l[1]));
  }
  return 0.0;
}

double family_partial(KernelFamily family, Mass x, Mass y, std::size_t m,
                      std::span<const double> l) {
  switch (family) {
    case KernelFamily::constant:
      return 1.0;
    case KernelFamily::additive:
      return dbl(x) + dbl(y);
    case KernelFamily::multiplicative:
      return dbl(x) * dbl(y);
    case KernelFamily::affine_mix:
      return m == 0 ? 1.0 : (m == 1 ? dbl(x) + dbl(y) : dbl(x) * dbl(y));
    case KernelFamily::power: {
      const double xa_yb = std::pow(dbl(x), l[1]) * std::pow(dbl(y), l[2]);
      const double xb_ya = std::pow(dbl(x), l[2]) * std::pow(dbl(y), l[1]);
      const double lx = std::log(dbl(x));
      const double ly = std::log(dbl(y));
      if (m == 0) return xa_yb + xb_ya;
      if (m == 1) return l[0] * (lx * xa_yb + ly * xb_ya);
      return l[0] * (ly * xa_yb + lx * xb_ya);
    }
  }
  return 0.0;
}

double family_second_partial(KernelFamily family, Mass x, Mass y, std::size_t m,
                             std::size_t n, std::span<const double> l) {
  if (family != KernelFamily::power) return 0.0;  // the rest are affine in lambda
  if (m > n) std::swap(m, n);
  const double xa_yb = std::pow(dbl(x), l[1]) * std::pow(dbl(y), l[2]);
  const double xb_ya = std::pow(dbl(x), l[2]) * std::pow(dbl(y), l[1]);
  const double lx = std::log(dbl(x));
  const double ly = std::log(dbl(y));
  if (m == 0 && n == 0) return 0.0;
  if (m == 0 && n == 1) return lx * xa_yb + ly * xb_ya;
  if (m == 0 && n == 2) return ly * xa_yb + lx * xb_ya;
  if (m == 1 && n == 1) return l[0] * (lx * lx * xa_yb + ly * ly * xb_ya);
  if (m == 2 && n == 2) return l[0] * (ly * ly * xa_yb + lx * lx * xb_ya);
  return l[0] * lx * ly * (xa_yb + xb_ya);
}

}  // namespace

void validate_kernel_spec(const KernelSpec& spec) {
  const std::size_t p = family_param_dim(spec.family);
  if (spec.param_box.size() != p) {
    std::ostringstream oss;
    oss << "kernel family '" << to_string(spec.family) << "' takes " << p
        << " parameter(s) but the box has " << spec.param_box.size();
    throw SpecError(oss.str());
  }
  for (std::size_t m = 0; m < p; ++m) {
    const auto [lo, hi] = spec.param_box[m];
    if (!(std::isfinite(lo) && std::isfinite(hi)) || lo > hi)
      throw SpecError("parameter box component " + std::to_string(m) + " is not a closed interval");
    if (lo < 0.0)
      throw SpecError("parameter box component " + std::to_string(m) + " must be non-negative");
  }
  if (spec.family == KernelFamily::power) {
    if (spec.param_box[1].second + spec.param_box[2].second > 1.0)
      throw SpecError("power kernel exponents must satisfy a + b <= 1 over the whole box");
  }
}

std::string to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::constant:
      return "constant";
    case KernelFamily::additive:
      return "additive";
    case KernelFamily::multiplicative:
      return "multiplicative";
    case KernelFamily::affine_mix:
      return "affine-mix";
    case KernelFamily::power:
      return "power";
  }
  return "?";
}

KernelFamily parse_kernel_family(const std::string& name) {
  if (name == "constant") return KernelFamily::constant;
  if (name == "additive") return KernelFamily::additive;
  if (name == "multiplicative") return KernelFamily::multiplicative;
  if (name == "affine-mix" || name == "affine_mix") return KernelFamily::affine_mix;
  if (name == "power") return KernelFamily::power;
  throw SpecError("unknown kernel family '" + name + "'");
}

std::size_t family_param_dim(KernelFamily family) {
  switch (family) {
    case KernelFamily::affine_mix:
    case KernelFamily::power:
      return 3;
    default:
      return 1;
  }
}

std::vector<std::vector<double>> box_corners(const ParamBox& box) {
  std::vector<std::vector<double>> corners;
  const std::size_t p = box.size();
  for (std::size_t mask = 0; mask < (std::size_t{1} << p); ++mask) {
    std::vector<double> c(p);
    for (std::size_t m = 0; m < p; ++m) c[m] = (mask >> m) & 1U ? box[m].second : box[m].first;
    corners.push_back(std::move(c));
  }
  return corners;
}

std::vector<BoundViolation> scan_bounds(const KernelSpec& spec, const BoundFunction& phi,
                                        std::size_t n_max, std::span<const double> extra_point,
                                        std::size_t max_reported) {
  auto points = box_corners(spec.param_box);
  if (!extra_point.empty()) points.emplace_back(extra_point.begin(), extra_point.end());
  const std::size_t p = spec.param_box.size();
  std::vector<BoundViolation> found;
  auto report = [&](Mass x, Mass y, const std::vector<double>& l, int comp, double v, double b) {
    if (found.size() < max_reported) found.push_back({x, y, l, comp, v, b});
  };
  for (const auto& l : points) {
    for (Mass x = 1; x <= static_cast<Mass>(n_max); ++x) {
      for (Mass y = x; y <= static_cast<Mass>(n_max); ++y) {
        const double bound = phi(x) * phi(y);
        const double k = family_eval(spec.family, x, y, l);
        if (k > bound || k < 0.0) report(x, y, l, -1, k, bound);
        for (std::size_t m = 0; m < p; ++m) {
          const double d = family_partial(spec.family, x, y, m, l);
          if (std::fabs(d) > bound) report(x, y, l, static_cast<int>(m), d, bound);
        }
      }
    }
  }
  return found;
}

ParametricKernel::ParametricKernel(KernelSpec spec, std::vector<double> lambda,
                                   BoundFunction phi, std::size_t n_max)
    : spec_(std::move(spec)), lambda_(std::move(lambda)), phi_(std::move(phi)), n_max_(n_max) {}

double ParametricKernel::eval(Mass x, Mass y, std::span<const double> lambda) const {
  return family_eval(spec_.family, x, y, lambda);
}

double ParametricKernel::partial(Mass x, Mass y, std::size_t m,
                                 std::span<const double> lambda) const {
  return family_partial(spec_.family, x, y, m, lambda);
}

std::vector<double> ParametricKernel::grad(Mass x, Mass y, std::span<const double> lambda) const {
  std::vector<double> g(param_dim());
  for (std::size_t m = 0; m < g.size(); ++m) g[m] = partial(x, y, m, lambda);
  return g;
}

double ParametricKernel::second_partial(Mass x, Mass y, std::size_t m, std::size_t l,
                                        std::span<const double> lambda) const {
  return family_second_partial(spec_.family, x, y, m, l, lambda);
}

bool ParametricKernel::in_box(std::span<const double> lambda) const {
  if (lambda.size() != param_dim()) return false;
  for (std::size_t m = 0; m < lambda.size(); ++m)
    if (lambda[m] < spec_.param_box[m].first || lambda[m] > spec_.param_box[m].second)
      return false;
  return true;
}

ParametricKernel ParametricKernel::at(std::span<const double> lambda) const {
  if (!in_box(lambda)) throw BoxError("parameter " + format_point(lambda) + " outside the box");
  return ParametricKernel(spec_, std::vector<double>(lambda.begin(), lambda.end()), phi_, n_max_);
}

double ParametricKernel::grid_derivative_bound() const {
  double m_bound = 0.0;
  const std::size_t p = param_dim();
  for (const auto& l : box_corners(spec_.param_box)) {
    for (Mass x = 1; x <= static_cast<Mass>(n_max_); ++x) {
      for (Mass y = x; y <= static_cast<Mass>(n_max_); ++y) {
        m_bound = std::max(m_bound, std::fabs(eval(x, y, l)));
        for (std::size_t a = 0; a < p; ++a) {
          m_bound = std::max(m_bound, std::fabs(partial(x, y, a, l)));
          for (std::size_t b = a; b < p; ++b)
            m_bound = std::max(m_bound, std::fabs(second_partial(x, y, a, b, l)));
        }
      }
    }
  }
  return m_bound;
}

ParametricKernel make_kernel(const KernelSpec& spec, std::vector<double> lambda0,
                             BoundFunction phi, std::size_t n_max) {
  if (n_max == 0) throw SpecError("grid must hold at least one mass");
  validate_kernel_spec(spec);
  ParametricKernel k(spec, std::move(lambda0), std::move(phi), n_max);
  if (!k.in_box(k.param()))
    throw BoxError("initial parameter " + format_point(k.param()) + " outside the box");

  for (const auto& l : box_corners(spec.param_box)) {
    const auto table = KernelMatrix::tabulate(n_max, [&](Mass x, Mass y) { return k.eval(x, y, l); });
    if (!table.is_symmetric())
      throw SpecError("kernel table is not symmetric at corner " + format_point(l));
  }

  const auto violations = scan_bounds(spec, k.phi(), n_max, k.param(), 1);
  if (!violations.empty()) {
    const auto& v = violations.front();
    std::ostringstream oss;
    oss << (v.component < 0 ? "K" : "dK/dl" + std::to_string(v.component)) << "(" << v.x << ", "
        << v.y << ") = " << v.value << " exceeds phi(x)phi(y) = " << v.bound << " at lambda "
        << format_point(v.lambda) << " with phi = " << k.phi().description();
    throw HypothesisError(oss.str());
  }
  return k;
}

double grad_check(const ParametricKernel& k, std::span<const double> lambda, double h) {
  if (!(h > 0.0)) throw BoxError("grad_check: step must be positive");
  const std::size_t p = k.param_dim();
  double worst = 0.0;
  std::vector<double> plus(lambda.begin(), lambda.end());
  std::vector<double> minus(lambda.begin(), lambda.end());
  for (std::size_t m = 0; m < p; ++m) {
    plus[m] = lambda[m] + h;
    minus[m] = lambda[m] - h;
    if (!k.in_box(plus) || !k.in_box(minus))
      throw BoxError("grad_check: lambda +- h e_" + std::to_string(m) + " leaves the box");
    for (Mass x = 1; x <= static_cast<Mass>(k.n_max()); ++x) {
      for (Mass y = 1; y <= static_cast<Mass>(k.n_max()); ++y) {
        const double fd = (k.eval(x, y, plus) - k.eval(x, y, minus)) / (2.0 * h);
        worst = std::max(worst, std::fabs(k.partial(x, y, m, lambda) - fd));
      }
    }
    plus[m] = minus[m] = lambda[m];
  }
  return worst;
}

TruncatedKernel::TruncatedKernel(ParametricKernel base, double level)
    : base_(std::move(base)), level_(level) {
  if (!(level > 0.0)) throw SpecError("truncation level must be positive");
}

TruncatedKernel truncate(const ParametricKernel& k, double level) {
  return TruncatedKernel(k, level);
}

GridKernel tabulate(const ParametricKernel& k) {
  GridKernel g;
  const std::size_t n = k.n_max();
  g.value = KernelMatrix::tabulate(n, [&](Mass x, Mass y) { return k.eval(x, y); });
  for (std::size_t m = 0; m < k.param_dim(); ++m)
    g.partials.push_back(KernelMatrix::tabulate(n, [&](Mass x, Mass y) { return k.partial(x, y, m); }));
  g.phi = k.phi();
  return g;
}

GridKernel tabulate(const TruncatedKernel& k) {
  GridKernel g;
  const std::size_t n = k.base().n_max();
  g.value = KernelMatrix::tabulate(n, [&](Mass x, Mass y) { return k.eval(x, y); });
  for (std::size_t m = 0; m < k.base().param_dim(); ++m)
    g.partials.push_back(KernelMatrix::tabulate(n, [&](Mass x, Mass y) { return k.partial(x, y, m); }));
  g.phi = k.base().phi();
  return g;
}

}  // namespace smolsens
