#include "smolsens/measures.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <utility>

#include "smolsens/error.hpp"

namespace smolsens {

namespace {

void require_same_grid(std::size_t a, std::size_t b, const char* op) {
  if (a != b) {
    std::ostringstream oss;
    oss << op << ": grid size mismatch (" << a << " vs " << b << ")";
    throw DimensionError(oss.str());
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// BoundFunction

BoundFunction::BoundFunction(std::function<double(Mass)> fn, std::string description)
    : fn_(std::move(fn)), description_(std::move(description)) {}

BoundFunction BoundFunction::affine(double scale) {
  std::ostringstream oss;
  oss << scale << "*(1+x)";
  return BoundFunction([scale](Mass x) { return scale * (1.0 + static_cast<double>(x)); },
                       oss.str());
}

BoundFunction BoundFunction::constant(double value) {
  std::ostringstream oss;
  oss << value;
  return BoundFunction([value](Mass) { return value; }, oss.str());
}

double BoundFunction::pow(Mass x, double p) const {
  if (p == 0.0) return 1.0;
  if (p == 1.0) return fn_(x);
  return std::pow(fn_(x), p);
}

// ---------------------------------------------------------------------------
// TestFunction

TestFunction::TestFunction(std::size_t n_max, double fill) : values_(n_max, fill) {}

TestFunction::TestFunction(std::vector<double> values) : values_(std::move(values)) {}

TestFunction TestFunction::indicator(std::size_t n_max, Mass k) {
  TestFunction f(n_max);
  if (k >= 1 && static_cast<std::size_t>(k) <= n_max) f.at(k) = 1.0;
  return f;
}

TestFunction& TestFunction::operator+=(const TestFunction& other) {
  require_same_grid(n_max(), other.n_max(), "TestFunction +=");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

TestFunction& TestFunction::operator-=(const TestFunction& other) {
  require_same_grid(n_max(), other.n_max(), "TestFunction -=");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
  return *this;
}

TestFunction& TestFunction::operator*=(double scale) {
  for (double& v : values_) v *= scale;
  return *this;
}

TestFunction operator*(const TestFunction& a, const TestFunction& b) {
  require_same_grid(a.n_max(), b.n_max(), "TestFunction *");
  TestFunction out(a.n_max());
  for (std::size_t i = 0; i < a.values_.size(); ++i) out.values_[i] = a.values_[i] * b.values_[i];
  return out;
}

bool TestFunction::is_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

// ---------------------------------------------------------------------------
// GridMeasure

GridMeasure::GridMeasure(std::size_t n_max) : weights_(n_max, 0.0) {}

GridMeasure::GridMeasure(std::vector<double> weights, double overflow_mass,
                         double overflow_number)
    : weights_(std::move(weights)),
      overflow_mass_(overflow_mass),
      overflow_number_(overflow_number) {}

GridMeasure GridMeasure::dirac(std::size_t n_max, Mass k, double weight) {
  if (k < 1 || static_cast<std::size_t>(k) > n_max)
    throw DimensionError("dirac: mass outside the grid");
  GridMeasure mu(n_max);
  mu[k] = weight;
  return mu;
}

GridMeasure& GridMeasure::operator+=(const GridMeasure& other) {
  require_same_grid(n_max(), other.n_max(), "GridMeasure +=");
  for (std::size_t i = 0; i < weights_.size(); ++i) weights_[i] += other.weights_[i];
  overflow_mass_ += other.overflow_mass_;
  overflow_number_ += other.overflow_number_;
  return *this;
}

GridMeasure& GridMeasure::operator-=(const GridMeasure& other) {
  require_same_grid(n_max(), other.n_max(), "GridMeasure -=");
  for (std::size_t i = 0; i < weights_.size(); ++i) weights_[i] -= other.weights_[i];
  overflow_mass_ -= other.overflow_mass_;
  overflow_number_ -= other.overflow_number_;
  return *this;
}

GridMeasure& GridMeasure::operator*=(double scale) {
  for (double& w : weights_) w *= scale;
  overflow_mass_ *= scale;
  overflow_number_ *= scale;
  return *this;
}

bool GridMeasure::is_finite() const {
  return std::all_of(weights_.begin(), weights_.end(), [](double w) { return std::isfinite(w); }) &&
         std::isfinite(overflow_mass_) && std::isfinite(overflow_number_);
}

bool GridMeasure::is_nonnegative() const {
  return std::all_of(weights_.begin(), weights_.end(), [](double w) { return w >= 0.0; });
}

GridMeasure GridMeasure::abs() const {
  GridMeasure out(*this);
  for (double& w : out.weights_) w = std::fabs(w);
  out.overflow_mass_ = std::fabs(overflow_mass_);
  out.overflow_number_ = std::fabs(overflow_number_);
  return out;
}

// ---------------------------------------------------------------------------
// KernelMatrix

KernelMatrix::KernelMatrix(std::size_t n_max, double fill)
    : n_(n_max), data_(n_max * n_max, fill) {}

double KernelMatrix::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::fabs(v));
  return m;
}

bool KernelMatrix::is_symmetric() const {
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = i + 1; j < n_; ++j)
      if (data_[i * n_ + j] != data_[j * n_ + i]) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Operations

double pair(const TestFunction& f, const GridMeasure& mu) {
  require_same_grid(f.n_max(), mu.n_max(), "pair");
  double s = 0.0;
  const auto w = mu.weights();
  const auto v = f.values();
  for (std::size_t i = 0; i < w.size(); ++i) s += v[i] * w[i];
  return s;
}

double curly(const TestFunction& f, Mass x, Mass y) {
  if (x < 1 || y < 1) throw DimensionError("curly: masses must be >= 1");
  return f(x + y) - f(x) - f(y);
}

GridMeasure coag_apply(const KernelMatrix& F, const GridMeasure& mu, const GridMeasure& nu) {
  require_same_grid(mu.n_max(), nu.n_max(), "coag_apply");
  require_same_grid(F.n_max(), mu.n_max(), "coag_apply");
  const auto n = static_cast<Mass>(mu.n_max());
  const auto a = mu.weights();
  const auto b = nu.weights();
  GridMeasure out(mu.n_max());
  auto w = out.weights();

  // term(i, j) = F(i,j) * (a_i * b_j); the symmetric partner is term(j, i)
  // with a and b exchanged, so pairing the two keeps the sum order-free.
  auto term = [&](Mass i, Mass j) { return F(i, j) * (a[i - 1] * b[j - 1]); };
  auto diagonal_sum = [&](Mass k, Mass lo, Mass hi) {
    // sum over i in [lo, hi] of term(i, k - i), paired from the outside in
    double s = 0.0;
    for (; lo < hi; ++lo, --hi) s += term(lo, k - lo) + term(hi, k - hi);
    if (lo == hi) s += term(lo, k - lo);
    return s;
  };

  for (Mass k = 2; k <= n; ++k) w[k - 1] += diagonal_sum(k, 1, k - 1);

  double overflow_mass = 0.0;
  double overflow_number = 0.0;
  for (Mass k = n + 1; k <= 2 * n; ++k) {
    const double g = diagonal_sum(k, k - n, n);
    overflow_number += g;
    overflow_mass += static_cast<double>(k) * g;
  }

  for (Mass k = 1; k <= n; ++k) {
    const auto row = F.row(k);
    double fb = 0.0;
    double fa = 0.0;
    for (Mass j = 1; j <= n; ++j) {
      fb += row[j - 1] * b[j - 1];
      fa += row[j - 1] * a[j - 1];
    }
    w[k - 1] -= a[k - 1] * fb + b[k - 1] * fa;
  }
  out.set_overflow(overflow_mass, overflow_number);
  return out;
}

double norm_p(const GridMeasure& mu, double p, const BoundFunction& phi) {
  double s = 0.0;
  const auto w = mu.weights();
  for (std::size_t i = 0; i < w.size(); ++i)
    s += phi.pow(static_cast<Mass>(i + 1), p) * std::fabs(w[i]);
  return s;
}

double sup_norm_p(const TestFunction& f, double p, const BoundFunction& phi) {
  double m = 0.0;
  const auto v = f.values();
  for (std::size_t i = 0; i < v.size(); ++i)
    m = std::max(m, std::fabs(v[i]) / phi.pow(static_cast<Mass>(i + 1), p));
  return m;
}

double sup_norm_weighted(const TestFunction& f, const TestFunction& h) {
  require_same_grid(f.n_max(), h.n_max(), "sup_norm_weighted");
  double m = 0.0;
  for (std::size_t i = 0; i < f.n_max(); ++i)
    m = std::max(m, std::fabs(f.values()[i]) / h.values()[i]);
  return m;
}

TestFunction sign_density(const GridMeasure& rho) {
  TestFunction eps(rho.n_max());
  const auto w = rho.weights();
  for (std::size_t i = 0; i < w.size(); ++i)
    eps.values()[i] = w[i] > 0.0 ? 1.0 : (w[i] < 0.0 ? -1.0 : 0.0);
  return eps;
}

// ---------------------------------------------------------------------------
// Serialization

std::string format_double(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 17);
  if (ec != std::errc()) throw FormatError("format_double: conversion failed");
  return std::string(buf, end);
}

double parse_double(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r'))
    text.remove_suffix(1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
    throw FormatError("not a number: '" + std::string(text) + "'");
  return v;
}

void write_csv(std::ostream& out, const GridMeasure& mu) {
  out << "mass,weight\n";
  const auto w = mu.weights();
  for (std::size_t i = 0; i < w.size(); ++i) out << (i + 1) << ',' << format_double(w[i]) << '\n';
  out << "# overflow_mass=" << format_double(mu.overflow_mass())
      << " overflow_number=" << format_double(mu.overflow_number()) << '\n';
}

GridMeasure read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.substr(0, 11) != "mass,weight")
    throw FormatError("read_csv: expected header 'mass,weight'");
  std::vector<double> weights;
  double overflow_mass = 0.0;
  double overflow_number = 0.0;
  bool saw_trailer = false;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      const auto pm = line.find("overflow_mass=");
      const auto pn = line.find("overflow_number=");
      if (pm == std::string::npos || pn == std::string::npos)
        throw FormatError("read_csv: malformed trailer at line " + std::to_string(line_no));
      const auto vm_begin = pm + 14;
      overflow_mass = parse_double(std::string_view(line).substr(vm_begin, line.find(' ', vm_begin) - vm_begin));
      overflow_number = parse_double(std::string_view(line).substr(pn + 16));
      saw_trailer = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw FormatError("read_csv: missing comma at line " + std::to_string(line_no));
    const double mass = parse_double(std::string_view(line).substr(0, comma));
    if (mass != static_cast<double>(weights.size() + 1))
      throw FormatError("read_csv: masses must be 1..n_max in order (line " +
                        std::to_string(line_no) + ")");
    weights.push_back(parse_double(std::string_view(line).substr(comma + 1)));
  }
  if (!saw_trailer) throw FormatError("read_csv: missing overflow trailer");
  return GridMeasure(std::move(weights), overflow_mass, overflow_number);
}

}  // namespace smolsens
