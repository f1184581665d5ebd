#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace smolsens {

/// Particle mass in grid units. The grid holds masses 1..n_max.
using Mass = std::int64_t;

/// Sub-additive weight phi >= 1 used by the weighted norms and the kernel
/// domination bounds. Evaluates on any positive mass, not only grid masses.
class BoundFunction {
 public:
  BoundFunction(std::function<double(Mass)> fn, std::string description);

  /// phi(x) = scale * (1 + x).
  static BoundFunction affine(double scale = 1.0);
  /// phi(x) = value. Sub-additive only for value >= 0; >= 1 only for value >= 1.
  static BoundFunction constant(double value);

  double operator()(Mass x) const { return fn_(x); }
  double pow(Mass x, double p) const;
  const std::string& description() const { return description_; }

 private:
  std::function<double(Mass)> fn_;
  std::string description_;
};

/// A function sampled on grid masses 1..n_max. Above the grid it reads as 0.
class TestFunction {
 public:
  TestFunction() = default;
  explicit TestFunction(std::size_t n_max, double fill = 0.0);
  explicit TestFunction(std::vector<double> values);

  template <typename F>
  static TestFunction sample(std::size_t n_max, F&& fn) {
    TestFunction f(n_max);
    for (std::size_t k = 1; k <= n_max; ++k) f.values_[k - 1] = fn(static_cast<Mass>(k));
    return f;
  }
  static TestFunction indicator(std::size_t n_max, Mass k);

  std::size_t n_max() const { return values_.size(); }
  /// Value at mass k; 0 for k > n_max.
  double operator()(Mass k) const {
    return k >= 1 && static_cast<std::size_t>(k) <= values_.size() ? values_[k - 1] : 0.0;
  }
  double& at(Mass k) { return values_[k - 1]; }
  double at(Mass k) const { return values_[k - 1]; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  TestFunction& operator+=(const TestFunction& other);
  TestFunction& operator-=(const TestFunction& other);
  TestFunction& operator*=(double scale);
  friend TestFunction operator+(TestFunction a, const TestFunction& b) { return a += b; }
  friend TestFunction operator-(TestFunction a, const TestFunction& b) { return a -= b; }
  friend TestFunction operator*(double s, TestFunction a) { return a *= s; }
  /// Pointwise product.
  friend TestFunction operator*(const TestFunction& a, const TestFunction& b);

  bool is_finite() const;

 private:
  std::vector<double> values_;
};

/// Signed measure on the integer mass grid 1..n_max together with the mass
/// and number that left the grid through coagulation gains above n_max.
class GridMeasure {
 public:
  GridMeasure() = default;
  explicit GridMeasure(std::size_t n_max);
  explicit GridMeasure(std::vector<double> weights, double overflow_mass = 0.0,
                       double overflow_number = 0.0);

  static GridMeasure dirac(std::size_t n_max, Mass k, double weight = 1.0);

  std::size_t n_max() const { return weights_.size(); }
  double operator[](Mass k) const { return weights_[k - 1]; }
  double& operator[](Mass k) { return weights_[k - 1]; }
  std::span<const double> weights() const { return weights_; }
  std::span<double> weights() { return weights_; }

  double overflow_mass() const { return overflow_mass_; }
  double overflow_number() const { return overflow_number_; }
  void set_overflow(double mass, double number) {
    overflow_mass_ = mass;
    overflow_number_ = number;
  }

  GridMeasure& operator+=(const GridMeasure& other);
  GridMeasure& operator-=(const GridMeasure& other);
  GridMeasure& operator*=(double scale);
  friend GridMeasure operator+(GridMeasure a, const GridMeasure& b) { return a += b; }
  friend GridMeasure operator-(GridMeasure a, const GridMeasure& b) { return a -= b; }
  friend GridMeasure operator*(double s, GridMeasure a) { return a *= s; }

  bool operator==(const GridMeasure&) const = default;

  bool is_finite() const;
  bool is_nonnegative() const;
  /// |mu| on the grid; overflow buckets are copied as absolute values.
  GridMeasure abs() const;

 private:
  std::vector<double> weights_;
  double overflow_mass_ = 0.0;
  double overflow_number_ = 0.0;
};

/// Dense symmetric kernel table F(i, j) for grid masses 1..n_max.
class KernelMatrix {
 public:
  KernelMatrix() = default;
  explicit KernelMatrix(std::size_t n_max, double fill = 0.0);

  template <typename F>
  static KernelMatrix tabulate(std::size_t n_max, F&& fn) {
    KernelMatrix m(n_max);
    for (std::size_t i = 1; i <= n_max; ++i)
      for (std::size_t j = 1; j <= n_max; ++j)
        m.data_[(i - 1) * n_max + (j - 1)] = fn(static_cast<Mass>(i), static_cast<Mass>(j));
    return m;
  }

  std::size_t n_max() const { return n_; }
  double operator()(Mass i, Mass j) const { return data_[(i - 1) * n_ + (j - 1)]; }
  /// Row of masses i: entries F(i, 1..n_max).
  std::span<const double> row(Mass i) const {
    return std::span<const double>(data_).subspan((i - 1) * n_, n_);
  }
  double max_abs() const;
  bool is_symmetric() const;

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

/// (f, mu) = sum_k f(k) w_k. Overflow is not included.
double pair(const TestFunction& f, const GridMeasure& mu);

/// {f}(x, y) = f(x+y) - f(x) - f(y), with f := 0 above the grid.
double curly(const TestFunction& f, Mass x, Mass y);

/// Grid instance of F(mu, nu) = int (delta_{x+y} - delta_x - delta_y) F(x,y) mu(dx) nu(dy).
/// Gains above n_max are metered in the overflow fields of the result.
/// Summation is arranged so that swapping mu and nu gives bitwise equal output.
GridMeasure coag_apply(const KernelMatrix& F, const GridMeasure& mu, const GridMeasure& nu);

/// ||mu||_p = sum_k phi(k)^p |w_k|, overflow excluded.
double norm_p(const GridMeasure& mu, double p, const BoundFunction& phi);

/// ||f||_p = max_k |f(k)| / phi(k)^p.
double sup_norm_p(const TestFunction& f, double p, const BoundFunction& phi);

/// ||f||_h = max_k |f(k)| / h(k) for a positive weight h sampled on the grid.
double sup_norm_weighted(const TestFunction& f, const TestFunction& h);

/// Componentwise sign of the weights, sgn(0) = 0.
TestFunction sign_density(const GridMeasure& rho);

/// Decimal form with 17 significant digits; round-trips every finite double.
std::string format_double(double value);
/// Parses a full-string decimal double; throws FormatError otherwise.
double parse_double(std::string_view text);

/// CSV with header `mass,weight` and a trailing `# overflow_mass=.. overflow_number=..` line.
void write_csv(std::ostream& out, const GridMeasure& mu);
GridMeasure read_csv(std::istream& in);

}  // namespace smolsens
