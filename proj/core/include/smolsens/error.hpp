#pragma once

#include <stdexcept>
#include <string>

namespace smolsens {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Two operands live on grids of different size.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Malformed kernel family description or parameter box.
class SpecError : public Error {
 public:
  using Error::Error;
};

/// A kernel violates one of the domination bounds against its bound function.
class HypothesisError : public Error {
 public:
  using Error::Error;
};

/// A parameter (or a finite-difference leg) lies outside the declared box.
class BoxError : public Error {
 public:
  using Error::Error;
};

/// The forward solve hit the moment ceiling or leaked too much number above
/// the grid. Carries the time at which the guard fired.
class BlowUpError : public Error {
 public:
  BlowUpError(const std::string& what, double time) : Error(what), time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

/// A weight of the coagulation solution went clearly negative.
class NegativityError : public Error {
 public:
  NegativityError(const std::string& what, double time) : Error(what), time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

/// Generic numerical fault (step size underflow, dual blow-up, ...).
class SolverFault : public Error {
 public:
  using Error::Error;
};

/// Picard iteration or perturbation series did not reach its tolerance.
class SeriesDivergenceError : public Error {
 public:
  SeriesDivergenceError(const std::string& what, double previous_distance,
                        double last_distance)
      : Error(what), previous_(previous_distance), last_(last_distance) {}
  double previous_distance() const noexcept { return previous_; }
  double last_distance() const noexcept { return last_; }

 private:
  double previous_;
  double last_;
};

/// Unreadable or malformed serialized data.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace smolsens
