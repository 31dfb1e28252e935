#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace lqrlab {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// The system matrix handed to a Lyapunov-type solve is not Hurwitz.
class UnstableSystemError : public Error {
 public:
  UnstableSystemError(const std::string& what, double margin)
      : Error(what), margin_(margin) {}
  /// Largest eigenvalue real part of the offending matrix.
  double margin() const { return margin_; }

 private:
  double margin_;
};

/// A gain expected to stabilize the plant does not.
class NotStabilizingError : public Error {
 public:
  using Error::Error;
};

/// A linear operator that must be inverted is (numerically) singular.
class SingularOperatorError : public Error {
 public:
  using Error::Error;
};

/// State or cost blew up during simulation or matrix exponentiation.
class OverflowError : public Error {
 public:
  OverflowError(const std::string& what, double blowup_time)
      : Error(what), blowup_time_(blowup_time) {}
  double blowup_time() const { return blowup_time_; }

 private:
  double blowup_time_;
};

/// A gradient estimate could not be formed; lists the offending samples.
class EstimateFailure : public Error {
 public:
  EstimateFailure(const std::string& what, std::vector<int> samples)
      : Error(what), samples_(std::move(samples)) {}
  const std::vector<int>& failed_samples() const { return samples_; }

 private:
  std::vector<int> samples_;
};

/// Rejection sampling could not populate the requested set.
class SamplingError : public Error {
 public:
  using Error::Error;
};

/// No initial stabilizing gain could be synthesized.
class SynthesisError : public Error {
 public:
  using Error::Error;
};

/// An iteration failed to converge within its budget.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// A configuration file failed validation.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace lqrlab
