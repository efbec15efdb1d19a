#pragma once

#include <stdexcept>
#include <string>

namespace decaylab {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the domain of a mathematical map (e.g. (eta')^{-1}(r) with r < eta'(0)).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A structural assumption on the coefficient failed at a sample point.
class AssumptionViolation : public Error {
 public:
  using Error::Error;
};

/// Caller violated a documented precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// A test case does not satisfy the hypotheses of the inequality being certified.
/// Distinct from a violation: the inequality says nothing about such cases.
class InadmissibleCase : public Error {
 public:
  using Error::Error;
};

class QuadratureError : public Error {
 public:
  using Error::Error;
};

/// Adaptive integration stalled; carries the last time reached successfully.
class IntegrationFailure : public Error {
 public:
  IntegrationFailure(const std::string& what, double last_good_time)
      : Error(what + " (last good t=" + std::to_string(last_good_time) + ")"),
        last_good_time_(last_good_time) {}
  double last_good_time() const noexcept { return last_good_time_; }

 private:
  double last_good_time_;
};

/// The stabilization tail bound at the requested horizon exceeds the tolerance.
class HorizonTooSmall : public Error {
 public:
  HorizonTooSmall(const std::string& what, double tail_bound)
      : Error(what + " (tail bound=" + std::to_string(tail_bound) + ")"), tail_bound_(tail_bound) {}
  double tail_bound() const noexcept { return tail_bound_; }

 private:
  double tail_bound_;
};

/// Spectral data makes a weighted integral diverge.
class DataNotAdmissible : public Error {
 public:
  using Error::Error;
};

/// Numerical accuracy of a measured quantity is insufficient for the requested check.
class AccuracyError : public Error {
 public:
  using Error::Error;
};

}  // namespace decaylab
