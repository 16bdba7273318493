#ifndef SDFILTER_ERRORS_HPP_
#define SDFILTER_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace sdfilter {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string &msg) : std::runtime_error(msg) {}
};

// Malformed or inconsistent inputs (dimensions, non-PSD covariances,
// length mismatches, bad configuration values).
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

// Static parameter outside the model's admissible domain (e.g. nu <= 2).
class InvalidParameterError : public Error {
 public:
  using Error::Error;
};

// Errors that carry the time step at which the recursion broke down.
class StepError : public Error {
 public:
  StepError(const std::string &msg, int step)
      : Error(msg + " (step " + std::to_string(step) + ")"), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

// Innovation covariance F_t numerically singular.
class SingularInnovationError : public StepError {
 public:
  using StepError::StepError;
};

// Non-finite score/Hessian/log-likelihood during a recursion.
class NumericalFailureError : public StepError {
 public:
  using StepError::StepError;
};

// Particle weights underflowed to zero.
class ParticleDegeneracyError : public StepError {
 public:
  using StepError::StepError;
};

// Smoothing requested under a normalization that cannot identify P_t
// (scaled-score with more latent components than signals).
class IdentificationError : public Error {
 public:
  using Error::Error;
};

// All optimization starts failed.
class EstimationFailureError : public Error {
 public:
  using Error::Error;
};

// Too many prior draws fell outside the parameter domain.
class PriorDomainError : public Error {
 public:
  using Error::Error;
};

// File system / serialization failures.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace sdfilter

#endif  // SDFILTER_ERRORS_HPP_
