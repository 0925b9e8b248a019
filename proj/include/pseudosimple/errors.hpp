#pragma once

#include <stdexcept>
#include <string>

namespace ps {

// Every failure that depends on the mathematical input (bad coefficients,
// missing equilibria, non-subgroups) derives from DomainError; the CLI maps
// these to exit code 1.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class InvalidElement : public DomainError {
 public:
  using DomainError::DomainError;
};

class GroupGrowthError : public DomainError {
 public:
  using DomainError::DomainError;
};

class NoEquilibrium : public DomainError {
 public:
  using DomainError::DomainError;
};

class InvarianceViolation : public DomainError {
 public:
  InvarianceViolation(const std::string& what, double residual)
      : DomainError(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

class NoConnection : public DomainError {
 public:
  using DomainError::DomainError;
};

class DegenerateAngle : public DomainError {
 public:
  using DomainError::DomainError;
};

// A section point outside the domain of a local map (wrong side of an
// invariant plane, or outside the section).
class LeftDomain : public DomainError {
 public:
  using DomainError::DomainError;
};

class IntegrationFailure : public DomainError {
 public:
  IntegrationFailure(const std::string& what, double t) : DomainError(what), t_(t) {}
  double time() const noexcept { return t_; }

 private:
  double t_;
};

// Malformed configuration or command line; exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ps
