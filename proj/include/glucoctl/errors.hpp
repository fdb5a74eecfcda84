#pragma once

#include <stdexcept>
#include <string>

namespace glucoctl {

// Non-finite or otherwise invalid numeric input.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Requested glucose setpoint has no equilibrium with nonnegative insulin.
class InfeasibleSetpoint : public DomainError {
 public:
  using DomainError::DomainError;
};

// Bad configuration file, unknown subject or scenario, malformed flags.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A Runge-Kutta stage produced a non-finite value.
class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(const std::string& what, double time_min)
      : std::runtime_error(what + " at t=" + std::to_string(time_min) + " min"),
        time_(time_min) {}

  double time() const noexcept { return time_; }

 private:
  double time_;
};

}  // namespace glucoctl
