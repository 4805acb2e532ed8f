// errors.hpp — exception categories mapped to CLI exit codes

#pragma once

#include <stdexcept>
#include <string>

namespace ccgate {

// Physics precondition violated (resonance, balance, invalid regime). Exit code 3.
struct PreconditionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// No acceptable commensurate gate time within the search bounds.
// Carries the best candidate found and its residual.
struct CommensurationError : PreconditionError {
  CommensurationError(const std::string& what, long best_k1, long best_k2, double residual)
      : PreconditionError(what), best_k1(best_k1), best_k2(best_k2), residual(residual) {}
  long best_k1;
  long best_k2;
  double residual;  // |eta_1 t0 / 2*pi*hbar - k1| of the best candidate
};

// Target phase unreachable within the knob range; carries the closest value reached.
struct TuningError : PreconditionError {
  TuningError(const std::string& what, double achieved_theta)
      : PreconditionError(what), achieved_theta(achieved_theta) {}
  double achieved_theta;
};

// Propagation exceeded its physicality tolerances. Exit code 4.
struct IntegrationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Experiment spec file could not be parsed. Exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace ccgate
