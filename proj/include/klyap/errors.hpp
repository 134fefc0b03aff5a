#pragma once

#include <stdexcept>
#include <string>

namespace klyap {

/// An iterative kernel (QR sweep, Newton solve, ...) hit its iteration cap.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A Sylvester/Lyapunov operator is singular or the generator is not stable.
class SingularSylvesterError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Trajectory integration failed: step underflow, non-finite state, or the
/// cost did not decay before the configured horizon.
class IntegrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace klyap
