#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace torpart {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kPi2 = kPi * kPi;

/// Invalid input: bad geometry, malformed config, violated precondition.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical procedure failed to deliver its contract (no convergence,
/// degenerate partition, failed geometric verification).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The flat torus (R/aZ) x (R/bZ).
struct TorusGeometry {
  double a = 1.0;
  double b = 1.0;

  TorusGeometry() = default;
  TorusGeometry(double a_, double b_) : a(a_), b(b_) { validate(); }

  void validate() const {
    if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b))
      throw InvalidArgument("torus periods must be positive and finite");
    if (b > a * (1.0 + 1e-14))
      throw InvalidArgument("torus geometry requires b <= a");
  }

  double area() const { return a * b; }
};

}  // namespace torpart
