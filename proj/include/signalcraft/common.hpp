#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace signalcraft {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline double clamp01(double x) { return x < 0.0 ? 0.0 : (x > 1.0 ? 1.0 : x); }

inline double clamp(double x, double lo, double hi) {
    return x < lo ? lo : (x > hi ? hi : x);
}

inline bool nearly_equal(double a, double b, double tol) { return std::abs(a - b) <= tol; }

}  // namespace signalcraft
