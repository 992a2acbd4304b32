#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <utility>

#include "rank1/core/error.hpp"

namespace rank1 {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  a = std::remainder(a, kTwoPi);
  if (a <= -kPi) a += kTwoPi;
  return a;
}

/// Wraps to [0, 2pi).
inline double wrap_positive(double a) {
  a = std::fmod(a, kTwoPi);
  if (a < 0) a += kTwoPi;
  if (a >= kTwoPi) a -= kTwoPi;
  return a;
}

/// Bisection for a sign change of f on [lo, hi]. Runs until the bracket
/// stops shrinking or its width drops below abs_tol.
template <typename F>
double bisect_root(F&& f, double lo, double hi, double abs_tol = 0.0, int max_iter = 400) {
  double flo = f(lo);
  double fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0) == (fhi > 0))
    fail(ErrorCode::BracketFailure, "bisection bracket does not change sign");
  for (int it = 0; it < max_iter; ++it) {
    double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi || hi - lo <= abs_tol) break;
    double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm > 0) == (flo > 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// Golden-section minimisation of a unimodal f on [a, b].
/// Returns (argmin, min).
template <typename F>
std::pair<double, double> golden_minimize(F&& f, double a, double b, double tol = 1e-11,
                                          int max_iter = 200) {
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = f(c);
  double fd = f(d);
  for (int it = 0; it < max_iter && (b - a) > tol; ++it) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = f(d);
    }
  }
  double x = 0.5 * (a + b);
  double fx = f(x);
  if (fc < fx) {
    x = c;
    fx = fc;
  }
  if (fd < fx) {
    x = d;
    fx = fd;
  }
  return {x, fx};
}

}  // namespace rank1
