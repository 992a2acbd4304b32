#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

namespace rank1::geometry {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2() = default;
  constexpr Vec2(double x_, double y_) : x(x_), y(y_) {}
  explicit Vec2(std::complex<double> z) : x(z.real()), y(z.imag()) {}

  std::complex<double> complex() const { return {x, y}; }
  double norm() const { return std::hypot(x, y); }
  Vec2 normalized() const {
    double n = norm();
    return {x / n, y / n};
  }
  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(Vec2 a, Vec2 b) { return a.x == b.x && a.y == b.y; }
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }

/// A point of the unit tangent bundle in a model chart.
///
/// `direction` holds the components of the unit velocity in the chart's
/// orthonormal frame, so its Euclidean norm is 1. For the two conformal
/// hyperbolic charts the frame is aligned with the coordinate axes; for the
/// collar chart (s, theta) it is (d/ds, f(s)^-1 d/dtheta). Curvature-signal
/// models have no chart: only `t` is meaningful there.
struct UnitTangentState {
  Vec2 position;
  Vec2 direction{1.0, 0.0};
  double t = 0.0;

  double angle() const { return std::atan2(direction.y, direction.x); }
  static UnitTangentState from_angle(Vec2 position, double angle, double t = 0.0) {
    return {position, {std::cos(angle), std::sin(angle)}, t};
  }
};

struct PathSample {
  double t = 0.0;
  UnitTangentState state;
  double curvature = 0.0;
};

/// A reduction applied while integrating on the octagon surface: after
/// sample `sample_index` was produced, the listed generators (indices into
/// the eight side translations) were applied in order.
struct DeckEvent {
  std::size_t sample_index = 0;
  std::vector<int> generators;
};

struct GeodesicPath {
  std::vector<PathSample> samples;
  double dt = 0.0;
  bool closed = false;
  double period = 0.0;
  double closure_distance = 0.0;
  std::vector<DeckEvent> deck_events;

  const UnitTangentState& start() const { return samples.front().state; }
  const UnitTangentState& end() const { return samples.back().state; }
  double duration() const { return samples.back().t - samples.front().t; }
};

}  // namespace rank1::geometry
