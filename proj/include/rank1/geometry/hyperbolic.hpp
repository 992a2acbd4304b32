#pragma once

// Poincare-disk primitives: SU(1,1) Mobius maps, distances, geodesic axes,
// and the side-pairing group of the regular genus-2 octagon.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <utility>
#include <vector>

#include "rank1/core/numerics.hpp"

namespace rank1::geometry::hyperbolic {

using cplx = std::complex<double>;

/// z -> (a z + b) / (conj(b) z + conj(a)) with |a|^2 - |b|^2 = 1.
struct Mobius {
  cplx a{1.0, 0.0};
  cplx b{0.0, 0.0};

  static Mobius identity() { return {}; }

  /// Hyperbolic translation moving the origin a distance `dist` (curvature -1
  /// units) toward the boundary point exp(i*angle).
  static Mobius translation(double angle, double dist) {
    double c = std::cosh(dist / 2.0);
    double s = std::sinh(dist / 2.0);
    return {cplx(c, 0.0), s * std::polar(1.0, angle)};
  }

  static Mobius rotation(double angle) { return {std::polar(1.0, angle / 2.0), 0.0}; }

  cplx operator()(cplx z) const { return (a * z + b) / (std::conj(b) * z + std::conj(a)); }

  cplx derivative(cplx z) const {
    cplx den = std::conj(b) * z + std::conj(a);
    return 1.0 / (den * den);
  }

  Mobius inverse() const { return {std::conj(a), -b}; }

  friend Mobius operator*(const Mobius& f, const Mobius& g) {
    // (f*g)(z) = f(g(z)); matrices [[a, b], [conj b, conj a]].
    return {f.a * g.a + f.b * std::conj(g.b), f.a * g.b + f.b * std::conj(g.a)};
  }

  double trace() const { return 2.0 * a.real(); }
};

/// Pushes a unit direction at z forward by the map.
inline cplx push_direction(const Mobius& m, cplx z, cplx dir) {
  cplx d = m.derivative(z) * dir;
  return d / std::abs(d);
}

/// Curvature -1 distance in the disk.
inline double disk_distance(cplx z, cplx w) {
  double num = std::abs(z - w);
  double den = std::abs(1.0 - std::conj(z) * w);
  return 2.0 * std::atanh(std::min(num / den, 1.0 - 1e-16));
}

/// Disk point and direction reached after moving a curvature -1 distance `s`
/// along the geodesic through (p, dir).
inline std::pair<cplx, cplx> geodesic_point(cplx p, cplx dir, double s) {
  cplx w = std::tanh(s / 2.0) * dir;
  cplx den = 1.0 + std::conj(p) * w;
  cplx z = (w + p) / den;
  cplx d = (1.0 - std::norm(p)) / (den * den) * dir;
  return {z, d / std::abs(d)};
}

/// Boundary endpoints (backward, forward) of the geodesic through (p, dir).
inline std::pair<cplx, cplx> geodesic_endpoints(cplx p, cplx dir) {
  auto back_map = [&](cplx w) { return (w + p) / (1.0 + std::conj(p) * w); };
  return {back_map(-dir), back_map(dir)};
}

/// Coordinates adapted to the oriented geodesic from boundary point `from`
/// to boundary point `to`. The disk is sent to the upper half-plane with the
/// geodesic on the positive imaginary axis, oriented upward.
class AxisFrame {
 public:
  AxisFrame() = default;
  AxisFrame(cplx from, cplx to) : from_(from), to_(to) {
    cplx mid = from + to;
    cplx zc = std::abs(mid) > 1e-12 ? mid / std::abs(mid) : cplx(0.0, 1.0) * from;
    cplx gc = raw(zc);
    u_ = std::conj(gc) / std::abs(gc);
    if ((u_ * raw(cplx(0.0, 0.0))).imag() < 0) u_ = -u_;
  }

  cplx from() const { return from_; }
  cplx to() const { return to_; }

  /// Upper half-plane image.
  cplx upper(cplx z) const { return u_ * raw(z); }

  /// Signed curvature -1 arclength of the projection of z onto the axis.
  double position(cplx z) const { return std::log(std::abs(upper(z))); }

  /// Curvature -1 distance from z to the axis.
  double distance(cplx z) const {
    cplx w = upper(z);
    return std::asinh(std::abs(w.real()) / w.imag());
  }

  /// Point on the axis at arclength `s` and the unit direction toward `to`.
  std::pair<cplx, cplx> point_at(double s) const {
    cplx v = cplx(0.0, std::exp(s)) / u_;
    cplx z = (from_ - to_ * v) / (1.0 - v);
    cplx d = (from_ - to_) / ((1.0 - v) * (1.0 - v)) * v;
    return {z, d / std::abs(d)};
  }

 private:
  cplx raw(cplx z) const { return (z - from_) / (z - to_); }

  cplx from_{-1.0, 0.0};
  cplx to_{1.0, 0.0};
  cplx u_{1.0, 0.0};
};

/// Side-pairing group of the regular hyperbolic octagon with interior angles
/// pi/4, centred at the origin. Generator m (0..7) translates toward angle
/// m*pi/4 by twice the inradius; generators m and m+4 are mutually inverse.
/// Words use the letters 0..7.
class OctagonGroup {
 public:
  OctagonGroup() {
    inradius_ = std::acosh(1.0 + std::sqrt(2.0));
    circumradius_ = std::acosh(std::pow(1.0 + std::sqrt(2.0), 2));
    for (int m = 0; m < 8; ++m) {
      gens_[m] = Mobius::translation(m * kPi / 4.0, 2.0 * inradius_);
      centers_[m] = gens_[m](0.0);
    }
    build_neighbors();
  }

  double inradius() const { return inradius_; }
  double circumradius() const { return circumradius_; }
  const Mobius& generator(int m) const { return gens_[m]; }
  static int inverse_letter(int m) { return (m + 4) % 8; }

  /// a0 a1^-1 a2 a3^-1 a0^-1 a1 a2^-1 a3 in letters.
  static std::array<int, 8> relator() { return {0, 5, 2, 7, 4, 1, 6, 3}; }

  Mobius word(const std::vector<int>& letters) const {
    Mobius m = Mobius::identity();
    for (int l : letters) m = m * gens_[l];
    return m;
  }

  /// Vertex of the fundamental octagon, in the disk.
  cplx vertex(int i) const {
    return std::tanh(circumradius_ / 2.0) * std::polar(1.0, (2 * i + 1) * kPi / 8.0);
  }

  /// True when z lies in the closed Dirichlet domain (tolerance in distance).
  bool contains(cplx z, double tol = 1e-13) const {
    double d0 = disk_distance(z, 0.0);
    for (const auto& c : centers_)
      if (disk_distance(z, c) < d0 - tol) return false;
    return true;
  }

  /// Greedy reduction into the fundamental domain. Each applied letter is the
  /// inverse of the side translation whose image of the origin is closer to
  /// z than the origin itself. Returns the letters applied (in order).
  std::vector<int> reduce(cplx& z, cplx& dir, int max_steps = 64) const {
    std::vector<int> applied;
    for (int step = 0; step < max_steps; ++step) {
      double d0 = disk_distance(z, 0.0);
      int best = -1;
      double best_gain = 1e-13;
      for (int m = 0; m < 8; ++m) {
        double gain = d0 - disk_distance(z, centers_[m]);
        if (gain > best_gain) {
          best_gain = gain;
          best = m;
        }
      }
      if (best < 0) break;
      int letter = inverse_letter(best);
      dir = push_direction(gens_[letter], z, dir);
      z = gens_[letter](z);
      applied.push_back(letter);
    }
    return applied;
  }

  /// Group elements whose image of the fundamental domain meets it
  /// (identity first).
  const std::vector<Mobius>& neighbors() const { return neighbors_; }

 private:
  void build_neighbors() {
    const double reach = 2.0 * circumradius_ + 1e-7;
    std::vector<Mobius> frontier{Mobius::identity()};
    neighbors_ = frontier;
    auto known = [&](const Mobius& g) {
      cplx p0 = g(0.0), p1 = g(0.3);
      for (const auto& h : neighbors_)
        if (std::abs(h(0.0) - p0) < 1e-9 && std::abs(h(0.3) - p1) < 1e-9) return true;
      return false;
    };
    for (int depth = 0; depth < 6; ++depth) {
      std::vector<Mobius> next;
      for (const auto& g : frontier) {
        for (const auto& s : gens_) {
          Mobius h = g * s;
          if (disk_distance(0.0, h(0.0)) > reach || known(h)) continue;
          neighbors_.push_back(h);
          next.push_back(h);
        }
      }
      frontier = std::move(next);
      if (frontier.empty()) break;
    }
  }

  double inradius_ = 0.0;
  double circumradius_ = 0.0;
  std::array<Mobius, 8> gens_{};
  std::array<cplx, 8> centers_{};
  std::vector<Mobius> neighbors_;
};

inline const OctagonGroup& octagon_group() {
  static const OctagonGroup group;
  return group;
}

}  // namespace rank1::geometry::hyperbolic
