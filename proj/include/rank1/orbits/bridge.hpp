#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include "rank1/orbits/shooting.hpp"

namespace rank1::orbits {

using geometry::hyperbolic::AxisFrame;
using geometry::hyperbolic::cplx;

/// Translation length (curvature -1 units) of a hyperbolic Mobius map.
inline double translation_length(const geometry::hyperbolic::Mobius& g) {
  const double tr = std::abs(g.trace());
  if (!(tr > 2.0)) fail(ErrorCode::DomainError, "word is not hyperbolic");
  return 2.0 * std::acosh(tr / 2.0);
}

/// Boundary fixed points (repelling, attracting) of a hyperbolic map.
inline std::pair<cplx, cplx> fixed_points(const geometry::hyperbolic::Mobius& g) {
  // conj(b) z^2 + (conj(a) - a) z - b = 0.
  const cplx A = std::conj(g.b), B = std::conj(g.a) - g.a, C = -g.b;
  const cplx disc = std::sqrt(B * B - 4.0 * A * C);
  cplx z1 = (-B + disc) / (2.0 * A), z2 = (-B - disc) / (2.0 * A);
  z1 /= std::abs(z1);
  z2 /= std::abs(z2);
  // Attracting point has |g'(z)| < 1.
  if (std::abs(g.derivative(z1)) < 1.0) return {z2, z1};
  return {z1, z2};
}

/// Cyclic pseudo-orbit lying exactly on the closed geodesic of a word in
/// the octagon group, with nodes about one unit apart.
inline PseudoOrbit octagon_word_pseudo_orbit(const SurfaceModel& model, const std::vector<int>& letters,
                                             double spacing = 1.0) {
  if (model.kind() != SurfaceModel::Kind::OctagonHyperbolic)
    fail(ErrorCode::DomainError, "word orbits need the octagon model");
  if (letters.empty()) fail(ErrorCode::DomainError, "empty word");
  for (int l : letters)
    if (l < 0 || l > 7) fail(ErrorCode::DomainError, "letters are 0..7");
  const double k = model.as<geometry::OctagonHyperbolic>().k;
  const auto g = geometry::hyperbolic::octagon_group().word(letters);
  const double len = translation_length(g);
  auto [from, to] = fixed_points(g);
  AxisFrame axis(from, to);
  // Start at the foot of the perpendicular from the origin.
  const double s0 = axis.position(0.0);
  const auto pieces = static_cast<std::size_t>(std::max(1.0, std::ceil(len / (k * spacing))));
  std::vector<UnitTangentState> states;
  std::vector<double> durations;
  for (std::size_t p = 0; p < pieces; ++p) {
    auto [z, d] = axis.point_at(s0 + len * static_cast<double>(p) / static_cast<double>(pieces));
    states.push_back({geometry::Vec2(z), geometry::Vec2(d), 0.0});
    durations.push_back(len / k / static_cast<double>(pieces));
  }
  return make_pseudo_orbit(model, std::move(states), std::move(durations));
}

/// Closed geodesic of a word, refined.
inline Refinement octagon_word_orbit(const SurfaceModel& model, const std::vector<int>& letters,
                                     const RefineOptions& opts = {}) {
  return refine_closed_orbit(model, octagon_word_pseudo_orbit(model, letters, opts.max_segment), opts);
}

struct BridgeOptions {
  /// Target mismatch at each joint.
  double joint_tol = 1e-2;
  /// Full turns around each orbit per visit.
  std::size_t loops = 2;
  /// Search budget along each connector (curvature -1 arclength).
  double max_search = 40.0;
  double search_step = 0.05;
  double delta_shadow = 0.25;
  double curvature_fraction = 0.05;
  double dt = 1e-3;
};

namespace detail {

/// Lift of a closed path's geodesic through its most negatively curved
/// sample (ties go to the earliest sample).
inline AxisFrame lift_axis(const GeodesicPath& path) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < path.samples.size(); ++i)
    if (path.samples[i].curvature < path.samples[best].curvature) best = i;
  const auto& s = path.samples[best].state;
  auto [from, to] = geometry::hyperbolic::geodesic_endpoints(s.position.complex(), s.direction.complex());
  return AxisFrame(from, to);
}

inline UnitTangentState state_at(const AxisFrame& a, double s) {
  auto [z, d] = a.point_at(s);
  return {geometry::Vec2(z), geometry::Vec2(d), 0.0};
}

inline double chart_mismatch(const SurfaceModel& model, const UnitTangentState& a, const UnitTangentState& b) {
  return geometry::detail::chart_phase_distance(model, a, b);
}

/// Position along `conn` where it is within tol of `orbit` (projected), searched
/// backward (dir = -1) or forward (dir = +1) from the point of `conn` nearest
/// the origin. Returns (position on conn, position of the foot on orbit).
inline std::pair<double, double> attach(const SurfaceModel& model, const AxisFrame& conn, const AxisFrame& orbit,
                                        int dir, const BridgeOptions& opts) {
  const double s0 = conn.position(0.0);
  for (double step = 0.0; step <= opts.max_search; step += opts.search_step) {
    const double s = s0 + dir * step;
    auto c = state_at(conn, s);
    const double foot = orbit.position(c.position.complex());
    auto o = state_at(orbit, foot);
    if (chart_mismatch(model, c, o) < opts.joint_tol) return {s, foot};
  }
  fail(ErrorCode::NoConnector, "connector does not approach the orbit within the search budget");
}

inline double positive_mod(double x, double m) {
  double r = std::fmod(x, m);
  return r < 0.0 ? r + m : r;
}

}  // namespace detail

/// Four-leg cyclic pseudo-orbit A -> connector -> B -> connector -> A. The
/// connectors are the geodesics from the backward end of A's lift to the
/// forward end of B's lift and back, attached where they come within
/// joint_tol of the orbits.
inline PseudoOrbit bridge_orbits(const SurfaceModel& model, const GeodesicPath& A, const GeodesicPath& B,
                                 const BridgeOptions& opts = {}) {
  if (!A.closed || !B.closed || !(A.period > 0.0) || !(B.period > 0.0))
    fail(ErrorCode::NotClosed, "bridging needs closed orbits");
  const double bound = model.curvature_bound();
  for (const auto* p : {&A, &B}) {
    double mean = 0.0;
    for (std::size_t i = 1; i < p->samples.size(); ++i)
      mean += 0.5 * (p->samples[i].curvature + p->samples[i - 1].curvature) * (p->samples[i].t - p->samples[i - 1].t);
    mean /= p->period;
    if (!(mean <= -opts.curvature_fraction * bound) || bound <= 0.0)
      fail(ErrorCode::HypothesisViolation, "orbit is not in a negatively curved region");
  }
  // Same orbit: the degenerate bridge is A itself.
  if (std::abs(A.period - B.period) < 1e-6) {
    for (const auto& s : A.samples)
      if (geometry::phase_distance(model, s.state, B.start()) < 1e-6) return pseudo_orbit_from_path(model, A, opts.dt);
  }
  if (model.kind() != SurfaceModel::Kind::OctagonHyperbolic)
    fail(ErrorCode::NoConnector, "connector search is implemented for the octagon model only");
  const double k = model.as<geometry::OctagonHyperbolic>().k;
  const AxisFrame a = detail::lift_axis(A), b = detail::lift_axis(B);
  const AxisFrame ab(a.from(), b.to()), ba(b.from(), a.to());
  // ab leaves A's lift going back in time and reaches B's lift going forward.
  auto [ab_start, a_exit] = detail::attach(model, ab, a, -1, opts);
  auto [ab_end, b_entry] = detail::attach(model, ab, b, +1, opts);
  auto [ba_start, b_exit] = detail::attach(model, ba, b, -1, opts);
  auto [ba_end, a_entry] = detail::attach(model, ba, a, +1, opts);
  const double len_a = A.period * k, len_b = B.period * k;
  const double loops_a = static_cast<double>(opts.loops) * len_a, loops_b = static_cast<double>(opts.loops) * len_b;
  // Arc lengths in curvature -1 units.
  const double on_b = detail::positive_mod(b_exit - b_entry, len_b) + loops_b;
  const double on_a = detail::positive_mod(a_exit - a_entry, len_a) + loops_a;
  std::vector<UnitTangentState> states{detail::state_at(ab, ab_start), detail::state_at(b, b_entry),
                                       detail::state_at(ba, ba_start), detail::state_at(a, a_entry)};
  std::vector<double> durations{(ab_end - ab_start) / k, on_b / k, (ba_end - ba_start) / k, on_a / k};
  for (auto& s : states) geometry::normalize_chart(model, s);
  auto p = make_pseudo_orbit(model, std::move(states), std::move(durations), true, 1e-3, opts.dt);
  if (!(p.max_mismatch() < opts.delta_shadow))
    fail(ErrorCode::NoConnector, "bridge joints exceed delta_shadow");
  return p;
}

}  // namespace rank1::orbits
