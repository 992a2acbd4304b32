#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "rank1/core/error.hpp"
#include "rank1/geometry/surface_model.hpp"

namespace rank1::geometry {

struct IntegrationOptions {
  /// Paths whose end lies within this phase distance of the start are
  /// flagged closed.
  double closure_tol = 1e-6;
  /// Bound on the step-doubling local error estimate.
  double local_error_bound = 1e-6;
  /// Check the local error every this many steps (and on the first step).
  std::size_t error_check_stride = 32;
};

namespace detail {

inline ChartState axpy(const ChartState& y, double h, const ChartState& k) {
  return {y[0] + h * k[0], y[1] + h * k[1], y[2] + h * k[2], y[3] + h * k[3]};
}

inline ChartState rk4_step(const SurfaceModel& model, const ChartState& y, double h) {
  ChartState k1 = geodesic_rhs(model, y);
  ChartState k2 = geodesic_rhs(model, axpy(y, h / 2, k1));
  ChartState k3 = geodesic_rhs(model, axpy(y, h / 2, k2));
  ChartState k4 = geodesic_rhs(model, axpy(y, h, k3));
  ChartState out;
  for (int i = 0; i < 4; ++i) out[i] = y[i] + h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
  double n = std::hypot(out[2], out[3]);
  out[2] /= n;
  out[3] /= n;
  return out;
}

inline void check_escape(const SurfaceModel& model, const ChartState& y) {
  for (double v : y)
    if (!std::isfinite(v)) fail(ErrorCode::ChartEscape, "non-finite chart state");
  if (model.kind() == SurfaceModel::Kind::CollarProfile &&
      std::abs(y[0]) > model.as<CollarProfile>().half_width)
    fail(ErrorCode::ChartEscape, "geodesic left the collar band at s = " + std::to_string(y[0]));
  if (model.kind() == SurfaceModel::Kind::ConstantNegative && !(y[1] > 0.0))
    fail(ErrorCode::ChartEscape, "geodesic left the upper half-plane");
}

inline std::size_t step_count(double T, double dt) {
  double n = std::ceil(std::abs(T) / dt - 1e-9);
  return n < 1.0 ? std::size_t{1} : static_cast<std::size_t>(n);
}

}  // namespace detail

/// One fixed-step classical RK4 step of size h (may be negative), with
/// direction renormalization. No domain reduction.
inline UnitTangentState rk4_advance(const SurfaceModel& model, const UnitTangentState& s, double h) {
  auto y = detail::rk4_step(model, to_chart(s), h);
  detail::check_escape(model, y);
  return from_chart(y, s.t + h);
}

/// Flows `v0` for time T using exactly `steps` uniform RK4 steps. The end
/// state is normalized to the canonical domain; `deck` accumulates every
/// normalization so that end = deck(unreduced endpoint).
struct Advance {
  UnitTangentState end;
  Deck deck;
};

inline Advance advance(const SurfaceModel& model, const UnitTangentState& v0, double T,
                       std::size_t steps) {
  if (!model.has_chart()) fail(ErrorCode::ChartEscape, "curvature signals have no positions");
  const double h = T / static_cast<double>(steps);
  Advance out{v0, Deck{}};
  out.deck = normalize_chart(model, out.end);
  auto y = to_chart(out.end);
  for (std::size_t i = 0; i < steps; ++i) {
    y = detail::rk4_step(model, y, h);
    detail::check_escape(model, y);
    UnitTangentState s = from_chart(y, v0.t + h * static_cast<double>(i + 1));
    out.deck = normalize_chart(model, s) * out.deck;
    y = to_chart(s);
  }
  out.end = from_chart(y, v0.t + T);
  return out;
}

/// Samples g^t(v0) for t between 0 and T (T < 0 integrates backward) with the
/// uniform step T / ceil(|T| / dt).
inline GeodesicPath integrate_geodesic(const SurfaceModel& model, const UnitTangentState& v0,
                                       double T, double dt, const IntegrationOptions& opts = {}) {
  if (!(dt > 0.0)) fail(ErrorCode::StepTooLarge, "dt must be positive");
  if (T == 0.0 || !std::isfinite(T)) fail(ErrorCode::DomainError, "duration must be nonzero");
  if (!model.has_chart()) fail(ErrorCode::ChartEscape, "curvature signals have no positions");

  const std::size_t n = detail::step_count(T, dt);
  const double h = T / static_cast<double>(n);

  GeodesicPath path;
  path.dt = std::abs(h);
  path.samples.reserve(n + 1);

  UnitTangentState s = v0;
  s.direction = s.direction.normalized();
  std::vector<int> letters;
  normalize_chart(model, s, &letters);
  if (!letters.empty()) path.deck_events.push_back({0, letters});
  path.samples.push_back({s.t, s, curvature_at(model, s)});

  auto y = to_chart(s);
  for (std::size_t i = 0; i < n; ++i) {
    ChartState next = detail::rk4_step(model, y, h);
    if (i % opts.error_check_stride == 0) {
      ChartState half = detail::rk4_step(model, detail::rk4_step(model, y, h / 2), h / 2);
      double err = detail::chart_phase_distance(model, from_chart(next, 0.0), from_chart(half, 0.0)) / 15.0;
      if (err > opts.local_error_bound)
        fail(ErrorCode::StepTooLarge,
             "local error estimate " + std::to_string(err) + " exceeds bound");
    }
    detail::check_escape(model, next);
    UnitTangentState cur = from_chart(next, v0.t + h * static_cast<double>(i + 1));
    letters.clear();
    normalize_chart(model, cur, &letters);
    if (!letters.empty()) path.deck_events.push_back({i + 1, letters});
    path.samples.push_back({cur.t, cur, curvature_at(model, cur)});
    y = to_chart(cur);
  }

  if (T > 0.0) {
    path.closure_distance = phase_distance(model, path.start(), path.end());
    path.closed = path.closure_distance < opts.closure_tol;
    if (path.closed) path.period = T;
  }
  return path;
}

}  // namespace rank1::geometry
