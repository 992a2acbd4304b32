#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "rank1/core/error.hpp"
#include "rank1/core/numerics.hpp"
#include "rank1/core/parallel.hpp"
#include "rank1/geometry/hyperbolic.hpp"
#include "rank1/geometry/integrate.hpp"
#include "rank1/jacobi/riccati.hpp"

namespace rank1::lyapunov {

using geometry::GeodesicPath;
using geometry::SurfaceModel;
using geometry::UnitTangentState;
using jacobi::BurnInOptions;
using jacobi::CurvatureHistory;

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct ExponentEstimate {
  double chi_plus = kNaN;
  double chi_minus = kNaN;
  double horizon = 0.0;
  double gap = kNaN;
  bool regular = false;
  /// Forward average of -phi^u over the same horizon, and its distance from
  /// chi_plus (both converge to the exponent).
  double phi_average = kNaN;
  double average_discrepancy = kNaN;
};

struct ExponentOptions {
  double dt = 1e-2;
  BurnInOptions burn;
  /// <= 0 selects 1e-3 * sqrt(max -K).
  double regular_tol = 0.0;
};

inline double regular_tolerance(const SurfaceModel& model, const ExponentOptions& opts) {
  if (opts.regular_tol > 0.0) return opts.regular_tol;
  return 1e-3 * std::sqrt(std::max(model.curvature_bound(), 1e-6));
}

/// chi_plus = (1/T) int_0^T u over [v0.t, v0.t + T] of an unstable trace.
inline ExponentEstimate forward_exponent(const CurvatureHistory& K, double t0, double T, double dt,
                                         const BurnInOptions& burn = {}) {
  auto tr = jacobi::unstable_riccati(K, t0, t0 + T, dt, burn);
  ExponentEstimate e;
  e.horizon = T;
  e.chi_plus = tr.mean_u();
  e.phi_average = tr.mean_neg_phi();
  e.average_discrepancy = std::abs(e.chi_plus - e.phi_average);
  return e;
}

/// Backward exponent: the forward exponent of the reversed orbit over
/// [t0 - T, t0], i.e. minus the mean of the stable solution there.
inline double backward_exponent(const CurvatureHistory& K, double t0, double T, double dt,
                                const BurnInOptions& burn = {}) {
  auto tr = jacobi::stable_riccati(K, t0 - T, t0, dt, burn);
  return -tr.mean_u();
}

inline BurnInOptions resolved_burn(const SurfaceModel& model, BurnInOptions burn, double dt) {
  if (burn.t_burn <= 0.0) burn.t_burn = jacobi::default_burn_in(model.curvature_bound());
  burn.t_burn = dt * std::ceil(burn.t_burn / dt - 1e-9);
  return burn;
}

inline ExponentEstimate forward_exponent(const SurfaceModel& model, const UnitTangentState& v0,
                                         double T, const ExponentOptions& opts = {}) {
  auto burn = resolved_burn(model, opts.burn, opts.dt);
  auto K = jacobi::orbit_history(model, v0, burn.t_burn, T, opts.dt / 2);
  return forward_exponent(K, v0.t, T, opts.dt, burn);
}

/// Forward and backward exponents over the horizon T and the regularity flag.
inline ExponentEstimate exponent_estimate(const SurfaceModel& model, const UnitTangentState& v0,
                                          double T, const ExponentOptions& opts = {}) {
  auto burn = resolved_burn(model, opts.burn, opts.dt);
  const double reach = std::max(T, burn.t_burn);
  auto K = jacobi::orbit_history(model, v0, reach, reach, opts.dt / 2);
  auto e = forward_exponent(K, v0.t, T, opts.dt, burn);
  e.chi_minus = backward_exponent(K, v0.t, T, opts.dt, burn);
  e.gap = std::abs(e.chi_plus - e.chi_minus);
  e.regular = e.gap < regular_tolerance(model, opts);
  return e;
}

struct ClosedOrbitExponent {
  double exponent = kNaN;
  double schwarz_bound = kNaN;
  double mean_curvature = kNaN;
  /// Value of the periodic Riccati solution at the start of the orbit.
  double u0 = kNaN;
  double period = kNaN;
};

/// Exponent of a tau-periodic curvature history starting at t0: the fixed
/// point of the period map u(t0) -> u(t0 + tau) in [0, sqrt(max -K)] is
/// found by bisection and the exponent is the mean of that periodic
/// solution. Checks the Schwarz bound sqrt(-mean K).
inline ClosedOrbitExponent closed_orbit_exponent(const CurvatureHistory& K, double t0, double tau,
                                                 double dt) {
  if (!(tau > 0.0)) fail(ErrorCode::NotClosed, "period must be positive");
  const std::size_t n = geometry::detail::step_count(tau, dt);
  const double h = tau / static_cast<double>(n);

  // Mean curvature by composite Simpson on the half-step grid.
  double simpson = 0.0;
  double kmax = 0.0;
  for (std::size_t i = 0; i <= 2 * n; ++i) {
    double k = K(t0 + 0.5 * h * static_cast<double>(i));
    if (k > 1e-14) fail(ErrorCode::NoFixedPoint, "positive curvature along the orbit");
    kmax = std::max(kmax, -k);
    double w = (i == 0 || i == 2 * n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    simpson += w * k;
  }
  ClosedOrbitExponent out;
  out.period = tau;
  out.mean_curvature = simpson * (0.5 * h) / 3.0 / tau;
  out.schwarz_bound = std::sqrt(std::max(0.0, -out.mean_curvature));

  auto end_value = [&](double u0) { return jacobi::riccati_integrate(K, u0, t0, t0 + tau, h).samples.back().u; };
  const double top = std::sqrt(kmax);
  double g0 = end_value(0.0);
  double gtop = end_value(top) - top;
  if (g0 < -1e-12 || gtop > 1e-12)
    fail(ErrorCode::NoFixedPoint, "period map does not bracket a fixed point in the cone");
  double u0 = 0.0;
  if (top > 0.0 && g0 > 0.0) {
    u0 = (gtop >= 0.0) ? top : bisect_root([&](double u) { return end_value(u) - u; }, 0.0, top);
  }
  auto tr = jacobi::riccati_integrate(K, u0, t0, t0 + tau, h);
  out.u0 = u0;
  out.exponent = tr.int_u.back() / tau;
  if (out.exponent > out.schwarz_bound + 1e-6)
    fail(ErrorCode::SchwarzViolation, "closed-orbit exponent " + std::to_string(out.exponent) +
                                          " exceeds Schwarz bound " + std::to_string(out.schwarz_bound));
  return out;
}

/// Exponent of a closed geodesic. The path must be flagged closed.
inline ClosedOrbitExponent closed_orbit_exponent(const SurfaceModel& model, const GeodesicPath& path,
                                                 double dt = 0.0) {
  if (!path.closed || !(path.period > 0.0))
    fail(ErrorCode::NotClosed, "path is not closed within tolerance");
  if (!(dt > 0.0)) dt = path.dt;
  const double tau = path.period;
  const std::size_t n = geometry::detail::step_count(tau, dt);
  const double h = tau / static_cast<double>(n);
  auto K = jacobi::orbit_history(model, path.start(), 0.0, tau, h / 2);
  return closed_orbit_exponent(K, path.start().t, tau, h);
}

/// Exponent of a periodic curvature signal (one period from t0).
inline ClosedOrbitExponent closed_orbit_exponent(const SurfaceModel& signal, double t0, double dt) {
  if (signal.kind() != SurfaceModel::Kind::CurvatureSignal)
    fail(ErrorCode::DomainError, "expected a curvature signal");
  const auto& s = signal.as<geometry::CurvatureSignal>();
  if (!(s.period > 0.0)) fail(ErrorCode::NotClosed, "signal is not periodic");
  return closed_orbit_exponent(CurvatureHistory::analytic(s.fn), t0, s.period, dt);
}

struct EnsembleMember {
  std::size_t index = 0;
  UnitTangentState seed;
  ExponentEstimate estimate;
};

struct EnsembleSpectrum {
  std::vector<EnsembleMember> members;
  double min_exponent = kNaN;
  double max_exponent = kNaN;
  std::vector<double> bin_edges;
  std::vector<std::size_t> counts;
};

struct EnsembleOptions {
  ExponentOptions exponent;
  unsigned threads = 1;
  std::size_t bins = 20;
  /// Seeds for non-periodic signals start uniformly in [0, signal_span).
  double signal_span = 100.0;
  /// ConstantNegative seeds: x in [-1, 1], y in [1/2, 2].
  double half_plane_box = 1.0;
};

/// Draws a seed state uniformly: position uniform in the model's domain
/// (hyperbolic area for the octagon, chart area for the collar, start time
/// for signals) and direction uniform in angle.
template <typename Rng>
UnitTangentState draw_seed(const SurfaceModel& model, Rng& rng, const EnsembleOptions& opts) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  switch (model.kind()) {
    case SurfaceModel::Kind::ConstantNegative: {
      double x = (2.0 * U(rng) - 1.0) * opts.half_plane_box;
      double y = std::exp(std::log(0.5) + U(rng) * std::log(4.0));
      return UnitTangentState::from_angle({x, y}, kTwoPi * U(rng));
    }
    case SurfaceModel::Kind::OctagonHyperbolic: {
      const auto& g = geometry::hyperbolic::octagon_group();
      const double cr = std::cosh(g.circumradius());
      for (;;) {
        double D = std::acosh(1.0 + U(rng) * (cr - 1.0));
        double r = std::tanh(D / 2.0);
        auto z = std::polar(r, kTwoPi * U(rng));
        double angle = kTwoPi * U(rng);
        if (g.contains(z)) return UnitTangentState::from_angle({z.real(), z.imag()}, angle);
      }
    }
    case SurfaceModel::Kind::CollarProfile: {
      const double L = model.as<geometry::CollarProfile>().half_width;
      double s = (2.0 * U(rng) - 1.0) * L;
      double th = kTwoPi * U(rng);
      return UnitTangentState::from_angle({s, th}, kTwoPi * U(rng));
    }
    case SurfaceModel::Kind::CurvatureSignal: {
      const auto& sig = model.as<geometry::CurvatureSignal>();
      double span = sig.period > 0.0 ? sig.period : opts.signal_span;
      UnitTangentState s;
      s.t = span * U(rng);
      U(rng);  // keep the draw count per seed fixed across variants
      return s;
    }
  }
  return {};
}

/// Samples exponents from n_seeds random states. Seeds are drawn serially
/// from mt19937_64(rng_seed); estimates run in parallel and are stored by
/// index, so the result does not depend on the thread count.
inline EnsembleSpectrum ensemble_sample(const SurfaceModel& model, std::size_t n_seeds, double T,
                                        std::uint64_t rng_seed, const EnsembleOptions& opts = {}) {
  if (n_seeds < 1) fail(ErrorCode::DomainError, "ensemble needs at least one seed");
  std::mt19937_64 rng(rng_seed);
  EnsembleSpectrum out;
  out.members.resize(n_seeds);
  for (std::size_t i = 0; i < n_seeds; ++i) {
    out.members[i].index = i;
    out.members[i].seed = draw_seed(model, rng, opts);
  }
  parallel_for(n_seeds, opts.threads, [&](std::size_t i) {
    out.members[i].estimate = exponent_estimate(model, out.members[i].seed, T, opts.exponent);
  });
  out.min_exponent = std::numeric_limits<double>::infinity();
  out.max_exponent = -std::numeric_limits<double>::infinity();
  for (const auto& m : out.members) {
    out.min_exponent = std::min(out.min_exponent, m.estimate.chi_plus);
    out.max_exponent = std::max(out.max_exponent, m.estimate.chi_plus);
  }
  const std::size_t bins = std::max<std::size_t>(opts.bins, 1);
  const double lo = out.min_exponent, hi = out.max_exponent;
  const double width = (hi - lo) / static_cast<double>(bins);
  for (std::size_t b = 0; b <= bins; ++b) out.bin_edges.push_back(lo + width * static_cast<double>(b));
  out.counts.assign(bins, 0);
  for (const auto& m : out.members) {
    std::size_t b = width > 0.0 ? static_cast<std::size_t>((m.estimate.chi_plus - lo) / width) : 0;
    out.counts[std::min(b, bins - 1)]++;
  }
  return out;
}

/// CSV columns: seed index, start state (x, y, angle, t), chi_plus,
/// chi_minus, gap.
inline void write_ensemble_csv(std::ostream& os, const EnsembleSpectrum& e) {
  os << "seed_index,x,y,angle,t,chi_plus,chi_minus,gap\n" << std::setprecision(17);
  for (const auto& m : e.members)
    os << m.index << ',' << m.seed.position.x << ',' << m.seed.position.y << ',' << m.seed.angle() << ',' << m.seed.t
       << ',' << m.estimate.chi_plus << ',' << m.estimate.chi_minus << ',' << m.estimate.gap << '\n';
}

inline nlohmann::json ensemble_summary(const EnsembleSpectrum& e) {
  return {{"min", e.min_exponent},
          {"max", e.max_exponent},
          {"seeds", e.members.size()},
          {"histogram", {{"edges", e.bin_edges}, {"counts", e.counts}}}};
}

}  // namespace rank1::lyapunov
