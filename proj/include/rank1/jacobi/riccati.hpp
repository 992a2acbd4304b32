#pragma once

// Scalar Jacobi/Riccati propagation along orbits of a surface.
//
// Along a unit-speed geodesic an orthogonal Jacobi field J = j E obeys
// j'' + K j = 0 and u = j'/j obeys u' + u^2 + K = 0. The unstable solution
// (limit of fields vanishing in the far past) is the nonnegative attracting
// solution; it determines F^u and the unstable potential phi^u.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <iomanip>
#include <ostream>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "rank1/core/error.hpp"
#include "rank1/geometry/integrate.hpp"
#include "rank1/geometry/surface_model.hpp"

namespace rank1::jacobi {

using geometry::SurfaceModel;
using geometry::UnitTangentState;

/// Curvature as a function of orbit time. Either analytic (curvature
/// signals) or tabulated from an integrated geodesic at a fixed spacing, in
/// which case lookups at grid times are exact and off-grid times are
/// linearly interpolated.
class CurvatureHistory {
 public:
  static CurvatureHistory analytic(std::function<double(double)> fn,
                                   double t_begin = -std::numeric_limits<double>::infinity(),
                                   double t_end = std::numeric_limits<double>::infinity()) {
    CurvatureHistory h;
    h.fn_ = std::make_shared<std::function<double(double)>>(std::move(fn));
    h.t_begin_ = t_begin;
    h.t_end_ = t_end;
    return h;
  }

  static CurvatureHistory tabulated(double t0, double spacing, std::vector<double> values) {
    if (values.size() < 2 || !(spacing > 0.0))
      fail(ErrorCode::DomainError, "tabulated history needs >= 2 samples and spacing > 0");
    CurvatureHistory h;
    h.table_ = std::make_shared<std::vector<double>>(std::move(values));
    h.t_begin_ = t0;
    h.spacing_ = spacing;
    h.t_end_ = t0 + spacing * static_cast<double>(h.table_->size() - 1);
    return h;
  }

  double t_begin() const { return t_begin_; }
  double t_end() const { return t_end_; }
  bool is_tabulated() const { return static_cast<bool>(table_); }
  double spacing() const { return spacing_; }

  double operator()(double t) const {
    if (reversed_) t = -t;
    if (fn_) return (*fn_)(t);
    const auto& v = *table_;
    double x = (t - t_begin0()) / spacing_;
    double n = static_cast<double>(v.size() - 1);
    if (x < -1e-6 || x > n + 1e-6)
      fail(ErrorCode::DomainError, "time " + std::to_string(t) + " outside tabulated history");
    double r = std::round(x);
    if (std::abs(x - r) < 1e-7) return v[static_cast<std::size_t>(std::clamp(r, 0.0, n))];
    x = std::clamp(x, 0.0, n);
    auto i = static_cast<std::size_t>(std::floor(x));
    if (i + 1 >= v.size()) return v.back();
    double w = x - static_cast<double>(i);
    return (1.0 - w) * v[i] + w * v[i + 1];
  }

  /// K_r(t) = K(-t): the curvature seen by the time-reversed orbit.
  CurvatureHistory reversed() const {
    CurvatureHistory h = *this;
    h.reversed_ = !reversed_;
    h.t_begin_ = -t_end_;
    h.t_end_ = -t_begin_;
    return h;
  }

  /// max(-K) over samples of [a, b] at the given spacing.
  double max_negative(double a, double b, double spacing) const {
    double worst = 0.0;
    auto n = static_cast<std::size_t>(std::ceil((b - a) / spacing - 1e-9));
    for (std::size_t i = 0; i <= n; ++i) {
      double t = std::min(b, a + spacing * static_cast<double>(i));
      worst = std::max(worst, -(*this)(t));
    }
    return worst;
  }

 private:
  double t_begin0() const { return reversed_ ? -t_end_ : t_begin_; }

  std::shared_ptr<std::function<double(double)>> fn_;
  std::shared_ptr<std::vector<double>> table_;
  double t_begin_ = 0.0;
  double t_end_ = 0.0;
  double spacing_ = 0.0;
  bool reversed_ = false;
};

/// Curvature along the orbit of v0 over [v0.t - before, v0.t + after].
/// Geometric models are integrated at `spacing` (the backward span is
/// rounded to a whole number of steps); signals are wrapped analytically.
inline CurvatureHistory orbit_history(const SurfaceModel& model, const UnitTangentState& v0,
                                      double before, double after, double spacing) {
  if (model.kind() == SurfaceModel::Kind::CurvatureSignal) {
    const auto& sig = model.as<geometry::CurvatureSignal>();
    auto fn = sig.fn;
    return CurvatureHistory::analytic(
        [fn](double t) {
          double K = fn(t);
          if (K > 1e-14) fail(ErrorCode::DomainError, "positive curvature in signal");
          return K;
        },
        v0.t - before, v0.t + after);
  }
  auto nb = static_cast<std::size_t>(std::llround(before / spacing));
  auto na = static_cast<std::size_t>(std::llround(after / spacing));
  std::vector<double> values;
  values.reserve(nb + na + 1);
  if (nb > 0) {
    auto back = geometry::integrate_geodesic(model, v0, -spacing * static_cast<double>(nb), spacing);
    for (std::size_t i = back.samples.size(); i-- > 1;) values.push_back(back.samples[i].curvature);
  }
  if (na > 0) {
    auto fwd = geometry::integrate_geodesic(model, v0, spacing * static_cast<double>(na), spacing);
    for (const auto& s : fwd.samples) values.push_back(s.curvature);
  } else {
    values.push_back(geometry::curvature_at(model, v0));
  }
  return CurvatureHistory::tabulated(v0.t - spacing * static_cast<double>(nb), spacing,
                                     std::move(values));
}

/// -u (1 - K) / (1 + u^2): minus the logarithmic growth rate of the Sasaki
/// norm of (J, J') for a Jacobi field with j'/j = u. Nonpositive whenever
/// u >= 0 and K <= 0.
inline double phi_u(double K, double u) { return -u * (1.0 - K) / (1.0 + u * u); }

struct RiccatiSample {
  double t = 0.0;
  double u = 0.0;
  double K = 0.0;
  double phi = 0.0;
};

enum class Branch { Raw, Unstable, Stable };

struct RiccatiTrace {
  Branch branch = Branch::Raw;
  double t_burn = 0.0;
  double dt = 0.0;
  std::vector<RiccatiSample> samples;
  /// Cumulative integrals from the first sample, integrated alongside u
  /// with the same RK4 stages: int u dt and int -phi dt.
  std::vector<double> int_u;
  std::vector<double> int_neg_phi;

  double t_begin() const { return samples.front().t; }
  double t_end() const { return samples.back().t; }
  double mean_u() const { return int_u.back() / (t_end() - t_begin()); }
  double mean_neg_phi() const { return int_neg_phi.back() / (t_end() - t_begin()); }
};

struct RiccatiOptions {
  /// |u| above this aborts with BlowUp.
  double ceiling = 1e6;
};

/// Solves u' = -u^2 - K from u(t0) = u0 to t1 > t0 with fixed-step RK4.
/// The number of steps is ceil((t1 - t0) / dt) and the step is adjusted to
/// land on t1.
inline RiccatiTrace riccati_integrate(const CurvatureHistory& K, double u0, double t0, double t1,
                                      double dt, const RiccatiOptions& opts = {}) {
  if (!(t1 > t0)) fail(ErrorCode::DomainError, "riccati span must satisfy t1 > t0");
  if (!(dt > 0.0)) fail(ErrorCode::DomainError, "dt must be positive");
  if (!std::isfinite(u0)) fail(ErrorCode::DomainError, "initial value must be finite");
  const std::size_t n = geometry::detail::step_count(t1 - t0, dt);
  const double h = (t1 - t0) / static_cast<double>(n);

  RiccatiTrace tr;
  tr.dt = h;
  tr.samples.reserve(n + 1);
  tr.int_u.reserve(n + 1);
  tr.int_neg_phi.reserve(n + 1);

  auto rhs = [](double u, double k) {
    return std::array<double, 3>{-u * u - k, u, u * (1.0 - k) / (1.0 + u * u)};
  };

  double u = u0, Iu = 0.0, Ip = 0.0;
  double k0 = K(t0);
  tr.samples.push_back({t0, u, k0, phi_u(k0, u)});
  tr.int_u.push_back(0.0);
  tr.int_neg_phi.push_back(0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = t0 + h * static_cast<double>(i);
    const double ka = K(t), km = K(t + h / 2), kb = K(t + h);
    auto k1 = rhs(u, ka);
    auto k2 = rhs(u + h / 2 * k1[0], km);
    auto k3 = rhs(u + h / 2 * k2[0], km);
    auto k4 = rhs(u + h * k3[0], kb);
    u += h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]);
    Iu += h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]);
    Ip += h / 6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2]);
    if (!(std::abs(u) <= opts.ceiling))
      throw BlowUpError(t + h, "Riccati solution exceeded ceiling near t = " + std::to_string(t + h));
    const double tn = (i + 1 == n) ? t1 : t + h;
    tr.samples.push_back({tn, u, kb, phi_u(kb, u)});
    tr.int_u.push_back(Iu);
    tr.int_neg_phi.push_back(Ip);
  }
  return tr;
}

struct BurnInOptions {
  /// Burn-in length; <= 0 selects 20 / sqrt(max(max(-K), 1e-3)).
  double t_burn = 0.0;
  /// Allowed disagreement of the two seeds at the window start.
  double seed_tol = 1e-6;
  RiccatiOptions riccati;
};

inline double default_burn_in(double max_neg_curvature) {
  return 20.0 / std::sqrt(std::max(max_neg_curvature, 1e-3));
}

/// Unstable Riccati solution on [ta, tb]: integrate from ta - T_burn with
/// u = 0 (fields vanishing in the past), then continue across the window. A second
/// run seeded with sqrt(max -K) must agree at ta within seed_tol.
/// The burn-in is rounded up to a whole number of steps.
inline RiccatiTrace unstable_riccati(const CurvatureHistory& K, double ta, double tb, double dt,
                                     const BurnInOptions& opts = {}) {
  if (!(tb > ta)) fail(ErrorCode::DomainError, "window must satisfy tb > ta");
  double t_burn = opts.t_burn > 0.0 ? opts.t_burn
                                    : default_burn_in(K.max_negative(ta, tb, dt / 2));
  t_burn = dt * std::ceil(t_burn / dt - 1e-9);
  const double t_start = ta - t_burn;
  if (t_start < K.t_begin() - 1e-9)
    fail(ErrorCode::InsufficientBurnIn, "orbit history does not extend back by the burn-in");
  const double kmax = std::sqrt(K.max_negative(t_start, tb, dt / 2));

  auto burn = riccati_integrate(K, 0.0, t_start, ta, dt, opts.riccati);
  if (kmax > 0.0) {
    auto high = riccati_integrate(K, kmax, t_start, ta, dt, opts.riccati);
    double gap = std::abs(high.samples.back().u - burn.samples.back().u);
    if (gap > opts.seed_tol)
      fail(ErrorCode::InsufficientBurnIn,
           "burn-in seeds disagree by " + std::to_string(gap) + " at window start");
  }
  auto out = riccati_integrate(K, burn.samples.back().u, ta, tb, dt, opts.riccati);
  out.branch = Branch::Unstable;
  out.t_burn = t_burn;
  return out;
}

/// Stable solution on [ta, tb] by time reversal: the unstable solution of
/// the reversed orbit, negated and mapped back (u^s(t) = -u_r(-t)).
inline RiccatiTrace stable_riccati(const CurvatureHistory& K, double ta, double tb, double dt,
                                   const BurnInOptions& opts = {}) {
  auto rev = unstable_riccati(K.reversed(), -tb, -ta, dt, opts);
  RiccatiTrace out;
  out.branch = Branch::Stable;
  out.t_burn = rev.t_burn;
  out.dt = rev.dt;
  const std::size_t n = rev.samples.size();
  const double total_u = rev.int_u.back();
  const double total_p = rev.int_neg_phi.back();
  for (std::size_t i = n; i-- > 0;) {
    const auto& s = rev.samples[i];
    double u = -s.u;
    out.samples.push_back({-s.t, u, s.K, phi_u(s.K, u)});
    // int_{ta}^{t} u^s = -(I_r(-ta) - I_r(-t)); the Sasaki rate flips sign too.
    out.int_u.push_back(-(total_u - rev.int_u[i]));
    out.int_neg_phi.push_back(-(total_p - rev.int_neg_phi[i]));
  }
  return out;
}

/// Model-level conveniences: window [v0.t, v0.t + T].
inline RiccatiTrace unstable_riccati(const SurfaceModel& model, const UnitTangentState& v0,
                                     double T, double dt, BurnInOptions opts = {}) {
  if (opts.t_burn <= 0.0) opts.t_burn = default_burn_in(model.curvature_bound());
  opts.t_burn = dt * std::ceil(opts.t_burn / dt - 1e-9);
  auto K = orbit_history(model, v0, opts.t_burn, T, dt / 2);
  return unstable_riccati(K, v0.t, v0.t + T, dt, opts);
}

inline RiccatiTrace stable_riccati(const SurfaceModel& model, const UnitTangentState& v0,
                                   double T, double dt, BurnInOptions opts = {}) {
  if (opts.t_burn <= 0.0) opts.t_burn = default_burn_in(model.curvature_bound());
  opts.t_burn = dt * std::ceil(opts.t_burn / dt - 1e-9);
  auto K = orbit_history(model, v0, 0.0, T + opts.t_burn, dt / 2);
  return stable_riccati(K, v0.t, v0.t + T, dt, opts);
}

/// Scalar orthogonal Jacobi data (j, j').
struct JacobiFrame {
  double j = 1.0;
  double jp = 0.0;
  double sasaki_norm() const { return std::hypot(j, jp); }
};

struct JacobiSample {
  double t = 0.0;
  JacobiFrame frame;
  double K = 0.0;
};

/// Solves j'' + K j = 0 from (j0, jp0) at t0 to t1 with fixed-step RK4.
inline std::vector<JacobiSample> jacobi_propagate(const CurvatureHistory& K, JacobiFrame start,
                                                  double t0, double t1, double dt) {
  if (start.j == 0.0 && start.jp == 0.0)
    fail(ErrorCode::DomainError, "Jacobi data must not vanish identically");
  const std::size_t n = geometry::detail::step_count(t1 - t0, dt);
  const double h = (t1 - t0) / static_cast<double>(n);
  std::vector<JacobiSample> out;
  out.reserve(n + 1);
  double j = start.j, jp = start.jp;
  out.push_back({t0, {j, jp}, K(t0)});
  for (std::size_t i = 0; i < n; ++i) {
    const double t = t0 + h * static_cast<double>(i);
    const double ka = K(t), km = K(t + h / 2), kb = K(t + h);
    const double a1 = jp, b1 = -ka * j;
    const double a2 = jp + h / 2 * b1, b2 = -km * (j + h / 2 * a1);
    const double a3 = jp + h / 2 * b2, b3 = -km * (j + h / 2 * a2);
    const double a4 = jp + h * b3, b4 = -kb * (j + h * a3);
    j += h / 6 * (a1 + 2 * a2 + 2 * a3 + a4);
    jp += h / 6 * (b1 + 2 * b2 + 2 * b3 + b4);
    out.push_back({t + h, {j, jp}, kb});
  }
  return out;
}

enum class Rank { Regular, HigherRank };

struct RankOptions {
  double tol = 1e-3;
  double min_window = 1.0;
};

/// higher_rank iff curvature and both Riccati solutions stay below tol on
/// the window covered by the traces.
inline Rank rank_classify(const RiccatiTrace& unstable, const RiccatiTrace& stable,
                          const RankOptions& opts = {}) {
  const double len = unstable.t_end() - unstable.t_begin();
  if (len < opts.min_window)
    fail(ErrorCode::WindowTooShort, "window of length " + std::to_string(len) + " is too short");
  double max_k = 0.0, max_u = 0.0;
  for (const auto& s : unstable.samples) {
    max_k = std::max(max_k, std::abs(s.K));
    max_u = std::max(max_u, std::abs(s.u));
  }
  for (const auto& s : stable.samples) {
    max_k = std::max(max_k, std::abs(s.K));
    max_u = std::max(max_u, std::abs(s.u));
  }
  return (max_k < opts.tol && max_u < opts.tol) ? Rank::HigherRank : Rank::Regular;
}

inline Rank rank_classify(const SurfaceModel& model, const UnitTangentState& v0, double window,
                          double dt, const RankOptions& opts = {}, const BurnInOptions& burn = {}) {
  if (window < opts.min_window)
    fail(ErrorCode::WindowTooShort, "window of length " + std::to_string(window) + " is too short");
  return rank_classify(unstable_riccati(model, v0, window, dt, burn),
                       stable_riccati(model, v0, window, dt, burn), opts);
}

/// CSV columns: t, u, K, phi_u.
inline void write_trace_csv(std::ostream& os, const RiccatiTrace& trace) {
  os << "t,u,K,phi_u\n" << std::setprecision(17);
  for (const auto& s : trace.samples) os << s.t << ',' << s.u << ',' << s.K << ',' << s.phi << '\n';
}

}  // namespace rank1::jacobi
