#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "rank1/core/error.hpp"
#include "rank1/core/parallel.hpp"

namespace rank1::thermo {

using PressureSource = std::function<double(double)>;

/// Pointwise max of a source and the zero function: a basic model joined
/// with a component of zero potential and zero entropy.
inline PressureSource with_zero_component(PressureSource source) {
  return [source = std::move(source)](double q) { return std::max(source(q), 0.0); };
}

struct CurveDiagnostics {
  /// Most negative second difference, and where it occurs.
  double convexity_defect = 0.0;
  double convexity_q = 0.0;
  bool convex = true;
  /// Largest increase P(q_{i+1}) - P(q_i).
  double max_increase = 0.0;
  bool nonincreasing = true;
};

struct SampleOptions {
  double convexity_tol = 1e-9;
  double monotonicity_tol = 1e-9;
  unsigned threads = 1;
};

/// Pressure sampled on a uniform q grid. d_left / d_right are 3-point
/// one-sided difference quotients (2-point next to the ends, NaN where the
/// side is missing).
struct PressureCurve {
  std::vector<double> q;
  std::vector<double> value;
  std::vector<double> d_left;
  std::vector<double> d_right;
  double step = 0.0;
  std::string provenance;
  CurveDiagnostics diagnostics;
  /// Optional exact source, used for off-grid refinement.
  PressureSource source;

  std::size_t size() const { return q.size(); }
  /// Index of the grid point closest to q0.
  std::size_t index_of(double q0) const {
    if (q.empty()) fail(ErrorCode::DomainError, "empty curve");
    double pos = std::round((q0 - q.front()) / step);
    pos = std::clamp(pos, 0.0, static_cast<double>(q.size() - 1));
    return static_cast<std::size_t>(pos);
  }
  bool on_grid(double q0) const {
    return q0 >= q.front() - 1e-9 * step && q0 <= q.back() + 1e-9 * step &&
           std::abs(q[index_of(q0)] - q0) <= 1e-6 * step;
  }
};

namespace detail {

inline void fill_derivatives(PressureCurve& c) {
  const std::size_t n = c.size();
  const double h = c.step;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const auto& P = c.value;
  c.d_left.assign(n, nan);
  c.d_right.assign(n, nan);
  for (std::size_t i = 0; i < n; ++i) {
    if (i >= 2)
      c.d_left[i] = (3.0 * P[i] - 4.0 * P[i - 1] + P[i - 2]) / (2.0 * h);
    else if (i == 1)
      c.d_left[i] = (P[1] - P[0]) / h;
    if (i + 2 < n)
      c.d_right[i] = (-3.0 * P[i] + 4.0 * P[i + 1] - P[i + 2]) / (2.0 * h);
    else if (i + 1 < n)
      c.d_right[i] = (P[i + 1] - P[i]) / h;
  }
}

inline void fill_diagnostics(PressureCurve& c, const SampleOptions& opts) {
  auto& d = c.diagnostics;
  d = {};
  const auto& P = c.value;
  for (std::size_t i = 1; i + 1 < P.size(); ++i) {
    double s = P[i + 1] - 2.0 * P[i] + P[i - 1];
    if (s < d.convexity_defect) {
      d.convexity_defect = s;
      d.convexity_q = c.q[i];
    }
  }
  for (std::size_t i = 0; i + 1 < P.size(); ++i) d.max_increase = std::max(d.max_increase, P[i + 1] - P[i]);
  d.convex = d.convexity_defect >= -opts.convexity_tol;
  d.nonincreasing = d.max_increase <= opts.monotonicity_tol;
}

}  // namespace detail

/// Builds a curve from explicit grid values. The grid must be uniform.
inline PressureCurve curve_from_values(std::vector<double> q, std::vector<double> values,
                                       std::string provenance = {}, const SampleOptions& opts = {}) {
  if (q.size() != values.size() || q.size() < 3) fail(ErrorCode::DomainError, "curve needs at least 3 points");
  PressureCurve c;
  c.step = (q.back() - q.front()) / static_cast<double>(q.size() - 1);
  if (!(c.step > 0.0)) fail(ErrorCode::DomainError, "q grid must be increasing");
  for (std::size_t i = 1; i < q.size(); ++i)
    if (std::abs(q[i] - q[i - 1] - c.step) > 1e-9 * std::max(1.0, c.step))
      fail(ErrorCode::DomainError, "q grid must be uniform");
  c.q = std::move(q);
  c.value = std::move(values);
  c.provenance = std::move(provenance);
  detail::fill_derivatives(c);
  detail::fill_diagnostics(c, opts);
  return c;
}

/// Samples source on q_min, q_min + step, ..., q_max. Source errors are
/// rethrown as SourceFailure naming q. The source must be safe to call
/// concurrently when opts.threads > 1.
inline PressureCurve sample_pressure_curve(const PressureSource& source, double q_min, double q_max, double step,
                                           std::string provenance = {}, const SampleOptions& opts = {}) {
  if (!(step > 0.0) || !(q_max > q_min)) fail(ErrorCode::DomainError, "need step > 0 and q_max > q_min");
  const double span = (q_max - q_min) / step;
  const auto intervals = static_cast<std::size_t>(std::llround(span));
  if (std::abs(span - static_cast<double>(intervals)) > 1e-6)
    fail(ErrorCode::DomainError, "q range is not a whole number of steps");
  if (intervals < 2) fail(ErrorCode::DomainError, "q grid needs at least 3 points");
  std::vector<double> q(intervals + 1), v(intervals + 1);
  for (std::size_t i = 0; i <= intervals; ++i) q[i] = q_min + static_cast<double>(i) * step;
  parallel_for(q.size(), opts.threads, [&](std::size_t i) {
    std::ostringstream where;
    where << std::setprecision(17) << q[i];
    try {
      v[i] = source(q[i]);
    } catch (const Error& e) {
      fail(ErrorCode::SourceFailure, "source failed at q = " + where.str() + ": " + e.what());
    } catch (const std::exception& e) {
      fail(ErrorCode::SourceFailure, "source failed at q = " + where.str() + ": " + e.what());
    }
    if (!std::isfinite(v[i])) fail(ErrorCode::SourceFailure, "source not finite at q = " + where.str());
  });
  auto c = curve_from_values(std::move(q), std::move(v), std::move(provenance), opts);
  c.step = step;
  c.source = source;
  return c;
}

struct CornerReport {
  double q0 = 0.0;
  double d_left = 0.0;
  double d_right = 0.0;
  double gap = 0.0;
  double threshold = 0.0;
  bool corner = false;
  /// Only filled when q0 == 1: P(1) and the largest |P(q)| for q >= 1.
  bool checked_flat_tail = false;
  double pressure_at_q0 = 0.0;
  double flat_tail_max = 0.0;
  bool flat_tail = false;
};

struct CornerOptions {
  double factor = 10.0;
  /// Floor on the slope resolution, for curves that are exactly linear.
  double min_resolution = 1e-8;
  double flat_tol = 1e-8;
};

/// Slope resolution near index i: largest |second difference| / h over
/// nearby points whose stencils do not touch i.
inline double slope_resolution(const PressureCurve& c, std::size_t i, const CornerOptions& opts = {}) {
  double r = 0.0;
  const auto n = static_cast<long>(c.size());
  for (long off : {-3L, -2L, 2L, 3L}) {
    long j = static_cast<long>(i) + off;
    if (j < 1 || j + 1 >= n) continue;
    const auto k = static_cast<std::size_t>(j);
    r = std::max(r, std::abs(c.value[k + 1] - 2.0 * c.value[k] + c.value[k - 1]) / c.step);
  }
  return std::max(r, opts.min_resolution);
}

/// One-sided slopes at the grid point nearest q0 and a corner decision.
inline CornerReport detect_corner(const PressureCurve& c, double q0, const CornerOptions& opts = {}) {
  const std::size_t i = c.index_of(q0);
  if (i == 0 || i + 1 >= c.size() || !c.on_grid(q0)) fail(ErrorCode::DomainError, "q0 must be an interior grid point");
  CornerReport r;
  r.q0 = c.q[i];
  r.d_left = c.d_left[i];
  r.d_right = c.d_right[i];
  r.gap = r.d_right - r.d_left;
  r.threshold = opts.factor * slope_resolution(c, i, opts);
  r.corner = r.gap > r.threshold;
  r.pressure_at_q0 = c.value[i];
  if (std::abs(r.q0 - 1.0) <= 1e-6 * c.step) {
    r.checked_flat_tail = true;
    for (std::size_t k = i; k < c.size(); ++k) r.flat_tail_max = std::max(r.flat_tail_max, std::abs(c.value[k]));
    r.flat_tail = r.flat_tail_max <= opts.flat_tol;
  }
  return r;
}

/// Corner reports at every interior point where a corner is declared.
inline std::vector<CornerReport> scan_corners(const PressureCurve& c, const CornerOptions& opts = {}) {
  std::vector<CornerReport> out;
  for (std::size_t i = 1; i + 1 < c.size(); ++i) {
    auto r = detect_corner(c, c.q[i], opts);
    if (r.corner) out.push_back(r);
  }
  return out;
}

struct ExponentRange {
  double low = 0.0;   // minus the right-end slope
  double high = 0.0;  // minus the left-end slope
  double left_drift = 0.0;
  double right_drift = 0.0;
};

/// Exponent range from the end slopes. RangeTooNarrow unless both end
/// slopes agree with the slope one step inside to within tol.
inline ExponentRange exponent_range(const PressureCurve& c, double tol = 1e-4) {
  const std::size_t n = c.size();
  if (n < 4) fail(ErrorCode::RangeTooNarrow, "curve too short for end slopes");
  ExponentRange r;
  const double right = c.d_left[n - 1], right_in = c.d_left[n - 2];
  const double left = c.d_right[0], left_in = c.d_right[1];
  r.low = -right;
  r.high = -left;
  r.right_drift = std::abs(right - right_in);
  r.left_drift = std::abs(left - left_in);
  if (!(r.right_drift < tol) || !(r.left_drift < tol)) {
    std::ostringstream msg;
    msg << "end slopes not stabilized (left drift " << r.left_drift << ", right drift " << r.right_drift << ")";
    fail(ErrorCode::RangeTooNarrow, msg.str());
  }
  return r;
}

/// CSV columns: q, P, D_L, D_R.
inline void write_curve_csv(std::ostream& os, const PressureCurve& c) {
  os << "q,P,D_L,D_R\n" << std::setprecision(17);
  for (std::size_t i = 0; i < c.size(); ++i)
    os << c.q[i] << ',' << c.value[i] << ',' << c.d_left[i] << ',' << c.d_right[i] << '\n';
}

}  // namespace rank1::thermo
