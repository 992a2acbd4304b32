#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rank1/core/numerics.hpp"
#include "rank1/thermo/curve.hpp"

namespace rank1::thermo {

using json = nlohmann::json;

/// n evenly spaced points on [lo, hi]; a single point when hi <= lo.
inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
  if (!(hi > lo) || n < 2) return {lo};
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  out.back() = hi;
  return out;
}

/// The attainable slope range of the curve: [-slope at right end, -slope at left end].
inline std::pair<double, double> slope_range(const PressureCurve& c) {
  return {-c.d_left[c.size() - 1], -c.d_right[0]};
}

/// Default alpha grid: evenly spaced over the end-slope range.
inline std::vector<double> default_alpha_grid(const PressureCurve& c, std::size_t n = 400) {
  auto [lo, hi] = slope_range(c);
  return linspace(lo, hi, n);
}

/// Minus the secant slopes between neighbouring grid points, deduplicated.
/// On this grid the biconjugate reproduces the convex curve at grid points.
inline std::vector<double> secant_alpha_grid(const PressureCurve& c, double dedup_tol = 1e-12) {
  std::vector<double> out;
  for (std::size_t i = 0; i + 1 < c.size(); ++i) out.push_back(-(c.value[i + 1] - c.value[i]) / c.step);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end(), [&](double a, double b) { return b - a <= dedup_tol; }), out.end());
  return out;
}

struct ConjugateValue {
  double value = 0.0;
  double argmin = 0.0;
  bool escaping = false;
};

struct ConjugateOptions {
  /// Slack on the end-slope range before alpha counts as escaping.
  double slope_tol = 1e-8;
  /// Refine with the curve's source between neighbouring grid points.
  bool refine = true;
  double refine_tol = 1e-11;
  unsigned threads = 1;
};

/// inf_q P(q) + q alpha over the grid, refined locally with the source.
/// Alphas outside the end-slope range escape: value -inf.
inline ConjugateValue conjugate_at(const PressureCurve& c, double alpha, const ConjugateOptions& opts = {}) {
  ConjugateValue out;
  auto [lo, hi] = slope_range(c);
  if (alpha < lo - opts.slope_tol || alpha > hi + opts.slope_tol) {
    out.value = -std::numeric_limits<double>::infinity();
    out.escaping = true;
    return out;
  }
  std::size_t best = 0;
  double best_v = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < c.size(); ++i) {
    double v = c.value[i] + c.q[i] * alpha;
    if (v < best_v) {
      best_v = v;
      best = i;
    }
  }
  out.value = best_v;
  out.argmin = c.q[best];
  if (opts.refine && c.source) {
    const double a = c.q[best > 0 ? best - 1 : best];
    const double b = c.q[best + 1 < c.size() ? best + 1 : best];
    if (b > a) {
      auto [x, fx] = golden_minimize([&](double q) { return c.source(q) + q * alpha; }, a, b, opts.refine_tol);
      if (fx < out.value) {
        out.value = fx;
        out.argmin = x;
      }
    }
  }
  return out;
}

struct SpectrumOptions {
  ConjugateOptions conjugate;
  CornerOptions corner;
  /// Flag alpha below this many alpha-grid steps as unreliable for D.
  double unreliable_steps = 10.0;
  double range_tol = 1e-4;
};

/// Entropy spectrum E, D = E / alpha and the dimension estimate 1 + 2D on an
/// alpha grid. D and dimension are NaN where undefined (alpha <= 0 or E
/// escaping).
struct SpectrumResult {
  std::vector<double> alpha;
  std::vector<double> entropy;  // E(alpha)
  std::vector<double> ratio;    // D(alpha)
  std::vector<double> dimension;
  std::vector<bool> escaping;
  std::vector<bool> unreliable;
  std::optional<ExponentRange> range;
  std::string range_error;
  double alpha0 = std::numeric_limits<double>::quiet_NaN();
  double alpha1 = std::numeric_limits<double>::quiet_NaN();
  std::optional<CornerReport> corner;

  std::size_t size() const { return alpha.size(); }
};

/// Legendre-Fenchel conjugate of a convex curve. NonConvexInput if the
/// curve failed its convexity check.
inline SpectrumResult legendre_conjugate(const PressureCurve& c, std::vector<double> alphas,
                                         const SpectrumOptions& opts = {}) {
  if (!c.diagnostics.convex) {
    std::ostringstream msg;
    msg << "curve not convex: second difference " << c.diagnostics.convexity_defect << " at q = "
        << c.diagnostics.convexity_q;
    fail(ErrorCode::NonConvexInput, msg.str());
  }
  std::sort(alphas.begin(), alphas.end());
  SpectrumResult s;
  const std::size_t n = alphas.size();
  s.alpha = alphas;
  s.entropy.assign(n, 0.0);
  s.ratio.assign(n, std::numeric_limits<double>::quiet_NaN());
  s.dimension = s.ratio;
  s.escaping.assign(n, false);
  s.unreliable.assign(n, false);
  std::vector<ConjugateValue> values(n);
  parallel_for(n, opts.conjugate.threads, [&](std::size_t j) { values[j] = conjugate_at(c, alphas[j], opts.conjugate); });
  const double dalpha = n > 1 ? (alphas.back() - alphas.front()) / static_cast<double>(n - 1) : 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    s.entropy[j] = values[j].value;
    s.escaping[j] = values[j].escaping;
    s.unreliable[j] = alphas[j] < opts.unreliable_steps * dalpha;
    if (!s.escaping[j] && alphas[j] > 0.0) {
      s.ratio[j] = s.entropy[j] / alphas[j];
      s.dimension[j] = 1.0 + 2.0 * s.ratio[j];
    }
  }
  try {
    s.range = exponent_range(c, opts.range_tol);
  } catch (const Error& e) {
    s.range_error = e.what();
  }
  if (c.on_grid(0.0)) {
    auto i = c.index_of(0.0);
    if (i > 0 && i + 1 < c.size()) s.alpha0 = -0.5 * (c.d_left[i] + c.d_right[i]);
  }
  if (c.on_grid(1.0)) {
    auto i = c.index_of(1.0);
    if (i > 0 && i + 1 < c.size()) {
      s.alpha1 = -c.d_left[i];
      s.corner = detect_corner(c, 1.0, opts.corner);
    }
  }
  return s;
}

inline SpectrumResult legendre_conjugate(const PressureCurve& c, const SpectrumOptions& opts = {}) {
  return legendre_conjugate(c, default_alpha_grid(c), opts);
}

/// sup over non-escaping alpha of E(alpha) - q alpha, at each q.
inline std::vector<double> biconjugate(const SpectrumResult& s, const std::vector<double>& qs) {
  std::vector<double> out(qs.size(), -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < qs.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (!s.escaping[j]) out[i] = std::max(out[i], s.entropy[j] - qs[i] * s.alpha[j]);
  return out;
}

/// Largest increase of the slope of E between consecutive finite points
/// (positive means a concavity violation).
inline double concavity_defect(const SpectrumResult& s) {
  double worst = -std::numeric_limits<double>::infinity();
  double prev_slope = std::numeric_limits<double>::quiet_NaN();
  std::size_t prev = s.size();
  for (std::size_t j = 0; j < s.size(); ++j) {
    if (s.escaping[j]) continue;
    if (prev < s.size() && s.alpha[j] > s.alpha[prev]) {
      double slope = (s.entropy[j] - s.entropy[prev]) / (s.alpha[j] - s.alpha[prev]);
      if (!std::isnan(prev_slope)) worst = std::max(worst, slope - prev_slope);
      prev_slope = slope;
    }
    prev = j;
  }
  return std::isfinite(worst) ? worst : 0.0;
}

inline std::string spectrum_flags(const SpectrumResult& s, std::size_t j) {
  if (s.escaping[j]) return "escaping";
  if (!(s.alpha[j] > 0.0)) return "undefined";
  if (s.unreliable[j]) return "unreliable";
  return "ok";
}

/// CSV columns: alpha, E, D, dim, entropy, flags.
inline void write_spectrum_csv(std::ostream& os, const SpectrumResult& s) {
  os << "alpha,E,D,dim,entropy,flags\n" << std::setprecision(17);
  for (std::size_t j = 0; j < s.size(); ++j)
    os << s.alpha[j] << ',' << s.entropy[j] << ',' << s.ratio[j] << ',' << s.dimension[j] << ',' << s.entropy[j]
       << ',' << spectrum_flags(s, j) << '\n';
}

namespace detail {
inline json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }
}  // namespace detail

inline json corner_to_json(const CornerReport& r) {
  json j = {{"q0", r.q0},       {"d_left", r.d_left},       {"d_right", r.d_right},
            {"gap", r.gap},     {"threshold", r.threshold}, {"corner", r.corner},
            {"pressure", r.pressure_at_q0}};
  if (r.checked_flat_tail) {
    j["flat_tail_max"] = r.flat_tail_max;
    j["flat_tail"] = r.flat_tail;
  }
  return j;
}

inline json spectrum_summary(const SpectrumResult& s) {
  json j;
  j["alpha0"] = detail::finite_or_null(s.alpha0);
  j["alpha1"] = detail::finite_or_null(s.alpha1);
  if (s.range) {
    j["chi_low"] = s.range->low;
    j["chi_high"] = s.range->high;
  } else {
    j["chi_low"] = nullptr;
    j["chi_high"] = nullptr;
    j["range_error"] = s.range_error;
  }
  j["corner"] = s.corner ? corner_to_json(*s.corner) : json(nullptr);
  return j;
}

struct SupportingLines {
  double alpha = 0.0;
  /// Intercepts F_{l,alpha}(0) = E_l(alpha) per member; -inf when the
  /// member has no supporting line of that slope.
  std::vector<double> intercepts;
  bool nondecreasing = true;
};

struct FamilyReport {
  /// sup over the window of |P_last - P_l|, per member.
  std::vector<double> sup_gaps;
  bool gaps_decreasing = true;
  std::vector<SupportingLines> lines;
};

/// Checks a nested family: pressures nondecreasing along the family at
/// every grid q (MonotonicityViolation otherwise), sup gaps to the last
/// member on [window_lo, window_hi], and supporting-line intercepts.
inline FamilyReport family_convergence(const std::vector<PressureCurve>& curves, double window_lo, double window_hi,
                                       const std::vector<double>& alphas = {}, double tol = 1e-9,
                                       const ConjugateOptions& conj = {}) {
  if (curves.empty()) fail(ErrorCode::DomainError, "empty family");
  for (const auto& c : curves)
    if (c.q != curves.front().q) fail(ErrorCode::DomainError, "family curves must share the q grid");
  for (std::size_t l = 1; l < curves.size(); ++l)
    for (std::size_t i = 0; i < curves[l].size(); ++i)
      if (curves[l].value[i] < curves[l - 1].value[i] - tol) {
        std::ostringstream msg;
        msg << "pressure decreases at member " << l << ", q = " << curves[l].q[i];
        fail(ErrorCode::MonotonicityViolation, msg.str());
      }
  FamilyReport r;
  const auto& last = curves.back();
  for (const auto& c : curves) {
    double g = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i)
      if (c.q[i] >= window_lo - 1e-12 && c.q[i] <= window_hi + 1e-12)
        g = std::max(g, std::abs(last.value[i] - c.value[i]));
    r.sup_gaps.push_back(g);
  }
  for (std::size_t l = 1; l < r.sup_gaps.size(); ++l)
    if (!(r.sup_gaps[l] < r.sup_gaps[l - 1])) r.gaps_decreasing = false;
  for (double a : alphas) {
    SupportingLines s;
    s.alpha = a;
    for (const auto& c : curves) s.intercepts.push_back(conjugate_at(c, a, conj).value);
    for (std::size_t l = 1; l < s.intercepts.size(); ++l)
      if (s.intercepts[l] < s.intercepts[l - 1] - tol) s.nondecreasing = false;
    r.lines.push_back(std::move(s));
  }
  return r;
}

}  // namespace rank1::thermo
