#pragma once

// Suspension flows over subshifts of finite type with locally constant roof
// and potential: flow pressure by the root equation P(q Phi - c r) = 0,
// equilibrium statistics, and a periodic-orbit oracle.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <iomanip>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rank1/core/error.hpp"
#include "rank1/core/numerics.hpp"
#include "rank1/core/parallel.hpp"
#include "rank1/symbolic/sft.hpp"

namespace rank1::symbolic {

using json = nlohmann::json;

/// Sft plus per-symbol roof r (return time) and potential Phi (integral of
/// the flow potential over one return).
struct SuspensionModel {
  Sft sft;
  std::vector<double> roof;
  std::vector<double> potential;
  std::string provenance = "hand-built";

  static SuspensionModel make(Sft sft, std::vector<double> roof, std::vector<double> potential,
                              std::string provenance = "hand-built") {
    SuspensionModel m{std::move(sft), std::move(roof), std::move(potential), std::move(provenance)};
    m.validate();
    return m;
  }

  void validate() const {
    if (roof.size() != sft.size() || potential.size() != sft.size())
      fail(ErrorCode::InvalidConfig, "roof and potential need one entry per symbol");
    for (double r : roof)
      if (!(r > 0.0) || !std::isfinite(r)) fail(ErrorCode::InvalidConfig, "roof values must be positive");
    for (double p : potential)
      if (!std::isfinite(p)) fail(ErrorCode::InvalidConfig, "potential values must be finite");
  }

  double min_roof() const { return *std::min_element(roof.begin(), roof.end()); }
  double max_abs_potential() const {
    double m = 0.0;
    for (double p : potential) m = std::max(m, std::abs(p));
    return m;
  }

  /// Sub-model on the given symbols.
  SuspensionModel restrict_to(const std::vector<std::size_t>& symbols) const {
    std::vector<double> r, p;
    for (auto s : symbols) {
      r.push_back(roof[s]);
      p.push_back(potential[s]);
    }
    return make(sft.restrict_to(symbols), r, p, provenance);
  }
};

/// Reads {"matrix": [[0/1...]], "roof": [...], "potential": [...]}; a
/// section coding export uses "transition_matrix" for the matrix.
inline SuspensionModel suspension_from_json(const json& j) {
  try {
    const auto& mj = j.contains("matrix") ? j.at("matrix") : j.at("transition_matrix");
    auto a = mj.get<std::vector<std::vector<int>>>();
    auto roof = j.at("roof").get<std::vector<double>>();
    auto pot = j.at("potential").get<std::vector<double>>();
    std::string prov = j.value("provenance", j.contains("transition_matrix") ? "section-coding" : "hand-built");
    return SuspensionModel::make(Sft(std::move(a)), std::move(roof), std::move(pot), prov);
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidConfig, std::string("malformed suspension model: ") + e.what());
  }
}

inline json suspension_to_json(const SuspensionModel& m) {
  return {{"matrix", m.sft.matrix()}, {"roof", m.roof}, {"potential", m.potential}, {"provenance", m.provenance}};
}

namespace detail {

inline std::vector<double> shifted_weights(const SuspensionModel& m, double q, double c) {
  std::vector<double> w(m.sft.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = q * m.potential[i] - c * m.roof[i];
  return w;
}

inline double root_bracket(const SuspensionModel& m, double q) {
  double B = (std::abs(q) * m.max_abs_potential() + std::log(static_cast<double>(m.sft.size()))) / m.min_roof();
  return B * (1.0 + 1e-9) + 1e-12;
}

}  // namespace detail

/// Root c of c -> P_discrete(q Phi - c r), which is strictly decreasing.
/// Bisection runs to an absolute width of 1e-15.
inline double flow_pressure(const SuspensionModel& m, double q, const PowerOptions& opts = {}) {
  if (m.sft.components().empty()) fail(ErrorCode::DomainError, "shift has no periodic orbits");
  const double B = detail::root_bracket(m, q);
  return bisect_root(
      [&](double c) { return discrete_pressure(m.sft, detail::shifted_weights(m, q, c), opts); }, -B, B,
      1e-15);
}

/// Shifts the potential so that flow_pressure(1) = 0.
inline SuspensionModel calibrate(const SuspensionModel& m) {
  const double c = flow_pressure(m, 1.0);
  SuspensionModel out = m;
  for (std::size_t i = 0; i < out.potential.size(); ++i) out.potential[i] -= c * out.roof[i];
  return out;
}

struct EquilibriumStats {
  double q = 0.0;
  double pressure = 0.0;
  /// chi(mu_q) = -dP/dq.
  double exponent = 0.0;
  /// h(mu_q) = P(q) + q chi(mu_q).
  double entropy = 0.0;
  /// inf_q' P(q') + q' chi(mu_q) and its distance from the entropy.
  double conjugate_at_exponent = 0.0;
  double identity_error = 0.0;
  /// [min, max] of -Phi / r over symbols (range of possible exponents).
  double exponent_floor = 0.0;
  double exponent_ceiling = 0.0;
};

struct EquilibriumOptions {
  double step = 1e-5;
  /// Checked identity E(chi(mu_q)) = h(mu_q).
  double identity_tol = 1e-6;
  PowerOptions power{1e-14, 1'000'000};
};

/// Exponent by a Richardson-extrapolated central difference of the flow
/// pressure; entropy by P + q chi; then checks E(chi) = h where E is the
/// conjugate inf_q' (P(q') + q' chi), minimised around q.
inline EquilibriumStats equilibrium_stats(const SuspensionModel& m, double q,
                                          const EquilibriumOptions& opts = {}) {
  auto P = [&](double x) { return flow_pressure(m, x, opts.power); };
  const double h = opts.step;
  EquilibriumStats s;
  s.q = q;
  s.pressure = P(q);
  const double d1 = (P(q + h) - P(q - h)) / (2 * h);
  const double d2 = (P(q + h / 2) - P(q - h / 2)) / h;
  s.exponent = -(4 * d2 - d1) / 3;
  s.entropy = s.pressure + q * s.exponent;
  auto [qmin, emin] = golden_minimize([&](double x) { return P(x) + x * s.exponent; }, q - 1.0, q + 1.0, 1e-9);
  (void)qmin;
  s.conjugate_at_exponent = emin;
  s.identity_error = std::abs(emin - s.entropy);
  s.exponent_floor = std::numeric_limits<double>::infinity();
  s.exponent_ceiling = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < m.roof.size(); ++i) {
    s.exponent_floor = std::min(s.exponent_floor, -m.potential[i] / m.roof[i]);
    s.exponent_ceiling = std::max(s.exponent_ceiling, -m.potential[i] / m.roof[i]);
  }
  if (s.identity_error > opts.identity_tol)
    fail(ErrorCode::ConvergenceFailure,
         "conjugate identity E(chi) = h off by " + std::to_string(s.identity_error) + " at q = " + std::to_string(q));
  return s;
}

/// Equilibrium statistics over a q grid, parallel over q.
inline std::vector<EquilibriumStats> pressure_sweep(const SuspensionModel& m, const std::vector<double>& qs,
                                                    unsigned threads = 1, const EquilibriumOptions& opts = {}) {
  std::vector<EquilibriumStats> out(qs.size());
  parallel_for(qs.size(), threads, [&](std::size_t i) { out[i] = equilibrium_stats(m, qs[i], opts); });
  return out;
}

/// CSV columns: q, pressure, exponent, entropy.
inline void write_sweep_csv(std::ostream& os, const std::vector<EquilibriumStats>& sweep) {
  os << "q,pressure,exponent,entropy\n" << std::setprecision(17);
  for (const auto& s : sweep) os << s.q << ',' << s.pressure << ',' << s.exponent << ',' << s.entropy << '\n';
}

struct PrimeCycle {
  std::vector<std::size_t> symbols;
  double potential = 0.0;  // sum of Phi along the cycle
  double roof = 0.0;       // sum of r along the cycle
};

/// Prime cycles of length <= n_max, each listed once by its
/// lexicographically least rotation.
inline std::vector<PrimeCycle> prime_cycles(const SuspensionModel& m, std::size_t n_max,
                                            std::size_t budget = 20'000'000) {
  std::vector<PrimeCycle> out;
  const std::size_t size = m.sft.size();
  std::vector<std::size_t> word;
  std::size_t visited = 0;
  auto is_least_primitive = [](const std::vector<std::size_t>& w) {
    const std::size_t n = w.size();
    for (std::size_t r = 1; r < n; ++r) {
      // compare rotation r with w
      for (std::size_t i = 0; i < n; ++i) {
        std::size_t a = w[(i + r) % n], b = w[i];
        if (a < b) return false;
        if (a > b) goto next;
      }
      return false;  // equal rotation: not primitive
    next:;
    }
    return true;
  };
  std::function<void(std::size_t)> extend = [&](std::size_t n) {
    if (++visited > budget) fail(ErrorCode::Overflow, "cycle enumeration exceeded its budget");
    if (word.size() == n) {
      if (m.sft.edge(word.back(), word.front()) && is_least_primitive(word)) {
        PrimeCycle c{word, 0.0, 0.0};
        for (auto s : word) {
          c.potential += m.potential[s];
          c.roof += m.roof[s];
        }
        out.push_back(std::move(c));
      }
      return;
    }
    for (std::size_t s = word.front(); s < size; ++s) {
      if (!m.sft.edge(word.back(), s)) continue;
      word.push_back(s);
      extend(n);
      word.pop_back();
    }
  };
  for (std::size_t n = 1; n <= n_max; ++n)
    for (std::size_t s0 = 0; s0 < size; ++s0) {
      word.assign(1, s0);
      extend(n);
    }
  return out;
}

struct BowenEstimate {
  double value = 0.0;
  double flow_pressure = 0.0;
  double gap = 0.0;
  std::size_t cycles = 0;
};

/// Periodic-orbit estimate of the flow pressure: the largest real root c of
/// the cycle expansion of 1/zeta(c) = prod_gamma (1 - exp(q Phi_gamma -
/// c r_gamma)), truncated at total cycle length n_max.
inline BowenEstimate bowen_orbit_pressure(const SuspensionModel& m, double q, std::size_t n_max) {
  if (n_max < 2) fail(ErrorCode::DomainError, "n_max must be at least 2");
  auto cycles = prime_cycles(m, n_max);
  if (cycles.empty()) fail(ErrorCode::DomainError, "no periodic orbits of length <= n_max");
  auto inverse_zeta = [&](double c) {
    std::vector<double> poly(n_max + 1, 0.0);
    poly[0] = 1.0;
    for (const auto& g : cycles) {
      const std::size_t L = g.symbols.size();
      double e = q * g.potential - c * g.roof;
      if (e > 700.0) fail(ErrorCode::Overflow, "cycle weight overflow");
      const double t = std::exp(e);
      for (std::size_t k = n_max; k >= L; --k) {
        poly[k] -= t * poly[k - L];
        if (k == L) break;
      }
    }
    double s = 0.0;
    for (double v : poly) s += v;
    if (!std::isfinite(s)) fail(ErrorCode::Overflow, "cycle expansion overflow");
    return s;
  };
  double max_rate = -std::numeric_limits<double>::infinity();
  for (const auto& g : cycles) max_rate = std::max(max_rate, q * g.potential / g.roof);
  double hi = std::max(detail::root_bracket(m, q), max_rate) + 1.0;
  double f_hi = inverse_zeta(hi);
  if (!(f_hi > 0.0)) fail(ErrorCode::BracketFailure, "cycle expansion not positive at the upper bracket");
  const double span = 2.0 * hi + 2.0 * std::abs(max_rate) + 1.0;
  const int steps = 4000;
  const double top = hi;
  double lo = hi;
  bool found = false;
  for (int i = 1; i <= steps && !found; ++i) {
    double c = top - span * i / steps;
    if (inverse_zeta(c) <= 0.0) {
      lo = c;
      found = true;
    } else {
      hi = c;
    }
  }
  if (!found) fail(ErrorCode::BracketFailure, "cycle expansion has no root in range");
  BowenEstimate out;
  out.value = bisect_root(inverse_zeta, lo, hi);
  out.flow_pressure = flow_pressure(m, q);
  out.gap = std::abs(out.value - out.flow_pressure);
  out.cycles = cycles.size();
  return out;
}

}  // namespace rank1::symbolic
