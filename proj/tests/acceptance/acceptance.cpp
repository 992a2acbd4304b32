// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rank1/jacobi/riccati.hpp"
#include "rank1/lyapunov/exponents.hpp"
#include "rank1/orbits/bridge.hpp"
#include "rank1/orbits/coding.hpp"
#include "rank1/orbits/library.hpp"
#include "rank1/symbolic/suspension.hpp"
#include "rank1/thermo/spectrum.hpp"
#include "support/oracles.hpp"

using namespace rank1;
using geometry::GeodesicPath;
using geometry::SurfaceModel;
using geometry::UnitTangentState;
using geometry::WarpProfile;
using symbolic::Sft;
using symbolic::SuspensionModel;

namespace {

/// Collects failed sub-checks of one criterion.
class Criterion {
 public:
  void near(const std::string& what, double measured, double reference, double tol) {
    const double err = std::abs(measured - reference);
    worst_ = std::max(worst_, err / tol);
    if (!(err <= tol)) {
      std::ostringstream os;
      os << what << ": " << measured << " vs " << reference << " (err " << err << " > " << tol << ")";
      failures_.push_back(os.str());
    }
  }
  void at_most(const std::string& what, double measured, double tol) {
    if (tol > 0.0) worst_ = std::max(worst_, measured / tol);
    if (!(measured <= tol)) {
      std::ostringstream os;
      os << what << ": " << measured << " > " << tol;
      failures_.push_back(os.str());
    }
  }
  void holds(const std::string& what, bool ok) {
    if (!ok) failures_.push_back(what);
  }
  bool passed() const { return failures_.empty(); }
  const std::vector<std::string>& failures() const { return failures_; }
  double worst() const { return worst_; }

 private:
  std::vector<std::string> failures_;
  double worst_ = 0.0;
};

const double kLow = std::log(4.0 / 3.0);
const double kHigh = std::log(4.0);

SuspensionModel calibrated() {
  return SuspensionModel::make(Sft::full_shift(2), {1.0, 1.0}, {-kLow, -kHigh}, "calibrated two-shift");
}

thermo::PressureSource flow_source(const SuspensionModel& m) {
  return [m](double q) { return symbolic::flow_pressure(m, q); };
}

/// log((3/4)^q + (1/4)^q), the calibrated pressure in closed form.
double closed_form(double q) { return std::log(std::pow(0.75, q) + std::pow(0.25, q)); }

// ---------------------------------------------------------------------------

void constant_curvature(Criterion& c) {
  for (double k : {1.0, 2.0}) {
    const std::string tag = " (k = " + std::to_string(static_cast<int>(k)) + ")";
    auto half_plane = SurfaceModel::constant_negative(k);
    jacobi::BurnInOptions burn;
    burn.t_burn = 20.0 / k;
    auto v0 = UnitTangentState::from_angle({0.3, 1.2}, 0.7);
    auto tr = jacobi::unstable_riccati(half_plane, v0, 50.0, 1e-3, burn);
    double dev = 0.0;
    for (const auto& s : tr.samples) dev = std::max(dev, std::abs(s.phi + k));
    c.at_most("max |phi_u + k|" + tag, dev, 1e-6);
    c.near("chi over T = 50" + tag, tr.mean_neg_phi(), k, 1e-4);

    lyapunov::ExponentOptions eo;
    eo.dt = 1e-3;
    auto e = lyapunov::exponent_estimate(half_plane, v0, 50.0, eo);
    c.near("forward exponent" + tag, e.chi_plus, k, 1e-4);

    auto oct = SurfaceModel::octagon(k);
    auto orbit = orbits::octagon_word_orbit(oct, {0});
    auto ce = lyapunov::closed_orbit_exponent(oct, orbit.path, 1e-3);
    c.near("octagon closed-orbit exponent" + tag, ce.exponent, k, 1e-6);
    c.near("octagon Schwarz saturation" + tag, ce.exponent, ce.schwarz_bound, 1e-6);

    auto collar = SurfaceModel::collar(WarpProfile::cosh(k), 3.0 / k);
    auto waist = geometry::integrate_geodesic(collar, UnitTangentState::from_angle({0.0, 0.0}, kPi / 2), kTwoPi / k,
                                              1e-3);
    auto cw = lyapunov::closed_orbit_exponent(collar, waist, 1e-3);
    c.near("collar waist exponent" + tag, cw.exponent, k, 1e-6);
    c.near("collar waist Schwarz saturation" + tag, cw.exponent, cw.schwarz_bound, 1e-6);
  }
}

void riccati_oracle(Criterion& c) {
  using jacobi::CurvatureHistory;
  auto max_err = [](const jacobi::RiccatiTrace& tr, const std::function<double(double)>& exact) {
    double e = 0.0;
    for (const auto& s : tr.samples) e = std::max(e, std::abs(s.u - exact(s.t)));
    return e;
  };
  for (double k : {1.0, 2.0}) {
    for (double shift : {0.0, 0.5}) {
      auto K = CurvatureHistory::analytic([k](double) { return -k * k; });
      auto exact = [k, shift](double t) { return k * std::tanh(k * (t + shift)); };
      auto tr = jacobi::riccati_integrate(K, exact(0.0), 0.0, 50.0, 1e-3);
      c.at_most("k tanh(k(t+T)) error, k = " + std::to_string(k) + ", T = " + std::to_string(shift),
                max_err(tr, exact), 1e-6);
    }
  }
  for (double cc : {0.5, 1.0, 3.0}) {
    auto K = CurvatureHistory::analytic([](double) { return 0.0; });
    auto exact = [cc](double t) { return 1.0 / (t + cc); };
    auto tr = jacobi::riccati_integrate(K, exact(0.0), 0.0, 50.0, 1e-3);
    c.at_most("1/(t+c) error, c = " + std::to_string(cc), max_err(tr, exact), 1e-6);
  }
  // Step halving on a span where the truncation error dominates rounding.
  auto K = CurvatureHistory::analytic([](double) { return -1.0; });
  auto exact = [](double t) { return std::tanh(t); };
  const double coarse = max_err(jacobi::riccati_integrate(K, 0.0, 0.0, 10.0, 0.1), exact);
  const double fine = max_err(jacobi::riccati_integrate(K, 0.0, 0.0, 10.0, 0.05), exact);
  c.near("error ratio on halving dt", coarse / fine, 16.0, 2.0);
}

void symbolic_exactness(Criterion& c) {
  c.near("full 2-shift entropy", symbolic::discrete_pressure(Sft::full_shift(2), {0.0, 0.0}), std::log(2.0), 1e-9);
  c.near("golden-mean entropy", symbolic::discrete_pressure(Sft::golden_mean(), {0.0, 0.0}),
         std::log((1.0 + std::sqrt(5.0)) / 2.0), 1e-9);
  auto roof2 = SuspensionModel::make(Sft::full_shift(2), {2.0, 2.0}, {0.0, 0.0});
  c.near("roof-2 flow entropy", symbolic::flow_pressure(roof2, 0.0), std::log(2.0) / 2.0, 1e-9);
}

void pesin_calibration(Criterion& c) {
  auto m = calibrated();
  c.near("flow pressure at q = 1", symbolic::flow_pressure(m, 1.0), 0.0, 1e-9);
  c.near("flow pressure at q = 0", symbolic::flow_pressure(m, 0.0), std::log(2.0), 1e-9);
}

void corner_reproduction(Criterion& c) {
  auto curve = thermo::sample_pressure_curve(thermo::with_zero_component(flow_source(calibrated())), -40.0, 40.0, 0.05);
  double tail = 0.0;
  for (std::size_t i = 0; i < curve.size(); ++i)
    if (curve.q[i] >= 1.0 - 1e-12) tail = std::max(tail, std::abs(curve.value[i]));
  c.at_most("max |P(q)| on [1, 40]", tail, 1e-9);

  // Reference slopes and exponents from the closed form.
  const double alpha1 = 0.75 * kLow + 0.25 * kHigh;
  const double alpha0 = 0.5 * (kLow + kHigh);
  c.near("closed-form alpha_1", alpha1, 0.562335, 1e-6);
  c.near("closed-form alpha_0", alpha0, 0.836988, 1e-6);
  const double h = 1e-6;
  c.near("closed-form slope at 1", (closed_form(1.0 + h) - closed_form(1.0 - h)) / (2 * h), -alpha1, 1e-8);

  auto r = thermo::detect_corner(curve, 1.0);
  c.holds("corner declared at q = 1", r.corner);
  c.near("D_R at q = 1", r.d_right, 0.0, 2e-3);
  c.near("D_L at q = 1", r.d_left, -0.562335, 2e-3);

  double worst = 0.0;
  for (double a : thermo::linspace(0.01, 0.5623, 200))
    worst = std::max(worst, std::abs(thermo::conjugate_at(curve, a).value - a));
  c.at_most("max |E(alpha) - alpha| on [0.01, 0.5623]", worst, 1e-4);
  c.near("E(0.836988)", thermo::conjugate_at(curve, 0.836988).value, std::log(2.0), 1e-4);
}

void spectrum_identities(Criterion& c) {
  std::vector<SuspensionModel> models{
      calibrated(), symbolic::calibrate(SuspensionModel::make(Sft::golden_mean(), {1.0, 1.5}, {-0.3, -1.2})),
      symbolic::calibrate(SuspensionModel::make(Sft({{1, 1, 0}, {0, 1, 1}, {1, 1, 1}}), {0.7, 1.0, 1.9},
                                                {-0.2, -1.4, -0.9}))};
  const auto qs = thermo::linspace(-5.0, 5.0, 20);
  for (std::size_t mi = 0; mi < models.size(); ++mi) {
    const std::string tag = " (model " + std::to_string(mi) + ")";
    const auto& m = models[mi];
    auto curve = thermo::sample_pressure_curve(flow_source(m), -40.0, 40.0, 0.05);
    auto s = thermo::legendre_conjugate(curve);
    c.holds("exponent range stabilized" + tag, s.range.has_value());
    double identity = 0.0;
    for (double q : qs) {
      auto st = symbolic::equilibrium_stats(m, q);
      identity = std::max(identity, std::abs(thermo::conjugate_at(curve, st.exponent).value - st.entropy));
    }
    c.at_most("max |E(chi(mu_q)) - h(mu_q)| over 20 q" + tag, identity, 1e-6);
    double formula = 0.0, outside = 0.0;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (s.escaping[j] || !(s.alpha[j] > 0.0)) continue;
      formula = std::max(formula, std::abs(s.dimension[j] - (1.0 + 2.0 * s.entropy[j] / s.alpha[j])));
      if (s.unreliable[j] || !s.range || s.alpha[j] < s.range->low || s.alpha[j] > s.range->high) continue;
      outside = std::max({outside, -s.ratio[j], s.ratio[j] - 1.0});
    }
    c.at_most("dimension minus 1 + 2E/alpha" + tag, formula, 0.0);
    c.at_most("D outside [0, 1]" + tag, outside, 1e-6);
  }
}

void exponent_range(Criterion& c) {
  auto curve = thermo::sample_pressure_curve(flow_source(calibrated()), -40.0, 40.0, 0.05);
  auto r = thermo::exponent_range(curve);
  c.near("lower exponent", r.low, kLow, 2e-3);
  c.near("upper exponent", r.high, kHigh, 2e-3);
}

void family_convergence(Criterion& c) {
  auto full = calibrated();
  auto golden = full;
  golden.sft = Sft::golden_mean();
  auto cycle = full;
  cycle.sft = Sft::cycle(2);
  std::vector<thermo::PressureCurve> fam;
  for (const auto& m : {cycle, golden, full}) fam.push_back(thermo::sample_pressure_curve(flow_source(m), -40.0, 40.0, 0.05));
  // family_convergence raises MonotonicityViolation on any decrease.
  auto r = thermo::family_convergence(fam, -5.0, 5.0, {0.6});
  c.holds("sup gaps strictly decreasing", r.gaps_decreasing);
  c.holds("supporting lines at alpha = 0.6 nondecreasing", r.lines.at(0).nondecreasing);
  double worst = 0.0;
  for (std::size_t l = 1; l < fam.size(); ++l)
    for (std::size_t i = 0; i < fam[l].size(); ++i) worst = std::max(worst, fam[l - 1].value[i] - fam[l].value[i]);
  c.at_most("largest pressure decrease along the family", worst, 1e-12);
}

void shadowing_and_bridging(Criterion& c) {
  const auto oct = SurfaceModel::octagon(1.0);
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (const auto& w : std::vector<std::vector<int>>{{0}, {2}, {0, 1}}) {
    auto exact = orbits::octagon_word_pseudo_orbit(oct, w);
    auto states = exact.states;
    for (auto& s : states)
      s = UnitTangentState::from_angle({s.position.x + 1e-3 * unit(rng), s.position.y + 1e-3 * unit(rng)},
                                       s.angle() + 1e-3 * unit(rng));
    auto r = orbits::refine_closed_orbit(oct, orbits::make_pseudo_orbit(oct, states, exact.durations));
    c.at_most("refined residual, word of length " + std::to_string(w.size()), r.residual, 1e-8);
  }

  auto a = orbits::octagon_word_orbit(oct, {0});
  auto b = orbits::octagon_word_orbit(oct, {2});
  auto bridge = orbits::refine_closed_orbit(oct, orbits::bridge_orbits(oct, a.path, b.path));
  c.at_most("bridge residual", bridge.residual, 1e-8);
  c.at_most("bridge shadowing distance", bridge.shadow_distance, 0.1);

  const orbits::SectionSpec section{UnitTangentState::from_angle({0.0, 0.0}, kPi / 4), 0.5};
  auto coding_of = [&](const std::vector<const GeodesicPath*>& paths) {
    orbits::OrbitLibrary lib;
    for (std::size_t i = 0; i < paths.size(); ++i) orbits::add_orbit(lib, oct, *paths[i], "orbit " + std::to_string(i));
    return orbits::build_markov_coding(oct, lib, section);
  };
  auto three = coding_of({&a.path, &b.path, &bridge.path});
  c.holds("three-orbit coding strongly connected", Sft(three.transitions).strongly_connected());
  const double p3 = symbolic::flow_pressure(three.suspension(), 0.0);
  const double pa = symbolic::flow_pressure(coding_of({&a.path}).suspension(), 0.0);
  const double pb = symbolic::flow_pressure(coding_of({&b.path}).suspension(), 0.0);
  c.near("single-cycle pressure at q = 0 (first)", pa, 0.0, 1e-9);
  c.near("single-cycle pressure at q = 0 (second)", pb, 0.0, 1e-9);
  c.holds("coded pressure at q = 0 strictly positive", p3 > 0.0);
  c.holds("coded pressure exceeds both cycles", p3 > std::max(pa, pb));
}

void lambda_ell_nesting(Criterion& c) {
  const auto flat = SurfaceModel::collar(WarpProfile::flat_band(1.0, 0.5, 1.0), 3.0);
  orbits::OrbitLibrary lib;
  std::vector<std::string> flat_labels;
  for (double s : {-0.4, 0.0, 0.25}) {
    auto path = geometry::integrate_geodesic(flat, UnitTangentState::from_angle({s, 0.0}, kPi / 2), kTwoPi, 2e-3);
    flat_labels.push_back("flat waist s=" + std::to_string(s));
    orbits::add_orbit(lib, flat, std::move(path), flat_labels.back());
  }
  auto cosh = SurfaceModel::collar(WarpProfile::cosh(1.0), 3.0);
  orbits::add_orbit(lib, cosh,
                    geometry::integrate_geodesic(cosh, UnitTangentState::from_angle({0.0, 0.0}, kPi / 2), kTwoPi, 2e-3),
                    "cosh waist");
  const auto oct = SurfaceModel::octagon(1.0);
  for (const auto& w : std::vector<std::vector<int>>{{0}, {2}, {0, 1}}) {
    std::string label = "word";
    for (int x : w) label += " " + std::to_string(x);
    orbits::add_orbit(lib, oct, orbits::octagon_word_orbit(oct, w).path, label);
  }

  std::vector<std::set<std::string>> sets;
  const std::vector<std::size_t> ells{1, 2, 3, 4, 8, 16, 32};
  for (auto ell : ells) {
    auto sub = orbits::build_lambda_ell(lib, ell);
    auto labels = sub.labels();
    sets.emplace_back(labels.begin(), labels.end());
    for (const auto& l : flat_labels) c.holds("flat waist excluded at l = " + std::to_string(ell), !sets.back().count(l));
  }
  for (std::size_t i = 0; i + 1 < sets.size(); ++i)
    c.holds("nesting from l = " + std::to_string(ells[i]),
            std::includes(sets[i + 1].begin(), sets[i + 1].end(), sets[i].begin(), sets[i].end()));
  c.holds("non-flat orbits retained", sets.back().size() == lib.orbits.size() - flat_labels.size());
  double worst = -1.0;
  for (const auto& o : lib.orbits) worst = std::max(worst, o.exponent - o.schwarz_bound);
  c.at_most("largest exponent minus Schwarz bound", worst, 1e-6);
}

void legendre_duality(Criterion& c) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  double recover = 0.0, concave = -std::numeric_limits<double>::infinity(), support = -std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 81 + static_cast<std::size_t>(U(rng) * 80);
    const double h = 0.05 + 0.1 * U(rng);
    const double q0 = -0.5 * h * static_cast<double>(n - 1) + (U(rng) - 0.5);
    const int kinks = 1 + static_cast<int>(U(rng) * 6);
    std::vector<std::size_t> at;
    for (int k = 0; k < kinks; ++k) at.push_back(2 + static_cast<std::size_t>(U(rng) * static_cast<double>(n - 4)));
    std::sort(at.begin(), at.end());
    std::vector<double> q(n), v(n);
    double slope = -4.0 * U(rng) - 0.2, y = 3.0 * U(rng) - 1.0;
    for (std::size_t i = 0, next = 0; i < n; ++i) {
      q[i] = q0 + h * static_cast<double>(i);
      if (i > 0) y += slope * h;
      v[i] = y;
      while (next < at.size() && at[next] == i) {
        slope += 1.5 * U(rng);
        ++next;
      }
    }
    auto curve = thermo::curve_from_values(q, v, "random piecewise-linear");
    auto s = thermo::legendre_conjugate(curve, thermo::secant_alpha_grid(curve));
    auto back = thermo::biconjugate(s, curve.q);
    for (std::size_t i = 0; i < n; ++i) recover = std::max(recover, std::abs(back[i] - v[i]));
    concave = std::max(concave, thermo::concavity_defect(s));
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (s.escaping[j]) continue;
      for (std::size_t i = 0; i < n; ++i) support = std::max(support, s.entropy[j] - q[i] * s.alpha[j] - v[i]);
    }
  }
  c.at_most("max biconjugate error", recover, 1e-9);
  c.at_most("concavity defect of E", concave, 1e-9);
  c.at_most("max of E(alpha) - q alpha - P(q)", support, 1e-9);
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Criterion&)>>> criteria{
      {"constant-curvature exactness", constant_curvature},
      {"Riccati closed-form oracle", riccati_oracle},
      {"symbolic pressure exactness", symbolic_exactness},
      {"Pesin calibration", pesin_calibration},
      {"corner at q = 1", corner_reproduction},
      {"spectrum identities", spectrum_identities},
      {"exponent range", exponent_range},
      {"monotone and uniform convergence", family_convergence},
      {"shadowing, bridging and coding", shadowing_and_bridging},
      {"Lambda_l nesting", lambda_ell_nesting},
      {"Legendre duality", legendre_duality},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Criterion c;
    const auto start = std::chrono::steady_clock::now();
    std::string error;
    try {
      criteria[i].second(c);
    } catch (const std::exception& e) {
      error = e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool ok = error.empty() && c.passed();
    failed += ok ? 0 : 1;
    std::cout << (ok ? "PASS " : "FAIL ") << std::setw(2) << i + 1 << "  " << criteria[i].first << "  (worst "
              << std::setprecision(3) << c.worst() << " of tolerance, " << std::fixed << secs << " s)"
              << std::defaultfloat << '\n';
    if (!error.empty()) std::cout << "       error: " << error << '\n';
    for (const auto& f : c.failures()) std::cout << "       " << f << '\n';
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << " of " << criteria.size() << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}
