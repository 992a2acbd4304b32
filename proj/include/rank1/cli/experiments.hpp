#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rank1/core/error.hpp"
#include "rank1/geometry/io.hpp"
#include "rank1/jacobi/riccati.hpp"
#include "rank1/lyapunov/exponents.hpp"
#include "rank1/orbits/bridge.hpp"
#include "rank1/orbits/library.hpp"
#include "rank1/symbolic/suspension.hpp"
#include "rank1/thermo/spectrum.hpp"

namespace rank1::cli {

using json = nlohmann::json;
namespace fs = std::filesystem;
using geometry::SurfaceModel;
using geometry::UnitTangentState;
using geometry::WarpProfile;

inline constexpr const char* kVersion = "0.1.0";

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"riccati-validate", "anosov-baseline", "corner-demo",
                                              "lambda-ell-sweep", "spectrum-report"};
  return names;
}

inline bool is_symbolic(const std::string& name) { return name == "corner-demo" || name == "spectrum-report"; }

struct ExperimentConfig {
  std::string experiment;
  /// Surface model, or a suspension model for the symbolic experiments.
  /// Empty selects the experiment's default.
  json model = json::object();
  json params = json::object();
  std::uint64_t seed = 0;
  std::string output = "run";
  /// Not serialized: results never depend on it.
  unsigned threads = 1;
};

inline json config_to_json(const ExperimentConfig& c) {
  return {{"experiment", c.experiment}, {"model", c.model}, {"params", c.params}, {"seed", c.seed}, {"output", c.output}};
}

/// Tolerances, steps and horizons must be positive.
inline bool must_be_positive(const std::string& key) {
  return key == "dt" || key == "T" || key == "step" || key == "span" || key.find("tol") != std::string::npos;
}

inline void validate_config(const ExperimentConfig& c) {
  const auto& names = experiment_names();
  if (std::find(names.begin(), names.end(), c.experiment) == names.end())
    fail(ErrorCode::InvalidConfig, "unknown experiment '" + c.experiment + "'");
  if (!c.params.is_object()) fail(ErrorCode::InvalidConfig, "params must be an object");
  for (const auto& [key, v] : c.params.items()) {
    if (!must_be_positive(key)) continue;
    if (!v.is_number()) fail(ErrorCode::InvalidConfig, "parameter '" + key + "' must be a number");
    if (!(v.get<double>() > 0.0)) fail(ErrorCode::InvalidConfig, "parameter '" + key + "' must be positive");
  }
  if (!c.model.is_object()) fail(ErrorCode::InvalidConfig, "model must be an object");
  if (!c.model.empty()) {
    if (is_symbolic(c.experiment)) {
      if (!c.model.contains("file")) symbolic::suspension_from_json(c.model);
    } else {
      geometry::model_from_json(c.model);
    }
  }
  if (c.output.empty()) fail(ErrorCode::InvalidConfig, "output directory is empty");
}

inline ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) fail(ErrorCode::InvalidConfig, "config must be a JSON object");
  ExperimentConfig c;
  try {
    c.experiment = j.at("experiment").get<std::string>();
    c.model = j.value("model", json::object());
    c.params = j.value("params", json::object());
    c.seed = j.value("seed", std::uint64_t{0});
    c.output = j.value("output", std::string("run"));
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidConfig, std::string("malformed config: ") + e.what());
  }
  validate_config(c);
  return c;
}

inline ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::InvalidConfig, "cannot read config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidConfig, std::string("config is not valid JSON: ") + e.what());
  }
  return config_from_json(j);
}

struct Check {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

inline json check_to_json(const Check& c) {
  json j{{"name", c.name}, {"passed", c.passed}, {"tolerance", c.tolerance}};
  j["measured"] = std::isfinite(c.measured) ? json(c.measured) : json(nullptr);
  if (!c.detail.empty()) j["detail"] = c.detail;
  return j;
}

/// Artifacts and checks of one run.
class RunContext {
 public:
  RunContext(const ExperimentConfig& cfg, fs::path dir) : cfg_(cfg), dir_(std::move(dir)) {}

  const ExperimentConfig& config() const { return cfg_; }
  const fs::path& dir() const { return dir_; }

  double num(const std::string& key, double fallback) const {
    if (!cfg_.params.contains(key)) return fallback;
    const auto& v = cfg_.params.at(key);
    if (!v.is_number()) fail(ErrorCode::InvalidConfig, "parameter '" + key + "' must be a number");
    return v.get<double>();
  }
  template <typename T>
  T get(const std::string& key, T fallback) const {
    if (!cfg_.params.contains(key)) return fallback;
    try {
      return cfg_.params.at(key).get<T>();
    } catch (const json::exception&) {
      fail(ErrorCode::InvalidConfig, "parameter '" + key + "' has the wrong type");
    }
  }

  /// Records |measured - reference| <= tol.
  void near(const std::string& name, double measured, double reference, double tol) {
    const double err = std::abs(measured - reference);
    std::ostringstream d;
    d << std::setprecision(12) << "measured " << measured << ", reference " << reference;
    checks_.push_back({name, err <= tol, err, tol, d.str()});
  }
  /// Records measured <= tol.
  void at_most(const std::string& name, double measured, double tol, std::string detail = {}) {
    checks_.push_back({name, measured <= tol, measured, tol, std::move(detail)});
  }
  void holds(const std::string& name, bool ok, std::string detail = {}) {
    checks_.push_back({name, ok, ok ? 0.0 : 1.0, 0.0, std::move(detail)});
  }

  void write(const std::string& name, const std::function<void(std::ostream&)>& body) {
    std::ofstream os(dir_ / name);
    if (!os) fail(ErrorCode::IoError, "cannot write " + (dir_ / name).string());
    body(os);
    artifacts_.push_back(name);
  }
  void write_json(const std::string& name, const json& j) {
    write(name, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
  }

  json results = json::object();
  const std::vector<Check>& checks() const { return checks_; }
  const std::vector<std::string>& artifacts() const { return artifacts_; }
  bool passed() const {
    return std::all_of(checks_.begin(), checks_.end(), [](const Check& c) { return c.passed; });
  }

 private:
  const ExperimentConfig& cfg_;
  fs::path dir_;
  std::vector<Check> checks_;
  std::vector<std::string> artifacts_;
};

namespace detail {

inline SurfaceModel surface_model(const ExperimentConfig& c, const json& fallback) {
  return geometry::model_from_json(c.model.empty() ? fallback : c.model);
}

/// sqrt(-K) for models of constant curvature, else NaN.
inline double constant_rate(const SurfaceModel& m) {
  switch (m.kind()) {
    case SurfaceModel::Kind::ConstantNegative: return m.as<geometry::ConstantNegative>().k;
    case SurfaceModel::Kind::OctagonHyperbolic: return m.as<geometry::OctagonHyperbolic>().k;
    case SurfaceModel::Kind::CollarProfile: {
      const auto& w = m.as<geometry::CollarProfile>().warp;
      return w.kind == WarpProfile::Kind::Cosh ? w.k : std::nan("");
    }
    case SurfaceModel::Kind::CurvatureSignal: return std::nan("");
  }
  return std::nan("");
}

inline UnitTangentState default_state(const SurfaceModel& m, const RunContext& ctx) {
  if (ctx.config().params.contains("state")) {
    try {
      return geometry::state_from_json(ctx.config().params.at("state"));
    } catch (const json::exception& e) {
      fail(ErrorCode::InvalidConfig, std::string("malformed state: ") + e.what());
    }
  }
  switch (m.kind()) {
    case SurfaceModel::Kind::ConstantNegative: return UnitTangentState::from_angle({0.0, 1.0}, 0.0);
    // Along the waist: other collar geodesics leave the band.
    case SurfaceModel::Kind::CollarProfile: return UnitTangentState::from_angle({0.0, 0.0}, kPi / 2);
    default: return UnitTangentState::from_angle({0.0, 0.0}, 0.3);
  }
}

inline double max_abs_error(const jacobi::RiccatiTrace& tr, const std::function<double(double)>& exact) {
  double e = 0.0;
  for (const auto& s : tr.samples) e = std::max(e, std::abs(s.u - exact(s.t)));
  return e;
}

inline std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

// ---------------------------------------------------------------------------

inline void riccati_validate(RunContext& ctx) {
  const auto model = surface_model(ctx.config(), {{"type", "ConstantNegative"}, {"k", 1.0}});
  const double T = ctx.num("T", 50.0), dt = ctx.num("dt", 1e-3);
  const auto stride = ctx.get<std::size_t>("csv_stride", 10);
  if (stride == 0) fail(ErrorCode::InvalidConfig, "csv_stride must be positive");
  jacobi::BurnInOptions burn;
  burn.t_burn = ctx.num("t_burn", 0.0);
  const auto v0 = default_state(model, ctx);
  auto tr = jacobi::unstable_riccati(model, v0, T, dt, burn);
  ctx.write("riccati_trace.csv", [&](std::ostream& os) {
    os << "t,u,K,phi_u\n" << std::setprecision(17);
    for (std::size_t i = 0; i < tr.samples.size(); i += stride) {
      const auto& s = tr.samples[i];
      os << s.t << ',' << s.u << ',' << s.K << ',' << s.phi << '\n';
    }
  });
  double phi_max = -std::numeric_limits<double>::infinity();
  for (const auto& s : tr.samples) phi_max = std::max(phi_max, s.phi);
  const double chi = tr.mean_neg_phi();
  ctx.results["chi"] = chi;
  ctx.results["t_burn"] = tr.t_burn;
  const double k = constant_rate(model);
  if (std::isfinite(k)) {
    double dev = 0.0;
    for (const auto& s : tr.samples) dev = std::max(dev, std::abs(s.phi + k));
    ctx.at_most("phi_u equals -k after burn-in", dev, ctx.num("phi_tol", 1e-6));
    ctx.near("chi equals k", chi, k, ctx.num("chi_tol", 1e-4));
  } else {
    ctx.at_most("phi_u is nonpositive", phi_max, 1e-12);
    ctx.at_most("chi within the curvature bound", chi - std::sqrt(model.curvature_bound()), 1e-9);
  }

  // Closed-form Riccati solutions on the same step.
  const double span = ctx.num("span", 50.0);
  const double kk = std::isfinite(k) ? k : 1.0;
  auto neg = jacobi::CurvatureHistory::analytic([kk](double) { return -kk * kk; });
  auto flat = jacobi::CurvatureHistory::analytic([](double) { return 0.0; });
  auto tanh_tr = jacobi::riccati_integrate(neg, 0.0, 0.0, span, dt);
  auto rat_tr = jacobi::riccati_integrate(flat, 1.0, 0.0, span, dt);
  auto tanh_exact = [kk](double t) { return kk * std::tanh(kk * t); };
  auto rat_exact = [](double t) { return 1.0 / (t + 1.0); };
  const double e_tanh = max_abs_error(tanh_tr, tanh_exact), e_rat = max_abs_error(rat_tr, rat_exact);
  ctx.write("riccati_oracle.csv", [&](std::ostream& os) {
    os << "t,u_tanh,error_tanh,u_rational,error_rational\n" << std::setprecision(17);
    for (std::size_t i = 0; i < tanh_tr.samples.size() && i < rat_tr.samples.size(); i += stride) {
      const double t = tanh_tr.samples[i].t;
      os << t << ',' << tanh_tr.samples[i].u << ',' << tanh_tr.samples[i].u - tanh_exact(t) << ','
         << rat_tr.samples[i].u << ',' << rat_tr.samples[i].u - rat_exact(t) << '\n';
    }
  });
  const double oracle_tol = ctx.num("oracle_tol", 1e-6);
  ctx.at_most("tanh oracle max error", e_tanh, oracle_tol);
  ctx.at_most("rational oracle max error", e_rat, oracle_tol);
}

inline void anosov_baseline(RunContext& ctx) {
  const auto model = surface_model(ctx.config(), {{"type", "OctagonHyperbolic"}, {"k", 1.0}});
  lyapunov::EnsembleOptions opts;
  opts.exponent.dt = ctx.num("dt", 1e-2);
  opts.threads = ctx.config().threads;
  opts.bins = ctx.get<std::size_t>("bins", 20);
  const auto n = ctx.get<std::size_t>("n_seeds", 32);
  const double T = ctx.num("T", 50.0);
  auto e = lyapunov::ensemble_sample(model, n, T, ctx.config().seed, opts);
  ctx.write("ensemble.csv", [&](std::ostream& os) { lyapunov::write_ensemble_csv(os, e); });
  ctx.results["ensemble"] = lyapunov::ensemble_summary(e);
  const double k = constant_rate(model);
  const double tol = ctx.num("chi_tol", 1e-4);
  if (std::isfinite(k)) {
    double dev = 0.0;
    for (const auto& m : e.members)
      dev = std::max(dev, std::max(std::abs(m.estimate.chi_plus - k), std::abs(m.estimate.chi_minus - k)));
    ctx.at_most("every exponent equals k", dev, tol);
  } else {
    double over = -std::numeric_limits<double>::infinity();
    for (const auto& m : e.members) over = std::max(over, m.estimate.chi_plus - std::sqrt(model.curvature_bound()));
    ctx.at_most("exponents within the curvature bound", over, 1e-9);
  }
  if (model.kind() == SurfaceModel::Kind::OctagonHyperbolic) {
    auto r = orbits::octagon_word_orbit(model, {0});
    auto c = lyapunov::closed_orbit_exponent(model, r.path, ctx.num("orbit_dt", 1e-3));
    ctx.results["closed_orbit"] =
        json{{"period", r.path.period}, {"exponent", c.exponent}, {"schwarz_bound", c.schwarz_bound}};
    ctx.near("closed orbit exponent equals k", c.exponent, k, 1e-6);
    ctx.near("Schwarz bound saturated", c.exponent, c.schwarz_bound, 1e-6);
  }
}

/// Full 2-shift with roof 1 and the given potentials, optionally joined by
/// a component of zero pressure.
inline symbolic::SuspensionModel two_shift(const std::vector<double>& w) {
  return symbolic::SuspensionModel::make(symbolic::Sft::full_shift(2), {1.0, 1.0}, w, "two-shift");
}

inline void corner_demo(RunContext& ctx) {
  const auto w = ctx.get<std::vector<double>>("potentials", {-std::log(4.0 / 3.0), -std::log(4.0)});
  if (w.size() != 2) fail(ErrorCode::InvalidConfig, "corner-demo takes two potentials");
  const auto m = two_shift(w);
  const double qmin = ctx.num("q_min", -40.0), qmax = ctx.num("q_max", 40.0), step = ctx.num("step", 0.05);
  thermo::SampleOptions so;
  so.threads = ctx.config().threads;
  auto src = thermo::with_zero_component([m](double q) { return symbolic::flow_pressure(m, q); });
  auto c = thermo::sample_pressure_curve(src, qmin, qmax, step, "two-shift+zero", so);
  ctx.write("pressure_curve.csv", [&](std::ostream& os) { thermo::write_curve_csv(os, c); });

  // Closed forms for the 2-shift: P(q) = log(e^{q w0} + e^{q w1}).
  const double p0 = std::exp(w[0]), p1 = std::exp(w[1]);
  const double calib = std::log(p0 + p1);
  const double alpha1 = -(p0 * w[0] + p1 * w[1]) / (p0 + p1);
  const double alpha0 = -(w[0] + w[1]) / 2.0;
  ctx.results["alpha0_closed_form"] = alpha0;
  ctx.results["alpha1_closed_form"] = alpha1;
  const double ptol = ctx.num("pressure_tol", 1e-9);
  ctx.at_most("calibration |P(1)| of the 2-shift", std::abs(symbolic::flow_pressure(m, 1.0)), ptol);
  double flat = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i)
    if (c.q[i] >= 1.0) flat = std::max(flat, std::abs(c.value[i]));
  ctx.at_most("P(q) = 0 for q >= 1", flat, ptol);
  ctx.holds("closed form is calibrated", std::abs(calib) <= ptol);

  auto corner = thermo::detect_corner(c, 1.0);
  ctx.write_json("corner.json", thermo::corner_to_json(corner));
  const double stol = ctx.num("slope_tol", 2e-3);
  ctx.holds("corner declared at q = 1", corner.corner);
  ctx.near("D_R at q = 1", corner.d_right, 0.0, stol);
  ctx.near("D_L at q = 1", corner.d_left, -alpha1, stol);

  thermo::SpectrumOptions sopt;
  sopt.conjugate.threads = ctx.config().threads;
  auto s = thermo::legendre_conjugate(c, thermo::default_alpha_grid(c, ctx.get<std::size_t>("alpha_points", 400)), sopt);
  ctx.write("spectrum.csv", [&](std::ostream& os) { thermo::write_spectrum_csv(os, s); });
  ctx.results["spectrum"] = thermo::spectrum_summary(s);

  const double etol = ctx.num("spectrum_tol", 1e-4);
  const auto table_alpha = thermo::linspace(ctx.num("alpha_min", 0.01), alpha1 * (1.0 - 1e-6), 100);
  double worst = 0.0;
  ctx.write("corner_table.csv", [&](std::ostream& os) {
    os << "alpha,E,closed_form,error\n" << std::setprecision(17);
    for (double a : table_alpha) {
      const double E = thermo::conjugate_at(c, a, sopt.conjugate).value;
      worst = std::max(worst, std::abs(E - a));
      os << a << ',' << E << ',' << a << ',' << E - a << '\n';
    }
  });
  ctx.at_most("E(alpha) = alpha on [alpha_min, alpha1]", worst, etol);
  ctx.near("E(alpha0) = log 2", thermo::conjugate_at(c, alpha0, sopt.conjugate).value, std::log(2.0), etol);
}

inline symbolic::SuspensionModel suspension_model(const RunContext& ctx) {
  const auto& mj = ctx.config().model;
  if (mj.empty()) return two_shift({-std::log(4.0 / 3.0), -std::log(4.0)});
  if (mj.contains("file")) {
    std::ifstream in(mj.at("file").get<std::string>());
    if (!in) fail(ErrorCode::InvalidConfig, "cannot read model file " + mj.at("file").get<std::string>());
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      fail(ErrorCode::InvalidConfig, std::string("model file is not valid JSON: ") + e.what());
    }
    return symbolic::suspension_from_json(j);
  }
  return symbolic::suspension_from_json(mj);
}

inline void spectrum_report(RunContext& ctx) {
  auto m = suspension_model(ctx);
  if (ctx.get<bool>("calibrate", true)) m = symbolic::calibrate(m);
  ctx.results["model"] = symbolic::suspension_to_json(m);
  const double qmin = ctx.num("q_min", -40.0), qmax = ctx.num("q_max", 40.0), step = ctx.num("step", 0.05);
  thermo::SampleOptions so;
  so.threads = ctx.config().threads;
  auto c = thermo::sample_pressure_curve([m](double q) { return symbolic::flow_pressure(m, q); }, qmin, qmax, step,
                                         m.provenance, so);
  ctx.write("pressure_curve.csv", [&](std::ostream& os) { thermo::write_curve_csv(os, c); });
  thermo::SpectrumOptions sopt;
  sopt.conjugate.threads = ctx.config().threads;
  sopt.range_tol = ctx.num("range_tol", 1e-4);
  auto s = thermo::legendre_conjugate(c, thermo::default_alpha_grid(c, ctx.get<std::size_t>("alpha_points", 400)), sopt);
  ctx.write("spectrum.csv", [&](std::ostream& os) { thermo::write_spectrum_csv(os, s); });
  ctx.results["spectrum"] = thermo::spectrum_summary(s);
  ctx.holds("exponent range stabilized", s.range.has_value(), s.range_error);

  const auto qs = ctx.get<std::vector<double>>("sweep_q", thermo::linspace(-5.0, 5.0, 20));
  auto sweep = symbolic::pressure_sweep(m, qs, ctx.config().threads);
  ctx.write("sweep.csv", [&](std::ostream& os) { symbolic::write_sweep_csv(os, sweep); });
  double worst = 0.0;
  for (const auto& st : sweep)
    worst = std::max(worst, std::abs(thermo::conjugate_at(c, st.exponent, sopt.conjugate).value - st.entropy));
  ctx.at_most("E(chi(mu_q)) = h(mu_q) on the sweep", worst, ctx.num("identity_tol", 1e-6));

  double out_of_range = 0.0, formula = 0.0;
  for (std::size_t j = 0; j < s.size(); ++j) {
    if (s.escaping[j] || s.unreliable[j] || !std::isfinite(s.ratio[j])) continue;
    out_of_range = std::max({out_of_range, -s.ratio[j], s.ratio[j] - 1.0});
    formula = std::max(formula, std::abs(s.dimension[j] - (1.0 + 2.0 * s.ratio[j])));
  }
  ctx.at_most("D(alpha) in [0, 1]", out_of_range, 1e-6);
  ctx.at_most("dimension = 1 + 2 D", formula, 0.0);
}

inline orbits::OrbitLibrary sweep_library(RunContext& ctx, const SurfaceModel& collar) {
  orbits::OrbitLibrary lib;
  const double dt = ctx.num("dt", 2e-3);
  const auto& warp = collar.as<geometry::CollarProfile>().warp;
  for (double s : ctx.get<std::vector<double>>("flat_waists", {0.0, 0.25})) {
    if (warp.eval(s)[1] != 0.0) fail(ErrorCode::InvalidConfig, "flat waist at s = " + fmt(s) + " is not a geodesic");
    const double period = kTwoPi * warp.eval(s)[0];
    auto path = geometry::integrate_geodesic(collar, UnitTangentState::from_angle({s, 0.0}, kPi / 2), period, dt);
    orbits::add_orbit(lib, collar, std::move(path), "flat-waist s=" + fmt(s), {{"method", "integrated"}}, dt);
  }
  if (ctx.get<bool>("cosh_waist", true)) {
    auto cosh = SurfaceModel::collar(WarpProfile::cosh(1.0), 3.0);
    auto path = geometry::integrate_geodesic(cosh, UnitTangentState::from_angle({0.0, 0.0}, kPi / 2), kTwoPi, dt);
    orbits::add_orbit(lib, cosh, std::move(path), "cosh-waist", {{"method", "integrated"}}, dt);
  }
  const auto words = ctx.get<std::vector<std::vector<int>>>("words", {{0}, {2}, {0, 1}});
  if (!words.empty()) {
    auto oct = SurfaceModel::octagon(1.0);
    std::vector<orbits::PseudoOrbit> cands;
    std::vector<std::string> labels;
    for (const auto& w : words) {
      cands.push_back(orbits::octagon_word_pseudo_orbit(oct, w));
      std::string l = "word";
      for (int x : w) l += " " + std::to_string(x);
      labels.push_back(l);
    }
    auto built = orbits::build_library(oct, cands, labels, {}, ctx.config().threads);
    for (auto& o : built.orbits)
      orbits::add_orbit(lib, oct, std::move(o.path), o.label, o.provenance);
  }
  return lib;
}

inline void lambda_ell_sweep(RunContext& ctx) {
  const auto model = surface_model(
      ctx.config(), {{"type", "CollarProfile"}, {"warp", {{"kind", "flat_band"}, {"c", 1.0}, {"w", 0.5}, {"b", 1.0}}},
                     {"half_width", 3.0}});
  if (model.kind() != SurfaceModel::Kind::CollarProfile)
    fail(ErrorCode::InvalidConfig, "lambda-ell-sweep needs a collar model");
  auto lib = sweep_library(ctx, model);
  ctx.write_json("library.json", orbits::library_to_json(lib));
  const auto ells = ctx.get<std::vector<std::size_t>>("ells", {1, 2, 4, 8, 16});
  std::vector<std::set<std::string>> sets;
  bool flat_excluded = true;
  ctx.write("lambda_ell.csv", [&](std::ostream& os) {
    os << "ell,radius,count,orbits\n" << std::setprecision(17);
    for (auto ell : ells) {
      auto sub = orbits::build_lambda_ell(lib, ell);
      auto labels = sub.labels();
      sets.emplace_back(labels.begin(), labels.end());
      std::string joined;
      for (const auto& l : labels) {
        joined += (joined.empty() ? "" : ";") + l;
        if (l.rfind("flat-waist", 0) == 0) flat_excluded = false;
      }
      os << ell << ',' << sub.exclusion_radius << ',' << labels.size() << ',' << joined << '\n';
    }
  });
  bool nested = true;
  for (std::size_t i = 0; i + 1 < sets.size(); ++i)
    if (ells[i] <= ells[i + 1])
      nested = nested && std::includes(sets[i + 1].begin(), sets[i + 1].end(), sets[i].begin(), sets[i].end());
  ctx.holds("Lambda_l nested in l", nested);
  ctx.holds("flat-band orbits excluded for every l", flat_excluded);
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& o : lib.orbits) worst = std::max(worst, o.exponent - o.schwarz_bound);
  ctx.at_most("Schwarz bound on every library orbit", worst, ctx.num("schwarz_tol", 1e-6));
  ctx.results["orbits"] = lib.orbits.size();
}

inline const std::map<std::string, std::function<void(RunContext&)>>& registry() {
  static const std::map<std::string, std::function<void(RunContext&)>> r{
      {"riccati-validate", riccati_validate}, {"anosov-baseline", anosov_baseline}, {"corner-demo", corner_demo},
      {"lambda-ell-sweep", lambda_ell_sweep}, {"spectrum-report", spectrum_report}};
  return r;
}

}  // namespace detail

enum ExitCode : int { kPass = 0, kAssertionFailure = 1, kConfigError = 2, kNumericFailure = 3 };

inline int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidConfig:
    case ErrorCode::InvalidModel:
    case ErrorCode::IoError:
    case ErrorCode::MissingManifest: return kConfigError;
    default: return kNumericFailure;
  }
}

struct RunResult {
  int exit_code = kPass;
  json summary;
  json error;  // null unless the run failed with an error
  std::vector<std::string> artifacts;
};

inline json error_report(const Error& e) {
  return {{"error", std::string(to_string(e.code()))}, {"message", e.what()}, {"exit_code", exit_code_for(e.code())}};
}

/// Runs one experiment into config.output: artifacts, summary.json and
/// manifest.json (or error.json on failure).
inline RunResult run_experiment(const ExperimentConfig& config) {
  RunResult out;
  const auto start = std::chrono::steady_clock::now();
  const fs::path dir = config.output;
  try {
    validate_config(config);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) fail(ErrorCode::IoError, "cannot create output directory " + dir.string());
  } catch (const Error& e) {
    out.exit_code = exit_code_for(e.code());
    out.error = error_report(e);
    return out;
  }
  RunContext ctx(config, dir);
  try {
    detail::registry().at(config.experiment)(ctx);
    json checks = json::array();
    for (const auto& c : ctx.checks()) checks.push_back(check_to_json(c));
    out.summary = {{"experiment", config.experiment}, {"passed", ctx.passed()}, {"checks", checks},
                   {"results", ctx.results}};
    ctx.write_json("summary.json", out.summary);
    out.exit_code = ctx.passed() ? kPass : kAssertionFailure;
  } catch (const Error& e) {
    out.exit_code = exit_code_for(e.code());
    out.error = error_report(e);
    std::ofstream(dir / "error.json") << out.error.dump(2) << '\n';
  }
  out.artifacts = ctx.artifacts();
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  json manifest{{"experiment", config.experiment},
                {"config", config_to_json(config)},
                {"seed", config.seed},
                {"threads", config.threads},
                {"version", kVersion},
                {"compiler", __VERSION__},
                {"wall_time_seconds", wall},
                {"artifacts", out.artifacts},
                {"exit_code", out.exit_code}};
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << '\n';
  return out;
}

// ---------------------------------------------------------------------------
// Run comparison.

struct DiffOptions {
  /// Values agree when |a - b| <= tol * max(1, |a|, |b|).
  double tol = 1e-12;
};

struct DiffReport {
  json differences = json::array();
  /// Error ratios when the two runs differ only in dt.
  json convergence = json::array();
  bool identical() const { return differences.empty(); }
  json to_json() const { return {{"identical", identical()}, {"differences", differences}, {"convergence", convergence}}; }
};

namespace detail {

inline json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) fail(ErrorCode::IoError, "cannot read " + p.string());
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception& e) {
    fail(ErrorCode::IoError, p.string() + " is not valid JSON: " + e.what());
  }
}

inline std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  if (!in) fail(ErrorCode::IoError, "cannot read " + p.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

inline bool agree(double a, double b, double tol) {
  if (std::isnan(a) && std::isnan(b)) return true;
  if (a == b) return true;
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

inline bool parse(const std::string& s, double& x) {
  try {
    std::size_t pos = 0;
    x = std::stod(s, &pos);
    return pos == s.size();
  } catch (...) {
    return false;
  }
}

/// Numeric leaves of a JSON value keyed by their path.
inline void flatten(const json& j, const std::string& prefix, std::map<std::string, json>& out) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) flatten(v, prefix.empty() ? k : prefix + "." + k, out);
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) {
      const auto& v = j[i];
      const std::string key =
          v.is_object() && v.contains("name") ? v["name"].get<std::string>() : std::to_string(i);
      flatten(v, prefix + "[" + key + "]", out);
    }
  } else {
    out[prefix] = j;
  }
}

inline void diff_json(const std::string& artifact, const json& a, const json& b, double tol, DiffReport& r) {
  std::map<std::string, json> fa, fb;
  flatten(a, "", fa);
  flatten(b, "", fb);
  std::set<std::string> keys;
  for (const auto& [k, v] : fa) keys.insert(k);
  for (const auto& [k, v] : fb) keys.insert(k);
  for (const auto& k : keys) {
    const bool ia = fa.count(k) != 0, ib = fb.count(k) != 0;
    if (!ia || !ib) {
      r.differences.push_back({{"artifact", artifact}, {"field", k}, {"issue", ia ? "missing in b" : "missing in a"}});
      continue;
    }
    const auto &va = fa[k], &vb = fb[k];
    if (va.is_number() && vb.is_number()) {
      const double x = va.get<double>(), y = vb.get<double>();
      if (!agree(x, y, tol))
        r.differences.push_back({{"artifact", artifact}, {"field", k}, {"a", x}, {"b", y}, {"abs_diff", std::abs(x - y)}});
    } else if (va != vb) {
      r.differences.push_back({{"artifact", artifact}, {"field", k}, {"a", va}, {"b", vb}});
    }
  }
}

inline void diff_csv(const std::string& artifact, const fs::path& pa, const fs::path& pb, double tol, DiffReport& r) {
  auto a = read_csv(pa), b = read_csv(pb);
  if (a.empty() || b.empty() || a[0] != b[0]) {
    r.differences.push_back({{"artifact", artifact}, {"issue", "headers differ"}});
    return;
  }
  if (a.size() != b.size()) {
    r.differences.push_back({{"artifact", artifact}, {"issue", "row counts differ"}, {"a", a.size()}, {"b", b.size()}});
    return;
  }
  const auto& header = a[0];
  std::vector<double> worst(header.size(), 0.0);
  std::vector<std::size_t> count(header.size(), 0);
  for (std::size_t i = 1; i < a.size(); ++i) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      const std::string sa = c < a[i].size() ? a[i][c] : "", sb = c < b[i].size() ? b[i][c] : "";
      double x = 0.0, y = 0.0;
      if (parse(sa, x) && parse(sb, y)) {
        if (!agree(x, y, tol)) {
          ++count[c];
          if (std::isfinite(x) && std::isfinite(y)) worst[c] = std::max(worst[c], std::abs(x - y));
          else worst[c] = std::numeric_limits<double>::infinity();
        }
      } else if (sa != sb) {
        ++count[c];
      }
    }
  }
  for (std::size_t c = 0; c < header.size(); ++c)
    if (count[c] > 0) {
      json d{{"artifact", artifact}, {"field", header[c]}, {"rows", count[c]}};
      d["max_abs_diff"] = std::isfinite(worst[c]) ? json(worst[c]) : json(nullptr);
      r.differences.push_back(d);
    }
}

}  // namespace detail

/// Field-by-field comparison of two run directories: every CSV artifact,
/// summary.json, and the experiment name and configuration. Wall time,
/// thread count and seed are not compared.
inline DiffReport diff_runs(const fs::path& a, const fs::path& b, const DiffOptions& opts = {}) {
  for (const auto& d : {a, b})
    if (!fs::exists(d / "manifest.json")) fail(ErrorCode::MissingManifest, "no manifest.json in " + d.string());
  DiffReport r;
  const json ma = detail::read_json(a / "manifest.json"), mb = detail::read_json(b / "manifest.json");
  json ca = ma.value("config", json::object()), cb = mb.value("config", json::object());
  for (auto* c : {&ca, &cb}) {
    c->erase("output");
    c->erase("seed");
  }
  detail::diff_json("config", ca, cb, opts.tol, r);

  std::set<std::string> names;
  for (const auto& d : {a, b})
    for (const auto& e : fs::directory_iterator(d)) {
      const auto n = e.path().filename().string();
      if (n != "manifest.json") names.insert(n);
    }
  for (const auto& n : names) {
    const bool ia = fs::exists(a / n), ib = fs::exists(b / n);
    if (!ia || !ib) {
      r.differences.push_back({{"artifact", n}, {"issue", ia ? "missing in b" : "missing in a"}});
      continue;
    }
    const auto ext = fs::path(n).extension();
    if (ext == ".csv") detail::diff_csv(n, a / n, b / n, opts.tol, r);
    else if (ext == ".json") detail::diff_json(n, detail::read_json(a / n), detail::read_json(b / n), opts.tol, r);
  }

  // Step refinement: observed order from error-type checks.
  const auto pa = ma.value("config", json::object()).value("params", json::object());
  const auto pb = mb.value("config", json::object()).value("params", json::object());
  if (pa.contains("dt") && pb.contains("dt") && fs::exists(a / "summary.json") && fs::exists(b / "summary.json")) {
    const double da = pa["dt"].get<double>(), db = pb["dt"].get<double>();
    if (da != db) {
      const json sa = detail::read_json(a / "summary.json"), sb = detail::read_json(b / "summary.json");
      for (const auto& x : sa.value("checks", json::array())) {
        const auto name = x.value("name", std::string());
        if (name.find("error") == std::string::npos || !x["measured"].is_number()) continue;
        for (const auto& y : sb.value("checks", json::array())) {
          if (y.value("name", std::string()) != name || !y["measured"].is_number()) continue;
          const double ea = x["measured"].get<double>(), eb = y["measured"].get<double>();
          const double ratio = ea / eb, step_ratio = da / db;
          r.convergence.push_back({{"field", name},
                                   {"dt_a", da},
                                   {"dt_b", db},
                                   {"error_a", ea},
                                   {"error_b", eb},
                                   {"error_ratio", ratio},
                                   {"observed_order", std::log(ratio) / std::log(step_ratio)}});
        }
      }
    }
  }
  return r;
}

}  // namespace rank1::cli
