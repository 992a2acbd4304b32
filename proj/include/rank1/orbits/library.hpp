#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "rank1/core/parallel.hpp"
#include "rank1/geometry/io.hpp"
#include "rank1/lyapunov/exponents.hpp"
#include "rank1/orbits/shooting.hpp"

namespace rank1::orbits {

using json = nlohmann::json;
using jacobi::CurvatureHistory;

/// A refined closed orbit with its unstable Riccati solution sampled along
/// the path.
struct LibraryOrbit {
  std::string label;
  std::size_t model_index = 0;
  GeodesicPath path;
  std::vector<double> unstable;  // u at each path sample
  double period = 0.0;
  double exponent = 0.0;
  double schwarz_bound = 0.0;
  double mean_curvature = 0.0;
  std::vector<double> crossing_times;
  json provenance = json::object();
};

/// Closed orbits, possibly over several models. exclusion_radius is 1/l for
/// a filtered library and 0 otherwise.
struct OrbitLibrary {
  std::vector<SurfaceModel> models;
  std::vector<LibraryOrbit> orbits;
  double exclusion_radius = 0.0;

  /// Index of the model, adding it if no equal model is present.
  std::size_t model_index(const SurfaceModel& m) {
    const json j = geometry::model_to_json(m);
    for (std::size_t i = 0; i < models.size(); ++i)
      if (geometry::model_to_json(models[i]) == j) return i;
    models.push_back(m);
    return models.size() - 1;
  }
  std::vector<std::string> labels() const {
    std::vector<std::string> out;
    for (const auto& o : orbits) out.push_back(o.label);
    return out;
  }
  const SurfaceModel& model_of(const LibraryOrbit& o) const { return models.at(o.model_index); }
};

namespace detail {

/// Curvature along a closed path, linear between samples and periodic.
inline CurvatureHistory path_history(const GeodesicPath& path) {
  std::vector<double> t, K;
  for (const auto& s : path.samples) {
    t.push_back(s.t);
    K.push_back(s.curvature);
  }
  const double t0 = t.front(), tau = path.period;
  auto fn = [t = std::move(t), K = std::move(K), t0, tau](double x) {
    double y = t0 + std::fmod(x - t0, tau);
    if (y < t0) y += tau;
    auto it = std::upper_bound(t.begin(), t.end(), y);
    if (it == t.begin()) return K.front();
    if (it == t.end()) return K.back();
    const auto i = static_cast<std::size_t>(it - t.begin());
    const double w = (y - t[i - 1]) / (t[i] - t[i - 1]);
    return (1.0 - w) * K[i - 1] + w * K[i];
  };
  return CurvatureHistory::analytic(std::move(fn));
}

inline double interpolate(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
  auto it = std::upper_bound(xs.begin(), xs.end(), x);
  if (it == xs.begin()) return ys.front();
  if (it == xs.end()) return ys.back();
  const auto i = static_cast<std::size_t>(it - xs.begin());
  const double w = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
  return (1.0 - w) * ys[i - 1] + w * ys[i];
}

}  // namespace detail

/// Adds a closed orbit: computes its exponent, Schwarz bound (raising
/// SchwarzViolation if it fails) and unstable solution along the samples.
inline LibraryOrbit& add_orbit(OrbitLibrary& lib, const SurfaceModel& model, GeodesicPath path, std::string label,
                               json provenance = json::object(), double dt = 2e-3) {
  if (!path.closed || !(path.period > 0.0)) fail(ErrorCode::NotClosed, "library orbits must be closed");
  LibraryOrbit o;
  o.label = std::move(label);
  o.model_index = lib.model_index(model);
  o.period = path.period;
  const double t0 = path.start().t;
  auto K = detail::path_history(path);
  auto r = lyapunov::closed_orbit_exponent(K, t0, path.period, dt);
  o.exponent = r.exponent;
  o.schwarz_bound = r.schwarz_bound;
  o.mean_curvature = r.mean_curvature;
  const std::size_t n = geometry::detail::step_count(path.period, dt);
  auto trace = jacobi::riccati_integrate(K, r.u0, t0, t0 + path.period, path.period / static_cast<double>(n));
  std::vector<double> ts, us;
  for (const auto& s : trace.samples) {
    ts.push_back(s.t);
    us.push_back(s.u);
  }
  for (const auto& s : path.samples) o.unstable.push_back(detail::interpolate(ts, us, s.t));
  o.path = std::move(path);
  o.provenance = std::move(provenance);
  lib.orbits.push_back(std::move(o));
  return lib.orbits.back();
}

/// Refines each pseudo-orbit (in parallel) and adds the results in order.
inline OrbitLibrary build_library(const SurfaceModel& model, const std::vector<PseudoOrbit>& candidates,
                                  const std::vector<std::string>& labels, const RefineOptions& opts = {},
                                  unsigned threads = 1) {
  if (labels.size() != candidates.size()) fail(ErrorCode::DomainError, "one label per candidate");
  std::vector<Refinement> refined(candidates.size());
  parallel_for(candidates.size(), threads,
               [&](std::size_t i) { refined[i] = refine_closed_orbit(model, candidates[i], opts); });
  OrbitLibrary lib;
  for (std::size_t i = 0; i < refined.size(); ++i) {
    json prov = {{"method", "multiple-shooting"},
                 {"iterations", refined[i].iterations},
                 {"residual", refined[i].residual},
                 {"shadow_distance", refined[i].shadow_distance},
                 {"legs", candidates[i].size()}};
    add_orbit(lib, model, std::move(refined[i].path), labels[i], prov, opts.dt);
  }
  return lib;
}

struct FlatIndicator {
  /// Flat when |K| < kappa_factor * max|K| and u < u_factor * sqrt(max|K|).
  double kappa_factor = 1e-3;
  double u_factor = 1e-2;
  /// Use every stride-th sample for distances.
  std::size_t stride = 10;
};

/// Per-sample flat flags of an orbit.
inline std::vector<bool> flat_samples(const OrbitLibrary& lib, const LibraryOrbit& o, const FlatIndicator& fi = {}) {
  const double bound = lib.model_of(o).curvature_bound();
  const double kappa = fi.kappa_factor * bound, uflat = fi.u_factor * std::sqrt(bound);
  std::vector<bool> out(o.path.samples.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = std::abs(o.path.samples[i].curvature) < kappa && o.unstable[i] < uflat;
  return out;
}

/// Orbits whose samples all stay at phase distance >= 1/l from the flat
/// indicator set (flagged samples of the library orbits on the same model).
/// Orbits with flagged samples are always excluded.
inline OrbitLibrary build_lambda_ell(const OrbitLibrary& lib, std::size_t ell, const FlatIndicator& fi = {}) {
  if (ell == 0) fail(ErrorCode::DomainError, "l must be a positive integer");
  const double radius = 1.0 / static_cast<double>(ell);
  std::vector<std::vector<UnitTangentState>> flat_by_model(lib.models.size());
  std::vector<bool> has_flat(lib.orbits.size(), false);
  for (std::size_t k = 0; k < lib.orbits.size(); ++k) {
    const auto& o = lib.orbits[k];
    auto flags = flat_samples(lib, o, fi);
    for (std::size_t i = 0; i < flags.size(); ++i) {
      if (!flags[i]) continue;
      has_flat[k] = true;
      if (i % fi.stride == 0) flat_by_model[o.model_index].push_back(o.path.samples[i].state);
    }
  }
  OrbitLibrary out;
  out.models = lib.models;
  out.exclusion_radius = radius;
  for (std::size_t k = 0; k < lib.orbits.size(); ++k) {
    const auto& o = lib.orbits[k];
    if (has_flat[k]) continue;
    bool keep = true;
    const auto& flat = flat_by_model[o.model_index];
    const auto& model = lib.model_of(o);
    for (std::size_t i = 0; keep && i < o.path.samples.size(); i += fi.stride)
      for (const auto& f : flat)
        if (geometry::phase_distance(model, o.path.samples[i].state, f) < radius) {
          keep = false;
          break;
        }
    if (keep) out.orbits.push_back(o);
  }
  return out;
}

inline json library_to_json(const OrbitLibrary& lib) {
  json j;
  j["models"] = json::array();
  for (const auto& m : lib.models) j["models"].push_back(geometry::model_to_json(m));
  j["exclusion_radius"] = lib.exclusion_radius;
  j["orbits"] = json::array();
  for (const auto& o : lib.orbits) {
    json s = {{"t", json::array()},     {"x", json::array()}, {"y", json::array()}, {"dir_x", json::array()},
              {"dir_y", json::array()}, {"K", json::array()}, {"u", json::array()}};
    for (std::size_t i = 0; i < o.path.samples.size(); ++i) {
      const auto& p = o.path.samples[i];
      s["t"].push_back(p.t);
      s["x"].push_back(p.state.position.x);
      s["y"].push_back(p.state.position.y);
      s["dir_x"].push_back(p.state.direction.x);
      s["dir_y"].push_back(p.state.direction.y);
      s["K"].push_back(p.curvature);
      s["u"].push_back(o.unstable[i]);
    }
    j["orbits"].push_back({{"label", o.label},
                           {"model", o.model_index},
                           {"period", o.period},
                           {"exponent", o.exponent},
                           {"schwarz_bound", o.schwarz_bound},
                           {"mean_curvature", o.mean_curvature},
                           {"closure_distance", o.path.closure_distance},
                           {"dt", o.path.dt},
                           {"crossing_times", o.crossing_times},
                           {"provenance", o.provenance},
                           {"samples", s}});
  }
  return j;
}

inline OrbitLibrary library_from_json(const json& j) {
  try {
    OrbitLibrary lib;
    for (const auto& m : j.at("models")) lib.models.push_back(geometry::model_from_json(m));
    lib.exclusion_radius = j.value("exclusion_radius", 0.0);
    for (const auto& jo : j.at("orbits")) {
      LibraryOrbit o;
      o.label = jo.at("label").get<std::string>();
      o.model_index = jo.at("model").get<std::size_t>();
      if (o.model_index >= lib.models.size()) fail(ErrorCode::InvalidConfig, "orbit refers to a missing model");
      o.period = jo.at("period").get<double>();
      o.exponent = jo.at("exponent").get<double>();
      o.schwarz_bound = jo.at("schwarz_bound").get<double>();
      o.mean_curvature = jo.at("mean_curvature").get<double>();
      o.crossing_times = jo.value("crossing_times", std::vector<double>{});
      o.provenance = jo.value("provenance", json::object());
      const auto& s = jo.at("samples");
      const auto n = s.at("t").size();
      for (std::size_t i = 0; i < n; ++i) {
        UnitTangentState st{{s["x"][i].get<double>(), s["y"][i].get<double>()},
                            {s["dir_x"][i].get<double>(), s["dir_y"][i].get<double>()},
                            s["t"][i].get<double>()};
        o.path.samples.push_back({st.t, st, s["K"][i].get<double>()});
        o.unstable.push_back(s["u"][i].get<double>());
      }
      o.path.dt = jo.value("dt", 0.0);
      o.path.period = o.period;
      o.path.closure_distance = jo.value("closure_distance", 0.0);
      o.path.closed = true;
      lib.orbits.push_back(std::move(o));
    }
    return lib;
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidConfig, std::string("malformed orbit library: ") + e.what());
  }
}

}  // namespace rank1::orbits
