#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "rank1/orbits/library.hpp"
#include "rank1/symbolic/suspension.hpp"

namespace rank1::orbits {

/// Local transversal: the geodesic segment through `center` orthogonal to
/// its direction, of half-length `radius`. Crossings count when the flow
/// passes it in the direction of `center`.
struct SectionSpec {
  UnitTangentState center;
  double radius = 0.5;
};

inline json section_to_json(const SectionSpec& s) {
  return {{"center", geometry::state_to_json(s.center)}, {"radius", s.radius}};
}

inline SectionSpec section_from_json(const json& j) {
  try {
    return {geometry::state_from_json(j.at("center")), j.at("radius").get<double>()};
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidConfig, std::string("malformed section: ") + e.what());
  }
}

namespace detail {

/// Signed offset across the section and position along it, both in the
/// metric of the model. Exact for the octagon; chart-linear at the center
/// for the collar and the half-plane.
class SectionFrame {
 public:
  SectionFrame(const SurfaceModel& model, const SectionSpec& spec) : model_(model), spec_(spec) {
    auto c = spec.center;
    geometry::normalize_chart(model, c);
    spec_.center = c;
    const auto p = c.position;
    const auto d = c.direction;
    switch (model.kind()) {
      case SurfaceModel::Kind::OctagonHyperbolic: {
        k_ = model.as<geometry::OctagonHyperbolic>().k;
        const cplx n = cplx(0.0, 1.0) * d.complex();
        auto [from, to] = geometry::hyperbolic::geodesic_endpoints(p.complex(), n);
        normal_ = AxisFrame(from, to);
        s0_ = normal_.position(p.complex());
        auto ahead = geometry::hyperbolic::geodesic_point(p.complex(), d.complex(), 0.1).first;
        sign_ = normal_.upper(ahead).real() > 0.0 ? 1.0 : -1.0;
        break;
      }
      case SurfaceModel::Kind::CollarProfile:
        scale_y_ = model.as<geometry::CollarProfile>().warp.eval(p.x)[0];
        break;
      case SurfaceModel::Kind::ConstantNegative:
        scale_x_ = scale_y_ = 1.0 / (model.as<geometry::ConstantNegative>().k * p.y);
        break;
      case SurfaceModel::Kind::CurvatureSignal: fail(ErrorCode::DomainError, "sections need a chart model");
    }
  }

  double offset(const UnitTangentState& s) const {
    if (model_.kind() == SurfaceModel::Kind::OctagonHyperbolic) {
      const cplx w = normal_.upper(s.position.complex());
      return sign_ * std::asinh(w.real() / w.imag()) / k_;
    }
    auto [a, b] = local(s);
    const auto d = spec_.center.direction;
    return a * d.x + b * d.y;
  }

  double along(const UnitTangentState& s) const {
    if (model_.kind() == SurfaceModel::Kind::OctagonHyperbolic)
      return (normal_.position(s.position.complex()) - s0_) / k_;
    auto [a, b] = local(s);
    const auto d = spec_.center.direction;
    return -a * d.y + b * d.x;
  }

  const SectionSpec& spec() const { return spec_; }

 private:
  std::pair<double, double> local(const UnitTangentState& s) const {
    const auto p = spec_.center.position;
    double dy = s.position.y - p.y;
    if (model_.kind() == SurfaceModel::Kind::CollarProfile) dy = wrap_angle(dy);
    return {scale_x_ * (s.position.x - p.x), scale_y_ * dy};
  }

  const SurfaceModel& model_;
  SectionSpec spec_;
  AxisFrame normal_;
  double k_ = 1.0, s0_ = 0.0, sign_ = 1.0;
  double scale_x_ = 1.0, scale_y_ = 1.0;
};

/// Cumulative integral of phi^u along the samples (trapezoid).
inline std::vector<double> cumulative_potential(const LibraryOrbit& o) {
  std::vector<double> c(o.path.samples.size(), 0.0);
  for (std::size_t i = 1; i < c.size(); ++i) {
    const auto& a = o.path.samples[i - 1];
    const auto& b = o.path.samples[i];
    c[i] = c[i - 1] + 0.5 * (b.t - a.t) *
                          (jacobi::phi_u(a.curvature, o.unstable[i - 1]) + jacobi::phi_u(b.curvature, o.unstable[i]));
  }
  return c;
}

}  // namespace detail

struct Crossing {
  std::size_t orbit = 0;  // index into the library
  std::size_t index = 0;  // order along the orbit
  double t = 0.0;
  UnitTangentState state;
  double along = 0.0;
  double return_time = 0.0;
  /// Integral of phi^u up to the next crossing.
  double potential = 0.0;
};

/// Forward crossings of one orbit with the section, in time order.
inline std::vector<Crossing> orbit_crossings(const OrbitLibrary& lib, std::size_t orbit, const SectionSpec& spec,
                                             double time_tol = 1e-10, double joint_tol = 1e-9) {
  const auto& o = lib.orbits.at(orbit);
  const auto& model = lib.model_of(o);
  detail::SectionFrame frame(model, spec);
  std::vector<Crossing> out;
  const auto& S = o.path.samples;
  for (std::size_t i = 0; i + 1 < S.size(); ++i) {
    auto s = S[i].state;
    const double h = S[i + 1].t - S[i].t;
    if (!(h > 0.0)) continue;
    auto at = [&](double tau) { return tau == 0.0 ? s : geometry::rk4_advance(model, s, tau); };
    const double f0 = frame.offset(s);
    if (!(f0 < 0.0)) continue;
    // Samples at shooting joints differ from the flowed end by the closure
    // residual, so accept ends just short of the section and dedupe below.
    if (!(frame.offset(at(h)) >= -joint_tol)) continue;
    double lo = 0.0, hi = h;
    while (hi - lo > time_tol) {
      const double mid = 0.5 * (lo + hi);
      (frame.offset(at(mid)) < 0.0 ? lo : hi) = mid;
    }
    auto c = at(hi);
    const double a = frame.along(c);
    if (std::abs(a) > spec.radius) continue;
    geometry::normalize_chart(model, c);
    c.t = S[i].t + hi;
    if (!out.empty() && c.t - out.back().t < 1e-6) continue;
    out.push_back({orbit, out.size(), c.t, c, a, 0.0, 0.0});
  }
  if (out.size() > 1 && out.front().t + o.period - out.back().t < 1e-6) out.pop_back();
  if (out.empty()) return out;
  const auto cum = detail::cumulative_potential(o);
  std::vector<double> ts;
  for (const auto& p : S) ts.push_back(p.t);
  auto C = [&](double t) { return detail::interpolate(ts, cum, t); };
  const double total = cum.back();
  for (std::size_t j = 0; j < out.size(); ++j) {
    const auto& a = out[j];
    if (j + 1 < out.size()) {
      out[j].return_time = out[j + 1].t - a.t;
      out[j].potential = C(out[j + 1].t) - C(a.t);
    } else {
      out[j].return_time = out[0].t + o.period - a.t;
      out[j].potential = total - C(a.t) + C(out[0].t);
    }
  }
  return out;
}

/// Records crossing times in the library.
inline void annotate_crossings(OrbitLibrary& lib, const SectionSpec& spec) {
  for (std::size_t k = 0; k < lib.orbits.size(); ++k) {
    lib.orbits[k].crossing_times.clear();
    for (const auto& c : orbit_crossings(lib, k, spec)) lib.orbits[k].crossing_times.push_back(c.t);
  }
}

struct CodingCell {
  /// (orbit, crossing index) pairs.
  std::vector<std::pair<std::size_t, std::size_t>> members;
  /// Level-0 labels of crossings -N..N around each member.
  std::vector<std::size_t> itinerary;
  double diameter = 0.0;
  double roof = 0.0;
  double potential = 0.0;
  double roof_spread = 0.0;
  double potential_spread = 0.0;
};

struct SectionCoding {
  SectionSpec section;
  std::size_t level = 0;
  double epsilon0 = 0.0;
  std::vector<CodingCell> cells;
  std::vector<std::vector<int>> transitions;
  std::vector<std::vector<Crossing>> crossings;  // per library orbit

  double max_diameter() const {
    double m = 0.0;
    for (const auto& c : cells) m = std::max(m, c.diameter);
    return m;
  }
  /// Largest spread of roof or potential within a cell.
  double max_spread() const {
    double m = 0.0;
    for (const auto& c : cells) m = std::max({m, c.roof_spread, c.potential_spread});
    return m;
  }

  symbolic::SuspensionModel suspension() const {
    std::vector<double> r, p;
    for (const auto& c : cells) {
      r.push_back(c.roof);
      p.push_back(c.potential);
    }
    return symbolic::SuspensionModel::make(symbolic::Sft(transitions), r, p, "section-coding");
  }
};

struct CodingOptions {
  /// Single-linkage radius for level-0 cells.
  double epsilon0 = 0.1;
  std::size_t level = 0;
};

/// Markov coding of the library orbits of `model` by their crossings with a
/// section. Level-0 cells are single-linkage clusters of the crossings at
/// scale epsilon0; distinct clusters closer than 2 epsilon0 raise
/// CellOverlap. Level-N cells split these by the labels of the N crossings
/// on either side.
inline SectionCoding build_markov_coding(const SurfaceModel& model, const OrbitLibrary& lib, const SectionSpec& spec,
                                         const CodingOptions& opts = {}) {
  if (!(opts.epsilon0 > 0.0)) fail(ErrorCode::DomainError, "epsilon0 must be positive");
  SectionCoding out;
  out.section = spec;
  out.level = opts.level;
  out.epsilon0 = opts.epsilon0;
  out.crossings.resize(lib.orbits.size());
  const json mj = geometry::model_to_json(model);
  std::vector<std::pair<std::size_t, std::size_t>> pts;
  bool any = false;
  for (std::size_t k = 0; k < lib.orbits.size(); ++k) {
    if (geometry::model_to_json(lib.model_of(lib.orbits[k])) != mj) continue;
    any = true;
    out.crossings[k] = orbit_crossings(lib, k, spec);
    if (out.crossings[k].empty())
      fail(ErrorCode::NoCrossing, "orbit '" + lib.orbits[k].label + "' does not cross the section");
    for (std::size_t j = 0; j < out.crossings[k].size(); ++j) pts.emplace_back(k, j);
  }
  if (!any) fail(ErrorCode::DomainError, "library has no orbits on this model");

  auto state = [&](std::size_t p) -> const UnitTangentState& {
    return out.crossings[pts[p].first][pts[p].second].state;
  };
  const std::size_t n = pts.size();
  std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) dist[a][b] = dist[b][a] = geometry::phase_distance(model, state(a), state(b));

  // Single linkage by union-find.
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<std::size_t(std::size_t)> root = [&](std::size_t x) {
    return parent[x] == x ? x : parent[x] = root(parent[x]);
  };
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b)
      if (dist[a][b] <= opts.epsilon0) parent[std::max(root(a), root(b))] = std::min(root(a), root(b));
  std::map<std::size_t, std::size_t> label_of_root;
  std::vector<std::size_t> label0(n);
  for (std::size_t a = 0; a < n; ++a) {
    auto r = root(a);
    auto it = label_of_root.find(r);
    if (it == label_of_root.end()) it = label_of_root.emplace(r, label_of_root.size()).first;
    label0[a] = it->second;
  }
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b)
      if (label0[a] != label0[b] && dist[a][b] <= 2.0 * opts.epsilon0)
        fail(ErrorCode::CellOverlap, "crossings in different cells are " + std::to_string(dist[a][b]) +
                                         " apart, within 2*epsilon0");

  // Point index of (orbit, crossing).
  std::vector<std::vector<std::size_t>> idx(lib.orbits.size());
  for (std::size_t p = 0; p < n; ++p) {
    auto& v = idx[pts[p].first];
    if (v.size() <= pts[p].second) v.resize(pts[p].second + 1);
    v[pts[p].second] = p;
  }
  const auto N = static_cast<long>(opts.level);
  std::map<std::vector<std::size_t>, std::size_t> cell_of;
  std::vector<std::size_t> cell(n);
  for (std::size_t p = 0; p < n; ++p) {
    const auto& ring = idx[pts[p].first];
    const auto m = static_cast<long>(ring.size());
    std::vector<std::size_t> itin;
    for (long s = -N; s <= N; ++s) {
      const long j = ((static_cast<long>(pts[p].second) + s) % m + m) % m;
      itin.push_back(label0[ring[static_cast<std::size_t>(j)]]);
    }
    auto it = cell_of.find(itin);
    if (it == cell_of.end()) {
      it = cell_of.emplace(itin, out.cells.size()).first;
      out.cells.push_back({});
      out.cells.back().itinerary = itin;
    }
    cell[p] = it->second;
    out.cells[it->second].members.push_back(pts[p]);
  }

  const std::size_t m = out.cells.size();
  out.transitions.assign(m, std::vector<int>(m, 0));
  std::vector<std::vector<std::size_t>> members_idx(m);
  for (std::size_t p = 0; p < n; ++p) {
    members_idx[cell[p]].push_back(p);
    const auto& ring = idx[pts[p].first];
    const std::size_t next = ring[(pts[p].second + 1) % ring.size()];
    out.transitions[cell[p]][cell[next]] = 1;
  }
  for (std::size_t c = 0; c < m; ++c) {
    auto& cc = out.cells[c];
    double rmin = std::numeric_limits<double>::infinity(), rmax = -rmin, pmin = rmin, pmax = -rmin;
    for (auto a : members_idx[c]) {
      const auto& x = out.crossings[pts[a].first][pts[a].second];
      cc.roof += x.return_time;
      cc.potential += x.potential;
      rmin = std::min(rmin, x.return_time);
      rmax = std::max(rmax, x.return_time);
      pmin = std::min(pmin, x.potential);
      pmax = std::max(pmax, x.potential);
      for (auto b : members_idx[c]) cc.diameter = std::max(cc.diameter, dist[a][b]);
    }
    const auto cnt = static_cast<double>(members_idx[c].size());
    cc.roof /= cnt;
    cc.potential /= cnt;
    cc.roof_spread = rmax - rmin;
    cc.potential_spread = pmax - pmin;
  }
  return out;
}

inline json coding_to_json(const SectionCoding& c) {
  json cells = json::array();
  std::vector<double> roof, pot;
  for (const auto& cell : c.cells) {
    json members = json::array();
    for (auto [o, i] : cell.members) members.push_back({o, i});
    cells.push_back({{"members", members},
                     {"itinerary", cell.itinerary},
                     {"diameter", cell.diameter},
                     {"roof", cell.roof},
                     {"potential", cell.potential},
                     {"roof_spread", cell.roof_spread},
                     {"potential_spread", cell.potential_spread}});
    roof.push_back(cell.roof);
    pot.push_back(cell.potential);
  }
  return {{"section", section_to_json(c.section)},
          {"level", c.level},
          {"epsilon0", c.epsilon0},
          {"cells", cells},
          {"transition_matrix", c.transitions},
          {"roof", roof},
          {"potential", pot},
          {"provenance", "section-coding"}};
}

}  // namespace rank1::orbits
