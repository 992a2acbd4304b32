#pragma once

#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "rank1/core/error.hpp"
#include "rank1/geometry/surface_model.hpp"
#include "rank1/geometry/types.hpp"

namespace rank1::geometry {

using json = nlohmann::json;

/// Model config, e.g.
///   {"type": "ConstantNegative", "k": 1}
///   {"type": "CollarProfile", "warp": {"kind": "cosh", "k": 1}, "half_width": 3}
///   {"type": "CollarProfile", "warp": {"kind": "flat_band", "c": 1, "w": 1, "b": 0.5}, ...}
///   {"type": "CurvatureSignal", "pieces": [[0, -1], [50, 0]], "period": 0}
///   {"type": "OctagonHyperbolic", "k": 1}
inline SurfaceModel model_from_json(const json& j) {
  try {
    const std::string type = j.at("type").get<std::string>();
    if (type == "ConstantNegative") return SurfaceModel::constant_negative(j.value("k", 1.0));
    if (type == "OctagonHyperbolic") return SurfaceModel::octagon(j.value("k", 1.0));
    if (type == "CollarProfile") {
      const auto& w = j.at("warp");
      const std::string kind = w.at("kind").get<std::string>();
      WarpProfile warp;
      if (kind == "cosh")
        warp = WarpProfile::cosh(w.value("k", 1.0));
      else if (kind == "flat_band")
        warp = WarpProfile::flat_band(w.value("c", 1.0), w.value("w", 1.0), w.value("b", 1.0));
      else
        fail(ErrorCode::InvalidConfig, "unknown warp kind '" + kind + "'");
      return SurfaceModel::collar(warp, j.value("half_width", 3.0));
    }
    if (type == "CurvatureSignal") {
      std::vector<CurvatureSignal::Piece> pieces;
      for (const auto& p : j.at("pieces")) pieces.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
      return SurfaceModel::piecewise_signal(std::move(pieces), j.value("period", 0.0));
    }
    fail(ErrorCode::InvalidConfig, "unknown model type '" + type + "'");
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidConfig, std::string("malformed model: ") + e.what());
  }
}

inline json model_to_json(const SurfaceModel& model) {
  switch (model.kind()) {
    case SurfaceModel::Kind::ConstantNegative:
      return {{"type", "ConstantNegative"}, {"k", model.as<ConstantNegative>().k}};
    case SurfaceModel::Kind::OctagonHyperbolic:
      return {{"type", "OctagonHyperbolic"}, {"k", model.as<OctagonHyperbolic>().k}};
    case SurfaceModel::Kind::CollarProfile: {
      const auto& c = model.as<CollarProfile>();
      json warp;
      if (c.warp.kind == WarpProfile::Kind::Cosh)
        warp = {{"kind", "cosh"}, {"k", c.warp.k}};
      else
        warp = {{"kind", "flat_band"}, {"c", c.warp.c}, {"w", c.warp.w}, {"b", c.warp.b}};
      return {{"type", "CollarProfile"}, {"warp", warp}, {"half_width", c.half_width}};
    }
    case SurfaceModel::Kind::CurvatureSignal: {
      const auto& s = model.as<CurvatureSignal>();
      if (s.pieces.empty())
        fail(ErrorCode::InvalidConfig, "programmatic signal '" + s.label + "' is not serializable");
      json pieces = json::array();
      for (const auto& p : s.pieces) pieces.push_back({p.start, p.value});
      return {{"type", "CurvatureSignal"}, {"pieces", pieces}, {"period", s.period}};
    }
  }
  return {};
}

inline json state_to_json(const UnitTangentState& s) {
  return {{"position", {s.position.x, s.position.y}},
          {"direction", {s.direction.x, s.direction.y}},
          {"t", s.t}};
}

inline UnitTangentState state_from_json(const json& j) {
  UnitTangentState s;
  s.position = {j.at("position").at(0).get<double>(), j.at("position").at(1).get<double>()};
  s.direction = {j.at("direction").at(0).get<double>(), j.at("direction").at(1).get<double>()};
  s.t = j.value("t", 0.0);
  return s;
}

/// CSV columns: t, x, y, dir_x, dir_y, K.
inline void write_path_csv(std::ostream& os, const GeodesicPath& path) {
  os << "t,x,y,dir_x,dir_y,K\n" << std::setprecision(17);
  for (const auto& s : path.samples)
    os << s.t << ',' << s.state.position.x << ',' << s.state.position.y << ','
       << s.state.direction.x << ',' << s.state.direction.y << ',' << s.curvature << '\n';
}

}  // namespace rank1::geometry
