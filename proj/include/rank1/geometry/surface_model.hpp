#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "rank1/core/error.hpp"
#include "rank1/core/numerics.hpp"
#include "rank1/geometry/hyperbolic.hpp"
#include "rank1/geometry/types.hpp"

namespace rank1::geometry {

/// Curvature -k^2 on the upper half-plane, metric |dz| / (k y).
struct ConstantNegative {
  double k = 1.0;
};

/// Warp function f of a collar metric ds^2 + f(s)^2 dtheta^2.
///
/// Cosh:     f(s) = cosh(k s) / k, curvature -k^2 everywhere.
/// FlatBand: f(s) = c on |s| <= w and c + b (|s| - w)^3 outside, a C^2
///           profile that is exactly flat on the band and negatively curved
///           off it.
struct WarpProfile {
  enum class Kind { Cosh, FlatBand };
  Kind kind = Kind::Cosh;
  double k = 1.0;
  double c = 1.0;
  double w = 1.0;
  double b = 1.0;

  static WarpProfile cosh(double k) { return {Kind::Cosh, k, 1.0, 0.0, 0.0}; }
  static WarpProfile flat_band(double c, double w, double b) {
    return {Kind::FlatBand, 0.0, c, w, b};
  }

  /// (f, f', f'') at s.
  std::array<double, 3> eval(double s) const {
    if (kind == Kind::Cosh)
      return {std::cosh(k * s) / k, std::sinh(k * s), k * std::cosh(k * s)};
    double x = std::abs(s) - w;
    if (x <= 0.0) return {c, 0.0, 0.0};
    double sign = s < 0 ? -1.0 : 1.0;
    return {c + b * x * x * x, sign * 3.0 * b * x * x, 6.0 * b * x};
  }
};

/// Local warped band {|s| <= half_width} x circle. Chart coordinates are
/// (s, theta) with theta in [0, 2pi). This is a local model, not a compact
/// surface; it exists to host genuine flat strips.
struct CollarProfile {
  WarpProfile warp;
  double half_width = 3.0;
};

/// Curvature prescribed along an abstract unit-speed orbit. Has no chart.
struct CurvatureSignal {
  /// Serializable description when built from a config, empty for
  /// programmatic functions.
  struct Piece {
    double start = 0.0;
    double value = 0.0;
  };
  std::function<double(double)> fn;
  std::vector<Piece> pieces;  // piecewise-constant form, sorted by start
  double period = 0.0;        // 0: not periodic
  std::string label = "custom";

  double operator()(double t) const { return fn(t); }
};

/// Genus-2 surface of curvature -k^2 glued from the regular octagon in the
/// Poincare disk. Positions are kept in the closed fundamental domain.
struct OctagonHyperbolic {
  double k = 1.0;
};

class SurfaceModel {
 public:
  using Variant = std::variant<ConstantNegative, CollarProfile, CurvatureSignal, OctagonHyperbolic>;
  enum class Kind { ConstantNegative, CollarProfile, CurvatureSignal, OctagonHyperbolic };

  static SurfaceModel constant_negative(double k) {
    if (!(k > 0.0) || !std::isfinite(k))
      fail(ErrorCode::InvalidModel, "ConstantNegative requires k > 0");
    return SurfaceModel(ConstantNegative{k});
  }

  static SurfaceModel collar(WarpProfile warp, double half_width) {
    if (!(half_width > 0.0)) fail(ErrorCode::InvalidModel, "CollarProfile requires width > 0");
    if (warp.kind == WarpProfile::Kind::Cosh && !(warp.k > 0.0))
      fail(ErrorCode::InvalidModel, "cosh warp requires k > 0");
    if (warp.kind == WarpProfile::Kind::FlatBand &&
        !(warp.c > 0.0 && warp.w >= 0.0 && warp.b >= 0.0))
      fail(ErrorCode::InvalidModel, "flat-band warp requires c > 0, w >= 0, b >= 0");
    return SurfaceModel(CollarProfile{warp, half_width});
  }

  /// Arbitrary signal; positivity is checked on every evaluation.
  static SurfaceModel signal(std::function<double(double)> fn, std::string label = "custom") {
    CurvatureSignal s;
    s.fn = std::move(fn);
    s.label = std::move(label);
    return SurfaceModel(std::move(s));
  }

  static SurfaceModel constant_signal(double value) {
    return piecewise_signal({{0.0, value}}, 0.0);
  }

  /// Piecewise-constant signal: value of piece i holds on [start_i,
  /// start_{i+1}); the first value extends to -infinity and the last to
  /// +infinity unless `period` > 0, in which case the pattern repeats with
  /// that period starting from pieces[0].start.
  static SurfaceModel piecewise_signal(std::vector<CurvatureSignal::Piece> pieces, double period) {
    if (pieces.empty()) fail(ErrorCode::InvalidModel, "signal needs at least one piece");
    std::sort(pieces.begin(), pieces.end(),
              [](const auto& a, const auto& b) { return a.start < b.start; });
    for (const auto& p : pieces)
      if (!(p.value <= 0.0) || !std::isfinite(p.value))
        fail(ErrorCode::InvalidModel, "signal values must satisfy K <= 0");
    if (period < 0.0) fail(ErrorCode::InvalidModel, "signal period must be >= 0");
    if (period > 0.0 && pieces.back().start - pieces.front().start >= period)
      fail(ErrorCode::InvalidModel, "signal pieces must fit inside one period");
    CurvatureSignal s;
    s.pieces = pieces;
    s.period = period;
    s.label = "piecewise";
    s.fn = [pieces, period](double t) {
      if (period > 0.0) {
        double origin = pieces.front().start;
        t = origin + std::fmod(t - origin, period);
        if (t < origin) t += period;
      }
      double v = pieces.front().value;
      for (const auto& p : pieces) {
        if (t >= p.start)
          v = p.value;
        else
          break;
      }
      return v;
    };
    return SurfaceModel(std::move(s));
  }

  static SurfaceModel octagon(double k = 1.0) {
    if (!(k > 0.0) || !std::isfinite(k))
      fail(ErrorCode::InvalidModel, "OctagonHyperbolic requires k > 0");
    return SurfaceModel(OctagonHyperbolic{k});
  }

  Kind kind() const { return static_cast<Kind>(v_.index()); }
  const Variant& variant() const { return v_; }
  bool has_chart() const { return kind() != Kind::CurvatureSignal; }

  template <typename T>
  const T& as() const {
    return std::get<T>(v_);
  }

  /// Largest |K| the model can produce, when known in closed form (else 0).
  double curvature_bound() const {
    switch (kind()) {
      case Kind::ConstantNegative: return std::pow(as<ConstantNegative>().k, 2);
      case Kind::OctagonHyperbolic: return std::pow(as<OctagonHyperbolic>().k, 2);
      case Kind::CollarProfile: {
        const auto& c = as<CollarProfile>();
        double worst = 0.0;
        for (int i = 0; i <= 400; ++i) {
          double s = -c.half_width + 2.0 * c.half_width * i / 400.0;
          auto f = c.warp.eval(s);
          worst = std::max(worst, f[2] / f[0]);
        }
        return worst;
      }
      case Kind::CurvatureSignal: {
        const auto& s = as<CurvatureSignal>();
        double worst = 0.0;
        for (const auto& p : s.pieces) worst = std::max(worst, -p.value);
        return worst;
      }
    }
    return 0.0;
  }

 private:
  explicit SurfaceModel(Variant v) : v_(std::move(v)) {}
  Variant v_;
};

namespace detail {

inline void check_sign(double K) {
  if (K > 1e-14) fail(ErrorCode::DomainError, "positive curvature " + std::to_string(K));
}

inline void check_chart(const SurfaceModel& model, const UnitTangentState& state) {
  switch (model.kind()) {
    case SurfaceModel::Kind::ConstantNegative:
      if (!(state.position.y > 0.0) || !std::isfinite(state.position.x))
        fail(ErrorCode::DomainError, "upper half-plane requires y > 0");
      break;
    case SurfaceModel::Kind::CollarProfile:
      if (!(std::abs(state.position.x) <= model.as<CollarProfile>().half_width))
        fail(ErrorCode::DomainError, "collar chart left |s| <= width");
      break;
    case SurfaceModel::Kind::OctagonHyperbolic:
      if (!(state.position.norm() < 1.0))
        fail(ErrorCode::DomainError, "disk chart requires |z| < 1");
      break;
    case SurfaceModel::Kind::CurvatureSignal: break;
  }
}

}  // namespace detail

/// Gaussian curvature at the footpoint of `state` (signals use state.t).
inline double curvature_at(const SurfaceModel& model, const UnitTangentState& state) {
  detail::check_chart(model, state);
  double K = 0.0;
  switch (model.kind()) {
    case SurfaceModel::Kind::ConstantNegative: K = -std::pow(model.as<ConstantNegative>().k, 2); break;
    case SurfaceModel::Kind::OctagonHyperbolic: K = -std::pow(model.as<OctagonHyperbolic>().k, 2); break;
    case SurfaceModel::Kind::CollarProfile: {
      auto f = model.as<CollarProfile>().warp.eval(state.position.x);
      K = -f[2] / f[0];
      break;
    }
    case SurfaceModel::Kind::CurvatureSignal: K = model.as<CurvatureSignal>()(state.t); break;
  }
  detail::check_sign(K);
  return K;
}

/// Chart representation used by integrators and Newton solvers:
/// (x, y, cos, sin) with the direction as frame components.
using ChartState = std::array<double, 4>;

inline ChartState to_chart(const UnitTangentState& s) {
  return {s.position.x, s.position.y, s.direction.x, s.direction.y};
}

inline UnitTangentState from_chart(const ChartState& c, double t) {
  return {{c[0], c[1]}, Vec2{c[2], c[3]}.normalized(), t};
}

/// Geodesic vector field in the chart.
inline ChartState geodesic_rhs(const SurfaceModel& model, const ChartState& y) {
  const double c = y[2], s = y[3];
  switch (model.kind()) {
    case SurfaceModel::Kind::ConstantNegative: {
      const double k = model.as<ConstantNegative>().k;
      // conformal factor e^sigma = 1/(k y): turning rate -k*cos(angle).
      const double omega = -k * c;
      return {k * y[1] * c, k * y[1] * s, -omega * s, omega * c};
    }
    case SurfaceModel::Kind::OctagonHyperbolic: {
      const double k = model.as<OctagonHyperbolic>().k;
      const double scale = 0.5 * k * (1.0 - y[0] * y[0] - y[1] * y[1]);
      const double omega = k * (y[1] * c - y[0] * s);
      return {scale * c, scale * s, -omega * s, omega * c};
    }
    case SurfaceModel::Kind::CollarProfile: {
      auto f = model.as<CollarProfile>().warp.eval(y[0]);
      // Clairaut: f * sin(psi) is conserved.
      const double omega = -(f[1] / f[0]) * s;
      return {c, s / f[0], -omega * s, omega * c};
    }
    case SurfaceModel::Kind::CurvatureSignal:
      fail(ErrorCode::ChartEscape, "curvature signals have no positions");
  }
  return {};
}

/// Deck transformation relating two chart representatives of the same
/// point of the surface.
struct Deck {
  hyperbolic::Mobius mobius;  // octagon
  double theta_shift = 0.0;   // collar

  friend Deck operator*(const Deck& f, const Deck& g) {
    return {f.mobius * g.mobius, f.theta_shift + g.theta_shift};
  }
  Deck inverse() const { return {mobius.inverse(), -theta_shift}; }
};

inline UnitTangentState apply_deck(const SurfaceModel& model, const Deck& g,
                                   const UnitTangentState& s) {
  switch (model.kind()) {
    case SurfaceModel::Kind::OctagonHyperbolic: {
      auto z = s.position.complex();
      auto d = hyperbolic::push_direction(g.mobius, z, s.direction.complex());
      return {Vec2(g.mobius(z)), Vec2(d), s.t};
    }
    case SurfaceModel::Kind::CollarProfile:
      return {{s.position.x, s.position.y + g.theta_shift}, s.direction, s.t};
    default: return s;
  }
}

/// Brings a chart state back into the canonical domain (octagon reduction,
/// collar theta wrap). Returns the deck transformation that was applied.
inline Deck normalize_chart(const SurfaceModel& model, UnitTangentState& s,
                            std::vector<int>* letters = nullptr) {
  Deck applied;
  if (model.kind() == SurfaceModel::Kind::OctagonHyperbolic) {
    const auto& group = hyperbolic::octagon_group();
    auto z = s.position.complex();
    auto d = s.direction.complex();
    if (!group.contains(z)) {
      auto word = group.reduce(z, d);
      for (int l : word) applied.mobius = group.generator(l) * applied.mobius;
      s.position = Vec2(z);
      s.direction = Vec2(d).normalized();
      if (letters) *letters = std::move(word);
    }
  } else if (model.kind() == SurfaceModel::Kind::CollarProfile) {
    double th = wrap_positive(s.position.y);
    applied.theta_shift = th - s.position.y;
    s.position.y = th;
  }
  return applied;
}

namespace detail {

inline double sasaki(double base, double angle) { return std::hypot(base, angle); }

inline double chart_phase_distance(const SurfaceModel& model, const UnitTangentState& a,
                                   const UnitTangentState& b) {
  double dangle = std::abs(wrap_angle(a.angle() - b.angle()));
  switch (model.kind()) {
    case SurfaceModel::Kind::ConstantNegative: {
      const double k = model.as<ConstantNegative>().k;
      double chord = (a.position - b.position).norm();
      double base = 2.0 / k * std::asinh(chord / (2.0 * std::sqrt(a.position.y * b.position.y)));
      return sasaki(base, dangle);
    }
    case SurfaceModel::Kind::OctagonHyperbolic: {
      const double k = model.as<OctagonHyperbolic>().k;
      double base = hyperbolic::disk_distance(a.position.complex(), b.position.complex()) / k;
      return sasaki(base, dangle);
    }
    case SurfaceModel::Kind::CollarProfile: {
      const auto& c = model.as<CollarProfile>();
      double ds = a.position.x - b.position.x;
      double dth = wrap_angle(a.position.y - b.position.y);
      double f = c.warp.eval(0.5 * (a.position.x + b.position.x))[0];
      return sasaki(std::hypot(ds, f * dth), dangle);
    }
    case SurfaceModel::Kind::CurvatureSignal: return sasaki(std::abs(a.t - b.t), dangle);
  }
  return 0.0;
}

}  // namespace detail

/// Representative of `s` (over deck transformations adjacent to the
/// canonical domain) closest to `target`, and the transformation used.
inline std::pair<UnitTangentState, Deck> closest_image(const SurfaceModel& model,
                                                       const UnitTangentState& s,
                                                       const UnitTangentState& target) {
  if (model.kind() == SurfaceModel::Kind::OctagonHyperbolic) {
    UnitTangentState best = s;
    Deck best_deck;
    double best_d = detail::chart_phase_distance(model, s, target);
    for (const auto& g : hyperbolic::octagon_group().neighbors()) {
      Deck deck{g, 0.0};
      auto img = apply_deck(model, deck, s);
      double d = detail::chart_phase_distance(model, img, target);
      if (d < best_d) {
        best_d = d;
        best = img;
        best_deck = deck;
      }
    }
    return {best, best_deck};
  }
  if (model.kind() == SurfaceModel::Kind::CollarProfile) {
    double shift = target.position.y - s.position.y;
    shift = std::round(shift / kTwoPi) * kTwoPi;
    Deck deck{{}, shift};
    return {apply_deck(model, deck, s), deck};
  }
  return {s, Deck{}};
}

/// Sasaki-style distance on the unit tangent bundle: hypot of the base
/// distance and the angle between directions. Octagon and collar distances
/// are taken on the quotient surface.
inline double phase_distance(const SurfaceModel& model, const UnitTangentState& a,
                             const UnitTangentState& b) {
  if (model.kind() == SurfaceModel::Kind::OctagonHyperbolic) {
    UnitTangentState ra = a, rb = b;
    normalize_chart(model, ra);
    normalize_chart(model, rb);
    return detail::chart_phase_distance(model, closest_image(model, rb, ra).first, ra);
  }
  return detail::chart_phase_distance(model, a, b);
}

}  // namespace rank1::geometry
