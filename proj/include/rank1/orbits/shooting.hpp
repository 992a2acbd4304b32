#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rank1/core/error.hpp"
#include "rank1/core/numerics.hpp"
#include "rank1/geometry/integrate.hpp"

namespace rank1::orbits {

using geometry::Deck;
using geometry::GeodesicPath;
using geometry::PathSample;
using geometry::SurfaceModel;
using geometry::UnitTangentState;

/// Joint states v_j with transition times T_{j+1} - T_j. mismatch[j] is the
/// phase distance from g^{T_{j+1}-T_j}(v_j) to v_{j+1} (v_0 when cyclic and j
/// is last).
struct PseudoOrbit {
  std::vector<UnitTangentState> states;
  std::vector<double> durations;
  std::vector<double> mismatch;
  bool cyclic = true;
  double tau_min = 0.0;

  std::size_t size() const { return states.size(); }
  double total_time() const {
    double s = 0.0;
    for (double d : durations) s += d;
    return s;
  }
  double max_mismatch() const {
    double m = 0.0;
    for (double d : mismatch) m = std::max(m, d);
    return m;
  }
};

namespace detail {

/// Exact flow for the constant-curvature disk, walked in pieces of at most
/// 2 units so positions stay well inside the disk. Numerical RK4 otherwise.
inline UnitTangentState flow(const SurfaceModel& model, UnitTangentState v, double t, double dt) {
  if (t == 0.0) return v;
  if (model.kind() == SurfaceModel::Kind::OctagonHyperbolic) {
    const double k = model.as<geometry::OctagonHyperbolic>().k;
    geometry::normalize_chart(model, v);
    const double t_end = v.t + t;
    double left = t;
    while (left != 0.0) {
      double piece = std::clamp(left, -2.0, 2.0);
      auto [z, d] = geometry::hyperbolic::geodesic_point(v.position.complex(), v.direction.complex(), k * piece);
      v.position = geometry::Vec2(z);
      v.direction = geometry::Vec2(d);
      geometry::normalize_chart(model, v);
      left -= piece;
    }
    v.t = t_end;
    return v;
  }
  auto a = geometry::advance(model, v, t, geometry::detail::step_count(t, dt));
  return a.end;
}

}  // namespace detail

/// Builds a pseudo-orbit and measures its joint mismatches.
inline PseudoOrbit make_pseudo_orbit(const SurfaceModel& model, std::vector<UnitTangentState> states,
                                     std::vector<double> durations, bool cyclic = true, double tau_min = 1e-3,
                                     double dt = 1e-3) {
  if (states.empty() || states.size() != durations.size())
    fail(ErrorCode::DomainError, "pseudo-orbit needs one duration per state");
  if (!(tau_min > 0.0)) fail(ErrorCode::DomainError, "tau_min must be positive");
  for (double d : durations)
    if (!(d >= tau_min)) fail(ErrorCode::DomainError, "transition time below tau_min");
  PseudoOrbit p;
  p.states = std::move(states);
  p.durations = std::move(durations);
  p.cyclic = cyclic;
  p.tau_min = tau_min;
  const std::size_t joints = cyclic ? p.size() : p.size() - 1;
  for (std::size_t j = 0; j < joints; ++j) {
    auto end = detail::flow(model, p.states[j], p.durations[j], dt);
    p.mismatch.push_back(geometry::phase_distance(model, end, p.states[(j + 1) % p.size()]));
  }
  return p;
}

/// The one-leg cyclic pseudo-orbit of a closed path.
inline PseudoOrbit pseudo_orbit_from_path(const SurfaceModel& model, const GeodesicPath& path, double dt = 1e-3) {
  if (!(path.period > 0.0)) fail(ErrorCode::NotClosed, "path has no period");
  return make_pseudo_orbit(model, {path.start()}, {path.period}, true, 1e-3, dt);
}

struct RefineOptions {
  /// Closure residual (max joint phase distance) to reach.
  double tol = 1e-10;
  /// RK4 step for the shooting segments.
  double dt = 2e-3;
  /// Legs are split so that no shooting segment is longer than this.
  double max_segment = 1.0;
  std::size_t max_iter = 40;
  /// Largest joint mismatch accepted on input.
  double delta_shadow = 0.25;
  /// Largest shadowing distance accepted on output.
  double epsilon = 0.1;
  /// Mean curvature along each leg must be at most -fraction * max|K|.
  double curvature_fraction = 0.05;
  double fd_step = 1e-7;
  /// Spacing of the matched-time shadowing check.
  double shadow_spacing = 0.05;
};

struct Refinement {
  GeodesicPath path;
  double residual = 0.0;
  std::size_t iterations = 0;
  double shadow_distance = 0.0;
  /// Start states and durations of the refined legs (one per input leg).
  std::vector<UnitTangentState> leg_states;
  std::vector<double> leg_durations;
};

namespace detail {

struct Node {
  UnitTangentState s;
  double tau = 0.0;
  std::size_t steps = 1;
};

inline std::array<double, 3> chart_diff(const UnitTangentState& a, const UnitTangentState& b) {
  return {a.position.x - b.position.x, a.position.y - b.position.y, wrap_angle(a.angle() - b.angle())};
}

inline double mean_leg_curvature(const SurfaceModel& model, UnitTangentState v, double T, double dt) {
  const std::size_t n = geometry::detail::step_count(T, dt);
  const double h = T / static_cast<double>(n);
  geometry::normalize_chart(model, v);
  double acc = 0.5 * geometry::curvature_at(model, v);
  for (std::size_t i = 1; i <= n; ++i) {
    v = geometry::rk4_advance(model, v, h);
    geometry::normalize_chart(model, v);
    acc += (i == n ? 0.5 : 1.0) * geometry::curvature_at(model, v);
  }
  return acc / static_cast<double>(n);
}

class Shooter {
 public:
  Shooter(const SurfaceModel& model, std::vector<Node> nodes, const RefineOptions& opts)
      : model_(model), nodes_(std::move(nodes)), opts_(opts) {}

  std::vector<Node>& nodes() { return nodes_; }

  /// Recomputes the deck transformations that carry each segment end next to
  /// the following node; returns the max joint phase distance.
  double prepare() {
    const std::size_t N = nodes_.size();
    for (auto& n : nodes_) geometry::normalize_chart(model_, n.s);
    decks_.assign(N, Deck{});
    residual_.assign(3 * N, 0.0);
    double worst = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const auto& target = nodes_[(i + 1) % N].s;
      auto a = geometry::advance(model_, nodes_[i].s, nodes_[i].tau, nodes_[i].steps);
      auto [img, C] = geometry::closest_image(model_, a.end, target);
      decks_[i] = C * a.deck;
      auto d = chart_diff(img, target);
      for (int c = 0; c < 3; ++c) residual_[3 * i + c] = d[c];
      worst = std::max(worst, geometry::detail::chart_phase_distance(model_, img, target));
    }
    return worst;
  }

  /// End of segment i from (s, tau), expressed next to node i+1.
  UnitTangentState end_of(std::size_t i, const UnitTangentState& s, double tau) const {
    auto a = geometry::advance(model_, s, tau, nodes_[i].steps);
    return geometry::apply_deck(model_, decks_[i] * a.deck.inverse(), a.end);
  }

  std::vector<double> residuals(const std::vector<Node>& trial) const {
    const std::size_t N = trial.size();
    std::vector<double> r(3 * N);
    for (std::size_t i = 0; i < N; ++i) {
      auto e = end_of(i, trial[i].s, trial[i].tau);
      auto d = chart_diff(e, trial[(i + 1) % N].s);
      for (int c = 0; c < 3; ++c) r[3 * i + c] = d[c];
    }
    return r;
  }

  /// One damped Newton step on the current nodes.
  void newton_step() {
    const std::size_t N = nodes_.size();
    const auto M = static_cast<Eigen::Index>(4 * N);
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(M, M);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(M);
    const double eps = opts_.fd_step;
    for (std::size_t i = 0; i < N; ++i) {
      const auto& n = nodes_[i];
      const double x = n.s.position.x, y = n.s.position.y, th = n.s.angle();
      auto at = [&](double dx, double dy, double dth, double dtau) {
        auto s = UnitTangentState::from_angle({x + dx, y + dy}, th + dth, n.s.t);
        return end_of(i, s, n.tau + dtau);
      };
      const std::array<std::array<double, 4>, 4> dirs{{{eps, 0, 0, 0}, {0, eps, 0, 0}, {0, 0, eps, 0}, {0, 0, 0, eps}}};
      for (int v = 0; v < 4; ++v) {
        const auto& d = dirs[v];
        auto plus = at(d[0], d[1], d[2], d[3]);
        auto minus = at(-d[0], -d[1], -d[2], -d[3]);
        auto diff = chart_diff(plus, minus);
        for (int c = 0; c < 3; ++c) J(3 * i + c, 4 * i + v) = diff[c] / (2.0 * eps);
      }
      // r_{i-1} = end_{i-1} - s_i.
      const std::size_t prev = (i + N - 1) % N;
      for (int c = 0; c < 3; ++c) J(3 * prev + c, 4 * i + c) -= 1.0;
      // No motion along the flow at each node.
      auto f = geometry::geodesic_rhs(model_, geometry::to_chart(n.s));
      J(3 * N + i, 4 * i + 0) = f[0];
      J(3 * N + i, 4 * i + 1) = f[1];
    }
    for (std::size_t k = 0; k < 3 * N; ++k) rhs(k) = -residual_[k];
    Eigen::VectorXd delta = J.colPivHouseholderQr().solve(rhs);

    auto norm2 = [](const std::vector<double>& r) {
      double s = 0.0;
      for (double v : r) s += v * v;
      return s;
    };
    const double base = norm2(residual_);
    double lambda = 1.0;
    std::vector<Node> trial;
    for (int attempt = 0; attempt < 12; ++attempt, lambda *= 0.5) {
      trial = nodes_;
      for (std::size_t i = 0; i < N; ++i) {
        auto& n = trial[i];
        const auto j = static_cast<Eigen::Index>(4 * i);
        n.s = UnitTangentState::from_angle({n.s.position.x + lambda * delta(j), n.s.position.y + lambda * delta(j + 1)},
                                           n.s.angle() + lambda * delta(j + 2), n.s.t);
        n.tau += lambda * delta(j + 3);
        if (!(n.tau > 0.0)) n.tau = nodes_[i].tau;
      }
      try {
        if (norm2(residuals(trial)) < base) break;
      } catch (const Error&) {
        // Left the chart: shrink the step.
      }
    }
    nodes_ = std::move(trial);
  }

 private:
  const SurfaceModel& model_;
  std::vector<Node> nodes_;
  RefineOptions opts_;
  std::vector<Deck> decks_;
  std::vector<double> residual_;
};

}  // namespace detail

/// Closes a cyclic pseudo-orbit by multiple-shooting Newton on the joint
/// states and transition times.
inline Refinement refine_closed_orbit(const SurfaceModel& model, const PseudoOrbit& pseudo,
                                      const RefineOptions& opts = {}) {
  if (!model.has_chart()) fail(ErrorCode::DomainError, "closed orbits need a chart model");
  if (!pseudo.cyclic) fail(ErrorCode::DomainError, "pseudo-orbit must be cyclic");
  if (pseudo.size() == 0) fail(ErrorCode::DomainError, "empty pseudo-orbit");
  for (double m : pseudo.mismatch)
    if (!(m < opts.delta_shadow))
      fail(ErrorCode::HypothesisViolation, "joint mismatch " + std::to_string(m) + " exceeds delta_shadow");
  const double bound = model.curvature_bound();
  for (std::size_t j = 0; j < pseudo.size(); ++j) {
    double meanK = detail::mean_leg_curvature(model, pseudo.states[j], pseudo.durations[j], opts.dt);
    if (!(meanK <= -opts.curvature_fraction * bound) || bound <= 0.0)
      fail(ErrorCode::HypothesisViolation,
           "mean curvature " + std::to_string(meanK) + " on leg " + std::to_string(j) + " is not negative enough");
  }

  // Split legs into short shooting segments along the pseudo-orbit.
  std::vector<detail::Node> nodes;
  std::vector<std::size_t> leg_first;
  for (std::size_t j = 0; j < pseudo.size(); ++j) {
    leg_first.push_back(nodes.size());
    const double T = pseudo.durations[j];
    const auto pieces = static_cast<std::size_t>(std::max(1.0, std::ceil(T / opts.max_segment - 1e-9)));
    const double tau = T / static_cast<double>(pieces);
    UnitTangentState s = pseudo.states[j];
    for (std::size_t p = 0; p < pieces; ++p) {
      nodes.push_back({s, tau, geometry::detail::step_count(tau, opts.dt)});
      if (p + 1 < pieces) s = detail::flow(model, s, tau, opts.dt);
    }
  }

  detail::Shooter shooter(model, std::move(nodes), opts);
  Refinement out;
  double res = shooter.prepare();
  while (!(res < opts.tol)) {
    if (out.iterations >= opts.max_iter)
      fail(ErrorCode::NoConvergence,
           "multiple shooting stalled at residual " + std::to_string(res) + " after " + std::to_string(out.iterations) +
               " iterations");
    shooter.newton_step();
    ++out.iterations;
    res = shooter.prepare();
    if (!std::isfinite(res)) fail(ErrorCode::NoConvergence, "multiple shooting diverged");
  }
  out.residual = res;

  // Assemble the closed path from the shooting segments.
  const auto& final_nodes = shooter.nodes();
  GeodesicPath& path = out.path;
  double t = 0.0;
  for (std::size_t i = 0; i < final_nodes.size(); ++i) {
    const auto& n = final_nodes[i];
    const double h = n.tau / static_cast<double>(n.steps);
    path.dt = std::max(path.dt, h);
    UnitTangentState s = n.s;
    s.t = t;
    if (i == 0) path.samples.push_back({t, s, geometry::curvature_at(model, s)});
    for (std::size_t k = 0; k < n.steps; ++k) {
      s = geometry::rk4_advance(model, s, h);
      std::vector<int> letters;
      geometry::normalize_chart(model, s, &letters);
      if (!letters.empty()) path.deck_events.push_back({path.samples.size(), letters});
      path.samples.push_back({s.t, s, geometry::curvature_at(model, s)});
    }
    t += n.tau;
    if (i + 1 < final_nodes.size()) {
      // Restart exactly on the next node.
      UnitTangentState next = final_nodes[i + 1].s;
      next.t = t;
      path.samples.back() = {t, next, geometry::curvature_at(model, next)};
    }
  }
  path.samples.back().t = t;
  path.samples.back().state.t = t;
  path.period = t;
  path.closure_distance = res;
  path.closed = true;

  for (std::size_t j = 0; j < pseudo.size(); ++j) {
    const std::size_t a = leg_first[j], b = j + 1 < pseudo.size() ? leg_first[j + 1] : final_nodes.size();
    double T = 0.0;
    for (std::size_t i = a; i < b; ++i) T += final_nodes[i].tau;
    out.leg_states.push_back(final_nodes[a].s);
    out.leg_durations.push_back(T);
  }

  // Matched-time shadowing distance, leg by leg.
  for (std::size_t j = 0; j < pseudo.size(); ++j) {
    const std::size_t a = leg_first[j], b = j + 1 < pseudo.size() ? leg_first[j + 1] : final_nodes.size();
    const double T = std::min(pseudo.durations[j], out.leg_durations[j]);
    UnitTangentState ref = pseudo.states[j];
    double offset = 0.0, t_prev = 0.0;
    std::size_t node = a;
    const auto steps = static_cast<std::size_t>(std::ceil(T / opts.shadow_spacing));
    for (std::size_t k = 0; k <= steps; ++k) {
      const double tk = std::min(T, static_cast<double>(k) * opts.shadow_spacing);
      ref = detail::flow(model, ref, tk - t_prev, opts.dt);
      t_prev = tk;
      while (node + 1 < b && tk > offset + final_nodes[node].tau) offset += final_nodes[node++].tau;
      const auto& n = final_nodes[node];
      const double local = tk - offset;
      UnitTangentState got = n.s;
      if (local > 0.0) got = geometry::advance(model, n.s, local, geometry::detail::step_count(local, opts.dt)).end;
      out.shadow_distance = std::max(out.shadow_distance, geometry::phase_distance(model, got, ref));
    }
  }
  if (out.shadow_distance > opts.epsilon)
    fail(ErrorCode::NoConvergence, "refined orbit does not shadow its pseudo-orbit (distance " +
                                       std::to_string(out.shadow_distance) + ")");
  return out;
}

}  // namespace rank1::orbits
