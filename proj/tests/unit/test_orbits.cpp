#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "rank1/orbits/bridge.hpp"
#include "rank1/orbits/coding.hpp"
#include "rank1/orbits/library.hpp"
#include "rank1/symbolic/suspension.hpp"
#include "support/oracles.hpp"

using namespace rank1;
using namespace rank1::orbits;
using geometry::WarpProfile;

namespace {

template <typename F>
ErrorCode error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::IoError;
}

const double kInradius = std::acosh(1.0 + std::sqrt(2.0));

/// Translation length of a product of oracle disk translations.
double oracle_length(const std::vector<int>& letters) {
  oracle::Mat2 m{1.0, 0.0, 0.0, 1.0};
  for (int l : letters) m = m * oracle::disk_translation(l * kPi / 4, 2 * kInradius);
  return 2.0 * std::acosh(std::abs((m.a + m.d).real()) / 2.0);
}

/// Closed loop at constant s on a collar, heading along the circle. A
/// geodesic only where f'(s) = 0; used to place samples at a known distance
/// from a flat waist.
GeodesicPath collar_loop(const SurfaceModel& m, double s, std::size_t n = 2000) {
  const double f = m.as<geometry::CollarProfile>().warp.eval(s)[0];
  GeodesicPath p;
  p.period = kTwoPi * f;
  p.dt = p.period / static_cast<double>(n);
  for (std::size_t i = 0; i <= n; ++i) {
    const double t = p.period * static_cast<double>(i) / static_cast<double>(n);
    auto st = UnitTangentState::from_angle({s, wrap_positive(t / f)}, kPi / 2, t);
    p.samples.push_back({t, st, geometry::curvature_at(m, st)});
  }
  p.closed = true;
  return p;
}

const SurfaceModel& octagon() {
  static const SurfaceModel m = SurfaceModel::octagon(1.0);
  return m;
}

/// The two axis orbits through the origin and a bridge between them.
struct BridgeFixture {
  Refinement a, b, c;
  PseudoOrbit pseudo;
};

const BridgeFixture& bridge_fixture() {
  static const BridgeFixture fx = [] {
    BridgeFixture f;
    f.a = octagon_word_orbit(octagon(), {0});
    f.b = octagon_word_orbit(octagon(), {2});
    f.pseudo = bridge_orbits(octagon(), f.a.path, f.b.path);
    f.c = refine_closed_orbit(octagon(), f.pseudo);
    return f;
  }();
  return fx;
}

OrbitLibrary bridge_library(bool with_bridge) {
  const auto& fx = bridge_fixture();
  OrbitLibrary lib;
  add_orbit(lib, octagon(), fx.a.path, "A");
  add_orbit(lib, octagon(), fx.b.path, "B");
  if (with_bridge) add_orbit(lib, octagon(), fx.c.path, "C");
  return lib;
}

SectionSpec origin_section() { return {UnitTangentState::from_angle({0.0, 0.0}, kPi / 4), 0.5}; }

}  // namespace

TEST(Refine, ExactClosedInputIsKept) {
  auto m = SurfaceModel::collar(WarpProfile::cosh(1.0), 3.0);
  auto p = make_pseudo_orbit(m, {UnitTangentState::from_angle({0.0, 0.0}, kPi / 2)}, {kTwoPi});
  EXPECT_LT(p.max_mismatch(), 1e-9);
  auto r = refine_closed_orbit(m, p);
  EXPECT_LT(r.residual, 1e-10);
  EXPECT_LE(r.iterations, 1u);
  EXPECT_NEAR(r.path.period, kTwoPi, 1e-9);
  EXPECT_LT(r.shadow_distance, 1e-8);
  for (const auto& s : r.path.samples) EXPECT_NEAR(s.state.position.x, 0.0, 1e-10);
}

TEST(Refine, PerturbedWaistConverges) {
  auto m = SurfaceModel::collar(WarpProfile::cosh(1.0), 3.0);
  std::vector<UnitTangentState> states;
  for (int j = 0; j < 4; ++j) states.push_back(UnitTangentState::from_angle({0.0, j * kPi / 2}, kPi / 2 + 1e-3));
  auto p = make_pseudo_orbit(m, states, std::vector<double>(4, kPi / 2));
  EXPECT_GT(p.max_mismatch(), 1e-4);
  auto r = refine_closed_orbit(m, p);
  EXPECT_LT(r.residual, 1e-8);
  EXPECT_LT(r.shadow_distance, 0.1);
  EXPECT_NEAR(r.path.period, kTwoPi, 1e-6);
  double worst = 0.0;
  for (const auto& s : r.path.samples) worst = std::max(worst, std::abs(s.state.position.x));
  EXPECT_LT(worst, 1e-6);
  EXPECT_LT(geometry::phase_distance(m, r.path.start(), r.path.end()), 1e-8);
}

TEST(Refine, PerturbedOctagonWordConverges) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (const auto& w : std::vector<std::vector<int>>{{0}, {0, 1}}) {
    auto exact = octagon_word_pseudo_orbit(octagon(), w);
    auto states = exact.states;
    for (auto& s : states)
      s = UnitTangentState::from_angle({s.position.x + 1e-3 * unit(rng), s.position.y + 1e-3 * unit(rng)},
                                       s.angle() + 1e-3 * unit(rng));
    auto p = make_pseudo_orbit(octagon(), states, exact.durations);
    EXPECT_GT(p.max_mismatch(), 1e-4);
    auto r = refine_closed_orbit(octagon(), p);
    EXPECT_LT(r.residual, 1e-8);
    EXPECT_LT(r.shadow_distance, 0.1);
    EXPECT_NEAR(r.path.period, oracle_length(w), 1e-6);
  }
}

TEST(Refine, Errors) {
  auto m = SurfaceModel::collar(WarpProfile::cosh(1.0), 3.0);
  std::vector<UnitTangentState> states;
  for (int j = 0; j < 4; ++j) states.push_back(UnitTangentState::from_angle({0.0, j * kPi / 2 + (j == 3 ? 0.3 : 0.0)}, kPi / 2));
  auto far = make_pseudo_orbit(m, states, std::vector<double>(4, kPi / 2));
  EXPECT_EQ(error_of([&] { refine_closed_orbit(m, far); }), ErrorCode::HypothesisViolation);
  auto flat = SurfaceModel::collar(WarpProfile::flat_band(1.0, 0.5, 1.0), 3.0);
  auto waist = make_pseudo_orbit(flat, {UnitTangentState::from_angle({0.0, 0.0}, kPi / 2)}, {kTwoPi});
  EXPECT_EQ(error_of([&] { refine_closed_orbit(flat, waist); }), ErrorCode::HypothesisViolation);
  auto open = make_pseudo_orbit(m, {UnitTangentState::from_angle({0.0, 0.0}, kPi / 2)}, {kTwoPi}, false);
  EXPECT_EQ(error_of([&] { refine_closed_orbit(m, open); }), ErrorCode::DomainError);
  auto signal = SurfaceModel::constant_signal(-1.0);
  EXPECT_EQ(error_of([&] { refine_closed_orbit(signal, waist); }), ErrorCode::DomainError);
  EXPECT_EQ(error_of([&] { make_pseudo_orbit(m, {UnitTangentState{}}, {0.0}); }), ErrorCode::DomainError);
}

TEST(WordOrbit, LengthMatchesGroupOracle) {
  for (const auto& w : std::vector<std::vector<int>>{{0}, {2}, {1}, {0, 2}, {0, 1}}) {
    auto r = octagon_word_orbit(octagon(), w);
    EXPECT_NEAR(r.path.period, oracle_length(w), 1e-8) << "word of length " << w.size();
    EXPECT_LT(r.residual, 1e-10);
    EXPECT_LT(r.shadow_distance, 1e-6);
  }
  EXPECT_NEAR(oracle_length({0}), 2 * kInradius, 1e-12);
}

TEST(WordOrbit, CurvatureScaling) {
  auto m = SurfaceModel::octagon(2.0);
  auto r = octagon_word_orbit(m, {0});
  EXPECT_NEAR(r.path.period, oracle_length({0}) / 2.0, 1e-8);
  OrbitLibrary lib;
  auto& o = add_orbit(lib, m, r.path, "scaled");
  EXPECT_NEAR(o.exponent, 2.0, 1e-6);
}

TEST(WordOrbit, Errors) {
  auto collar = SurfaceModel::collar(WarpProfile::cosh(1.0), 3.0);
  EXPECT_EQ(error_of([&] { octagon_word_pseudo_orbit(collar, {0}); }), ErrorCode::DomainError);
  EXPECT_EQ(error_of([&] { octagon_word_pseudo_orbit(octagon(), {}); }), ErrorCode::DomainError);
  EXPECT_EQ(error_of([&] { octagon_word_pseudo_orbit(octagon(), {8}); }), ErrorCode::DomainError);
  // g0 g4 is the identity.
  EXPECT_EQ(error_of([&] { octagon_word_pseudo_orbit(octagon(), {0, 4}); }), ErrorCode::DomainError);
}

TEST(Bridge, JointsAndShadowing) {
  const auto& fx = bridge_fixture();
  ASSERT_EQ(fx.pseudo.size(), 4u);
  for (double m : fx.pseudo.mismatch) EXPECT_LT(m, 0.25);
  EXPECT_LT(fx.c.residual, 1e-8);
  EXPECT_LT(fx.c.shadow_distance, 0.1);
  EXPECT_NEAR(fx.c.path.period, fx.pseudo.total_time(), 0.5);
  // Longer than two loops around each orbit.
  EXPECT_GT(fx.c.path.period, 2 * (fx.a.path.period + fx.b.path.period));
  // Distinct from both ends.
  EXPECT_GT(std::abs(fx.c.path.period - fx.a.path.period), 1.0);
}

TEST(Bridge, SameOrbitIsDegenerate) {
  const auto& fx = bridge_fixture();
  auto p = bridge_orbits(octagon(), fx.a.path, fx.a.path);
  ASSERT_EQ(p.size(), 1u);
  EXPECT_NEAR(p.total_time(), fx.a.path.period, 1e-12);
  EXPECT_LT(p.max_mismatch(), 1e-8);
}

TEST(Bridge, FlatBandIsRejected) {
  auto flat = SurfaceModel::collar(WarpProfile::flat_band(1.0, 0.5, 1.0), 3.0);
  auto a = collar_loop(flat, 0.0);
  auto b = collar_loop(flat, 0.2);
  EXPECT_EQ(error_of([&] { bridge_orbits(flat, a, b); }), ErrorCode::HypothesisViolation);
  GeodesicPath open = a;
  open.closed = false;
  EXPECT_EQ(error_of([&] { bridge_orbits(flat, open, b); }), ErrorCode::NotClosed);
}

TEST(Bridge, NonOctagonHasNoConnector) {
  auto m = SurfaceModel::collar(WarpProfile::cosh(1.0), 3.0);
  auto a = collar_loop(m, 0.0);
  auto b = a;
  for (auto& s : b.samples) s.state.position.y = wrap_positive(s.state.position.y + 1.0);
  b.period += 0.5;
  EXPECT_EQ(error_of([&] { bridge_orbits(m, a, b); }), ErrorCode::NoConnector);
}

TEST(Library, ExponentsRespectSchwarz) {
  auto lib = bridge_library(true);
  for (const auto& o : lib.orbits) {
    EXPECT_LE(o.exponent, o.schwarz_bound + 1e-9) << o.label;
    EXPECT_NEAR(o.exponent, 1.0, 1e-6) << o.label;
    ASSERT_EQ(o.unstable.size(), o.path.samples.size());
    for (double u : o.unstable) EXPECT_NEAR(u, 1.0, 1e-6);
  }
  // Mixed curvature: strictly below the bound.
  auto m = SurfaceModel::collar(WarpProfile::flat_band(1.0, 0.5, 1.0), 3.0);
  OrbitLibrary mixed;
  auto& o = add_orbit(mixed, m, collar_loop(m, 0.7), "off-waist");
  EXPECT_LE(o.exponent, o.schwarz_bound + 1e-9);
  GeodesicPath open = collar_loop(m, 0.7);
  open.closed = false;
  EXPECT_EQ(error_of([&] { add_orbit(mixed, m, open, "open"); }), ErrorCode::NotClosed);
}

TEST(Library, BuildInParallelIsDeterministic) {
  std::vector<PseudoOrbit> cands{octagon_word_pseudo_orbit(octagon(), {0}), octagon_word_pseudo_orbit(octagon(), {2}),
                                 octagon_word_pseudo_orbit(octagon(), {0, 2})};
  auto one = build_library(octagon(), cands, {"a", "b", "ab"}, {}, 1);
  auto four = build_library(octagon(), cands, {"a", "b", "ab"}, {}, 4);
  EXPECT_EQ(library_to_json(one), library_to_json(four));
  EXPECT_EQ(one.models.size(), 1u);
  EXPECT_EQ(one.labels(), (std::vector<std::string>{"a", "b", "ab"}));
}

TEST(LambdaEll, NestedAndAwayFromFlatSet) {
  auto m = SurfaceModel::collar(WarpProfile::flat_band(1.0, 0.5, 1.0), 3.0);
  OrbitLibrary lib;
  for (double s : {0.0, 0.2, 0.55, 0.8, 1.6}) add_orbit(lib, m, collar_loop(m, s), "s=" + std::to_string(s));
  // A second model never sees the first model's flat set.
  add_orbit(lib, octagon(), bridge_fixture().a.path, "octagon");

  auto flags0 = flat_samples(lib, lib.orbits[0]);
  EXPECT_TRUE(std::all_of(flags0.begin(), flags0.end(), [](bool b) { return b; }));
  auto flags3 = flat_samples(lib, lib.orbits[3]);
  EXPECT_TRUE(std::none_of(flags3.begin(), flags3.end(), [](bool b) { return b; }));

  std::vector<std::set<std::string>> sets;
  for (std::size_t ell = 1; ell <= 8; ++ell) {
    auto sub = build_lambda_ell(lib, ell);
    EXPECT_DOUBLE_EQ(sub.exclusion_radius, 1.0 / static_cast<double>(ell));
    auto labels = sub.labels();
    sets.emplace_back(labels.begin(), labels.end());
    for (const auto& o : sub.orbits) {
      auto f = flat_samples(sub, o);
      EXPECT_TRUE(std::none_of(f.begin(), f.end(), [](bool b) { return b; })) << o.label;
    }
  }
  for (std::size_t i = 0; i + 1 < sets.size(); ++i)
    EXPECT_TRUE(std::includes(sets[i + 1].begin(), sets[i + 1].end(), sets[i].begin(), sets[i].end()));
  // Flat waists never enter; distance to the flat loop at s = 0.2 sets the rest.
  EXPECT_EQ(sets[0], (std::set<std::string>{"s=1.600000", "octagon"}));
  EXPECT_EQ(sets[1], (std::set<std::string>{"s=0.800000", "s=1.600000", "octagon"}));
  EXPECT_EQ(sets[2], (std::set<std::string>{"s=0.550000", "s=0.800000", "s=1.600000", "octagon"}));
  EXPECT_EQ(sets[7], sets[2]);
  EXPECT_EQ(error_of([&] { build_lambda_ell(lib, 0); }), ErrorCode::DomainError);
}

TEST(Library, JsonRoundTrip) {
  auto lib = build_lambda_ell(bridge_library(true), 3);
  annotate_crossings(lib, origin_section());
  auto j = library_to_json(lib);
  auto back = library_from_json(j);
  EXPECT_EQ(library_to_json(back), j);
  ASSERT_EQ(back.orbits.size(), 3u);
  EXPECT_FALSE(back.orbits[0].crossing_times.empty());
  EXPECT_EQ(error_of([&] { library_from_json(json{{"models", json::array()}}); }), ErrorCode::InvalidConfig);
}

TEST(Coding, SingleOrbitIsACycle) {
  OrbitLibrary lib;
  auto r = octagon_word_orbit(octagon(), {0, 1});
  add_orbit(lib, octagon(), r.path, "ab");
  auto crossings = orbit_crossings(lib, 0, origin_section(), 1e-10);
  ASSERT_GE(crossings.size(), 2u);
  auto c = build_markov_coding(octagon(), lib, origin_section(), {0.1, 0});
  const std::size_t m = c.cells.size();
  EXPECT_EQ(m, crossings.size());
  // Permutation matrix of a single cycle.
  auto sft = symbolic::Sft(c.transitions);
  EXPECT_TRUE(sft.strongly_connected());
  for (std::size_t i = 0; i < m; ++i) {
    int row = 0;
    for (int v : c.transitions[i]) row += v;
    EXPECT_EQ(row, 1);
  }
  double roof = 0.0;
  for (const auto& cell : c.cells) roof += cell.roof;
  EXPECT_NEAR(roof, r.path.period, 1e-8);
}

TEST(Coding, TwoOrbitsAreBlockDiagonalAndBridgeConnects) {
  auto two = build_markov_coding(octagon(), bridge_library(false), origin_section(), {0.1, 0});
  ASSERT_EQ(two.cells.size(), 2u);
  EXPECT_EQ(two.transitions, (std::vector<std::vector<int>>{{1, 0}, {0, 1}}));
  EXPECT_FALSE(symbolic::Sft(two.transitions).strongly_connected());

  auto three = build_markov_coding(octagon(), bridge_library(true), origin_section(), {0.1, 0});
  EXPECT_TRUE(symbolic::Sft(three.transitions).strongly_connected());
  auto susp = three.suspension();
  EXPECT_GT(symbolic::flow_pressure(susp, 0.0), 0.0);
  // Potential is the integral of -u(1-K)/(1+u^2) = -1 per unit time.
  for (std::size_t i = 0; i < susp.sft.size(); ++i) EXPECT_NEAR(susp.potential[i], -susp.roof[i], 1e-6);
  // Exported JSON feeds the suspension reader.
  auto back = symbolic::suspension_from_json(coding_to_json(three));
  EXPECT_EQ(back.sft.matrix(), three.transitions);
  EXPECT_EQ(back.provenance, "section-coding");
}

TEST(Coding, RefinementShrinksCells) {
  auto lib = bridge_library(true);
  double prev = std::numeric_limits<double>::infinity();
  std::size_t prev_cells = 0;
  for (std::size_t n = 0; n <= 3; ++n) {
    auto c = build_markov_coding(octagon(), lib, origin_section(), {0.1, n});
    EXPECT_LE(c.max_diameter(), prev + 1e-15) << "level " << n;
    EXPECT_GE(c.cells.size(), prev_cells);
    prev = c.max_diameter();
    prev_cells = c.cells.size();
      }
  // Injectivity proxy: distinct orbits have distinct cyclic codes.
  auto c = build_markov_coding(octagon(), lib, origin_section(), {0.1, 0});
  std::vector<std::size_t> cell_of_point;
  std::vector<std::vector<std::size_t>> codes(lib.orbits.size());
  for (std::size_t k = 0; k < lib.orbits.size(); ++k) codes[k].resize(c.crossings[k].size());
  for (std::size_t i = 0; i < c.cells.size(); ++i)
    for (auto [o, j] : c.cells[i].members) codes[o][j] = i;
  auto canonical = [](std::vector<std::size_t> w) {
    auto best = w;
    for (std::size_t r = 0; r < w.size(); ++r) {
      std::rotate(w.begin(), w.begin() + 1, w.end());
      best = std::min(best, w);
    }
    return best;
  };
  std::set<std::vector<std::size_t>> distinct;
  for (const auto& w : codes) distinct.insert(canonical(w));
  EXPECT_EQ(distinct.size(), lib.orbits.size());
}

TEST(Coding, Errors) {
  auto lib = bridge_library(false);
  SectionSpec away{UnitTangentState::from_angle({0.3, 0.3}, kPi / 4), 0.05};
  EXPECT_EQ(error_of([&] { build_markov_coding(octagon(), lib, away); }), ErrorCode::NoCrossing);
  // A huge linkage radius merges A and B only if they are close; here the
  // crossings are pi/2 apart in direction, so 1.0 overlaps without merging.
  EXPECT_EQ(error_of([&] { build_markov_coding(octagon(), lib, origin_section(), {1.0, 0}); }),
            ErrorCode::CellOverlap);
  auto other = SurfaceModel::octagon(2.0);
  EXPECT_EQ(error_of([&] { build_markov_coding(other, lib, origin_section()); }), ErrorCode::DomainError);
}
