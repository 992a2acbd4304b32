#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "rank1/symbolic/suspension.hpp"
#include "rank1/thermo/spectrum.hpp"

using namespace rank1;
using namespace rank1::thermo;

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

const double kLow = std::log(4.0 / 3.0);
const double kHigh = std::log(4.0);
const double kAlpha1 = 0.75 * kLow + 0.25 * kHigh;

double closed_form(double q) { return std::log(std::pow(0.75, q) + std::pow(0.25, q)); }

/// Conjugate of the closed form: the Bernoulli(p) measure with exponent alpha
/// has p = (log 4 - alpha) / (log 4 - log(4/3)) and entropy H(p).
double closed_conjugate(double alpha) {
  double p = (kHigh - alpha) / (kHigh - kLow);
  if (p <= 0.0 || p >= 1.0) return 0.0;
  return -p * std::log(p) - (1.0 - p) * std::log(1.0 - p);
}

/// With a zero component joined in: the line alpha up to alpha_1, then H(p).
double corner_conjugate(double alpha) { return alpha <= kAlpha1 ? alpha : closed_conjugate(alpha); }

symbolic::SuspensionModel calibrated() {
  return symbolic::SuspensionModel::make(symbolic::Sft::full_shift(2), {1.0, 1.0}, {-kLow, -kHigh});
}

PressureSource flow_source(const symbolic::SuspensionModel& m) {
  return [m](double q) { return symbolic::flow_pressure(m, q); };
}

}  // namespace

TEST(Curve, LinearSource) {
  auto c = sample_pressure_curve([](double q) { return 1.0 - q; }, -2.0, 2.0, 0.05);
  ASSERT_EQ(c.size(), 81u);
  for (std::size_t i = 1; i + 1 < c.size(); ++i) {
    EXPECT_NEAR(c.d_left[i], -1.0, 1e-9);
    EXPECT_NEAR(c.d_right[i], -1.0, 1e-9);
  }
  EXPECT_TRUE(std::isnan(c.d_left[0]));
  EXPECT_TRUE(std::isnan(c.d_right[80]));
  EXPECT_TRUE(c.diagnostics.convex);
  EXPECT_TRUE(c.diagnostics.nonincreasing);
  auto r = exponent_range(c);
  EXPECT_NEAR(r.low, 1.0, 1e-9);
  EXPECT_NEAR(r.high, 1.0, 1e-9);
  auto k = detect_corner(c, 0.5);
  EXPECT_NEAR(k.gap, 0.0, 1e-9);
  EXPECT_FALSE(k.corner);
}

TEST(Curve, LinearConjugateCollapses) {
  auto c = sample_pressure_curve([](double q) { return 1.0 - q; }, -2.0, 2.0, 0.05);
  auto s = legendre_conjugate(c, std::vector<double>{0.5, 1.0, 1.5});
  EXPECT_TRUE(s.escaping[0]);
  EXPECT_FALSE(s.escaping[1]);
  EXPECT_TRUE(s.escaping[2]);
  EXPECT_NEAR(s.entropy[1], 1.0, 1e-9);
  EXPECT_EQ(s.entropy[0], -std::numeric_limits<double>::infinity());
  EXPECT_EQ(default_alpha_grid(c).size(), 1u);
}

TEST(Curve, SymbolicSourceMatchesClosedForm) {
  auto c = sample_pressure_curve(flow_source(calibrated()), -40.0, 40.0, 0.05, "calibrated");
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_NEAR(c.value[i], closed_form(c.q[i]), 1e-9);
  EXPECT_TRUE(c.diagnostics.convex);
  EXPECT_TRUE(c.diagnostics.nonincreasing);
  EXPECT_EQ(c.provenance, "calibrated");
}

TEST(Curve, SourceFailureNamesQ) {
  auto bad = [](double q) {
    if (q > 0.3) fail(ErrorCode::BracketFailure, "boom");
    return -q;
  };
  try {
    sample_pressure_curve(bad, 0.0, 1.0, 0.25);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SourceFailure);
    EXPECT_NE(std::string(e.what()).find("q = 0.5"), std::string::npos);
  }
  EXPECT_EQ(error_of([] { sample_pressure_curve([](double) { return NAN; }, 0.0, 1.0, 0.25); }),
            ErrorCode::SourceFailure);
  EXPECT_EQ(error_of([] { sample_pressure_curve([](double q) { return q; }, 0.0, 1.0, 0.0); }),
            ErrorCode::DomainError);
}

TEST(Curve, ViolationsAreDiagnosedNotRepaired) {
  auto c = sample_pressure_curve([](double q) { return -q * q; }, -1.0, 1.0, 0.1);
  EXPECT_FALSE(c.diagnostics.convex);
  EXPECT_FALSE(c.diagnostics.nonincreasing);
  EXPECT_NEAR(c.value[0], -1.0, 1e-12);
  EXPECT_EQ(error_of([&] { legendre_conjugate(c); }), ErrorCode::NonConvexInput);
}

TEST(Corner, CalibratedWithZeroComponent) {
  auto src = with_zero_component(flow_source(calibrated()));
  auto c = sample_pressure_curve(src, -40.0, 40.0, 0.05);
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_NEAR(c.value[i], std::max(closed_form(c.q[i]), 0.0), 1e-9);
    if (c.q[i] >= 1.0 - 1e-9) {
      EXPECT_NEAR(c.value[i], 0.0, 1e-9);
    }
  }
  auto r = detect_corner(c, 1.0);
  EXPECT_NEAR(r.d_left, -0.562335, 2e-3);
  EXPECT_NEAR(r.d_right, 0.0, 2e-3);
  EXPECT_TRUE(r.corner);
  EXPECT_TRUE(r.checked_flat_tail);
  EXPECT_TRUE(r.flat_tail);
  auto all = scan_corners(c);
  ASSERT_EQ(all.size(), 1u);
  EXPECT_NEAR(all[0].q0, 1.0, 1e-9);
  EXPECT_NEAR(exponent_range(c).low, 0.0, 1e-12);
}

TEST(Corner, SmoothCalibratedCurveHasNone) {
  auto c = sample_pressure_curve(flow_source(calibrated()), -40.0, 40.0, 0.05);
  auto r = detect_corner(c, 1.0);
  EXPECT_FALSE(r.corner);
  EXPECT_NEAR(r.pressure_at_q0, 0.0, 1e-9);
  EXPECT_FALSE(r.flat_tail);
  EXPECT_TRUE(scan_corners(c).empty());
}

TEST(Range, CalibratedEndSlopes) {
  auto c = sample_pressure_curve(flow_source(calibrated()), -40.0, 40.0, 0.05);
  auto r = exponent_range(c);
  EXPECT_NEAR(r.low, kLow, 2e-3);
  EXPECT_NEAR(r.high, kHigh, 2e-3);
  auto narrow = sample_pressure_curve(flow_source(calibrated()), -1.0, 1.0, 0.05);
  EXPECT_EQ(error_of([&] { exponent_range(narrow); }), ErrorCode::RangeTooNarrow);
}

TEST(Spectrum, CornerCurveMatchesClosedForm) {
  auto c = sample_pressure_curve(with_zero_component(flow_source(calibrated())), -40.0, 40.0, 0.05);
  auto s = legendre_conjugate(c);
  ASSERT_EQ(s.size(), 400u);
  for (std::size_t j = 0; j < s.size(); ++j) {
    if (s.escaping[j]) continue;
    EXPECT_NEAR(s.entropy[j], corner_conjugate(s.alpha[j]), 1e-6) << s.alpha[j];
  }
  auto line = legendre_conjugate(c, linspace(0.01, 0.5623, 60));
  for (std::size_t j = 0; j < line.size(); ++j) EXPECT_NEAR(line.entropy[j], line.alpha[j], 1e-6);
  EXPECT_NEAR(s.alpha0, 0.836988, 1e-6);
  EXPECT_NEAR(conjugate_at(c, 0.836988).value, std::log(2.0), 1e-6);
  EXPECT_NEAR(s.alpha1, 0.562335, 2e-3);
  ASSERT_TRUE(s.corner.has_value());
  EXPECT_TRUE(s.corner->corner);
}

TEST(Spectrum, OutputDefinitionsAndFlags) {
  auto c = sample_pressure_curve(flow_source(calibrated()), -40.0, 40.0, 0.05);
  auto s = legendre_conjugate(c);
  ASSERT_TRUE(s.range.has_value());
  const double p0 = closed_form(0.0);
  const double dalpha = (s.alpha.back() - s.alpha.front()) / 399.0;
  for (std::size_t j = 0; j < s.size(); ++j) {
    ASSERT_FALSE(s.escaping[j]);
    EXPECT_LE(s.entropy[j], p0 + 1e-12);
    EXPECT_GE(s.entropy[j], -1e-6);
    EXPECT_DOUBLE_EQ(s.ratio[j], s.entropy[j] / s.alpha[j]);
    EXPECT_DOUBLE_EQ(s.dimension[j], 1.0 + 2.0 * s.ratio[j]);
    EXPECT_GE(s.dimension[j], 1.0 - 1e-6);
    EXPECT_LE(s.dimension[j], 3.0 + 1e-6);
    EXPECT_EQ(s.unreliable[j], s.alpha[j] < 10.0 * dalpha);
  }
  EXPECT_LE(concavity_defect(s), 1e-9);
  auto z = legendre_conjugate(sample_pressure_curve(with_zero_component(flow_source(calibrated())), -40, 40, 0.05),
                              std::vector<double>{0.0, 0.5});
  EXPECT_TRUE(std::isnan(z.ratio[0]));
  EXPECT_EQ(spectrum_flags(z, 0), "undefined");
}

TEST(Spectrum, EntropyAtEquilibriumExponents) {
  auto m = calibrated();
  auto c = sample_pressure_curve(flow_source(m), -40.0, 40.0, 0.05);
  for (int i = 0; i < 20; ++i) {
    double q = -4.0 + 0.45 * i;
    auto eq = symbolic::equilibrium_stats(m, q);
    EXPECT_NEAR(conjugate_at(c, eq.exponent).value, eq.entropy, 1e-6) << q;
  }
}

TEST(Spectrum, EntropyValuesAreDense) {
  auto m = calibrated();
  std::vector<double> h{0.0};
  for (double q = -40.0; q <= 40.0; q += 0.05) h.push_back(symbolic::equilibrium_stats(m, q).entropy);
  std::sort(h.begin(), h.end());
  const double top = std::log(2.0);
  EXPECT_NEAR(h.back(), top, 1e-6);
  for (std::size_t i = 1; i < h.size(); ++i) EXPECT_LT(h[i] - h[i - 1], 0.05 * top);
}

TEST(Spectrum, SupportingLineAndBiconjugateOnRandomConvexCurves) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t n = 101;
    const double h = 0.1;
    std::vector<double> q(n), v(n);
    int kinks = 1 + trial % 5;
    std::vector<std::size_t> at;
    for (int k = 0; k < kinks; ++k) at.push_back(3 + static_cast<std::size_t>(U(rng) * (n - 7)));
    std::sort(at.begin(), at.end());
    double slope = -3.0 * U(rng) - 0.5, y = 2.0 * U(rng);
    for (std::size_t i = 0, next = 0; i < n; ++i) {
      q[i] = -5.0 + h * static_cast<double>(i);
      if (i > 0) y += slope * h;
      v[i] = y;
      while (next < at.size() && at[next] == i) {
        slope += 0.8 * U(rng);
        ++next;
      }
    }
    auto c = curve_from_values(q, v);
    ASSERT_TRUE(c.diagnostics.convex);
    auto s = legendre_conjugate(c, secant_alpha_grid(c));
    auto back = biconjugate(s, c.q);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(back[i], v[i], 1e-9);
    EXPECT_LE(concavity_defect(s), 1e-9);
    for (std::size_t j = 0; j < s.size(); ++j)
      for (std::size_t i = 0; i < n; ++i) EXPECT_LE(s.entropy[j] - q[i] * s.alpha[j], v[i] + 1e-9);
  }
}

TEST(Spectrum, BiconjugateOnDefaultGridIsHullWithinGridTolerance) {
  auto c = sample_pressure_curve(flow_source(calibrated()), -10.0, 10.0, 0.05);
  auto s = legendre_conjugate(c);
  auto back = biconjugate(s, c.q);
  const double dalpha = (s.alpha.back() - s.alpha.front()) / 399.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_LE(back[i], c.value[i] + 1e-9);
    EXPECT_GE(back[i], c.value[i] - 20.0 * dalpha * c.step - 1e-6);
  }
}

TEST(Spectrum, ThreadsAndCsv) {
  auto c = sample_pressure_curve(flow_source(calibrated()), -5.0, 5.0, 0.05);
  SpectrumOptions par;
  par.conjugate.threads = 4;
  par.range_tol = 1.0;
  SpectrumOptions ser = par;
  ser.conjugate.threads = 1;
  std::ostringstream a, b, cc;
  write_spectrum_csv(a, legendre_conjugate(c, ser));
  write_spectrum_csv(b, legendre_conjugate(c, par));
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(a.str().substr(0, a.str().find('\n')), "alpha,E,D,dim,entropy,flags");
  write_curve_csv(cc, c);
  EXPECT_EQ(cc.str().substr(0, cc.str().find('\n')), "q,P,D_L,D_R");
  auto j = spectrum_summary(legendre_conjugate(c, ser));
  EXPECT_TRUE(j.contains("alpha0"));
  EXPECT_TRUE(j["corner"].is_object());
}

TEST(Family, NestedSubshifts) {
  using symbolic::Sft;
  auto full = calibrated();
  auto golden = full;
  golden.sft = Sft::golden_mean();
  auto cyc = full;
  cyc.sft = Sft::cycle(2);
  std::vector<PressureCurve> fam;
  for (const auto& m : {cyc, golden, full}) fam.push_back(sample_pressure_curve(flow_source(m), -40.0, 40.0, 0.05));
  auto i0 = fam[0].index_of(0.0);
  EXPECT_NEAR(fam[0].value[i0], 0.0, 1e-12);
  EXPECT_NEAR(fam[1].value[i0], std::log((1.0 + std::sqrt(5.0)) / 2.0), 1e-12);
  EXPECT_NEAR(fam[2].value[i0], std::log(2.0), 1e-12);
  auto r = family_convergence(fam, -5.0, 5.0, {0.6});
  EXPECT_TRUE(r.gaps_decreasing);
  EXPECT_EQ(r.sup_gaps.back(), 0.0);
  ASSERT_EQ(r.lines.size(), 1u);
  EXPECT_TRUE(r.lines[0].nondecreasing);
  EXPECT_EQ(r.lines[0].intercepts[0], -std::numeric_limits<double>::infinity());
  EXPECT_TRUE(std::isfinite(r.lines[0].intercepts[1]));

  auto same = family_convergence({fam[2], fam[2]}, -5.0, 5.0);
  EXPECT_EQ(same.sup_gaps, (std::vector<double>{0.0, 0.0}));
  EXPECT_EQ(error_of([&] { family_convergence({fam[2], fam[0]}, -5.0, 5.0); }), ErrorCode::MonotonicityViolation);
}

TEST(Calibration, RandomModelsHaveZeroPressureAtOne) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::size_t m = 2 + trial % 4;
    std::vector<double> r(m), p(m);
    for (std::size_t i = 0; i < m; ++i) {
      r[i] = 0.3 + 2.0 * U(rng);
      p[i] = -3.0 * U(rng);
    }
    auto cal = symbolic::calibrate(symbolic::SuspensionModel::make(symbolic::Sft::full_shift(m), r, p));
    EXPECT_NEAR(symbolic::flow_pressure(cal, 1.0), 0.0, 1e-8);
  }
}
