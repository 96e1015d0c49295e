#include <gtest/gtest.h>

#include "lambda_eit/diagnostics.hpp"

using namespace lambda_eit;

namespace {

TimeSeries sampled(double t0, double dt, std::size_t n, auto f) {
  TimeSeries s;
  s.t0 = t0;
  s.dt = dt;
  for (std::size_t i = 0; i < n; ++i) s.values.push_back(f(t0 + dt * static_cast<double>(i)));
  return s;
}

double gauss(double t, double c, double w) {
  const double x = (t - c) / w;
  return std::exp(-0.5 * x * x);
}

// Asymmetric two-peak pulse with a chirped phase.
complex two_peak(double t) {
  const double a = gauss(t, 30.0, 5.0) + 0.5 * gauss(t, 48.0, 6.0);
  return std::polar(a, 0.8 * a + 0.01 * t);
}

TimeSeries reversed(const TimeSeries& in, double t0, bool conjugate) {
  TimeSeries out;
  out.t0 = t0;
  out.dt = in.dt;
  for (auto it = in.values.rbegin(); it != in.values.rend(); ++it)
    out.values.push_back(conjugate ? std::conj(*it) : *it);
  return out;
}

}  // namespace

TEST(PulseMetrics, ConstantAmplitude) {
  const auto s = sampled(0.0, 0.5, 201, [](double) { return complex{2.0, 0.0}; });
  const auto m = pulse_metrics(s);
  EXPECT_NEAR(m.energy, 4.0 * 100.0, 1e-12);
  EXPECT_FALSE(m.fwhm.has_value());
  EXPECT_DOUBLE_EQ(m.peak_amp, 2.0);
}

TEST(PulseMetrics, GaussianWidth) {
  const double sigma = 7.0, dt = 0.05;
  const auto s = sampled(0.0, dt, 2001, [&](double t) { return complex{gauss(t, 50.0, sigma)}; });
  const auto m = pulse_metrics(s);
  ASSERT_TRUE(m.fwhm.has_value());
  EXPECT_NEAR(*m.fwhm, 2.0 * sigma * std::sqrt(2.0 * std::log(2.0)), dt);
  EXPECT_NEAR(m.peak_time, 50.0, dt);
  EXPECT_NEAR(m.centroid, 50.0, 1e-9);
  EXPECT_NEAR(m.energy, sigma * std::sqrt(std::numbers::pi), 1e-9);
  EXPECT_EQ(m.local_maxima.size(), 1u);
}

TEST(PulseMetrics, DefaultDoubleEnvelopeHasTwoMaxima) {
  const auto env = Envelope::default_double();
  const auto s = sampled(0.0, 0.1, 2001, [&](double t) { return complex{envelope_eval(t, env)}; });
  const auto m = pulse_metrics(s);
  ASSERT_EQ(m.local_maxima.size(), 2u);
  EXPECT_GT(m.local_maxima[0].amp, m.local_maxima[1].amp);
  EXPECT_LT(m.local_maxima[0].time, m.local_maxima[1].time);
}

TEST(PulseMetrics, PhaseExcursionUnwrapped) {
  // phase runs over 3 pi on the pulse support; a wrapped reading would cap at 2 pi
  const auto s = sampled(0.0, 0.01, 1001, [](double t) {
    return std::polar(1.0, 3.0 * std::numbers::pi * t / 10.0);
  });
  EXPECT_NEAR(pulse_metrics(s).phase_excursion, 3.0 * std::numbers::pi, 1e-9);
}

TEST(PulseMetrics, EmptyWindowThrows) {
  EXPECT_THROW(pulse_metrics(TimeSeries{}), DiagnosticError);
}

TEST(GroupVelocity, Formula) {
  EXPECT_EQ(predicted_group_velocity(0.0, 2.6526), 1.0);
  EXPECT_NEAR(predicted_group_velocity(30177.0, 2.6526),
              1.0 / (1.0 + 30177.0 / (2.6526 * 2.6526)), 1e-18);
  EXPECT_NEAR(predicted_group_velocity(30177.0, 2.6526), 2.331e-4, 1e-7);
}

TEST(GroupVelocity, NoCouplingNoDelay) {
  SimParams p;
  p.cell_length = 0.5;
  p.alpha_p = p.alpha_c = 0.0;
  p.n_xi = 11;
  p.d_tau = 0.05;
  p.n_tau = 4001;
  p.snapshot_stride = 1000;
  PulseSpec s;
  s.envelope = Envelope::single_gaussian(50.0, 9.0);
  s.omega_r0 = 0.0;
  s.t_off = 1e4;
  s.t_on = 2e4;
  const auto g = group_delay_check(integrate(s, p));
  EXPECT_NEAR(g.delay, 0.0, 1e-12);
  EXPECT_NEAR(g.measured_vg, 1.0, 1e-10);
  EXPECT_EQ(g.predicted_vg, 1.0);
  EXPECT_TRUE(g.warnings.empty());
}

TEST(TimeReversal, ExactReverseScoresOne) {
  const auto in = sampled(0.0, 0.1, 800, two_peak);
  const auto out = reversed(in, 200.0, true);
  const auto r = time_reversal_score(in, out);
  EXPECT_NEAR(r.score, 1.0, 1e-9);
  EXPECT_NEAR(r.dilation, 1.0, 1e-12);
}

TEST(TimeReversal, UnreversedAsymmetricPulseScoresBelowOne) {
  const auto in = sampled(0.0, 0.1, 800, two_peak);
  auto same = in;
  same.t0 = 200.0;
  EXPECT_LT(time_reversal_score(in, same).score, 0.99);
}

TEST(TimeReversal, StretchedReverseRecovered) {
  const auto in = sampled(0.0, 0.1, 800, two_peak);
  // output = input reversed and stretched by 2
  const auto out = sampled(100.0, 0.1, 1600, [&](double t) {
    const double u = 80.0 - (t - 100.0) / 2.0;
    return complex{std::abs(two_peak(u))};
  });
  const auto r = time_reversal_score(in, out);
  EXPECT_GT(r.score, 0.995);
  EXPECT_NEAR(r.dilation, 2.0, 0.1);
}

TEST(TimeReversal, AmplitudeScaleInvariant) {
  const auto in = sampled(0.0, 0.1, 800, two_peak);
  auto out = sampled(100.0, 0.1, 900, [](double t) { return two_peak(140.0 - 0.9 * (t - 100.0)); });
  const double base = time_reversal_score(in, out).score;
  for (auto& v : out.values) v *= 7.5;
  EXPECT_NEAR(time_reversal_score(in, out).score, base, 1e-12);
  auto in2 = in;
  for (auto& v : in2.values) v *= 0.01;
  EXPECT_NEAR(time_reversal_score(in2, out).score, base, 1e-12);
}

TEST(TimeReversal, ZeroEnergyThrows) {
  const auto in = sampled(0.0, 0.1, 100, [](double) { return complex{}; });
  const auto out = sampled(0.0, 0.1, 100, two_peak);
  EXPECT_THROW(time_reversal_score(in, out), DiagnosticError);
  EXPECT_THROW(time_reversal_score(out, in), DiagnosticError);
}

TEST(PhaseConjugation, ConjugateReverseScoresOne) {
  const auto in = sampled(0.0, 0.1, 800, two_peak);
  auto out = reversed(in, 200.0, true);
  for (auto& v : out.values) v *= std::polar(3.0, 1.1);  // offset and scale drop out
  EXPECT_NEAR(phase_conjugation_score(in, out), 1.0, 1e-9);
}

TEST(PhaseConjugation, SamePhaseSignScoresNegative) {
  const auto in = sampled(0.0, 0.1, 800, two_peak);
  const auto out = reversed(in, 200.0, false);
  EXPECT_LT(phase_conjugation_score(in, out), 0.0);
}

TEST(Regime, Trichotomy) {
  auto tail = [](double slope) {
    return sampled(0.0, 0.5, 100, [&](double t) { return std::polar(std::exp(slope * t), 0.3); });
  };
  EXPECT_EQ(classify_regime(tail(-0.01)).kind, RegimeKind::decaying);
  EXPECT_EQ(classify_regime(tail(0.0)).kind, RegimeKind::plateau);
  EXPECT_EQ(classify_regime(tail(0.0005)).kind, RegimeKind::plateau);
  EXPECT_EQ(classify_regime(tail(0.01)).kind, RegimeKind::growing);
  EXPECT_NEAR(classify_regime(tail(0.01)).slope, 0.01, 1e-12);
  EXPECT_STREQ(to_string(RegimeKind::plateau), "Plateau");
}

TEST(Regime, ShortWindowThrows) {
  const auto s = sampled(0.0, 0.5, 19, [](double) { return complex{1.0}; });
  EXPECT_THROW(classify_regime(s), DiagnosticError);
}

TEST(Amplification, IdentityAndScaling) {
  const auto in = sampled(0.0, 0.1, 800, two_peak);
  const auto a = amplification_and_count(in, in);
  EXPECT_DOUBLE_EQ(a.peak_ratio, 1.0);
  EXPECT_DOUBLE_EQ(a.energy_ratio, 1.0);
  auto out = in;
  for (auto& v : out.values) v *= 3.0;
  EXPECT_NEAR(amplification_and_count(in, out).peak_ratio, 3.0, 1e-12);
  EXPECT_NEAR(amplification_and_count(in, out).energy_ratio, 9.0, 1e-12);
  const auto zero = sampled(0.0, 0.1, 800, [](double) { return complex{}; });
  EXPECT_THROW(amplification_and_count(zero, in), DiagnosticError);
}

TEST(Series, WindowSelectsHalfOpenRange) {
  const auto s = sampled(0.0, 1.0, 10, [](double t) { return complex{t}; });
  const auto w = s.window(2.0, 5.0);
  ASSERT_EQ(w.size(), 3u);
  EXPECT_EQ(w.t0, 2.0);
  EXPECT_EQ(w.values.back(), complex{4.0});
}

TEST(CrossCorrelation, MatchesDirectSum) {
  const std::vector<double> a{1.0, 2.0, -1.0, 0.5, 3.0};
  const std::vector<double> b{0.5, -2.0, 1.0};
  const auto c = detail::cross_correlation(a, b);
  ASSERT_EQ(c.size(), a.size() + b.size() - 1);
  for (std::size_t i = 0; i < c.size(); ++i) {
    const auto lag = static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(b.size() - 1);
    double direct = 0.0;
    for (std::size_t j = 0; j < b.size(); ++j) {
      const auto k = static_cast<std::ptrdiff_t>(j) + lag;
      if (k >= 0 && k < static_cast<std::ptrdiff_t>(a.size())) direct += a[k] * b[j];
    }
    EXPECT_NEAR(c[i], direct, 1e-12);
  }
}
