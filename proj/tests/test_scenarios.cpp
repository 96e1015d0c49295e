#include <gtest/gtest.h>

#include "lambda_eit/presets.hpp"
#include "lambda_eit/scenarios.hpp"

using namespace lambda_eit;

TEST(BoundaryFields, ControlAtSwitchOffIsHalfAmplitude) {
  const PulseSpec s;
  EXPECT_DOUBLE_EQ(boundary_fields(140.0, s).omega_c.real(), 1.3263);
}

TEST(BoundaryFields, ControlSaturatedAtStart) {
  const PulseSpec s;
  EXPECT_NEAR(std::abs(boundary_fields(0.0, s).omega_c), 2.6526, 1e-6);
}

TEST(BoundaryFields, RetrievalAtSwitchOnIsHalfAmplitude) {
  const PulseSpec s;
  EXPECT_LT(std::abs(signal_field(259.0, s)), 1e-12);
  EXPECT_NEAR(boundary_fields(259.0, s).omega_p.real(), 1.3263, 1e-12);
}

TEST(BoundaryFields, DerivativesMatchAnalyticForms) {
  PulseSpec s;
  s.envelope = Envelope::single_gaussian(50.0, 9.0);
  s.envelope.phase_mode = PhaseMode::none;
  const double h = 1e-4;
  for (double t : {20.0, 45.0, 130.0, 150.0, 250.0, 270.0}) {
    const double fd_c =
        (boundary_fields(t + h, s).omega_c.real() - boundary_fields(t - h, s).omega_c.real()) /
        (2 * h);
    const double sech = 1.0 / std::cosh((t - s.t_off) / s.t_switch);
    const double an_c = -0.5 * s.omega_c0 * sech * sech / s.t_switch;
    EXPECT_NEAR(fd_c, an_c, 1e-6 * std::max(1e-3, std::abs(an_c)));

    const double fd_p =
        (boundary_fields(t + h, s).omega_p.real() - boundary_fields(t - h, s).omega_p.real()) /
        (2 * h);
    const double sr = 1.0 / std::cosh((t - s.t_on) / s.t_switch);
    const double x = (t - 50.0) / 9.0;
    const double an_p = 0.5 * s.omega_r0 * sr * sr / s.t_switch -
                        s.omega_p0 * x / 9.0 * std::exp(-0.5 * x * x);
    EXPECT_NEAR(fd_p, an_p, 1e-6 * std::max(1e-3, std::abs(an_p)));
  }
}

TEST(BoundaryFields, PhaseEqualsEnvelope) {
  PulseSpec s;
  s.envelope = Envelope::single_gaussian(50.0, 9.0);
  const complex f = signal_field(50.0, s);
  EXPECT_NEAR(std::abs(f), s.omega_p0, 1e-15);
  EXPECT_NEAR(std::arg(f), 1.0, 1e-15);
  s.signal_phase = 0.5;
  EXPECT_NEAR(std::arg(signal_field(50.0, s)), 1.5, 1e-15);
}

TEST(Envelope, SingleGaussianPeakAndHalfMaximum) {
  const auto e = Envelope::single_gaussian(40.0, 6.0);
  EXPECT_DOUBLE_EQ(envelope_eval(40.0, e), 1.0);
  const double d = 6.0 * std::sqrt(2.0 * std::log(2.0));
  EXPECT_NEAR(envelope_eval(40.0 + d, e), 0.5, 1e-14);
  EXPECT_NEAR(envelope_eval(40.0 - d, e), 0.5, 1e-14);
}

TEST(Envelope, DefaultDoubleHasTwoMaximaFirstTaller) {
  const auto e = Envelope::default_double();
  std::vector<std::pair<double, double>> maxima;
  const double dt = 0.01;
  for (double t = dt; t < 200.0; t += dt) {
    const double a = envelope_eval(t - dt, e), b = envelope_eval(t, e),
                 c = envelope_eval(t + dt, e);
    if (b > a && b >= c) maxima.push_back({t, b});
  }
  ASSERT_EQ(maxima.size(), 2u);
  EXPECT_GT(maxima[0].second, maxima[1].second);
  EXPECT_NEAR(maxima[0].second, 1.0, 1e-6);  // unit amplitude
}

TEST(Envelope, CustomSamplesAreNormalized) {
  const auto e = Envelope::custom(10.0, 2.0, {0.0, 2.0, 4.0, 2.0, 0.0});
  EXPECT_DOUBLE_EQ(envelope_eval(14.0, e), 1.0);
  EXPECT_DOUBLE_EQ(envelope_eval(13.0, e), 0.75);
  EXPECT_EQ(envelope_eval(9.0, e), 0.0);
  EXPECT_THROW(Envelope::custom(0.0, 1.0, {0.0, 0.0}), ConfigError);
}

TEST(PulseSpecCheck, SwitchOnBeforeSwitchOffNamesBothKeys) {
  PulseSpec s;
  s.t_on = 100.0;
  const auto issues = check(s);
  ASSERT_EQ(issues.size(), 1u);
  EXPECT_EQ(issues[0].field, "t_on/t_off");
  EXPECT_THROW(validate(s), ConfigError);
}

TEST(PulseSpecCheck, WeakProbeRegime) {
  PulseSpec s;
  EXPECT_TRUE(weak_probe_regime(s));
  s.omega_p0 = 1.0;
  EXPECT_FALSE(weak_probe_regime(s));
  EXPECT_TRUE(check(s).empty());  // warned about, not rejected
}

TEST(Presets, StorageCellValues) {
  const auto fig3 = preset("fig3");
  EXPECT_EQ(fig3.spec.t_on, 259.0);
  EXPECT_EQ(fig3.spec.t_off, 140.0);
  EXPECT_EQ(fig3.spec.t_switch, 18.85);
  EXPECT_EQ(fig3.spec.omega_p0, 0.0265);
  EXPECT_EQ(fig3.spec.omega_c0, 2.6526);
  EXPECT_EQ(fig3.physical.alpha_over_c_p, 30177.0);
  EXPECT_EQ(fig3.physical.alpha_over_c_c, 29272.0);
  EXPECT_EQ(fig3.physical.cell_length_m, 0.04);
}

TEST(Presets, DoubleDriveDiffersOnlyInRetrievalAmplitude) {
  const auto fig3 = preset("fig3");
  const auto fig7 = preset("fig7_double_drive");
  EXPECT_EQ(fig7.spec.omega_r0, 5.3052);
  auto same = fig7.spec;
  same.omega_r0 = fig3.spec.omega_r0;
  EXPECT_EQ(same, fig3.spec);
  EXPECT_EQ(fig7.physical.alpha_over_c_p, fig3.physical.alpha_over_c_p);
  EXPECT_EQ(fig7.physical.alpha_over_c_c, fig3.physical.alpha_over_c_c);
}

TEST(Presets, EqualAndLargerCouplings) {
  const auto fig8 = preset("fig8_equal_alpha");
  EXPECT_EQ(fig8.params.alpha_p, fig8.params.alpha_c);
  EXPECT_EQ(fig8.physical.alpha_over_c_p, 30177.0);
  const auto fig9 = preset("fig9_alpha_c_larger");
  EXPECT_EQ(fig9.physical.alpha_over_c_c, 31082.0);
  // gamma_c = gamma_ca = (alpha_c / alpha_p) gamma
  EXPECT_DOUBLE_EQ(fig9.params.gamma_ca, 31082.0 / 30177.0);
  EXPECT_EQ(fig9.params.gamma_b, 1.0);
  EXPECT_EQ(fig9.params.gamma_ab, 1.0);
}

TEST(Presets, DeskVariantsKeepTheCouplingRatio) {
  for (const auto& name : preset_names()) {
    if (!name.ends_with("_desk")) continue;
    const auto desk = preset(name);
    const auto full = preset(name.substr(0, name.size() - 5));
    EXPECT_GT(desk.depth_factor, 1.0);
    EXPECT_DOUBLE_EQ(desk.params.alpha_c / desk.params.alpha_p,
                     full.params.alpha_c / full.params.alpha_p)
        << name;
    EXPECT_EQ(desk.metadata.at("run_class"), "desk");
    EXPECT_EQ(full.metadata.at("run_class"), "long");
  }
}

TEST(Presets, SignalInsideBeforeWritingBeamSwitchesOff) {
  for (const auto& name : preset_names()) {
    const auto p = preset(name);
    const double t0 = p.spec.t_off - 2.0 * p.spec.t_switch;
    double worst = 0.0;
    for (double t = t0; t < p.params.horizon(); t += 0.05)
      worst = std::max(worst, envelope_eval(t, p.spec.envelope));
    EXPECT_LT(worst, 1e-6) << name;
  }
}

TEST(Presets, UnknownNameRejected) { EXPECT_THROW(preset("fig4"), ConfigError); }
