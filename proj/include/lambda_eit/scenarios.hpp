#pragma once

// Boundary-condition programs for the write / store / retrieve protocol.
//
// The probe channel carries the signal followed by the retrieval beam; the
// control channel carries the writing beam only:
//
//   Omega_p(0,t) = Omega_p0 f(t) exp(i f(t)) exp(i phi)
//                  + Omega_r0/2 [1 + tanh((t - t_on)/t_switch)]
//   Omega_c(0,t) = Omega_c0/2 [1 - tanh((t - t_off)/t_switch)]

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "model.hpp"

namespace lambda_eit {

enum class EnvelopeKind { single_gaussian, double_gaussian, custom };
enum class PhaseMode { none, phase_equals_envelope };

// Unit-amplitude signal envelope f(t), 0 < max f <= 1. Gaussian widths are
// standard deviations: f = exp(-(t - t0)^2 / (2 sigma^2)).
struct Envelope {
  EnvelopeKind kind = EnvelopeKind::single_gaussian;
  std::vector<double> centers{50.0};
  std::vector<double> widths{12.0};
  std::vector<double> heights{1.0};
  double norm = 1.0;  // 1 / max of the raw sum
  // custom: linearly interpolated samples on [sample_t0, sample_t0 + (n-1) dt]
  double sample_t0 = 0.0;
  double sample_dt = 1.0;
  std::vector<double> samples;
  PhaseMode phase_mode = PhaseMode::phase_equals_envelope;

  static Envelope single_gaussian(double center, double width) {
    Envelope e;
    e.kind = EnvelopeKind::single_gaussian;
    e.centers = {center};
    e.widths = {width};
    e.heights = {1.0};
    e.norm = 1.0;
    return e;
  }

  // Sum of two Gaussians rescaled so the larger of its maxima is exactly 1.
  static Envelope double_gaussian(double c1, double w1, double h1, double c2,
                                  double w2, double h2) {
    Envelope e;
    e.kind = EnvelopeKind::double_gaussian;
    e.centers = {c1, c2};
    e.widths = {w1, w2};
    e.heights = {h1, h2};
    e.norm = 1.0;
    e.norm = 1.0 / e.raw_max();
    return e;
  }

  // Default two-peak envelope; the first peak is the taller one.
  static Envelope default_double() {
    return double_gaussian(55.0, 12.0, 1.0, 95.0, 12.0, 0.6);
  }

  static Envelope custom(double t0, double dt, std::vector<double> values) {
    Envelope e;
    e.kind = EnvelopeKind::custom;
    e.centers.clear();
    e.widths.clear();
    e.heights.clear();
    e.sample_t0 = t0;
    e.sample_dt = dt;
    double peak = 0.0;
    for (double v : values) peak = std::max(peak, std::abs(v));
    if (!(peak > 0.0)) throw ConfigError("custom envelope has no positive sample");
    for (double& v : values) v = std::abs(v) / peak;
    e.samples = std::move(values);
    return e;
  }

  double raw(double t) const {
    double sum = 0.0;
    for (std::size_t i = 0; i < centers.size(); ++i) {
      const double x = (t - centers[i]) / widths[i];
      sum += heights[i] * std::exp(-0.5 * x * x);
    }
    return sum;
  }

  // Time after which every component is below `fraction` of its height.
  double support_end(double fraction) const {
    if (kind == EnvelopeKind::custom)
      return sample_t0 + sample_dt * static_cast<double>(samples.size());
    double end = -1e300;
    const double k = std::sqrt(-2.0 * std::log(fraction));
    for (std::size_t i = 0; i < centers.size(); ++i)
      end = std::max(end, centers[i] + k * widths[i]);
    return end;
  }
  double support_begin(double fraction) const {
    if (kind == EnvelopeKind::custom) return sample_t0;
    double begin = 1e300;
    const double k = std::sqrt(-2.0 * std::log(fraction));
    for (std::size_t i = 0; i < centers.size(); ++i)
      begin = std::min(begin, centers[i] - k * widths[i]);
    return begin;
  }

  bool operator==(const Envelope&) const = default;

 private:
  double raw_max() const {
    // golden-section refinement around the best sample near each center
    double best = 0.0;
    for (std::size_t i = 0; i < centers.size(); ++i) {
      double lo = centers[i] - widths[i];
      double hi = centers[i] + widths[i];
      const double g = 0.5 * (std::sqrt(5.0) - 1.0);
      for (int it = 0; it < 200; ++it) {
        const double a = hi - g * (hi - lo);
        const double b = lo + g * (hi - lo);
        if (raw(a) > raw(b)) hi = b; else lo = a;
      }
      best = std::max(best, raw(0.5 * (lo + hi)));
    }
    return best;
  }
};

inline double envelope_eval(double t, const Envelope& env) {
  if (env.kind == EnvelopeKind::custom) {
    if (env.samples.empty()) return 0.0;
    const double x = (t - env.sample_t0) / env.sample_dt;
    if (x < 0.0 || x > static_cast<double>(env.samples.size() - 1)) return 0.0;
    const auto i = static_cast<std::size_t>(x);
    if (i + 1 >= env.samples.size()) return env.samples.back();
    const double w = x - static_cast<double>(i);
    return (1.0 - w) * env.samples[i] + w * env.samples[i + 1];
  }
  return std::min(1.0, env.norm * env.raw(t));
}

struct PulseSpec {
  double omega_p0 = 0.0265;   // signal peak
  double omega_c0 = 2.6526;   // writing beam
  double omega_r0 = 2.6526;   // retrieval beam on the probe transition
  double t_off = 140.0;       // writing beam switch-off center
  double t_on = 259.0;        // retrieval beam switch-on center
  double t_switch = 18.85;    // tanh switching scale
  double signal_phase = 0.0;  // global phase of the signal, rad
  Envelope envelope = Envelope::default_double();

  double storage_interval() const { return t_on - t_off; }

  bool operator==(const PulseSpec&) const = default;
};

inline std::vector<ValidationIssue> check(const PulseSpec& s) {
  std::vector<ValidationIssue> issues;
  auto finite_nonneg = [&](const char* name, double v) {
    if (!(v >= 0.0) || !std::isfinite(v))
      issues.push_back({name, "negative or non-finite amplitude"});
  };
  finite_nonneg("omega_p0", s.omega_p0);
  finite_nonneg("omega_c0", s.omega_c0);
  finite_nonneg("omega_r0", s.omega_r0);
  if (!(s.t_switch > 0.0)) issues.push_back({"t_switch", "non-positive switching time"});
  if (!(s.t_on > s.t_off))
    issues.push_back({"t_on/t_off", "retrieval switch-on t_on must come after t_off"});
  for (double w : s.envelope.widths)
    if (!(w > 0.0)) issues.push_back({"envelope.widths", "non-positive width"});
  if (s.envelope.kind == EnvelopeKind::custom && !(s.envelope.sample_dt > 0.0))
    issues.push_back({"envelope.sample_dt", "non-positive sample spacing"});
  return issues;
}

inline PulseSpec validate(const PulseSpec& s) {
  auto issues = check(s);
  if (!issues.empty()) throw ConfigError(std::move(issues));
  return s;
}

// Weak-probe storage needs omega_p0 well below the writing beam.
inline bool weak_probe_regime(const PulseSpec& s) {
  return s.omega_p0 <= 0.1 * s.omega_c0;
}

inline complex signal_field(double t, const PulseSpec& spec) {
  const double f = envelope_eval(t, spec.envelope);
  if (f == 0.0) return {};
  const double phase =
      (spec.envelope.phase_mode == PhaseMode::phase_equals_envelope ? f : 0.0) +
      spec.signal_phase;
  return std::polar(spec.omega_p0 * f, phase);
}

inline FieldPair boundary_fields(double t, const PulseSpec& spec) {
  FieldPair f;
  f.omega_p = signal_field(t, spec) +
              0.5 * spec.omega_r0 * (1.0 + std::tanh((t - spec.t_on) / spec.t_switch));
  f.omega_c = 0.5 * spec.omega_c0 * (1.0 - std::tanh((t - spec.t_off) / spec.t_switch));
  return f;
}

}  // namespace lambda_eit
