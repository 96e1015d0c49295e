#pragma once

// Pulse metrics and the physics checks run on finished simulations.

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "model.hpp"
#include "propagate.hpp"

namespace lambda_eit {

class DiagnosticError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Uniformly sampled complex series, sample i at t0 + i dt.
struct TimeSeries {
  double t0 = 0.0;
  double dt = 1.0;
  std::vector<complex> values;

  std::size_t size() const { return values.size(); }
  double time(std::size_t i) const { return t0 + dt * static_cast<double>(i); }
  double t_end() const { return size() == 0 ? t0 : time(size() - 1); }

  // Samples with t_begin <= t < t_end.
  TimeSeries window(double t_begin, double t_end) const {
    TimeSeries w;
    w.dt = dt;
    bool first = true;
    for (std::size_t i = 0; i < size(); ++i) {
      const double t = time(i);
      if (t < t_begin || t >= t_end) continue;
      if (first) { w.t0 = t; first = false; }
      w.values.push_back(values[i]);
    }
    return w;
  }
};

enum class Channel { probe, control };

inline TimeSeries series_of(const SimulationRecord& rec,
                            const std::vector<FieldPair>& samples, Channel ch) {
  TimeSeries s;
  s.t0 = rec.tau.empty() ? 0.0 : rec.tau.front();
  s.dt = rec.params.d_tau;
  s.values.reserve(samples.size());
  for (const auto& f : samples)
    s.values.push_back(ch == Channel::probe ? f.omega_p : f.omega_c);
  return s;
}

inline TimeSeries boundary_series(const SimulationRecord& rec, Channel ch) {
  return series_of(rec, rec.boundary_series, ch);
}
inline TimeSeries exit_series(const SimulationRecord& rec, Channel ch) {
  return series_of(rec, rec.exit_series, ch);
}

namespace detail {

inline std::vector<double> amplitudes(const TimeSeries& s) {
  std::vector<double> a(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) a[i] = std::abs(s.values[i]);
  return a;
}

inline std::vector<double> unwrap(std::vector<double> phase) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t i = 1; i < phase.size(); ++i) {
    const double d = phase[i] - phase[i - 1];
    phase[i] -= two_pi * std::round(d / two_pi);
  }
  return phase;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2) return 0.0;
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

// Linear interpolation of uniformly sampled data at fractional index x;
// zero outside [0, n-1].
inline double sample_at(const std::vector<double>& v, double x) {
  if (v.empty() || x < 0.0 || x > static_cast<double>(v.size() - 1)) return 0.0;
  const auto i = static_cast<std::size_t>(x);
  if (i + 1 >= v.size()) return v.back();
  const double w = x - static_cast<double>(i);
  return (1.0 - w) * v[i] + w * v[i + 1];
}

// c[lag] = sum_i a[i + lag] b[i] for lag = -(nb-1) .. na-1, via FFTW.
inline std::vector<double> cross_correlation(const std::vector<double>& a,
                                             const std::vector<double>& b) {
  const std::size_t na = a.size(), nb = b.size();
  const std::size_t len = na + nb - 1;
  std::size_t n = 1;
  while (n < len) n <<= 1;
  const std::size_t nc = n / 2 + 1;

  double* ra = fftw_alloc_real(n);
  double* rb = fftw_alloc_real(n);
  fftw_complex* fa = fftw_alloc_complex(nc);
  fftw_complex* fb = fftw_alloc_complex(nc);
  std::fill(ra, ra + n, 0.0);
  std::fill(rb, rb + n, 0.0);
  std::copy(a.begin(), a.end(), ra);
  std::copy(b.begin(), b.end(), rb);

  fftw_plan pa = fftw_plan_dft_r2c_1d(static_cast<int>(n), ra, fa, FFTW_ESTIMATE);
  fftw_plan pb = fftw_plan_dft_r2c_1d(static_cast<int>(n), rb, fb, FFTW_ESTIMATE);
  fftw_execute(pa);
  fftw_execute(pb);
  // A(k) conj(B(k)) -> circular correlation sum_i a[i + lag] b[i]
  for (std::size_t k = 0; k < nc; ++k) {
    const double re = fa[k][0] * fb[k][0] + fa[k][1] * fb[k][1];
    const double im = fa[k][1] * fb[k][0] - fa[k][0] * fb[k][1];
    fa[k][0] = re;
    fa[k][1] = im;
  }
  fftw_plan pc = fftw_plan_dft_c2r_1d(static_cast<int>(n), fa, ra, FFTW_ESTIMATE);
  fftw_execute(pc);

  std::vector<double> c(len);
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < len; ++i) {
    // lag = i - (nb - 1); negative lags wrap to the end of the buffer
    const std::ptrdiff_t lag = static_cast<std::ptrdiff_t>(i) -
                               static_cast<std::ptrdiff_t>(nb - 1);
    const std::size_t idx = lag >= 0 ? static_cast<std::size_t>(lag)
                                     : n - static_cast<std::size_t>(-lag);
    c[i] = ra[idx] * scale;
  }

  fftw_destroy_plan(pa);
  fftw_destroy_plan(pb);
  fftw_destroy_plan(pc);
  fftw_free(ra);
  fftw_free(rb);
  fftw_free(fa);
  fftw_free(fb);
  return c;
}

inline double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline double energy_of(const TimeSeries& s) {
  // trapezoid, so a constant A over a duration T integrates to A^2 T
  const std::size_t n = s.size();
  if (n < 2) return 0.0;
  double e = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = (i == 0 || i + 1 == n) ? 0.5 : 1.0;
    e += w * std::norm(s.values[i]);
  }
  return e * s.dt;
}

}  // namespace detail

//----------------------------------------------------------------------------
// pulse metrics

struct LocalMaximum {
  double time = 0.0;
  double amp = 0.0;
};

struct PulseMetrics {
  double peak_amp = 0.0;
  double peak_time = 0.0;
  std::optional<double> fwhm;  // empty when the peak has no half-maximum crossings
  double centroid = 0.0;
  double energy = 0.0;         // integral of |Omega|^2 dtau
  std::vector<LocalMaximum> local_maxima;
  double phase_excursion = 0.0;
};

// Relative prominence a local maximum needs to be listed.
inline constexpr double maxima_prominence = 0.01;
// Phase excursion is taken where |Omega| exceeds this fraction of the peak.
inline constexpr double phase_support = 0.1;

inline PulseMetrics pulse_metrics(const TimeSeries& series) {
  if (series.size() == 0) throw DiagnosticError("empty window");
  const auto a = detail::amplitudes(series);
  const std::size_t n = a.size();

  PulseMetrics m;
  const auto peak_it = std::max_element(a.begin(), a.end());
  const auto ip = static_cast<std::size_t>(peak_it - a.begin());
  m.peak_amp = *peak_it;
  m.peak_time = series.time(ip);
  m.energy = detail::energy_of(series);

  double w = 0.0, wt = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = a[i] * a[i];
    w += p;
    wt += p * series.time(i);
  }
  m.centroid = w > 0.0 ? wt / w : series.time(ip);

  if (m.peak_amp > 0.0) {
    const double half = 0.5 * m.peak_amp;
    std::optional<double> left, right;
    for (std::size_t i = ip; i > 0; --i) {
      if (a[i - 1] < half) {
        const double f = (a[i] - half) / (a[i] - a[i - 1]);
        left = series.time(i) - f * series.dt;
        break;
      }
    }
    for (std::size_t i = ip; i + 1 < n; ++i) {
      if (a[i + 1] < half) {
        const double f = (a[i] - half) / (a[i] - a[i + 1]);
        right = series.time(i) + f * series.dt;
        break;
      }
    }
    if (left && right) m.fwhm = *right - *left;

    // local maxima with topographic prominence above the threshold
    for (std::size_t i = 0; i < n; ++i) {
      const bool up = i == 0 ? false : a[i] > a[i - 1];
      const bool down = i + 1 == n ? false : a[i] >= a[i + 1];
      if (!(up && down)) continue;
      double left_min = a[i], right_min = a[i];
      std::size_t k = i;
      while (k > 0 && a[k - 1] <= a[i]) left_min = std::min(left_min, a[--k]);
      k = i;
      while (k + 1 < n && a[k + 1] <= a[i]) right_min = std::min(right_min, a[++k]);
      const double prominence = a[i] - std::max(left_min, right_min);
      if (prominence >= maxima_prominence * m.peak_amp)
        m.local_maxima.push_back({series.time(i), a[i]});
    }

    std::vector<double> phase;
    for (std::size_t i = 0; i < n; ++i)
      if (a[i] >= phase_support * m.peak_amp) phase.push_back(std::arg(series.values[i]));
    phase = detail::unwrap(std::move(phase));
    if (!phase.empty()) {
      const auto [lo, hi] = std::minmax_element(phase.begin(), phase.end());
      m.phase_excursion = *hi - *lo;
    }
  }
  return m;
}

//----------------------------------------------------------------------------
// slow light

inline double predicted_group_velocity(double alpha_p, double omega_c0) {
  if (omega_c0 == 0.0) return 0.0;
  return 1.0 / (1.0 + alpha_p / (omega_c0 * omega_c0));
}

struct GroupDelayCheck {
  double measured_vg = 0.0;   // units of c
  double predicted_vg = 0.0;
  double relative_error = 0.0;
  double delay = 0.0;         // centroid delay in retarded time
  double transmission = 0.0;  // exit / entry energy
  std::vector<std::string> warnings;
};

// Compares the probe centroid delay through the cell with the EIT group
// velocity. The retarded-frame delay is l/v_g - l/c.
inline GroupDelayCheck group_delay_check(const SimulationRecord& rec) {
  const auto in = boundary_series(rec, Channel::probe);
  const auto out = exit_series(rec, Channel::probe);
  const auto mi = pulse_metrics(in);
  const auto mo = pulse_metrics(out);
  if (!(mi.energy > 0.0)) throw DiagnosticError("zero-energy input");

  GroupDelayCheck g;
  const double l = rec.params.cell_length;
  g.delay = mo.centroid - mi.centroid;
  g.measured_vg = l / (g.delay + l);
  g.predicted_vg = predicted_group_velocity(rec.params.alpha_p, rec.spec.omega_c0);
  g.relative_error = std::abs(g.measured_vg - g.predicted_vg) / g.predicted_vg;
  g.transmission = mo.energy / mi.energy;
  if (g.transmission < 0.5)
    g.warnings.push_back("pulse not fully transmitted: exit energy below 50% of input");
  if (mi.peak_time + 3.0 * mi.fwhm.value_or(0.0) > rec.spec.t_off - 2.0 * rec.spec.t_switch)
    g.warnings.push_back("writing beam switches off during the probe pulse");
  return g;
}

//----------------------------------------------------------------------------
// time reversal and phase conjugation

struct ReversalAlignment {
  double score = 0.0;
  double dilation = 1.0;   // output time scale relative to the input
  double shift = 0.0;      // output time of the template start
};

inline constexpr int dilation_count = 41;
inline constexpr double dilation_min = 0.2;
inline constexpr double dilation_max = 5.0;

namespace detail {

inline double dilation_factor(int i) {
  const double lo = std::log(dilation_min), hi = std::log(dilation_max);
  return std::exp(lo + (hi - lo) * static_cast<double>(i) / (dilation_count - 1));
}

// Reversed input resampled on the output grid with time stretched by d.
inline std::vector<double> stretched(const std::vector<double>& reversed, double d) {
  const std::size_t m =
      static_cast<std::size_t>(std::floor(static_cast<double>(reversed.size() - 1) * d)) + 1;
  std::vector<double> g(m);
  for (std::size_t i = 0; i < m; ++i) g[i] = sample_at(reversed, static_cast<double>(i) / d);
  return g;
}

}  // namespace detail

// Normalized cross-correlation of |output(t)| with |input(-t)|, maximized
// over shift and a uniform dilation factor. Both series share one dt.
inline ReversalAlignment time_reversal_score(const TimeSeries& input,
                                             const TimeSeries& output) {
  if (input.size() == 0 || output.size() == 0) throw DiagnosticError("empty window");
  const auto a_in = detail::amplitudes(input);
  const auto a_out = detail::amplitudes(output);
  if (!(detail::norm2(a_in) > 0.0) || !(detail::norm2(a_out) > 0.0))
    throw DiagnosticError("zero-energy window");

  std::vector<double> reversed(a_in.rbegin(), a_in.rend());
  const double out_norm = detail::norm2(a_out);

  ReversalAlignment best;
  best.score = -2.0;
  for (int i = 0; i < dilation_count; ++i) {
    const double d = detail::dilation_factor(i);
    const auto g = detail::stretched(reversed, d);
    const double gn = detail::norm2(g);
    if (!(gn > 0.0)) continue;
    const auto c = detail::cross_correlation(a_out, g);
    const auto it = std::max_element(c.begin(), c.end());
    const double score = *it / (out_norm * gn);
    if (score > best.score) {
      best.score = score;
      best.dilation = d;
      const auto lag = static_cast<std::ptrdiff_t>(it - c.begin()) -
                       static_cast<std::ptrdiff_t>(g.size() - 1);
      best.shift = output.t0 + static_cast<double>(lag) * output.dt;
    }
  }
  return best;
}

// Pearson correlation of the unwrapped output phase against minus the input
// phase after the time-reversal alignment, over the samples where both the
// output and the aligned template exceed phase_support of their peaks.
inline double phase_conjugation_score(const TimeSeries& input, const TimeSeries& output,
                                      const ReversalAlignment& align,
                                      double support = phase_support) {
  if (input.size() == 0 || output.size() == 0) throw DiagnosticError("empty window");
  const auto a_in = detail::amplitudes(input);
  const auto a_out = detail::amplitudes(output);
  if (!(detail::norm2(a_in) > 0.0) || !(detail::norm2(a_out) > 0.0))
    throw DiagnosticError("zero-energy window");

  std::vector<double> ph_in(input.size());
  for (std::size_t i = 0; i < input.size(); ++i) ph_in[i] = std::arg(input.values[i]);
  ph_in = detail::unwrap(std::move(ph_in));
  std::vector<double> ph_out(output.size());
  for (std::size_t i = 0; i < output.size(); ++i) ph_out[i] = std::arg(output.values[i]);
  ph_out = detail::unwrap(std::move(ph_out));

  const double in_peak = *std::max_element(a_in.begin(), a_in.end());
  const double out_peak = *std::max_element(a_out.begin(), a_out.end());
  const double last = static_cast<double>(input.size() - 1);

  std::vector<double> x, y;
  for (std::size_t i = 0; i < output.size(); ++i) {
    // template index -> reversed-input index -> input index
    const double u = (output.time(i) - align.shift) / output.dt / align.dilation;
    if (u < 0.0 || u > last) continue;
    const double src = last - u;
    if (detail::sample_at(a_in, src) < support * in_peak) continue;
    if (a_out[i] < support * out_peak) continue;
    x.push_back(ph_out[i]);
    y.push_back(-detail::sample_at(ph_in, src));
  }
  return detail::pearson(x, y);
}

inline double phase_conjugation_score(const TimeSeries& input, const TimeSeries& output) {
  return phase_conjugation_score(input, output, time_reversal_score(input, output));
}

//----------------------------------------------------------------------------
// retrieval windows

struct RetrievalWindows {
  double input_begin = 0.0;
  double input_end = 0.0;
  double output_begin = 0.0;
  double output_end = 0.0;  // first arrival of the retrieval front at the exit
  bool front_reached_exit = false;
};

// Input: the signal before the writing beam goes off. Output: from
// t_on - 2 t_switch until |Omega_p(l)| first exceeds half the retrieval
// amplitude.
inline RetrievalWindows retrieval_windows(const SimulationRecord& rec) {
  RetrievalWindows w;
  const auto& s = rec.spec;
  w.input_begin = 0.0;
  w.input_end = std::min(s.t_off, s.t_on - 2.0 * s.t_switch);
  w.output_begin = s.t_on - 2.0 * s.t_switch;
  w.output_end = rec.tau.empty() ? 0.0 : rec.tau.back() + rec.params.d_tau;
  for (std::size_t k = 0; k < rec.tau.size(); ++k) {
    if (rec.tau[k] < w.output_begin) continue;
    if (std::abs(rec.exit_series[k].omega_p) > 0.5 * s.omega_r0) {
      w.output_end = rec.tau[k];
      w.front_reached_exit = true;
      break;
    }
  }
  return w;
}

inline TimeSeries input_signal(const SimulationRecord& rec) {
  const auto w = retrieval_windows(rec);
  return boundary_series(rec, Channel::probe).window(w.input_begin, w.input_end);
}

inline TimeSeries retrieved_pulse(const SimulationRecord& rec) {
  const auto w = retrieval_windows(rec);
  return exit_series(rec, Channel::control).window(w.output_begin, w.output_end);
}

//----------------------------------------------------------------------------
// regime of the generated tail

enum class RegimeKind { decaying, plateau, growing };

inline const char* to_string(RegimeKind k) {
  switch (k) {
    case RegimeKind::decaying: return "Decaying";
    case RegimeKind::plateau: return "Plateau";
    case RegimeKind::growing: return "Growing";
  }
  return "?";
}

struct Regime {
  RegimeKind kind = RegimeKind::plateau;
  double slope = 0.0;  // d ln|Omega_c| / dtau, gamma
};

inline constexpr double regime_threshold = 1e-3;
inline constexpr std::size_t regime_min_samples = 20;

// Least-squares slope of ln|Omega| over the series.
inline Regime classify_regime(const TimeSeries& tail) {
  if (tail.size() < regime_min_samples) throw DiagnosticError("window too short");
  std::vector<double> t, y;
  for (std::size_t i = 0; i < tail.size(); ++i) {
    const double a = std::abs(tail.values[i]);
    if (!(a > 0.0)) continue;
    t.push_back(tail.time(i));
    y.push_back(std::log(a));
  }
  if (t.size() < regime_min_samples) throw DiagnosticError("window too short");
  const double n = static_cast<double>(t.size());
  const double mt = std::accumulate(t.begin(), t.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sty = 0.0, stt = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    sty += (t[i] - mt) * (y[i] - my);
    stt += (t[i] - mt) * (t[i] - mt);
  }
  Regime r;
  r.slope = sty / stt;
  if (r.slope < -regime_threshold) r.kind = RegimeKind::decaying;
  else if (r.slope > regime_threshold) r.kind = RegimeKind::growing;
  else r.kind = RegimeKind::plateau;
  return r;
}

// Fraction of the retrieval epoch [t_on, front arrival) taken as the tail,
// and the guard kept clear of the cutoff, in units of t_switch.
inline constexpr double tail_fraction = 0.25;
inline constexpr double tail_guard = 0.5;

inline TimeSeries regime_tail(const SimulationRecord& rec) {
  const auto w = retrieval_windows(rec);
  const double end = w.output_end - tail_guard * rec.spec.t_switch;
  const double begin = w.output_end - tail_fraction * (w.output_end - rec.spec.t_on);
  return exit_series(rec, Channel::control).window(begin, end);
}

//----------------------------------------------------------------------------
// amplification and photon number

struct Amplification {
  double peak_ratio = 0.0;
  double energy_ratio = 0.0;
};

inline Amplification amplification_and_count(const TimeSeries& input,
                                             const TimeSeries& output) {
  const auto mi = pulse_metrics(input);
  const auto mo = pulse_metrics(output);
  if (!(mi.energy > 0.0)) throw DiagnosticError("zero input energy");
  return {mo.peak_amp / mi.peak_amp, mo.energy / mi.energy};
}

}  // namespace lambda_eit
