#pragma once

// Traveling-wave analysis of the equal-coupling regime. Profiles are read
// off simulation snapshots and checked against the traveling-wave relations
//
//   rho_cb = -((c - v)/(alpha0 v)) Omega_p Omega_c*
//   ((c - v)/(alpha0 v)) (|Omega_p_inf|^2 + |Omega_c_inf|^2) = 2
//
// plus the two profile ODEs (see soliton_ode_residual). Here c = 1 and
// alpha0 is the common propagation coefficient A.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "diagnostics.hpp"
#include "model.hpp"
#include "propagate.hpp"

namespace lambda_eit {

class PreconditionError : public DiagnosticError {
 public:
  using DiagnosticError::DiagnosticError;
};

struct TravelingProfile {
  std::vector<double> s_grid;  // xi - v t in the lab frame, strictly increasing
  std::vector<complex> omega_p;
  std::vector<complex> omega_c;
  std::vector<complex> rho_cb;
  double v = 0.0;       // units of c
  double alpha0 = 0.0;  // common coupling A
  double gamma = 1.0;   // gamma_ab = gamma_ca
};

namespace detail {

// Cells of a snapshot on a uniform spacing; an irregular last cell (left by
// the xi stride) is dropped.
inline std::size_t uniform_prefix(const GridSlice& s) {
  const std::size_t n = s.xi.size();
  if (n < 3) return n;
  const double h = s.xi[1] - s.xi[0];
  const double last = s.xi[n - 1] - s.xi[n - 2];
  return std::abs(last - h) > 1e-9 * h ? n - 1 : n;
}

// Pearson correlation of a[k] against b[k + m] over their overlap.
inline double shifted_pearson(const std::vector<double>& a, const std::vector<double>& b,
                              std::ptrdiff_t m) {
  const auto n = static_cast<std::ptrdiff_t>(a.size());
  const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -m);
  const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(n, n - m);
  if (hi - lo < 2) return -1.0;
  double ma = 0.0, mb = 0.0;
  for (auto k = lo; k < hi; ++k) { ma += a[k]; mb += b[k + m]; }
  const double cnt = static_cast<double>(hi - lo);
  ma /= cnt;
  mb /= cnt;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (auto k = lo; k < hi; ++k) {
    const double x = a[k] - ma, y = b[k + m] - mb;
    sab += x * y;
    saa += x * x;
    sbb += y * y;
  }
  if (saa <= 0.0 || sbb <= 0.0) return saa == sbb ? 1.0 : 0.0;
  return sab / std::sqrt(saa * sbb);
}

struct ShiftFit {
  std::ptrdiff_t cells = 0;
  double refined = 0.0;  // sub-cell shift from a parabola through the peak
  double correlation = -1.0;
};

// Best shift m of b relative to a (b[k + m] ~ a[k]) with |m| <= max_shift.
inline ShiftFit best_shift(const std::vector<double>& a, const std::vector<double>& b,
                           std::ptrdiff_t max_shift) {
  ShiftFit fit;
  std::vector<double> c(static_cast<std::size_t>(2 * max_shift + 1));
  for (std::ptrdiff_t m = -max_shift; m <= max_shift; ++m) {
    const double r = shifted_pearson(a, b, m);
    c[static_cast<std::size_t>(m + max_shift)] = r;
    if (r > fit.correlation) { fit.correlation = r; fit.cells = m; }
  }
  fit.refined = static_cast<double>(fit.cells);
  const auto i = static_cast<std::size_t>(fit.cells + max_shift);
  if (i > 0 && i + 1 < c.size()) {
    const double den = c[i - 1] - 2.0 * c[i] + c[i + 1];
    if (den < 0.0) fit.refined += 0.5 * (c[i - 1] - c[i + 1]) / den;
  }
  return fit;
}

struct ProfileArrays {
  std::vector<double> xi;
  std::vector<double> amp_p, amp_c, amp_rho_cb;
};

inline ProfileArrays profile_arrays(const GridSlice& s) {
  const std::size_t n = uniform_prefix(s);
  ProfileArrays a;
  a.xi.assign(s.xi.begin(), s.xi.begin() + static_cast<std::ptrdiff_t>(n));
  for (std::size_t i = 0; i < n; ++i) {
    a.amp_p.push_back(std::abs(s.fields[i].omega_p));
    a.amp_c.push_back(std::abs(s.fields[i].omega_c));
    a.amp_rho_cb.push_back(std::abs(s.atoms[i].rho_cb));
  }
  return a;
}

}  // namespace detail

//----------------------------------------------------------------------------
// speed

inline constexpr double traveling_min_correlation = 0.8;

struct SpeedEstimate {
  double v = 0.0;            // lab-frame speed, units of c
  double uncertainty = 0.0;  // standard deviation of the pair estimates
  double v_retarded = 0.0;   // d xi / d tau of the structure
  double shape_correlation = 1.0;  // worst shifted correlation of |Omega_p|, |Omega_c|, |rho_cb|
  std::vector<double> pair_speeds;
};

// Largest shift searched between consecutive snapshots, as a fraction of the
// profile length.
inline constexpr double max_shift_fraction = 0.25;

inline SpeedEstimate estimate_speed(const SimulationRecord& rec, std::size_t first,
                                    std::size_t last) {
  if (last >= rec.snapshots.size() || last < first + 1)
    throw DiagnosticError("need at least 2 snapshots in the window");

  SpeedEstimate est;
  double sum = 0.0;
  for (std::size_t i = first; i < last; ++i) {
    const auto a = detail::profile_arrays(rec.snapshots[i]);
    const auto b = detail::profile_arrays(rec.snapshots[i + 1]);
    const double dxi = a.xi.size() > 1 ? a.xi[1] - a.xi[0] : rec.params.d_xi();
    const auto max_shift = static_cast<std::ptrdiff_t>(
        max_shift_fraction * static_cast<double>(a.xi.size()));
    const auto fit = detail::best_shift(a.amp_c, b.amp_c, max_shift);
    if (fit.correlation < traveling_min_correlation)
      throw DiagnosticError("no traveling structure");

    const double d_tau = rec.snapshots[i + 1].tau - rec.snapshots[i].tau;
    const double vr = fit.refined * dxi / d_tau;
    const double v = vr / (1.0 + vr);
    est.pair_speeds.push_back(v);
    sum += vr;

    est.shape_correlation = std::min(
        {est.shape_correlation, fit.correlation,
         detail::shifted_pearson(a.amp_p, b.amp_p, fit.cells),
         detail::shifted_pearson(a.amp_rho_cb, b.amp_rho_cb, fit.cells)});
  }
  est.v_retarded = sum / static_cast<double>(est.pair_speeds.size());
  est.v = est.v_retarded / (1.0 + est.v_retarded);
  double var = 0.0;
  for (double v : est.pair_speeds) var += (v - est.v) * (v - est.v);
  est.uncertainty = std::sqrt(var / static_cast<double>(est.pair_speeds.size()));
  return est;
}

//----------------------------------------------------------------------------
// profiles

inline TravelingProfile profile_from_snapshot(const GridSlice& s, double v, double alpha0,
                                              double gamma = 1.0) {
  const std::size_t n = detail::uniform_prefix(s);
  TravelingProfile p;
  p.v = v;
  p.alpha0 = alpha0;
  p.gamma = gamma;
  for (std::size_t i = 0; i < n; ++i) {
    // lab time at this point is tau + xi
    p.s_grid.push_back(s.xi[i] * (1.0 - v) - v * s.tau);
    p.omega_p.push_back(s.fields[i].omega_p);
    p.omega_c.push_back(s.fields[i].omega_c);
    p.rho_cb.push_back(s.atoms[i].rho_cb);
  }
  return p;
}

struct Residual {
  double value = 0.0;
  bool degenerate = false;
};

inline constexpr double residual_epsilon = 1e-12;

inline Residual coherence_relation_residual(const TravelingProfile& p) {
  if (!(p.v > 0.0) || !(p.v < 1.0)) throw DiagnosticError("speed outside (0, c)");
  const double k = (1.0 - p.v) / (p.alpha0 * p.v);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < p.rho_cb.size(); ++i) {
    num += std::norm(p.rho_cb[i] + k * p.omega_p[i] * std::conj(p.omega_c[i]));
    den += std::norm(p.rho_cb[i]);
  }
  num = std::sqrt(num);
  den = std::sqrt(den);
  if (num < residual_epsilon && den < residual_epsilon) return {0.0, true};
  return {num / std::max(den, residual_epsilon), false};
}

struct LimitValues {
  double omega_p_inf = 0.0;  // |Omega_p| at the s -> -inf end
  double omega_c_inf = 0.0;  // |Omega_c| at the s -> +inf end
};

inline constexpr double end_fraction = 0.1;
inline constexpr double settled_variation = 0.05;

inline LimitValues limit_values(const TravelingProfile& p) {
  const std::size_t n = p.s_grid.size();
  const std::size_t m = std::max<std::size_t>(1, static_cast<std::size_t>(end_fraction * n));
  if (n < 2 * m) throw DiagnosticError("limits undefined: profile too short");
  auto settle = [](const std::vector<complex>& v, std::size_t b, std::size_t e) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0, sum = 0.0;
    for (std::size_t i = b; i < e; ++i) {
      const double a = std::abs(v[i]);
      lo = std::min(lo, a);
      hi = std::max(hi, a);
      sum += a;
    }
    if (hi > 0.0 && (hi - lo) / hi >= settled_variation)
      throw DiagnosticError("limits undefined: profile ends not settled");
    return sum / static_cast<double>(e - b);
  };
  return {settle(p.omega_p, 0, m), settle(p.omega_c, n - m, n)};
}

struct SumRule {
  double value = 0.0;
  bool degenerate = false;  // v = c
};

inline SumRule limit_sum_rule(const TravelingProfile& p) {
  const auto lim = limit_values(p);
  if (p.v >= 1.0) return {0.0, true};
  if (!(p.v > 0.0)) throw DiagnosticError("speed must be positive");
  const double k = (1.0 - p.v) / (p.alpha0 * p.v);
  return {k * (lim.omega_p_inf * lim.omega_p_inf + lim.omega_c_inf * lim.omega_c_inf),
          false};
}

//----------------------------------------------------------------------------
// profile ODEs

// Which field the undecorated dOmega/ds of the second equation refers to.
enum class OdeReading { omega_p, omega_c };

struct OdeOptions {
  OdeReading reading = OdeReading::omega_p;
  bool resolution_check = true;
};

struct OdeResidual {
  double first = 0.0;
  double second = 0.0;
  bool degenerate = false;
};

namespace detail {

struct Derivatives {
  std::vector<complex> d1, d2, d3;
  std::vector<complex> d1_low;  // second-order first derivative
};

// Central differences of fourth order; valid for 3 <= i < n - 3.
inline Derivatives differentiate(const std::vector<complex>& f, double h) {
  const std::size_t n = f.size();
  Derivatives d;
  d.d1.assign(n, {});
  d.d2.assign(n, {});
  d.d3.assign(n, {});
  d.d1_low.assign(n, {});
  for (std::size_t i = 3; i + 3 < n; ++i) {
    d.d1[i] = (-f[i + 2] + 8.0 * f[i + 1] - 8.0 * f[i - 1] + f[i - 2]) / (12.0 * h);
    d.d2[i] = (-f[i + 2] + 16.0 * f[i + 1] - 30.0 * f[i] + 16.0 * f[i - 1] - f[i - 2]) /
              (12.0 * h * h);
    d.d3[i] = (-f[i + 3] + 8.0 * f[i + 2] - 13.0 * f[i + 1] + 13.0 * f[i - 1] -
               8.0 * f[i - 2] + f[i - 3]) /
              (8.0 * h * h * h);
    d.d1_low[i] = (f[i + 1] - f[i - 1]) / (2.0 * h);
  }
  return d;
}

inline double norm_of(const std::vector<complex>& v) {
  double s = 0.0;
  for (auto z : v) s += std::norm(z);
  return std::sqrt(s);
}

inline double relative_residual(const std::vector<std::vector<complex>>& terms,
                                 const std::vector<complex>& total, bool& degenerate) {
  double scale = 0.0;
  for (const auto& t : terms) scale = std::max(scale, norm_of(t));
  const double r = norm_of(total);
  if (scale < residual_epsilon) {
    degenerate = true;
    return 0.0;
  }
  return r / scale;
}

}  // namespace detail

// Residuals of the two traveling-wave ODEs, each relative to the norm of its
// largest additive term:
//   v[Op Oc*'' - Oc* Op''] - g[Op Oc*' - Oc* Op'] = -Op Oc* (|Op_inf|^2/v - a0/(c - v))
//   -Op (v Op''' - g Op'') + (O' + 2 g Op / v)(v Op'' - g Op')
//       = (2 Op^2 / v) d/ds(|Oc|^2 + |Op|^2) + (g / v^2) Op^2 (|Op_inf|^2 - |Oc|^2 - |Op|^2)
// O' is Op' by default; OdeReading::omega_c selects Oc'.
inline OdeResidual soliton_ode_residual(const TravelingProfile& p, const OdeOptions& opt = {}) {
  if (!(p.v > 0.0) || !(p.v < 1.0)) throw DiagnosticError("speed outside (0, c)");
  const std::size_t n = p.s_grid.size();
  if (n < 7) throw DiagnosticError("grid too coarse: fewer than 7 profile points");
  const double h = p.s_grid[1] - p.s_grid[0];
  const double v = p.v, g = p.gamma;

  std::vector<complex> oc_c(n), intensity(n);
  for (std::size_t i = 0; i < n; ++i) {
    oc_c[i] = std::conj(p.omega_c[i]);
    intensity[i] = std::norm(p.omega_c[i]) + std::norm(p.omega_p[i]);
  }
  const auto dp = detail::differentiate(p.omega_p, h);
  const auto dc = detail::differentiate(oc_c, h);
  const auto dc_plain = detail::differentiate(p.omega_c, h);
  const auto di = detail::differentiate(intensity, h);

  if (opt.resolution_check) {
    // disagreement between 2nd- and 4th-order slopes estimates derivative noise
    double err = 0.0, scale = 0.0;
    for (std::size_t i = 3; i + 3 < n; ++i) {
      err += std::norm(dp.d1[i] - dp.d1_low[i]) + std::norm(dc.d1[i] - dc.d1_low[i]);
      scale += std::norm(dp.d1[i]) + std::norm(dc.d1[i]);
    }
    if (scale > 0.0 && std::sqrt(err / scale) > 0.1)
      throw DiagnosticError("grid too coarse: derivative noise above 10% of term scale");
  }

  double p_inf = 0.0;
  {
    const std::size_t m = std::max<std::size_t>(1, static_cast<std::size_t>(end_fraction * n));
    for (std::size_t i = 0; i < m; ++i) p_inf += std::abs(p.omega_p[i]);
    p_inf /= static_cast<double>(m);
  }
  const double coeff1 = p_inf * p_inf / v - p.alpha0 / (1.0 - v);

  const std::size_t m = n - 6;
  std::vector<std::vector<complex>> t1(5, std::vector<complex>(m)), t2(6, std::vector<complex>(m));
  std::vector<complex> r1(m), r2(m);
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t i = k + 3;
    const complex op = p.omega_p[i], occ = oc_c[i];
    t1[0][k] = v * op * dc.d2[i];
    t1[1][k] = -v * occ * dp.d2[i];
    t1[2][k] = -g * op * dc.d1[i];
    t1[3][k] = g * occ * dp.d1[i];
    t1[4][k] = op * occ * coeff1;  // moved to the left
    r1[k] = t1[0][k] + t1[1][k] + t1[2][k] + t1[3][k] + t1[4][k];

    const complex o_prime = opt.reading == OdeReading::omega_p ? dp.d1[i] : dc_plain.d1[i];
    const complex op2 = op * op;
    t2[0][k] = -op * v * dp.d3[i];
    t2[1][k] = op * g * dp.d2[i];
    t2[2][k] = o_prime * (v * dp.d2[i] - g * dp.d1[i]);
    t2[3][k] = (2.0 * g * op / v) * (v * dp.d2[i] - g * dp.d1[i]);
    t2[4][k] = -(2.0 * op2 / v) * di.d1[i];
    t2[5][k] = -(g / (v * v)) * op2 * (p_inf * p_inf - intensity[i].real());
    r2[k] = t2[0][k] + t2[1][k] + t2[2][k] + t2[3][k] + t2[4][k] + t2[5][k];
  }

  OdeResidual out;
  bool deg1 = false, deg2 = false;
  out.first = detail::relative_residual(t1, r1, deg1);
  out.second = detail::relative_residual(t2, r2, deg2);
  out.degenerate = deg1 && deg2;
  return out;
}

//----------------------------------------------------------------------------
// windows and seed independence

// Snapshots in the late part of the retrieval epoch, while the structure is
// still well inside the cell: tau in [t_on + a (t_front - t_on), t_on + b (t_front - t_on)].
inline constexpr double late_window_begin = 0.6;
inline constexpr double late_window_end = 0.85;

struct SnapshotWindow {
  std::size_t first = 0;
  std::size_t last = 0;
  std::size_t count() const { return last >= first ? last - first + 1 : 0; }
};

inline SnapshotWindow late_window(const SimulationRecord& rec) {
  const auto w = retrieval_windows(rec);
  const double t_on = rec.spec.t_on;
  const double lo = t_on + late_window_begin * (w.output_end - t_on);
  const double hi = t_on + late_window_end * (w.output_end - t_on);
  SnapshotWindow sw;
  bool found = false;
  for (std::size_t i = 0; i < rec.snapshots.size(); ++i) {
    const double t = rec.snapshots[i].tau;
    if (t < lo || t > hi) continue;
    if (!found) { sw.first = i; found = true; }
    sw.last = i;
  }
  if (!found || sw.count() < 2) throw DiagnosticError("late window holds fewer than 2 snapshots");
  return sw;
}

inline bool equal_coupling(const SimParams& p) {
  return std::abs(p.alpha_p - p.alpha_c) <= 1e-12 * std::max(p.alpha_p, p.alpha_c);
}

// Largest |Omega_c| profile difference over the window after aligning each
// snapshot pair, relative to the larger peak.
inline double seed_independence_check(const SimulationRecord& a, const SimulationRecord& b,
                                      const SnapshotWindow& window) {
  if (!equal_coupling(a.params) || !equal_coupling(b.params))
    throw PreconditionError("precondition unmet: both runs need alpha_p = alpha_c");
  if (!(a.params == b.params))
    throw PreconditionError("precondition unmet: runs use different parameters");
  if (a.spec.omega_r0 != b.spec.omega_r0 || a.spec.t_on != b.spec.t_on ||
      a.spec.t_switch != b.spec.t_switch)
    throw PreconditionError("precondition unmet: runs use different retrieval drives");
  estimate_speed(a, window.first, window.last);
  estimate_speed(b, window.first, window.last);

  double worst = 0.0;
  for (std::size_t i = window.first; i <= window.last; ++i) {
    const auto pa = detail::profile_arrays(a.snapshots[i]);
    const auto pb = detail::profile_arrays(b.snapshots[i]);
    const auto max_shift = static_cast<std::ptrdiff_t>(
        max_shift_fraction * static_cast<double>(pa.xi.size()));
    const auto fit = detail::best_shift(pa.amp_c, pb.amp_c, max_shift);
    const double peak = std::max(*std::max_element(pa.amp_c.begin(), pa.amp_c.end()),
                                 *std::max_element(pb.amp_c.begin(), pb.amp_c.end()));
    if (!(peak > 0.0)) continue;
    const auto n = static_cast<std::ptrdiff_t>(pa.amp_c.size());
    for (std::ptrdiff_t k = std::max<std::ptrdiff_t>(0, -fit.cells);
         k < std::min<std::ptrdiff_t>(n, n - fit.cells); ++k)
      worst = std::max(worst, std::abs(pa.amp_c[k] - pb.amp_c[k + fit.cells]) / peak);
  }
  return worst;
}

}  // namespace lambda_eit
