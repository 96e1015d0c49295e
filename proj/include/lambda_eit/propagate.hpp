#pragma once

// Maxwell-Bloch propagation in the retarded frame xi = z, tau = t - z/c.
//
// In these coordinates the field equations lose their time derivative,
//   dOmega_p/dxi = i A_p rho_ab,   dOmega_c/dxi = i A_c rho_ac,
// so at every tau the fields are a spatial quadrature of the local
// coherences starting from the boundary drive. Causality runs along xi:
// the history of cell j depends only on cells upstream of it.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "bloch.hpp"
#include "model.hpp"
#include "scenarios.hpp"

namespace lambda_eit {

struct GridSlice {
  double tau = 0.0;
  std::vector<double> xi;
  std::vector<AtomicState> atoms;
  std::vector<FieldPair> fields;
};

struct SimulationRecord {
  SimParams params;
  PulseSpec spec;
  std::vector<double> tau;  // sample times of the two series
  std::vector<FieldPair> boundary_series;
  std::vector<FieldPair> exit_series;
  std::vector<GridSlice> snapshots;
  std::map<std::string, std::string> provenance;
};

using SnapshotSink = std::function<void(const GridSlice&)>;

inline constexpr const char* code_version = "lambda_eit 1.0.0";

// Worker threads for independent runs; LAMBDA_EIT_THREADS caps it.
inline int thread_count() {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (const char* env = std::getenv("LAMBDA_EIT_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) n = std::min(n, cap);
  }
  return std::max(n, 1);
}

struct Coherences {
  complex rho_ab;
  complex rho_ac;
};

// Trapezoidal march of both fields from the xi = 0 boundary value.
inline void field_march(std::span<const Coherences> coh, const FieldPair& boundary,
                        const SimParams& p, std::span<FieldPair> out) {
  const double hp = 0.5 * p.alpha_p * p.d_xi();
  const double hc = 0.5 * p.alpha_c * p.d_xi();
  out[0] = boundary;
  for (std::size_t j = 1; j < coh.size(); ++j) {
    const complex sp = coh[j - 1].rho_ab + coh[j].rho_ab;
    const complex sc = coh[j - 1].rho_ac + coh[j].rho_ac;
    out[j].omega_p = out[j - 1].omega_p + hp * complex(-sp.imag(), sp.real());
    out[j].omega_c = out[j - 1].omega_c + hc * complex(-sc.imag(), sc.real());
  }
}

inline std::vector<FieldPair> field_march(std::span<const Coherences> coh,
                                          const FieldPair& boundary,
                                          const SimParams& p) {
  std::vector<FieldPair> out(coh.size());
  if (!coh.empty()) field_march(coh, boundary, p, out);
  return out;
}

namespace detail {

// (y0 + y1)/2 + h (d0 - d1)/8
inline AtomicState hermite_mid(const AtomicState& y0, const AtomicState& y1,
                               const AtomicDerivative& d0,
                               const AtomicDerivative& d1, double h) {
  const double w = 0.125 * h;
  AtomicState m;
  m.rho_bb = 0.5 * (y0.rho_bb + y1.rho_bb) + w * (d0.rho_bb - d1.rho_bb);
  m.rho_cc = 0.5 * (y0.rho_cc + y1.rho_cc) + w * (d0.rho_cc - d1.rho_cc);
  m.rho_aa = 0.5 * (y0.rho_aa + y1.rho_aa) + w * (d0.rho_aa - d1.rho_aa);
  m.rho_ab = 0.5 * (y0.rho_ab + y1.rho_ab) + w * (d0.rho_ab - d1.rho_ab);
  m.rho_cb = 0.5 * (y0.rho_cb + y1.rho_cb) + w * (d0.rho_cb - d1.rho_cb);
  m.rho_ca = 0.5 * (y0.rho_ca + y1.rho_ca) + w * (d0.rho_ca - d1.rho_ca);
  return m;
}

inline bool physical(const AtomicState& s) {
  constexpr double lim = 1.0 + 1e-3;
  constexpr double lo = -1e-3;
  if (!s.finite()) return false;
  if (s.rho_bb < lo || s.rho_bb > lim || s.rho_cc < lo || s.rho_cc > lim ||
      s.rho_aa < lo || s.rho_aa > lim)
    return false;
  return std::abs(s.rho_ab) <= lim && std::abs(s.rho_cb) <= lim &&
         std::abs(s.rho_ca) <= lim;
}

}  // namespace detail

// Runs one simulation into `rec`. Samples at tau_k = k d_tau, k = 0 .. n_tau - 1;
// a snapshot is taken every snapshot_stride samples and handed to `sink` once
// complete. On InstabilityError `rec` keeps what was computed so far: the
// boundary series and the snapshot columns of the cells already swept.
//
// The sweep goes cell by cell along xi. Because the trapezoid rule couples
// cell j only to cell j-1 at the same tau, the field entering cell j is
//   Omega_j(tau) = G_{j-1}(tau) + i w rho_j(tau),  G_{j-1} = Omega_{j-1} + i w rho_{j-1},
// with w = A dxi / 2. G_{j-1} is stored on the half-step lattice so each
// cell runs a plain RK4 in tau with exact stage samples; midpoint values of
// rho come from cubic Hermite interpolation of the step endpoints.
inline void integrate_into(const PulseSpec& spec, const SimParams& params,
                           SimulationRecord& rec, const SnapshotSink& sink = {}) {
  const SimParams p = validate(params);
  validate(spec);
  if (!std::isfinite(p.horizon()))
    throw ConfigError(std::vector<ValidationIssue>{
        {"n_tau", "horizon n_tau * d_tau is not finite"}});

  const std::size_t n = p.n_xi;
  const std::size_t nt = p.n_tau;
  const std::size_t lattice = 2 * nt - 1;
  const double h = p.d_tau;
  const double dxi = p.d_xi();
  const double wp = 0.5 * p.alpha_p * dxi;
  const double wc = 0.5 * p.alpha_c * dxi;

  rec = SimulationRecord{};
  rec.params = p;
  rec.provenance["code_version"] = code_version;
  rec.provenance["n_xi"] = std::to_string(p.n_xi);
  rec.provenance["n_tau"] = std::to_string(p.n_tau);
  rec.spec = spec;
  rec.tau.resize(nt);
  rec.boundary_series.resize(nt);
  rec.exit_series.resize(nt);
  for (std::size_t k = 0; k < nt; ++k) {
    rec.tau[k] = static_cast<double>(k) * h;
    rec.boundary_series[k] = boundary_fields(rec.tau[k], spec);
  }

  // cells kept in the snapshots
  std::vector<std::size_t> kept;
  for (std::size_t j = 0; j < n; j += p.snapshot_xi_stride) kept.push_back(j);
  if (kept.back() != n - 1) kept.push_back(n - 1);
  for (std::size_t k = 0; k < nt; k += p.snapshot_stride) {
    GridSlice s;
    s.tau = rec.tau[k];
    s.xi.reserve(kept.size());
    for (std::size_t j : kept)
      s.xi.push_back(j == n - 1 ? p.cell_length : static_cast<double>(j) * dxi);
    s.atoms.resize(kept.size());
    s.fields.resize(kept.size());
    rec.snapshots.push_back(std::move(s));
  }

  // G of the upstream cell on the half-step lattice; cell 0 sees the drive.
  std::vector<FieldPair> upstream(lattice), downstream(lattice);
  for (std::size_t i = 0; i < lattice; ++i)
    upstream[i] = boundary_fields(0.5 * h * static_cast<double>(i), spec);

  auto local_fields = [](const FieldPair& g, const AtomicState& s, double w_p,
                         double w_c) {
    FieldPair f;
    f.omega_p = g.omega_p + w_p * detail::times_i(s.rho_ab);
    f.omega_c = g.omega_c + w_c * detail::times_i(std::conj(s.rho_ca));
    return f;
  };

  std::size_t kept_index = 0;
  for (std::size_t j = 0; j < n; ++j) {
    const double own_p = j == 0 ? 0.0 : wp;
    const double own_c = j == 0 ? 0.0 : wc;
    const bool snap = kept_index < kept.size() && kept[kept_index] == j;
    const double xi = j == n - 1 ? p.cell_length : static_cast<double>(j) * dxi;

    AtomicState y = AtomicState::ground_b();
    AtomicState y_prev;
    AtomicDerivative d_prev;

    for (std::size_t k = 0; k < nt; ++k) {
      const FieldPair f0 = local_fields(upstream[2 * k], y, own_p, own_c);
      const AtomicDerivative k1 = bloch_rhs(y, f0, p);

      downstream[2 * k] = local_fields(f0, y, wp, wc);
      if (k > 0) {
        const AtomicState mid = detail::hermite_mid(y_prev, y, d_prev, k1, h);
        const FieldPair fm = local_fields(upstream[2 * k - 1], mid, own_p, own_c);
        downstream[2 * k - 1] = local_fields(fm, mid, wp, wc);
      }
      if (k % p.snapshot_stride == 0 && snap) {
        auto& s = rec.snapshots[k / p.snapshot_stride];
        s.atoms[kept_index] = y;
        s.fields[kept_index] = f0;
      }
      if (j == n - 1) rec.exit_series[k] = f0;
      if (k + 1 == nt) break;

      const FieldPair& gm = upstream[2 * k + 1];
      const FieldPair& g1 = upstream[2 * k + 2];
      const AtomicState s2 = detail::axpy(y, 0.5 * h, k1);
      const AtomicDerivative k2 = bloch_rhs(s2, local_fields(gm, s2, own_p, own_c), p);
      const AtomicState s3 = detail::axpy(y, 0.5 * h, k2);
      const AtomicDerivative k3 = bloch_rhs(s3, local_fields(gm, s3, own_p, own_c), p);
      const AtomicState s4 = detail::axpy(y, h, k3);
      const AtomicDerivative k4 = bloch_rhs(s4, local_fields(g1, s4, own_p, own_c), p);

      y_prev = y;
      d_prev = k1;
      y = detail::rk4_combine(y, h, k1, k2, k3, k4);
      if (!detail::physical(y))
        throw InstabilityError(xi, rec.tau[k + 1],
                               "density matrix left the physical range");
    }
    if (snap) ++kept_index;
    std::swap(upstream, downstream);
  }

  if (sink)
    for (const auto& s : rec.snapshots) sink(s);
}

inline SimulationRecord integrate(const PulseSpec& spec, const SimParams& params,
                                  const SnapshotSink& sink = {}) {
  SimulationRecord rec;
  integrate_into(spec, params, rec, sink);
  return rec;
}

struct StabilityAdvice {
  double d_tau = 0.0;
  std::size_t n_xi = 0;
  std::vector<std::string> rationale;
};

// Largest drive amplitude the boundary program can produce on either channel.
inline double max_drive(const PulseSpec& spec) {
  return std::max(spec.omega_p0 + spec.omega_r0, spec.omega_c0);
}

// Suggested step and grid: d_tau <= 0.1 / max(gamma_ab, gamma_ca, |Omega|max)
// and A dxi <= 0.1 for a coherence of modulus 1.
inline StabilityAdvice stability_limits(const SimParams& p, const PulseSpec& spec) {
  StabilityAdvice a;
  a.d_tau = p.d_tau;
  a.n_xi = p.n_xi;
  const double rate = std::max({p.gamma_ab, p.gamma_ca, max_drive(spec)});
  if (rate > 0.0) {
    a.d_tau = 0.1 / rate;
    a.rationale.push_back("d_tau <= 0.1 / max(gamma_ab, gamma_ca, |Omega|max) = " +
                          std::to_string(a.d_tau));
  } else {
    a.rationale.push_back("no rate constrains d_tau; keeping configured value");
  }
  const double depth = std::max(p.alpha_p, p.alpha_c) * p.cell_length;
  if (depth > 0.0) {
    a.n_xi = static_cast<std::size_t>(std::ceil(depth / 0.1)) + 1;
    a.rationale.push_back("A dxi <= 0.1 at unit coherence needs n_xi >= " +
                          std::to_string(a.n_xi));
  } else {
    a.rationale.push_back("no coupling constrains dxi; keeping configured n_xi");
  }
  return a;
}

}  // namespace lambda_eit
