#pragma once

// Local optical Bloch equations of a resonantly driven Lambda atom and a
// classical RK4 stepper for a single cell with prescribed fields.

#include <cmath>

#include "model.hpp"

namespace lambda_eit {

// Time derivative of an AtomicState, in units of gamma.
using AtomicDerivative = AtomicState;

namespace detail {

// Plain complex product. std::complex operator* goes through the Annex G
// NaN-recovery path, which dominates the per-cell cost.
inline complex mul(complex a, complex b) {
  return {a.real() * b.real() - a.imag() * b.imag(),
          a.real() * b.imag() + a.imag() * b.real()};
}

inline complex times_i(complex a) { return {-a.imag(), a.real()}; }

inline AtomicState axpy(const AtomicState& y, double h, const AtomicDerivative& k) {
  AtomicState r;
  r.rho_bb = y.rho_bb + h * k.rho_bb;
  r.rho_cc = y.rho_cc + h * k.rho_cc;
  r.rho_aa = y.rho_aa + h * k.rho_aa;
  r.rho_ab = y.rho_ab + h * k.rho_ab;
  r.rho_cb = y.rho_cb + h * k.rho_cb;
  r.rho_ca = y.rho_ca + h * k.rho_ca;
  return r;
}

// y + h/6 (k1 + 2 k2 + 2 k3 + k4)
inline AtomicState rk4_combine(const AtomicState& y, double h,
                               const AtomicDerivative& k1,
                               const AtomicDerivative& k2,
                               const AtomicDerivative& k3,
                               const AtomicDerivative& k4) {
  const double w = h / 6.0;
  AtomicState r;
  r.rho_bb = y.rho_bb + w * (k1.rho_bb + 2.0 * (k2.rho_bb + k3.rho_bb) + k4.rho_bb);
  r.rho_cc = y.rho_cc + w * (k1.rho_cc + 2.0 * (k2.rho_cc + k3.rho_cc) + k4.rho_cc);
  r.rho_aa = y.rho_aa + w * (k1.rho_aa + 2.0 * (k2.rho_aa + k3.rho_aa) + k4.rho_aa);
  r.rho_ab = y.rho_ab + w * (k1.rho_ab + 2.0 * (k2.rho_ab + k3.rho_ab) + k4.rho_ab);
  r.rho_cb = y.rho_cb + w * (k1.rho_cb + 2.0 * (k2.rho_cb + k3.rho_cb) + k4.rho_cb);
  r.rho_ca = y.rho_ca + w * (k1.rho_ca + 2.0 * (k2.rho_ca + k3.rho_ca) + k4.rho_ca);
  return r;
}

}  // namespace detail

// Right-hand side of the density-matrix equations on one- and two-photon
// resonance, H = -(Omega_p |a><b| + Omega_c |a><c| + h.c.).
//
// The excited population is evolved explicitly so the derivative is exactly
// traceless; rho_cb carries no ground-state dephasing.
inline AtomicDerivative bloch_rhs(const AtomicState& s, const FieldPair& f,
                                  const SimParams& p) {
  using detail::mul;
  using detail::times_i;

  const complex op = f.omega_p;
  const complex oc = f.omega_c;
  const complex op_c = std::conj(op);
  const complex oc_c = std::conj(oc);

  // i Omega_p* rho_ab - i Omega_p rho_ba = -2 Im(Omega_p* rho_ab)
  const double pump_p = -2.0 * mul(op_c, s.rho_ab).imag();
  // i Omega_c* rho_ac - i Omega_c rho_ca = 2 Im(Omega_c rho_ca)
  const double pump_c = 2.0 * mul(oc, s.rho_ca).imag();

  AtomicDerivative d;
  d.rho_bb = p.gamma_b * s.rho_aa + pump_p;
  d.rho_cc = p.gamma_c * s.rho_aa + pump_c;
  d.rho_aa = -(p.gamma_b + p.gamma_c) * s.rho_aa - pump_p - pump_c;
  d.rho_ab = -p.gamma_ab * s.rho_ab +
             times_i(op * (s.rho_bb - s.rho_aa) + mul(oc, s.rho_cb));
  d.rho_cb = times_i(mul(oc_c, s.rho_ab) - mul(op, s.rho_ca));
  d.rho_ca = -p.gamma_ca * s.rho_ca +
             times_i(oc_c * (s.rho_aa - s.rho_cc) - mul(op_c, s.rho_cb));
  return d;
}

// One classical RK4 step of a single cell. The fields are sampled at the
// start, midpoint and end of the step; both inner stages use the midpoint.
inline AtomicState rk4_step(const AtomicState& y, const FieldPair& fields_t0,
                            const FieldPair& fields_mid,
                            const FieldPair& fields_t1, double d_tau,
                            const SimParams& p) {
  const auto k1 = bloch_rhs(y, fields_t0, p);
  const auto k2 = bloch_rhs(detail::axpy(y, 0.5 * d_tau, k1), fields_mid, p);
  const auto k3 = bloch_rhs(detail::axpy(y, 0.5 * d_tau, k2), fields_mid, p);
  const auto k4 = bloch_rhs(detail::axpy(y, d_tau, k3), fields_t1, p);
  auto out = detail::rk4_combine(y, d_tau, k1, k2, k3, k4);
  if (!out.finite()) throw InstabilityError(0.0, d_tau, "non-finite RK4 result");
  return out;
}

}  // namespace lambda_eit
