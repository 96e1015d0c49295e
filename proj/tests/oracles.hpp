#pragma once

// Independent reference implementations used by the tests. Nothing here
// shares code with the library beyond the plain data types.

#include <array>
#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "lambda_eit/model.hpp"

namespace oracle {

using lambda_eit::AtomicState;
using lambda_eit::FieldPair;
using lambda_eit::SimParams;
using cplx = std::complex<double>;
using Mat = std::array<std::array<cplx, 3>, 3>;

// basis order b, c, a
enum { B = 0, C = 1, A = 2 };

inline Mat to_matrix(const AtomicState& s) {
  Mat m{};
  m[B][B] = s.rho_bb;
  m[C][C] = s.rho_cc;
  m[A][A] = s.rho_aa;
  m[A][B] = s.rho_ab;
  m[B][A] = std::conj(s.rho_ab);
  m[C][B] = s.rho_cb;
  m[B][C] = std::conj(s.rho_cb);
  m[C][A] = s.rho_ca;
  m[A][C] = std::conj(s.rho_ca);
  return m;
}

inline Mat mul(const Mat& x, const Mat& y) {
  Mat r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) r[i][j] += x[i][k] * y[k][j];
  return r;
}

// RWA Hamiltonian H = -(Op |a><b| + Oc |a><c| + h.c.), hbar = 1.
inline Mat hamiltonian(const FieldPair& f) {
  Mat h{};
  h[A][B] = -f.omega_p;
  h[B][A] = -std::conj(f.omega_p);
  h[A][C] = -f.omega_c;
  h[C][A] = -std::conj(f.omega_c);
  return h;
}

// -i [H, rho] plus spontaneous decay of |a> into |b>, |c> and dephasing of
// the optical coherences.
inline Mat derivative(const AtomicState& s, const FieldPair& f, const SimParams& p) {
  const Mat rho = to_matrix(s);
  const Mat h = hamiltonian(f);
  const Mat hr = mul(h, rho);
  const Mat rh = mul(rho, h);
  Mat d{};
  const cplx mi(0.0, -1.0);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) d[i][j] = mi * (hr[i][j] - rh[i][j]);
  d[A][A] -= (p.gamma_b + p.gamma_c) * rho[A][A];
  d[B][B] += p.gamma_b * rho[A][A];
  d[C][C] += p.gamma_c * rho[A][A];
  d[A][B] -= p.gamma_ab * rho[A][B];
  d[B][A] -= p.gamma_ab * rho[B][A];
  d[C][A] -= p.gamma_ca * rho[C][A];
  d[A][C] -= p.gamma_ca * rho[A][C];
  return d;
}

// Eigenvalues of a Hermitian 3x3 matrix through the real symmetric 6x6
// embedding [[Re, -Im], [Im, Re]] and cyclic Jacobi rotations. Each
// eigenvalue appears twice in the embedding.
inline std::vector<double> eigenvalues(const Mat& m) {
  double a[6][6];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      a[i][j] = m[i][j].real();
      a[i + 3][j + 3] = m[i][j].real();
      a[i][j + 3] = -m[i][j].imag();
      a[i + 3][j] = m[i][j].imag();
    }
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < 6; ++i)
      for (int j = i + 1; j < 6; ++j) off += a[i][j] * a[i][j];
    if (off < 1e-30) break;
    for (int p = 0; p < 6; ++p)
      for (int q = p + 1; q < 6; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (int k = 0; k < 6; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (int k = 0; k < 6; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
      }
  }
  std::vector<double> ev;
  for (int i = 0; i < 6; ++i) ev.push_back(a[i][i]);
  return ev;
}

inline cplx random_complex(std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  return {u(rng), u(rng)};
}

// Random density matrix rho = M M^dagger / tr.
inline AtomicState random_density(std::mt19937_64& rng) {
  Mat m{};
  for (auto& row : m)
    for (auto& x : row) x = random_complex(rng, 1.0);
  Mat r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) r[i][j] += m[i][k] * std::conj(m[j][k]);
  const double tr = (r[0][0] + r[1][1] + r[2][2]).real();
  AtomicState s;
  s.rho_bb = r[B][B].real() / tr;
  s.rho_cc = r[C][C].real() / tr;
  s.rho_aa = r[A][A].real() / tr;
  s.rho_ab = r[A][B] / tr;
  s.rho_cb = r[C][B] / tr;
  s.rho_ca = r[C][A] / tr;
  return s;
}

// Random pure state |psi><psi|.
inline AtomicState random_pure(std::mt19937_64& rng) {
  std::array<cplx, 3> v;
  double n = 0.0;
  for (auto& x : v) {
    x = random_complex(rng, 1.0);
    n += std::norm(x);
  }
  for (auto& x : v) x /= std::sqrt(n);
  AtomicState s;
  s.rho_bb = std::norm(v[B]);
  s.rho_cc = std::norm(v[C]);
  s.rho_aa = std::norm(v[A]);
  s.rho_ab = v[A] * std::conj(v[B]);
  s.rho_cb = v[C] * std::conj(v[B]);
  s.rho_ca = v[C] * std::conj(v[A]);
  return s;
}

inline double purity(const AtomicState& s) {
  return s.rho_bb * s.rho_bb + s.rho_cc * s.rho_cc + s.rho_aa * s.rho_aa +
         2.0 * (std::norm(s.rho_ab) + std::norm(s.rho_cb) + std::norm(s.rho_ca));
}

}  // namespace oracle
