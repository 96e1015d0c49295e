#pragma once

// Domain types and unit conventions shared by the solver and its tools.
//
// Working frame: gamma = 1, c = 1. Time is measured in 1/gamma, length in
// c/gamma, Rabi frequencies in gamma. The collective couplings are stored as
// the propagation coefficients A = alpha/c, so the retarded-frame field
// equation reads dOmega/dxi = i A rho and A * cell_length is the field
// attenuation exponent of a fully absorbing medium (for gamma_ab = 1).

#include <array>
#include <cmath>
#include <complex>
#include <algorithm>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace lambda_eit {

using complex = std::complex<double>;

inline constexpr double speed_of_light_si = 2.99792458e8;  // m/s

//----------------------------------------------------------------------------
// errors

struct ValidationIssue {
  std::string field;
  std::string message;
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<ValidationIssue> issues)
      : std::runtime_error(format(issues)), issues_(std::move(issues)) {}
  explicit ConfigError(const std::string& what)
      : std::runtime_error(what) {}

  const std::vector<ValidationIssue>& issues() const noexcept { return issues_; }

 private:
  static std::string format(const std::vector<ValidationIssue>& issues) {
    std::ostringstream os;
    os << "invalid configuration:";
    for (const auto& i : issues) os << "\n  " << i.field << ": " << i.message;
    return os.str();
  }

  std::vector<ValidationIssue> issues_;
};

class InstabilityError : public std::runtime_error {
 public:
  InstabilityError(double xi, double tau, const std::string& what)
      : std::runtime_error(describe(xi, tau, what)), xi_(xi), tau_(tau) {}

  double xi() const noexcept { return xi_; }
  double tau() const noexcept { return tau_; }

 private:
  static std::string describe(double xi, double tau, const std::string& what) {
    std::ostringstream os;
    os.precision(17);
    os << "numerical instability at xi = " << xi << ", tau = " << tau << ": "
       << what;
    return os.str();
  }

  double xi_;
  double tau_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

//----------------------------------------------------------------------------
// state of one grid cell

// Independent density-matrix elements of a Lambda atom (|b>, |c> ground,
// |a> excited). The remaining elements follow by Hermiticity.
struct AtomicState {
  double rho_bb = 1.0;
  double rho_cc = 0.0;
  double rho_aa = 0.0;
  complex rho_ab{};
  complex rho_cb{};
  complex rho_ca{};

  complex rho_ba() const { return std::conj(rho_ab); }
  complex rho_bc() const { return std::conj(rho_cb); }
  complex rho_ac() const { return std::conj(rho_ca); }

  double trace() const { return rho_bb + rho_cc + rho_aa; }

  static AtomicState ground_b() { return {}; }

  // Full 3x3 matrix in the basis order (b, c, a).
  std::array<std::array<complex, 3>, 3> matrix() const {
    return {{{complex(rho_bb), rho_bc(), rho_ba()},
             {rho_cb, complex(rho_cc), rho_ca},
             {rho_ab, rho_ac(), complex(rho_aa)}}};
  }

  bool finite() const {
    return std::isfinite(rho_bb) && std::isfinite(rho_cc) &&
           std::isfinite(rho_aa) && std::isfinite(rho_ab.real()) &&
           std::isfinite(rho_ab.imag()) && std::isfinite(rho_cb.real()) &&
           std::isfinite(rho_cb.imag()) && std::isfinite(rho_ca.real()) &&
           std::isfinite(rho_ca.imag());
  }

  // Smallest eigenvalue of the Hermitian matrix by cyclic complex Jacobi
  // rotations. The closed-form cubic loses sqrt(eps) at degenerate roots.
  double min_eigenvalue() const {
    auto m = matrix();
    for (int sweep = 0; sweep < 50; ++sweep) {
      const double off = std::norm(m[0][1]) + std::norm(m[0][2]) + std::norm(m[1][2]);
      const double diag = std::norm(m[0][0]) + std::norm(m[1][1]) + std::norm(m[2][2]);
      if (off <= 1e-36 * diag || off == 0.0) break;
      for (int p = 0; p < 2; ++p) {
        for (int q = p + 1; q < 3; ++q) {
          const double beta = std::abs(m[p][q]);
          if (beta == 0.0) continue;
          const complex ph = m[p][q] / beta;  // e^{i phi}
          const double theta = 0.5 * std::atan2(2.0 * beta, m[p][p].real() - m[q][q].real());
          const double c = std::cos(theta), sn = std::sin(theta);
          // columns of the rotation: (c, sn e^{-i phi}) and (-sn, c e^{-i phi})
          const complex vpp = c, vqp = sn * std::conj(ph), vpq = -sn, vqq = c * std::conj(ph);
          for (int k = 0; k < 3; ++k) {  // m <- m V
            const complex mp = m[k][p], mq = m[k][q];
            m[k][p] = mp * vpp + mq * vqp;
            m[k][q] = mp * vpq + mq * vqq;
          }
          for (int k = 0; k < 3; ++k) {  // m <- V^H m
            const complex mp = m[p][k], mq = m[q][k];
            m[p][k] = std::conj(vpp) * mp + std::conj(vqp) * mq;
            m[q][k] = std::conj(vpq) * mp + std::conj(vqq) * mq;
          }
        }
      }
    }
    return std::min({m[0][0].real(), m[1][1].real(), m[2][2].real()});
  }
};

// Complex Rabi frequencies of the probe (b-a) and control (c-a) transitions.
struct FieldPair {
  complex omega_p{};
  complex omega_c{};

  bool operator==(const FieldPair&) const = default;

  bool finite() const {
    return std::isfinite(omega_p.real()) && std::isfinite(omega_p.imag()) &&
           std::isfinite(omega_c.real()) && std::isfinite(omega_c.imag());
  }

  friend FieldPair operator+(const FieldPair& a, const FieldPair& b) {
    return {a.omega_p + b.omega_p, a.omega_c + b.omega_c};
  }
  friend FieldPair operator*(double s, const FieldPair& a) {
    return {s * a.omega_p, s * a.omega_c};
  }
};

//----------------------------------------------------------------------------
// parameters

// Dimensionless medium, decay and grid parameters.
struct SimParams {
  double alpha_p = 0.0;  // A_p = alpha_p / c, gamma per unit length
  double alpha_c = 0.0;
  double gamma_b = 1.0;
  double gamma_c = 1.0;
  double gamma_ab = 1.0;
  double gamma_ca = 1.0;
  double cell_length = 1.0;  // gamma l / c
  std::size_t n_xi = 2;
  std::size_t n_tau = 1;
  double d_tau = 0.01;
  std::size_t snapshot_stride = 1;
  std::size_t snapshot_xi_stride = 1;

  double d_xi() const { return cell_length / static_cast<double>(n_xi - 1); }
  double horizon() const { return static_cast<double>(n_tau) * d_tau; }
  double optical_depth_p() const { return alpha_p * cell_length; }
  double optical_depth_c() const { return alpha_c * cell_length; }

  bool operator==(const SimParams&) const = default;
};

// Laboratory description. Rates and times are already in units of gamma;
// gamma_abs only fixes the length scale c / gamma.
struct PhysicalConfig {
  double gamma_abs = 1.7e8;       // 1/s
  double cell_length_m = 0.04;    // m
  double alpha_over_c_p = 0.0;    // gamma per meter
  double alpha_over_c_c = 0.0;    // gamma per meter
  double gamma_b = 1.0;
  double gamma_c = 1.0;
  double gamma_ab = 1.0;
  double gamma_ca = 1.0;
  std::size_t n_xi = 2;
  std::size_t n_tau = 1;
  double d_tau = 0.01;
  std::size_t snapshot_stride = 1;
  std::size_t snapshot_xi_stride = 1;

  bool operator==(const PhysicalConfig&) const = default;
};

inline std::vector<ValidationIssue> check(const SimParams& p) {
  std::vector<ValidationIssue> issues;
  auto rate = [&](const char* name, double v) {
    if (!(v >= 0.0) || !std::isfinite(v))
      issues.push_back({name, "negative or non-finite rate"});
  };
  rate("gamma_b", p.gamma_b);
  rate("gamma_c", p.gamma_c);
  rate("gamma_ab", p.gamma_ab);
  rate("gamma_ca", p.gamma_ca);
  if (!(p.alpha_p >= 0.0) || !std::isfinite(p.alpha_p))
    issues.push_back({"alpha_p", "negative or non-finite coupling"});
  if (!(p.alpha_c >= 0.0) || !std::isfinite(p.alpha_c))
    issues.push_back({"alpha_c", "negative or non-finite coupling"});
  if (!(p.cell_length > 0.0) || !std::isfinite(p.cell_length))
    issues.push_back({"cell_length", "non-positive length"});
  if (p.n_xi < 2) issues.push_back({"n_xi", "grid too coarse"});
  if (p.n_tau < 1) issues.push_back({"n_tau", "no time steps"});
  if (!(p.d_tau > 0.0) || !std::isfinite(p.d_tau))
    issues.push_back({"d_tau", "non-positive step"});
  if (p.snapshot_stride < 1)
    issues.push_back({"snapshot_stride", "must be at least 1"});
  if (p.snapshot_xi_stride < 1)
    issues.push_back({"snapshot_xi_stride", "must be at least 1"});
  return issues;
}

// Returns the parameters unchanged or throws ConfigError listing every
// violated invariant.
inline SimParams validate(const SimParams& p) {
  auto issues = check(p);
  if (!issues.empty()) throw ConfigError(std::move(issues));
  return p;
}

// Lindblad consistency of the rates: each coherence must decay at least at
// half the total population decay of the levels it joins. Rate sets that
// violate it can drive the density matrix out of the positive cone.
inline bool completely_positive(const SimParams& p) {
  const double half = 0.5 * (p.gamma_b + p.gamma_c);
  return p.gamma_ab >= half && p.gamma_ca >= half;
}

inline SimParams nondimensionalize(const PhysicalConfig& cfg) {
  std::vector<ValidationIssue> issues;
  if (!(cfg.gamma_abs > 0.0) || !std::isfinite(cfg.gamma_abs))
    issues.push_back({"gamma_abs", "non-positive decay rate"});
  if (!(cfg.cell_length_m > 0.0) || !std::isfinite(cfg.cell_length_m))
    issues.push_back({"cell_length_m", "non-positive length"});
  if (!issues.empty()) throw ConfigError(std::move(issues));

  const double unit_length_m = speed_of_light_si / cfg.gamma_abs;  // c / gamma
  SimParams p;
  p.cell_length = cfg.cell_length_m / unit_length_m;
  p.alpha_p = cfg.alpha_over_c_p * unit_length_m;
  p.alpha_c = cfg.alpha_over_c_c * unit_length_m;
  p.gamma_b = cfg.gamma_b;
  p.gamma_c = cfg.gamma_c;
  p.gamma_ab = cfg.gamma_ab;
  p.gamma_ca = cfg.gamma_ca;
  p.n_xi = cfg.n_xi;
  p.n_tau = cfg.n_tau;
  p.d_tau = cfg.d_tau;
  p.snapshot_stride = cfg.snapshot_stride;
  p.snapshot_xi_stride = cfg.snapshot_xi_stride;
  return p;
}

}  // namespace lambda_eit
