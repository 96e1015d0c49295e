#pragma once

// Named configurations for the figure analogs. Every preset has a "_desk"
// twin with both couplings divided by `depth_factor` and, for the storage
// presets, the whole time program compressed by the same factor so the
// stored pulse still fits inside the shorter slow-light delay.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "model.hpp"
#include "propagate.hpp"
#include "scenarios.hpp"

namespace lambda_eit {

struct Preset {
  std::string name;
  PhysicalConfig physical;
  PulseSpec spec;
  SimParams params;
  double depth_factor = 1.0;  // couplings divided by this
  double time_factor = 1.0;   // time program divided by this
  bool long_run = false;
  std::map<std::string, std::string> metadata;
};

inline constexpr double fig3_alpha_p = 30177.0;  // gamma per meter
inline constexpr double fig3_alpha_c = 29272.0;
inline constexpr double fig9_alpha_c = 31082.0;

// Grid resolution used by all presets: 5 points per unit of optical depth
// (A dxi = 0.2, i.e. <= 0.1 for the largest coherence |rho_ab| = 1/2 a
// two-level transition allows) and d_tau below 0.1 / max drive.
inline constexpr double points_per_depth = 5.0;
inline constexpr double steps_per_rabi = 10.0;
inline constexpr std::size_t snapshot_cells = 1000;

namespace detail {

struct PresetBase {
  double alpha_p = fig3_alpha_p;
  double alpha_c = fig3_alpha_c;
  PulseSpec spec;
  double horizon = 700.0;
  double desk_factor = 2.0;
  bool scale_time = true;
  std::string description;
};

// Two-peak storage signal, taller peak first, fully inside the medium before
// the writing beam switches off.
inline Envelope storage_envelope() { return Envelope::double_gaussian(35.0, 7.0, 1.0, 62.0, 7.0, 0.6); }
inline Envelope regime_envelope() { return Envelope::single_gaussian(50.0, 9.0); }

inline std::map<std::string, PresetBase> preset_table() {
  std::map<std::string, PresetBase> t;

  PresetBase fig3;
  fig3.spec.envelope = storage_envelope();
  fig3.description = "storage and retrieval on the control channel, alpha_c < alpha_p";
  t["fig3"] = fig3;

  PresetBase fig7 = fig3;
  fig7.spec.omega_r0 = 2.0 * 2.6526;
  fig7.description = "fig3 with the retrieval beam doubled";
  t["fig7_double_drive"] = fig7;

  PresetBase fig8 = fig3;
  fig8.alpha_c = fig3_alpha_p;
  fig8.description = "equal couplings, traveling field-coherence structure";
  t["fig8_equal_alpha"] = fig8;

  PresetBase fig9 = fig3;
  fig9.alpha_c = fig9_alpha_c;
  fig9.horizon = 650.0;
  fig9.description = "alpha_c > alpha_p, growing retrieved field";
  t["fig9_alpha_c_larger"] = fig9;

  PresetBase gauss;
  gauss.spec.envelope = regime_envelope();
  gauss.horizon = 750.0;
  gauss.alpha_c = fig3_alpha_c;
  gauss.description = "single Gaussian input, alpha_c / alpha_p = 0.97";
  t["gauss_decay"] = gauss;
  gauss.alpha_c = fig3_alpha_p;
  gauss.description = "single Gaussian input, alpha_c / alpha_p = 1";
  t["gauss_plateau"] = gauss;
  gauss.alpha_c = fig9_alpha_c;
  gauss.horizon = 700.0;
  gauss.description = "single Gaussian input, alpha_c / alpha_p = 1.03";
  t["gauss_growth"] = gauss;

  // constant control, no storage: the probe crosses at the EIT group velocity
  PresetBase slow;
  slow.spec.envelope = regime_envelope();
  slow.spec.omega_r0 = 0.0;
  slow.spec.t_off = 1.0e4;
  slow.spec.t_on = 2.0e4;
  slow.horizon = 400.0;
  slow.desk_factor = 20.0;
  slow.scale_time = false;
  slow.description = "weak probe under a constant control field";
  t["slow_light_check"] = slow;
  return t;
}

inline PulseSpec compress_time(PulseSpec s, double k) {
  s.t_off /= k;
  s.t_on /= k;
  s.t_switch /= k;
  for (double& c : s.envelope.centers) c /= k;
  for (double& w : s.envelope.widths) w /= k;
  if (s.envelope.kind == EnvelopeKind::custom) {
    s.envelope.sample_t0 /= k;
    s.envelope.sample_dt /= k;
  }
  // renormalize on the final parameters so a parsed config reproduces it bit for bit
  auto& e = s.envelope;
  if (e.kind == EnvelopeKind::double_gaussian) {
    const PhaseMode mode = e.phase_mode;
    e = Envelope::double_gaussian(e.centers[0], e.widths[0], e.heights[0], e.centers[1],
                                  e.widths[1], e.heights[1]);
    e.phase_mode = mode;
  }
  return s;
}

}  // namespace detail

inline std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const auto& [name, base] : detail::preset_table()) {
    names.push_back(name);
    names.push_back(name + "_desk");
  }
  return names;
}

// Grid for a configuration: resolution rules above, horizon in 1/gamma.
inline void fit_grid(PhysicalConfig& cfg, const PulseSpec& spec, double horizon) {
  const SimParams p = nondimensionalize(cfg);
  const double depth = std::max(p.optical_depth_p(), p.optical_depth_c());
  cfg.n_xi = static_cast<std::size_t>(std::ceil(points_per_depth * depth)) + 1;
  const double rate = std::max({cfg.gamma_ab, cfg.gamma_ca, max_drive(spec)});
  // round the step down to a multiple of 1/1024 so tau samples are exact
  cfg.d_tau = std::floor(1024.0 / (steps_per_rabi * rate)) / 1024.0;
  cfg.n_tau = static_cast<std::size_t>(std::ceil(horizon / cfg.d_tau)) + 1;
  // snapshots every ~2 time units on at most ~1000 cells keep records small
  cfg.snapshot_stride = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(2.0 / cfg.d_tau)));
  cfg.snapshot_xi_stride = std::max<std::size_t>(1, (cfg.n_xi - 1) / snapshot_cells);
}

inline Preset preset(const std::string& name) {
  const auto table = detail::preset_table();
  const bool desk = name.size() > 5 && name.ends_with("_desk");
  const std::string base_name = desk ? name.substr(0, name.size() - 5) : name;
  const auto it = table.find(base_name);
  if (it == table.end()) throw ConfigError("unknown preset '" + name + "'");
  const auto& base = it->second;

  Preset p;
  p.name = name;
  p.depth_factor = desk ? base.desk_factor : 1.0;
  p.time_factor = desk && base.scale_time ? base.desk_factor : 1.0;
  p.long_run = !desk;
  p.spec = detail::compress_time(base.spec, p.time_factor);

  auto& cfg = p.physical;
  cfg.gamma_abs = 1.7e8;
  cfg.cell_length_m = 0.04;
  cfg.alpha_over_c_p = base.alpha_p / p.depth_factor;
  cfg.alpha_over_c_c = base.alpha_c / p.depth_factor;
  const double ratio = base.alpha_c / base.alpha_p;
  cfg.gamma_b = 1.0;
  cfg.gamma_ab = 1.0;
  cfg.gamma_c = ratio;
  cfg.gamma_ca = ratio;
  fit_grid(cfg, p.spec, base.horizon / p.time_factor);
  p.params = nondimensionalize(cfg);

  p.metadata["description"] = base.description;
  p.metadata["depth_factor"] = std::to_string(p.depth_factor);
  p.metadata["time_factor"] = std::to_string(p.time_factor);
  p.metadata["alpha_ratio"] = std::to_string(ratio);
  p.metadata["envelope"] =
      base.spec.envelope.kind == EnvelopeKind::double_gaussian
          ? "double Gaussian centers 35/62, sigma 7/7, heights 1/0.6 (before time compression)"
          : "single Gaussian center 50, sigma 9 (before time compression)";
  p.metadata["run_class"] = p.long_run ? "long" : "desk";
  return p;
}

}  // namespace lambda_eit
