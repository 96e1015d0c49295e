#pragma once

// Configuration files, run and sweep orchestration, and the on-disk format
// of simulation records.
//
// Config files are flat `key = value` text with [section] headers. A
// `preset = NAME` line before the first section selects a named base; every
// other key overrides it. Without a preset the built-in defaults are used.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "diagnostics.hpp"
#include "model.hpp"
#include "presets.hpp"
#include "propagate.hpp"
#include "scenarios.hpp"
#include "soliton.hpp"

namespace lambda_eit {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

enum ExitCode : int { exit_ok = 0, exit_config = 2, exit_instability = 3, exit_io = 4 };

struct RunConfig {
  std::optional<std::string> preset;
  PhysicalConfig physical;
  PulseSpec spec;
  std::vector<double> sweep_alpha_ratio;
  std::vector<double> sweep_omega_r0;
  std::string output_dir;
  std::vector<std::string> figures;
  std::string source;  // text the config was loaded from; not compared

  SimParams params() const { return nondimensionalize(physical); }
  double horizon() const {
    return static_cast<double>(physical.n_tau - 1) * physical.d_tau;
  }

  bool operator==(const RunConfig& o) const {
    return preset == o.preset && physical == o.physical && spec == o.spec &&
           sweep_alpha_ratio == o.sweep_alpha_ratio &&
           sweep_omega_r0 == o.sweep_omega_r0 && output_dir == o.output_dir &&
           figures == o.figures;
  }
};

//----------------------------------------------------------------------------
// formatting

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string fmt_list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt_double(v[i]);
  return s;
}

// FNV-1a, 64 bit
inline std::string hash_text(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

//----------------------------------------------------------------------------
// parsing

namespace detail {

struct Entry {
  std::string section;
  std::string key;
  std::string value;
  int line = 0;
  int column = 0;  // 1-based column of the value
};

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::string where(int line, int column) {
  return "line " + std::to_string(line) + ", column " + std::to_string(column);
}

inline const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> k = {
      {"", {"preset"}},
      {"physical",
       {"gamma_abs", "cell_length_m", "alpha_over_c_p", "alpha_over_c_c", "alpha_ratio",
        "gamma_b", "gamma_c", "gamma_ab", "gamma_ca"}},
      {"pulse",
       {"omega_p0", "omega_c0", "omega_r0", "t_off", "t_on", "t_switch", "signal_phase",
        "envelope", "centers", "widths", "heights", "samples", "sample_t0", "sample_dt",
        "phase_mode"}},
      {"grid", {"n_xi", "n_tau", "d_tau", "horizon", "snapshot_stride", "snapshot_xi_stride"}},
      {"sweep", {"alpha_ratio", "omega_r0"}},
      {"output", {"dir", "figures"}},
  };
  return k;
}

inline std::vector<Entry> tokenize(const std::string& text) {
  std::vector<Entry> entries;
  std::set<std::string> seen;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string body = raw;
    if (const auto c = body.find_first_of("#;"); c != std::string::npos) body.resize(c);
    const std::string t = trim(body);
    if (t.empty()) continue;
    const int indent = static_cast<int>(body.find_first_not_of(" \t")) + 1;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw ConfigError("parse error at " + where(line, indent) + ": unterminated section header");
      section = trim(t.substr(1, t.size() - 2));
      if (!known_keys().contains(section) || section.empty())
        throw ConfigError("parse error at " + where(line, indent) + ": unknown section [" +
                          section + "]");
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw ConfigError("parse error at " + where(line, indent) + ": expected key = value");
    Entry e;
    e.section = section;
    e.key = trim(body.substr(0, eq));
    e.value = trim(body.substr(eq + 1));
    e.line = line;
    const auto vpos = body.find_first_not_of(" \t", eq + 1);
    e.column = static_cast<int>(vpos == std::string::npos ? eq + 2 : vpos + 1);
    const auto& keys = known_keys().at(section);
    if (!keys.contains(e.key))
      throw ConfigError("parse error at " + where(line, indent) + ": unknown key '" + e.key +
                        "'" + (section.empty() ? "" : " in [" + section + "]"));
    const std::string id = section + "." + e.key;
    if (!seen.insert(id).second)
      throw ConfigError("parse error at " + where(line, indent) + ": duplicate key '" + e.key + "'");
    entries.push_back(std::move(e));
  }
  return entries;
}

inline double to_double(const Entry& e, const std::string& s) {
  char* end = nullptr;
  const std::string t = trim(s);
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size())
    throw ConfigError("parse error at " + where(e.line, e.column) + ": '" + t +
                      "' is not a number");
  return v;
}

inline double to_double(const Entry& e) { return to_double(e, e.value); }

inline std::size_t to_count(const Entry& e) {
  const double v = to_double(e);
  if (!(v >= 0.0) || v != std::floor(v) || v > 1e15)
    throw ConfigError("parse error at " + where(e.line, e.column) + ": '" + e.value +
                      "' is not a non-negative integer");
  return static_cast<std::size_t>(v);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline std::vector<double> to_list(const Entry& e) {
  std::vector<double> out;
  for (const auto& item : split_list(e.value)) out.push_back(to_double(e, item));
  return out;
}

// Re-derive the time grid after the horizon or step changed.
inline std::size_t steps_for(double horizon, double d_tau) {
  return static_cast<std::size_t>(std::ceil(horizon / d_tau - 1e-9)) + 1;
}

}  // namespace detail

inline constexpr double default_horizon = 400.0;

inline RunConfig parse_config(const std::string& text) {
  using detail::Entry;
  const auto entries = detail::tokenize(text);
  std::map<std::string, const Entry*> by;
  for (const auto& e : entries) by[e.section + "." + e.key] = &e;
  auto get = [&](const std::string& id) -> const Entry* {
    const auto it = by.find(id);
    return it == by.end() ? nullptr : it->second;
  };

  RunConfig cfg;
  cfg.source = text;
  double horizon = default_horizon;
  if (const Entry* e = get(".preset")) {
    Preset p = preset(e->value);  // ConfigError on unknown names
    cfg.preset = e->value;
    cfg.physical = p.physical;
    cfg.spec = p.spec;
    horizon = static_cast<double>(p.physical.n_tau - 1) * p.physical.d_tau;
  }

  bool refit = !cfg.preset.has_value();
  auto num = [&](const char* id, double& target) {
    if (const Entry* e = get(id)) {
      target = detail::to_double(*e);
      refit = true;
    }
  };

  auto& ph = cfg.physical;
  num("physical.gamma_abs", ph.gamma_abs);
  num("physical.cell_length_m", ph.cell_length_m);
  num("physical.alpha_over_c_p", ph.alpha_over_c_p);
  num("physical.alpha_over_c_c", ph.alpha_over_c_c);
  num("physical.gamma_b", ph.gamma_b);
  num("physical.gamma_ab", ph.gamma_ab);
  if (const Entry* e = get("physical.alpha_ratio")) {
    // ratio alpha_c / alpha_p with the decay convention gamma_c = gamma_ca = ratio
    const double r = detail::to_double(*e);
    ph.alpha_over_c_c = r * ph.alpha_over_c_p;
    ph.gamma_c = r;
    ph.gamma_ca = r;
    refit = true;
  }
  num("physical.gamma_c", ph.gamma_c);
  num("physical.gamma_ca", ph.gamma_ca);

  auto& sp = cfg.spec;
  num("pulse.omega_p0", sp.omega_p0);
  num("pulse.omega_c0", sp.omega_c0);
  num("pulse.omega_r0", sp.omega_r0);
  num("pulse.t_off", sp.t_off);
  num("pulse.t_on", sp.t_on);
  num("pulse.t_switch", sp.t_switch);
  num("pulse.signal_phase", sp.signal_phase);

  const Entry* kind = get("pulse.envelope");
  if (kind || get("pulse.centers") || get("pulse.widths") || get("pulse.heights") ||
      get("pulse.samples") || get("pulse.sample_t0") || get("pulse.sample_dt")) {
    refit = true;
    EnvelopeKind k = sp.envelope.kind;
    if (kind) {
      if (kind->value == "single") k = EnvelopeKind::single_gaussian;
      else if (kind->value == "double") k = EnvelopeKind::double_gaussian;
      else if (kind->value == "custom") k = EnvelopeKind::custom;
      else
        throw ConfigError("parse error at " + detail::where(kind->line, kind->column) +
                          ": envelope must be single, double or custom");
    }
    const PhaseMode mode = sp.envelope.phase_mode;
    auto list = [&](const char* id, std::vector<double> fallback) {
      const Entry* e = get(id);
      return e ? detail::to_list(*e) : fallback;
    };
    std::vector<ValidationIssue> issues;
    if (k == EnvelopeKind::custom) {
      const auto samples = list("pulse.samples", sp.envelope.samples);
      double t0 = sp.envelope.sample_t0, dt = sp.envelope.sample_dt;
      num("pulse.sample_t0", t0);
      num("pulse.sample_dt", dt);
      if (samples.empty()) throw ConfigError(std::vector<ValidationIssue>{{"samples", "custom envelope needs samples"}});
      sp.envelope = Envelope::custom(t0, dt, samples);
    } else {
      const auto c = list("pulse.centers", sp.envelope.centers);
      const auto w = list("pulse.widths", sp.envelope.widths);
      auto h = list("pulse.heights", sp.envelope.heights);
      const std::size_t need = k == EnvelopeKind::single_gaussian ? 1 : 2;
      if (h.size() < need) h.resize(need, 1.0);
      if (c.size() != need || w.size() != need)
        throw ConfigError(std::vector<ValidationIssue>{
            {"centers/widths", "envelope needs " + std::to_string(need) + " center(s) and width(s)"}});
      for (double x : w)
        if (!(x > 0.0)) throw ConfigError(std::vector<ValidationIssue>{{"widths", "non-positive width"}});
      sp.envelope = need == 1 ? Envelope::single_gaussian(c[0], w[0])
                              : Envelope::double_gaussian(c[0], w[0], h[0], c[1], w[1], h[1]);
    }
    sp.envelope.phase_mode = mode;
  }
  if (const Entry* e = get("pulse.phase_mode")) {
    if (e->value == "none") sp.envelope.phase_mode = PhaseMode::none;
    else if (e->value == "envelope") sp.envelope.phase_mode = PhaseMode::phase_equals_envelope;
    else
      throw ConfigError("parse error at " + detail::where(e->line, e->column) +
                        ": phase_mode must be none or envelope");
  }

  // grid
  if (const Entry* e = get("grid.horizon")) horizon = detail::to_double(*e);
  if (refit) {
    if (!(ph.gamma_abs > 0.0) || !(ph.cell_length_m > 0.0)) {
      nondimensionalize(ph);  // throws with the offending keys
    }
    fit_grid(ph, sp, horizon);
    ph.n_xi = std::max<std::size_t>(ph.n_xi, 2);
  } else if (get("grid.horizon")) {
    ph.n_tau = detail::steps_for(horizon, ph.d_tau);
  }
  if (const Entry* e = get("grid.d_tau")) {
    ph.d_tau = detail::to_double(*e);
    if (ph.d_tau > 0.0) ph.n_tau = detail::steps_for(horizon, ph.d_tau);
  }
  if (const Entry* e = get("grid.n_xi")) ph.n_xi = detail::to_count(*e);
  if (const Entry* e = get("grid.n_tau")) ph.n_tau = detail::to_count(*e);
  if (const Entry* e = get("grid.snapshot_stride")) ph.snapshot_stride = detail::to_count(*e);
  if (const Entry* e = get("grid.snapshot_xi_stride")) ph.snapshot_xi_stride = detail::to_count(*e);

  if (const Entry* e = get("sweep.alpha_ratio")) cfg.sweep_alpha_ratio = detail::to_list(*e);
  if (const Entry* e = get("sweep.omega_r0")) cfg.sweep_omega_r0 = detail::to_list(*e);
  if (const Entry* e = get("output.dir")) cfg.output_dir = e->value;
  if (const Entry* e = get("output.figures")) cfg.figures = detail::split_list(e->value);

  // validation of the resolved configuration
  std::vector<ValidationIssue> issues = check(sp);
  SimParams p;
  try {
    p = nondimensionalize(ph);
    for (auto& i : check(p)) issues.push_back(i);
  } catch (const ConfigError& err) {
    for (const auto& i : err.issues()) issues.push_back(i);
  }
  if (!issues.empty()) throw ConfigError(std::move(issues));
  return cfg;
}

inline RunConfig load_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

// Canonical text of a configuration; parse_config(write_config(c)) == c.
inline std::string write_config(const RunConfig& c) {
  std::ostringstream o;
  if (c.preset) o << "preset = " << *c.preset << "\n\n";
  const auto& ph = c.physical;
  o << "[physical]\n"
    << "gamma_abs = " << fmt_double(ph.gamma_abs) << "\n"
    << "cell_length_m = " << fmt_double(ph.cell_length_m) << "\n"
    << "alpha_over_c_p = " << fmt_double(ph.alpha_over_c_p) << "\n"
    << "alpha_over_c_c = " << fmt_double(ph.alpha_over_c_c) << "\n"
    << "gamma_b = " << fmt_double(ph.gamma_b) << "\n"
    << "gamma_c = " << fmt_double(ph.gamma_c) << "\n"
    << "gamma_ab = " << fmt_double(ph.gamma_ab) << "\n"
    << "gamma_ca = " << fmt_double(ph.gamma_ca) << "\n\n";
  const auto& s = c.spec;
  o << "[pulse]\n"
    << "omega_p0 = " << fmt_double(s.omega_p0) << "\n"
    << "omega_c0 = " << fmt_double(s.omega_c0) << "\n"
    << "omega_r0 = " << fmt_double(s.omega_r0) << "\n"
    << "t_off = " << fmt_double(s.t_off) << "\n"
    << "t_on = " << fmt_double(s.t_on) << "\n"
    << "t_switch = " << fmt_double(s.t_switch) << "\n"
    << "signal_phase = " << fmt_double(s.signal_phase) << "\n";
  switch (s.envelope.kind) {
    case EnvelopeKind::single_gaussian:
      o << "envelope = single\n";
      break;
    case EnvelopeKind::double_gaussian:
      o << "envelope = double\n";
      break;
    case EnvelopeKind::custom:
      o << "envelope = custom\n";
      break;
  }
  if (s.envelope.kind == EnvelopeKind::custom) {
    o << "samples = " << fmt_list(s.envelope.samples) << "\n"
      << "sample_t0 = " << fmt_double(s.envelope.sample_t0) << "\n"
      << "sample_dt = " << fmt_double(s.envelope.sample_dt) << "\n";
  } else {
    o << "centers = " << fmt_list(s.envelope.centers) << "\n"
      << "widths = " << fmt_list(s.envelope.widths) << "\n"
      << "heights = " << fmt_list(s.envelope.heights) << "\n";
  }
  o << "phase_mode = "
    << (s.envelope.phase_mode == PhaseMode::none ? "none" : "envelope") << "\n\n";
  o << "[grid]\n"
    << "n_xi = " << ph.n_xi << "\n"
    << "n_tau = " << ph.n_tau << "\n"
    << "d_tau = " << fmt_double(ph.d_tau) << "\n"
    << "snapshot_stride = " << ph.snapshot_stride << "\n"
    << "snapshot_xi_stride = " << ph.snapshot_xi_stride << "\n";
  if (!c.sweep_alpha_ratio.empty() || !c.sweep_omega_r0.empty()) {
    o << "\n[sweep]\n";
    if (!c.sweep_alpha_ratio.empty())
      o << "alpha_ratio = " << fmt_list(c.sweep_alpha_ratio) << "\n";
    if (!c.sweep_omega_r0.empty()) o << "omega_r0 = " << fmt_list(c.sweep_omega_r0) << "\n";
  }
  if (!c.output_dir.empty() || !c.figures.empty()) {
    o << "\n[output]\n";
    if (!c.output_dir.empty()) o << "dir = " << c.output_dir << "\n";
    if (!c.figures.empty()) {
      o << "figures = ";
      for (std::size_t i = 0; i < c.figures.size(); ++i) o << (i ? ", " : "") << c.figures[i];
      o << "\n";
    }
  }
  return o.str();
}

//----------------------------------------------------------------------------
// record files

namespace detail {

inline std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + p.string());
  return out;
}

inline void write_row(std::ostream& o, std::initializer_list<double> values) {
  bool first = true;
  for (double v : values) {
    if (!first) o << ',';
    o << fmt_double(v);
    first = false;
  }
  o << '\n';
}

inline void write_series(const fs::path& p, const std::vector<double>& tau,
                         const std::vector<FieldPair>& series, std::size_t count) {
  auto out = open_out(p);
  out << "tau,re_omega_p,im_omega_p,re_omega_c,im_omega_c\n";
  for (std::size_t k = 0; k < count; ++k) {
    const auto& f = series[k];
    write_row(out, {tau[k], f.omega_p.real(), f.omega_p.imag(), f.omega_c.real(),
                    f.omega_c.imag()});
  }
  if (!out) throw IoError("write failed: " + p.string());
}

}  // namespace detail

inline constexpr const char* snapshot_header =
    "tau,xi,re_omega_p,im_omega_p,re_omega_c,im_omega_c,"
    "re_rho_bb,im_rho_bb,re_rho_cc,im_rho_cc,re_rho_aa,im_rho_aa,"
    "re_rho_ab,im_rho_ab,re_rho_cb,im_rho_cb,re_rho_ca,im_rho_ca";

inline void write_snapshots(const fs::path& p, const std::vector<GridSlice>& snaps,
                            std::size_t cells) {
  auto out = detail::open_out(p);
  out << snapshot_header << '\n';
  for (const auto& s : snaps) {
    for (std::size_t i = 0; i < std::min(cells, s.xi.size()); ++i) {
      const auto& f = s.fields[i];
      const auto& a = s.atoms[i];
      detail::write_row(out, {s.tau, s.xi[i], f.omega_p.real(), f.omega_p.imag(),
                              f.omega_c.real(), f.omega_c.imag(), a.rho_bb, 0.0, a.rho_cc,
                              0.0, a.rho_aa, 0.0, a.rho_ab.real(), a.rho_ab.imag(),
                              a.rho_cb.real(), a.rho_cb.imag(), a.rho_ca.real(),
                              a.rho_ca.imag()});
    }
  }
  if (!out) throw IoError("write failed: " + p.string());
}

namespace detail {

inline std::vector<std::vector<double>> read_csv(const fs::path& p, std::size_t columns) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open " + p.string());
  std::string line;
  std::getline(in, line);  // header
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    row.reserve(columns);
    const char* c = line.c_str();
    while (*c) {
      char* end = nullptr;
      row.push_back(std::strtod(c, &end));
      if (end == c) throw IoError("malformed number in " + p.string());
      c = *end == ',' ? end + 1 : end;
    }
    if (row.size() != columns) throw IoError("wrong column count in " + p.string());
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace detail

// Rebuilds a record from a run directory (config_echo.ini plus the CSVs).
inline SimulationRecord load_record(const fs::path& dir) {
  const RunConfig cfg = load_config(dir / "config_echo.ini");
  SimulationRecord rec;
  rec.params = cfg.params();
  rec.spec = cfg.spec;
  const auto b = detail::read_csv(dir / "boundary.csv", 5);
  const auto e = detail::read_csv(dir / "exit.csv", 5);
  if (b.size() != e.size()) throw IoError("boundary and exit series differ in length");
  for (std::size_t k = 0; k < b.size(); ++k) {
    rec.tau.push_back(b[k][0]);
    rec.boundary_series.push_back({{b[k][1], b[k][2]}, {b[k][3], b[k][4]}});
    rec.exit_series.push_back({{e[k][1], e[k][2]}, {e[k][3], e[k][4]}});
  }
  if (fs::exists(dir / "snapshots.csv")) {
    for (const auto& r : detail::read_csv(dir / "snapshots.csv", 18)) {
      if (rec.snapshots.empty() || rec.snapshots.back().tau != r[0]) {
        rec.snapshots.emplace_back();
        rec.snapshots.back().tau = r[0];
      }
      auto& s = rec.snapshots.back();
      s.xi.push_back(r[1]);
      s.fields.push_back({{r[2], r[3]}, {r[4], r[5]}});
      AtomicState a;
      a.rho_bb = r[6];
      a.rho_cc = r[8];
      a.rho_aa = r[10];
      a.rho_ab = {r[12], r[13]};
      a.rho_cb = {r[14], r[15]};
      a.rho_ca = {r[16], r[17]};
      s.atoms.push_back(a);
    }
  }
  rec.provenance["code_version"] = code_version;
  return rec;
}

//----------------------------------------------------------------------------
// metrics

namespace detail {

inline ordered_json metrics_json(const PulseMetrics& m) {
  ordered_json j;
  j["peak_amp"] = m.peak_amp;
  j["peak_time"] = m.peak_time;
  j["fwhm"] = m.fwhm ? ordered_json(*m.fwhm) : ordered_json(nullptr);
  j["centroid"] = m.centroid;
  j["energy"] = m.energy;
  ordered_json maxima = ordered_json::array();
  for (const auto& x : m.local_maxima) maxima.push_back({{"time", x.time}, {"amp", x.amp}});
  j["local_maxima"] = maxima;
  j["phase_excursion"] = m.phase_excursion;
  return j;
}

template <class F>
void guarded(ordered_json& j, const char* key, F&& f) {
  try {
    j[key] = f();
  } catch (const std::exception& e) {
    j[key] = {{"error", e.what()}};
  }
}

}  // namespace detail

// The writing beam stays on for the whole run: a slow-light measurement.
inline bool constant_control(const SimulationRecord& rec) {
  const double end = rec.tau.empty() ? 0.0 : rec.tau.back();
  return rec.spec.t_off - 3.0 * rec.spec.t_switch > end;
}

inline ordered_json analyze(const SimulationRecord& rec) {
  ordered_json j;
  j["status"] = "ok";
  j["notes"] =
      "time_reversal_score and phase_conjugation_score are correlation constructs, "
      "not retrieval fidelities";
  const auto w = retrieval_windows(rec);
  j["windows"] = {{"input_begin", w.input_begin},
                  {"input_end", w.input_end},
                  {"output_begin", w.output_begin},
                  {"output_end", w.output_end},
                  {"front_reached_exit", w.front_reached_exit}};

  if (constant_control(rec)) {
    detail::guarded(j, "group_delay", [&] {
      const auto g = group_delay_check(rec);
      return ordered_json{{"measured_vg", g.measured_vg},
                          {"predicted_vg", g.predicted_vg},
                          {"relative_error", g.relative_error},
                          {"delay", g.delay},
                          {"transmission", g.transmission},
                          {"warnings", g.warnings}};
    });
    return j;
  }

  const auto in = input_signal(rec);
  const auto out = retrieved_pulse(rec);
  detail::guarded(j, "input", [&] { return detail::metrics_json(pulse_metrics(in)); });
  detail::guarded(j, "retrieved", [&] { return detail::metrics_json(pulse_metrics(out)); });
  try {
    const auto tr = time_reversal_score(in, out);
    j["time_reversal_score"] = tr.score;
    j["time_reversal_alignment"] = {{"dilation", tr.dilation}, {"shift", tr.shift}};
    j["phase_conjugation_score"] = phase_conjugation_score(in, out, tr);
  } catch (const std::exception& e) {
    j["time_reversal_score"] = {{"error", e.what()}};
    j["phase_conjugation_score"] = {{"error", e.what()}};
  }
  detail::guarded(j, "amplification", [&] {
    const auto a = amplification_and_count(in, out);
    return ordered_json{{"peak_ratio", a.peak_ratio}, {"energy_ratio", a.energy_ratio}};
  });
  detail::guarded(j, "regime", [&] {
    const auto tail = regime_tail(rec);
    const auto r = classify_regime(tail);
    return ordered_json{{"kind", to_string(r.kind)},
                        {"slope", r.slope},
                        {"threshold", regime_threshold},
                        {"tail_begin", tail.t0},
                        {"tail_end", tail.t_end()}};
  });
  detail::guarded(j, "soliton", [&] {
    const auto sw = late_window(rec);
    const auto sp = estimate_speed(rec, sw.first, sw.last);
    const auto prof = profile_from_snapshot(rec.snapshots[sw.last], sp.v, rec.params.alpha_p,
                                            rec.params.gamma_ab);
    ordered_json s;
    s["window_tau"] = {rec.snapshots[sw.first].tau, rec.snapshots[sw.last].tau};
    s["speed"] = sp.v;
    s["speed_uncertainty"] = sp.uncertainty;
    s["shape_correlation"] = sp.shape_correlation;
    s["equal_coupling"] = equal_coupling(rec.params);
    detail::guarded(s, "coherence_relation_residual", [&] {
      const auto r = coherence_relation_residual(prof);
      return ordered_json{{"value", r.value}, {"degenerate", r.degenerate}};
    });
    detail::guarded(s, "limit_sum_rule", [&] {
      const auto r = limit_sum_rule(prof);
      return ordered_json{{"value", r.value}, {"degenerate", r.degenerate}};
    });
    detail::guarded(s, "ode_residual", [&] {
      const auto a = soliton_ode_residual(prof);
      const auto b = soliton_ode_residual(prof, {OdeReading::omega_c, true});
      return ordered_json{{"first", a.first},
                          {"second", a.second},
                          {"second_reading_omega_c", b.second}};
    });
    return s;
  });
  return j;
}

//----------------------------------------------------------------------------
// figure data

struct FigureOptions {
  std::vector<double> times;  // fig10 snapshot times; empty = late window
  double probe_position = 0.6;  // fig6 |rho_cb| trace, fraction of the cell
};

inline const std::vector<std::string>& figure_ids() {
  static const std::vector<std::string> ids = {"fig2", "fig3", "fig6", "fig7",
                                               "fig8", "fig9", "fig10"};
  return ids;
}

namespace detail {

inline std::size_t nearest_snapshot(const SimulationRecord& rec, double t) {
  if (rec.snapshots.empty()) throw DiagnosticError("record has no snapshots");
  std::size_t best = 0;
  for (std::size_t i = 1; i < rec.snapshots.size(); ++i)
    if (std::abs(rec.snapshots[i].tau - t) < std::abs(rec.snapshots[best].tau - t)) best = i;
  const double spacing = rec.snapshots.size() > 1
                             ? rec.snapshots[1].tau - rec.snapshots[0].tau
                             : rec.params.d_tau;
  if (std::abs(rec.snapshots[best].tau - t) > 0.5 * spacing + 1e-9)
    throw DiagnosticError("no snapshot near tau = " + fmt_double(t));
  return best;
}

inline void profile_csv(const fs::path& p, const GridSlice& s) {
  auto out = open_out(p);
  out << "xi,amp_p,amp_c,amp_rho_cb_x5\n";
  for (std::size_t i = 0; i < s.xi.size(); ++i)
    write_row(out, {s.xi[i], std::abs(s.fields[i].omega_p), std::abs(s.fields[i].omega_c),
                    5.0 * std::abs(s.atoms[i].rho_cb)});
}

}  // namespace detail

// Writes the CSV panels of one figure analog; returns the files written.
inline std::vector<fs::path> emit_figure_data(const SimulationRecord& rec,
                                              const std::string& id, const fs::path& dir,
                                              const FigureOptions& opt = {}) {
  std::vector<fs::path> files;
  fs::create_directories(dir);
  const auto n = rec.tau.size();
  if (id == "fig2") {
    const auto p = dir / "fig2.csv";
    auto out = detail::open_out(p);
    out << "tau,amp_p,amp_c\n";
    for (std::size_t k = 0; k < n; ++k)
      detail::write_row(out, {rec.tau[k], std::abs(rec.boundary_series[k].omega_p),
                              std::abs(rec.boundary_series[k].omega_c)});
    files.push_back(p);
  } else if (id == "fig3" || id == "fig7" || id == "fig8" || id == "fig9") {
    const auto pa = dir / (id + "_amplitude.csv");
    const auto pp = dir / (id + "_phase.csv");
    auto oa = detail::open_out(pa);
    auto op = detail::open_out(pp);
    oa << "tau,amp_input,amp_retrieved\n";
    op << "tau,phase_input,phase_retrieved\n";
    for (std::size_t k = 0; k < n; ++k) {
      const complex in = rec.boundary_series[k].omega_p;
      const complex out = rec.exit_series[k].omega_c;
      detail::write_row(oa, {rec.tau[k], std::abs(in), std::abs(out)});
      detail::write_row(op, {rec.tau[k], std::arg(in), std::arg(out)});
    }
    files.push_back(pa);
    files.push_back(pp);
  } else if (id == "fig6") {
    const auto w = retrieval_windows(rec);
    const double t_mid = rec.spec.t_on + 0.5 * (w.output_end - rec.spec.t_on);
    const auto& s = rec.snapshots.at(detail::nearest_snapshot(rec, t_mid));
    const auto pa = dir / "fig6_populations.csv";
    auto oa = detail::open_out(pa);
    oa << "xi,rho_cc,rho_aa\n";
    for (std::size_t i = 0; i < s.xi.size(); ++i)
      detail::write_row(oa, {s.xi[i], s.atoms[i].rho_cc, s.atoms[i].rho_aa});
    const auto pb = dir / "fig6_rho_cb.csv";
    auto ob = detail::open_out(pb);
    ob << "tau,amp_rho_cb\n";
    const double target = opt.probe_position * rec.params.cell_length;
    std::size_t cell = 0;
    for (std::size_t i = 1; i < s.xi.size(); ++i)
      if (std::abs(s.xi[i] - target) < std::abs(s.xi[cell] - target)) cell = i;
    for (const auto& snap : rec.snapshots)
      detail::write_row(ob, {snap.tau, std::abs(snap.atoms[cell].rho_cb)});
    files.push_back(pa);
    files.push_back(pb);
  } else if (id == "fig10") {
    std::vector<std::size_t> picks;
    if (opt.times.empty()) {
      const auto sw = late_window(rec);
      picks = {sw.first, (sw.first + sw.last) / 2, sw.last};
    } else {
      for (double t : opt.times) picks.push_back(detail::nearest_snapshot(rec, t));
    }
    const char* panel[] = {"a", "b", "c", "d", "e", "f"};
    for (std::size_t i = 0; i < picks.size() && i < 6; ++i) {
      const auto p = dir / ("fig10_" + std::string(panel[i]) + ".csv");
      detail::profile_csv(p, rec.snapshots[picks[i]]);
      files.push_back(p);
    }
  } else {
    throw ConfigError("unknown figure id '" + id + "'");
  }
  return files;
}

//----------------------------------------------------------------------------
// run and sweep

namespace detail {

inline void write_json(const fs::path& p, const ordered_json& j) {
  auto out = open_out(p);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + p.string());
}

inline ordered_json provenance_json(const RunConfig& cfg, const SimParams& p,
                                    const std::string& status, double wall) {
  return {{"code_version", code_version},
          {"config_hash", hash_text(write_config(cfg))},
          {"status", status},
          {"n_xi", p.n_xi},
          {"n_tau", p.n_tau},
          {"d_tau", p.d_tau},
          {"d_xi", p.d_xi()},
          {"cell_length", p.cell_length},
          {"optical_depth_p", p.optical_depth_p()},
          {"optical_depth_c", p.optical_depth_c()},
          {"wall_time_s", wall}};
}

}  // namespace detail

struct RunResult {
  int exit_code = exit_ok;
  std::string message;
  ordered_json metrics;
};

// Runs one configuration into `out` and writes the record files.
inline RunResult run(const RunConfig& cfg, const fs::path& out) {
  RunResult res;
  SimParams params;
  try {
    params = validate(cfg.params());
    validate(cfg.spec);
  } catch (const ConfigError& e) {
    return {exit_config, e.what(), {}};
  }
  try {
    fs::create_directories(out);
    {
      auto echo = detail::open_out(out / "config_echo.ini");
      echo << (cfg.source.empty() ? write_config(cfg) : cfg.source);
    }
    const auto t0 = std::chrono::steady_clock::now();
    SimulationRecord rec;
    std::string status = "ok";
    try {
      integrate_into(cfg.spec, params, rec);
    } catch (const InstabilityError& e) {
      status = "aborted";
      res = {exit_instability, e.what(), {}};
      res.metrics = {{"status", "aborted"}, {"error", e.what()}, {"xi", e.xi()}, {"tau", e.tau()}};
    }
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    detail::write_series(out / "boundary.csv", rec.tau, rec.boundary_series, rec.tau.size());
    if (status == "aborted") {
      auto marker = detail::open_out(out / "ABORTED");
      marker << res.message << '\n';
      detail::write_json(out / "metrics.json", res.metrics);
      detail::write_json(out / "provenance.json",
                         detail::provenance_json(cfg, params, status, wall));
      return res;
    }
    detail::write_series(out / "exit.csv", rec.tau, rec.exit_series, rec.tau.size());
    write_snapshots(out / "snapshots.csv", rec.snapshots, std::numeric_limits<std::size_t>::max());
    res.metrics = analyze(rec);
    detail::write_json(out / "metrics.json", res.metrics);
    for (const auto& id : cfg.figures) emit_figure_data(rec, id, out / "figures");
    detail::write_json(out / "provenance.json", detail::provenance_json(cfg, params, status, wall));
  } catch (const fs::filesystem_error& e) {
    return {exit_io, e.what(), {}};
  } catch (const IoError& e) {
    return {exit_io, e.what(), {}};
  } catch (const ConfigError& e) {
    return {exit_config, e.what(), {}};
  }
  return res;
}

// Recomputes metrics.json of a finished run directory.
inline RunResult diagnose(const fs::path& dir) {
  try {
    const auto rec = load_record(dir);
    RunResult res;
    res.metrics = analyze(rec);
    detail::write_json(dir / "metrics.json", res.metrics);
    return res;
  } catch (const ConfigError& e) {
    return {exit_config, e.what(), {}};
  } catch (const IoError& e) {
    return {exit_io, e.what(), {}};
  } catch (const fs::filesystem_error& e) {
    return {exit_io, e.what(), {}};
  }
}

struct SweepRow {
  std::size_t index = 0;
  double alpha_ratio = 0.0;
  double omega_r0 = 0.0;
  std::string status;
  ordered_json metrics;
};

struct SweepResult {
  int exit_code = exit_ok;
  std::vector<SweepRow> rows;
};

// Configuration of one sweep point. A new coupling ratio sets
// alpha_c = ratio * alpha_p and gamma_c = gamma_ca = ratio; the grid is
// rescaled to keep its resolution per optical depth and per Rabi period.
inline RunConfig sweep_point(const RunConfig& base, std::optional<double> ratio,
                             std::optional<double> omega_r0) {
  RunConfig c = base;
  c.source.clear();
  c.sweep_alpha_ratio.clear();
  c.sweep_omega_r0.clear();
  auto& ph = c.physical;
  const SimParams before = nondimensionalize(ph);
  const double depth0 = std::max(before.optical_depth_p(), before.optical_depth_c());
  const double drive0 = std::max({ph.gamma_ab, ph.gamma_ca, max_drive(c.spec)});
  const double horizon = base.horizon();
  const double snap_interval = static_cast<double>(ph.snapshot_stride) * ph.d_tau;
  if (ratio) {
    ph.alpha_over_c_c = *ratio * ph.alpha_over_c_p;
    ph.gamma_c = *ratio;
    ph.gamma_ca = *ratio;
  }
  if (omega_r0) c.spec.omega_r0 = *omega_r0;
  if (c == base) return c;

  const SimParams after = nondimensionalize(ph);
  const double depth1 = std::max(after.optical_depth_p(), after.optical_depth_c());
  const double drive1 = std::max({ph.gamma_ab, ph.gamma_ca, max_drive(c.spec)});
  if (depth0 > 0.0 && depth1 > depth0)
    ph.n_xi = static_cast<std::size_t>(
                  std::ceil(static_cast<double>(ph.n_xi - 1) * depth1 / depth0)) + 1;
  if (drive1 > drive0) {
    ph.d_tau = std::floor(1024.0 * ph.d_tau * drive0 / drive1) / 1024.0;
    ph.n_tau = detail::steps_for(horizon, ph.d_tau);
    ph.snapshot_stride =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(snap_interval / ph.d_tau)));
  }
  return c;
}

inline void write_summary(const fs::path& p, const std::vector<SweepRow>& rows) {
  auto out = detail::open_out(p);
  out << "index,alpha_ratio,omega_r0,status,regime,regime_slope,peak_ratio,energy_ratio,"
         "time_reversal_score,phase_conjugation_score,retrieved_peak_time,retrieved_fwhm\n";
  auto num = [](const ordered_json& j, std::initializer_list<const char*> path) -> std::string {
    const ordered_json* cur = &j;
    for (const char* k : path) {
      if (!cur->is_object() || !cur->contains(k)) return "";
      cur = &(*cur)[k];
    }
    if (cur->is_number()) return fmt_double(cur->get<double>());
    if (cur->is_string()) return cur->get<std::string>();
    return "";
  };
  for (const auto& r : rows) {
    out << r.index << ',' << fmt_double(r.alpha_ratio) << ',' << fmt_double(r.omega_r0) << ','
        << r.status << ',' << num(r.metrics, {"regime", "kind"}) << ','
        << num(r.metrics, {"regime", "slope"}) << ','
        << num(r.metrics, {"amplification", "peak_ratio"}) << ','
        << num(r.metrics, {"amplification", "energy_ratio"}) << ','
        << num(r.metrics, {"time_reversal_score"}) << ','
        << num(r.metrics, {"phase_conjugation_score"}) << ','
        << num(r.metrics, {"retrieved", "peak_time"}) << ','
        << num(r.metrics, {"retrieved", "fwhm"}) << '\n';
  }
}

// Runs the cartesian product of the sweep axes. Each point is written to
// point_NNN.partial and renamed once complete; failed points are recorded
// and the sweep continues.
inline SweepResult sweep(const RunConfig& cfg, const fs::path& out) {
  SweepResult res;
  if (cfg.sweep_alpha_ratio.empty() && cfg.sweep_omega_r0.empty()) {
    res.exit_code = exit_config;
    return res;
  }
  std::vector<std::optional<double>> ratios, drives;
  for (double r : cfg.sweep_alpha_ratio) ratios.push_back(r);
  for (double d : cfg.sweep_omega_r0) drives.push_back(d);
  if (ratios.empty()) ratios.push_back(std::nullopt);
  if (drives.empty()) drives.push_back(std::nullopt);

  std::vector<RunConfig> points;
  for (const auto& r : ratios) {
    for (const auto& d : drives) {
      SweepRow row;
      row.index = points.size();
      points.push_back(sweep_point(cfg, r, d));
      row.alpha_ratio = points.back().physical.alpha_over_c_c / points.back().physical.alpha_over_c_p;
      row.omega_r0 = points.back().spec.omega_r0;
      res.rows.push_back(row);
    }
  }

  try {
    fs::create_directories(out);
    {
      auto echo = detail::open_out(out / "config_echo.ini");
      echo << (cfg.source.empty() ? write_config(cfg) : cfg.source);
    }
  } catch (const std::exception& e) {
    res.exit_code = exit_io;
    return res;
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < points.size(); i = next++) {
      char name[32];
      std::snprintf(name, sizeof name, "point_%03zu", i);
      const fs::path final_dir = out / name;
      const fs::path tmp = out / (std::string(name) + ".partial");
      std::error_code ec;
      fs::remove_all(tmp, ec);
      fs::remove_all(final_dir, ec);
      const auto r = run(points[i], tmp);
      auto& row = res.rows[i];
      row.metrics = r.metrics;
      row.status = r.exit_code == exit_ok ? "ok"
                   : r.exit_code == exit_instability ? "aborted"
                   : r.exit_code == exit_config ? "config_error"
                                                : "io_error";
      fs::rename(tmp, final_dir, ec);
      if (ec) row.status = "io_error";
    }
  };
  const auto n = std::min<std::size_t>(static_cast<std::size_t>(thread_count()), points.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  try {
    write_summary(out / "summary.csv", res.rows);
  } catch (const std::exception&) {
    res.exit_code = exit_io;
  }
  return res;
}

}  // namespace lambda_eit
