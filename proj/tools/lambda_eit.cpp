// Command-line front end: run, sweep, diagnose, presets.

#include <iostream>

#include "CLI11.hpp"
#include "lambda_eit/cli_io.hpp"

namespace le = lambda_eit;

namespace {

int report(const le::RunResult& r, const std::string& what) {
  if (r.exit_code != le::exit_ok) {
    std::cerr << what << " failed: " << r.message << '\n';
    return r.exit_code;
  }
  const auto& m = r.metrics;
  auto show = [&](const char* key) {
    if (m.contains(key)) std::cout << key << ": " << m[key].dump() << '\n';
  };
  std::cout << "status: " << m.value("status", "?") << '\n';
  show("time_reversal_score");
  show("phase_conjugation_score");
  show("amplification");
  show("regime");
  show("group_delay");
  return le::exit_ok;
}

le::RunConfig resolve(const std::string& config, const std::string& preset_name) {
  if (!config.empty()) return le::load_config(config);
  return le::parse_config("preset = " + preset_name + "\n");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lambda-system light storage and retrieval simulator"};
  app.require_subcommand(1);

  std::string config, preset_name, out, record;
  std::vector<std::string> figures;

  auto* run = app.add_subcommand("run", "simulate one configuration");
  auto* src = run->add_option("--config", config, "config file");
  run->add_option("--preset", preset_name, "named preset (instead of --config)")->excludes(src);
  run->add_option("--out", out, "output directory");
  run->add_option("--figures", figures, "figure data to emit, e.g. fig3 fig10");

  auto* sweep = app.add_subcommand("sweep", "run the cartesian product of the [sweep] axes");
  sweep->add_option("--config", config, "config file")->required();
  sweep->add_option("--out", out, "output directory");

  auto* diag = app.add_subcommand("diagnose", "recompute metrics of a run directory");
  diag->add_option("--record", record, "run directory")->required();
  diag->add_option("--figures", figures, "figure data to emit");

  auto* list = app.add_subcommand("presets", "list presets or print one as a config file");
  std::string show;
  list->add_option("--show", show, "preset to print");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      if (config.empty() && preset_name.empty()) {
        std::cerr << "run needs --config or --preset\n";
        return le::exit_config;
      }
      auto cfg = resolve(config, preset_name);
      for (const auto& f : figures) cfg.figures.push_back(f);
      if (out.empty()) out = cfg.output_dir.empty() ? "out" : cfg.output_dir;
      return report(le::run(cfg, out), "run");
    }
    if (*sweep) {
      const auto cfg = le::load_config(config);
      if (out.empty()) out = cfg.output_dir.empty() ? "sweep_out" : cfg.output_dir;
      const auto res = le::sweep(cfg, out);
      if (res.exit_code == le::exit_config) {
        std::cerr << "sweep needs at least one axis in [sweep]\n";
        return res.exit_code;
      }
      for (const auto& r : res.rows)
        std::cout << r.index << " alpha_ratio=" << r.alpha_ratio << " omega_r0=" << r.omega_r0
                  << " " << r.status << '\n';
      std::cout << "summary: " << (std::filesystem::path(out) / "summary.csv").string() << '\n';
      return res.exit_code;
    }
    if (*diag) {
      const auto r = le::diagnose(record);
      if (r.exit_code == le::exit_ok && !figures.empty()) {
        const auto rec = le::load_record(record);
        for (const auto& f : figures)
          for (const auto& p : le::emit_figure_data(rec, f, std::filesystem::path(record) / "figures"))
            std::cout << "wrote " << p.string() << '\n';
      }
      return report(r, "diagnose");
    }
    if (*list) {
      if (!show.empty()) {
        std::cout << le::write_config(le::parse_config("preset = " + show + "\n"));
        return le::exit_ok;
      }
      for (const auto& name : le::preset_names()) {
        const auto p = le::preset(name);
        std::cout << name << "  [" << p.metadata.at("run_class") << "]  "
                  << p.metadata.at("description") << '\n';
      }
      return le::exit_ok;
    }
  } catch (const le::ConfigError& e) {
    std::cerr << e.what() << '\n';
    return le::exit_config;
  } catch (const le::IoError& e) {
    std::cerr << e.what() << '\n';
    return le::exit_io;
  } catch (const le::DiagnosticError& e) {
    std::cerr << e.what() << '\n';
    return le::exit_config;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << e.what() << '\n';
    return le::exit_io;
  }
  return le::exit_ok;
}
