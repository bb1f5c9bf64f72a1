#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ringqed/cavity.hpp"
#include "ringqed/common.hpp"
#include "ringqed/csv.hpp"
#include "ringqed/emitter.hpp"
#include "ringqed/fit.hpp"
#include "ringqed/pipeline.hpp"
#include "ringqed/rng.hpp"
#include "ringqed/spin.hpp"

namespace {

namespace rq = ringqed;
namespace fs = std::filesystem;

struct GlobalOpts {
  std::uint64_t seed = 1;
  std::string out_dir = ".";
  std::string format = "csv";
};

std::string out_path(const GlobalOpts& g, const std::string& name) {
  fs::create_directories(g.out_dir);
  return (fs::path(g.out_dir) / name).string();
}

void emit_table(const GlobalOpts& g, const std::string& name,
                const std::vector<std::string>& header,
                const std::vector<std::vector<double>>& columns) {
  if (g.format == "json") {
    nlohmann::json rows = nlohmann::json::array();
    const std::size_t n = columns.empty() ? 0 : columns.front().size();
    for (std::size_t i = 0; i < n; ++i) {
      nlohmann::json row;
      for (std::size_t j = 0; j < header.size(); ++j) row[header[j]] = columns[j][i];
      rows.push_back(std::move(row));
    }
    std::ofstream f(out_path(g, name + ".json"), std::ios::binary);
    f << rows.dump(2) << "\n";
    std::cout << "wrote " << out_path(g, name + ".json") << "\n";
  } else {
    rq::write_csv(out_path(g, name + ".csv"), header, columns);
    std::cout << "wrote " << out_path(g, name + ".csv") << "\n";
  }
}

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = lo + (hi - lo) * i / (n - 1);
  return v;
}

int run_fit(const GlobalOpts& g, const std::string& model_name, const std::string& csv_path,
            int n_peaks, std::string weights_kind) {
  rq::fit::Model model;
  if (model_name == "lorentzian") {
    model = rq::fit::lorentzian_model();
  } else if (model_name == "multi_lorentzian" || model_name == "multi-lorentzian") {
    model = rq::fit::multi_lorentzian_model(n_peaks);
  } else if (model_name == "exp_decay" || model_name == "exp-decay") {
    model = rq::fit::exp_decay_model();
    if (weights_kind.empty()) weights_kind = "poisson";
  } else if (model_name == "damped_cosine" || model_name == "damped-cosine") {
    model = rq::fit::damped_cosine_model();
  } else {
    throw rq::ValidationError("unknown model '" + model_name +
                              "' (lorentzian, multi_lorentzian, exp_decay, damped_cosine)");
  }
  if (weights_kind.empty()) weights_kind = "unit";

  const auto table = rq::read_csv(csv_path);
  if (table.columns.size() < 2) throw rq::ValidationError("fit expects a two-column CSV");
  const auto& x = table.columns[0];
  const auto& y = table.columns[1];
  std::vector<double> w;
  if (weights_kind == "poisson") w = rq::fit::poisson_weights(y);
  else if (weights_kind != "unit") throw rq::ValidationError("weights must be 'unit' or 'poisson'");

  const auto init = rq::fit::initial_guess(model, x, y);
  const auto result = rq::fit::fit(model, x, y, w, init);

  std::cout << result.to_json() << "\n";
  std::ofstream f(out_path(g, "fit_result.json"), std::ios::binary);
  f << result.to_json() << "\n";
  for (std::size_t j = 0; j < model.n_params(); ++j)
    std::cerr << model.param_names[j] << " = " << result.params[j] << " +/- " << result.sigmas[j]
              << "\n";
  return result.converged ? 0 : 2;
}

int compare_report(const std::string& report_path) {
  std::ifstream f(report_path);
  if (!f) throw rq::ValidationError("cannot open report: " + report_path);
  std::stringstream ss;
  ss << f.rdbuf();
  const auto report = rq::pipeline::Report::from_json(ss.str());
  bool all_pass = true;
  for (const auto& r : report.records) {
    const bool ok = std::abs(r.recovered - r.target) <= r.tolerance;
    all_pass = all_pass && ok;
    std::cout << (ok ? "PASS" : "FAIL") << "  " << r.name << ": recovered "
              << rq::format_double(r.recovered) << " vs target " << rq::format_double(r.target)
              << " (tolerance " << rq::format_double(r.tolerance) << ", source " << r.target_source
              << ")\n";
  }
  std::cout << (all_pass ? "all records pass" : "some records FAILED") << "\n";
  return all_pass ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ringqed: micro-ring cavity / PL4 spin-ensemble simulator and analysis toolkit"};
  app.require_subcommand(1);

  GlobalOpts g;
  bool seed_given = false;
  app.add_option("--seed", g.seed, "Random seed for the generators")
      ->each([&](const std::string&) { seed_given = true; });
  app.add_option("--out-dir", g.out_dir, "Output directory (default: current)");
  app.add_option("--format", g.format, "Output format for generated tables")
      ->check(CLI::IsMember({"csv", "json"}));

  // simulate-spectrum ---------------------------------------------------------
  auto* spec_cmd = app.add_subcommand("simulate-spectrum", "Synthetic grating PL spectrum of one ring");
  double diameter = 8.1, n_eff = 2.30, n_g = 2.99576, q = 1261;
  double band_min = 1050, band_max = 1150, mode_amp = 2.0, zpl_nm = 1078.6, zpl_amp = 0.35;
  double zpl_w = 0.5, baseline = 0.05, noise = 0.04;
  int points = 2000;
  spec_cmd->add_option("--diameter-um", diameter, "Ring diameter (um)");
  spec_cmd->add_option("--n-eff", n_eff, "Effective index at 1100 nm");
  spec_cmd->add_option("--n-g", n_g, "Group index");
  spec_cmd->add_option("--q", q, "Quality factor of every mode");
  spec_cmd->add_option("--band-min", band_min, "Band minimum (nm)");
  spec_cmd->add_option("--band-max", band_max, "Band maximum (nm)");
  spec_cmd->add_option("--points", points, "Grid points");
  spec_cmd->add_option("--mode-amplitude", mode_amp, "Cavity-mode peak amplitude");
  spec_cmd->add_option("--zpl-nm", zpl_nm, "ZPL wavelength (0 disables the line)");
  spec_cmd->add_option("--zpl-amplitude", zpl_amp, "ZPL peak amplitude");
  spec_cmd->add_option("--zpl-linewidth", zpl_w, "ZPL FWHM (nm)");
  spec_cmd->add_option("--baseline", baseline, "Flat baseline");
  spec_cmd->add_option("--noise", noise, "Gaussian noise sigma");

  // tune-map ------------------------------------------------------------------
  auto* tune_cmd = app.add_subcommand("tune-map", "Gas-condensation tuning intensity map");
  std::string tune_config;
  tune_cmd->add_option("config", tune_config, "Scenario config JSON")->required();

  // decay ---------------------------------------------------------------------
  auto* decay_cmd = app.add_subcommand("decay", "Synthetic time-resolved decay trace");
  double tau_off = 15.85, xi = 0.031, tau0 = 14.94, purcell_f = 0.0, rep = 100.0, bg = 0.01;
  std::uint64_t counts = 1000000;
  int bins = 512;
  decay_cmd->add_option("--tau-off", tau_off, "Off-resonance lifetime (ns)");
  decay_cmd->add_option("--xi", xi, "ZPL branching ratio (DWF)");
  decay_cmd->add_option("--tau0", tau0, "Unpatterned-film lifetime (ns)");
  decay_cmd->add_option("--f", purcell_f, "Purcell factor applied to the ZPL channel");
  decay_cmd->add_option("--counts", counts, "Total photon counts");
  decay_cmd->add_option("--bins", bins, "Histogram bins");
  decay_cmd->add_option("--rep-period", rep, "Laser repetition period (ns)");
  decay_cmd->add_option("--background", bg, "Flat background fraction");

  // odmr ----------------------------------------------------------------------
  auto* odmr_cmd = app.add_subcommand("odmr", "Synthetic zero-field ODMR spectrum");
  double d_mhz = 1333.75, e_mhz = 18.65, lw = 10.0, intrinsic = 0.10, fraction = 0.62;
  double f_min = 1240, f_max_mhz = 1430, f_step = 1.0, odmr_noise = 0.001;
  odmr_cmd->add_option("--d", d_mhz, "Axial splitting D (MHz)");
  odmr_cmd->add_option("--e", e_mhz, "Transverse splitting E (MHz)");
  odmr_cmd->add_option("--linewidth", lw, "Per-peak FWHM (MHz)");
  odmr_cmd->add_option("--intrinsic-contrast", intrinsic, "Undiluted PL4 contrast");
  odmr_cmd->add_option("--fraction", fraction, "PL4 photon fraction of the collection path");
  odmr_cmd->add_option("--f-min", f_min, "Grid start (MHz)");
  odmr_cmd->add_option("--f-max", f_max_mhz, "Grid end (MHz)");
  odmr_cmd->add_option("--f-step", f_step, "Grid step (MHz)");
  odmr_cmd->add_option("--noise", odmr_noise, "Gaussian contrast noise sigma");

  // rabi ----------------------------------------------------------------------
  auto* rabi_cmd = app.add_subcommand("rabi", "Synthetic Rabi oscillation sweep");
  double rabi_f = 4.0, rabi_contrast = 0.062, rabi_decay = 600.0, t_max = 500.0, rabi_noise = 0.0015;
  int rabi_points = 126;
  rabi_cmd->add_option("--frequency-mhz", rabi_f, "Rabi frequency (MHz)");
  rabi_cmd->add_option("--contrast", rabi_contrast, "Observed contrast");
  rabi_cmd->add_option("--decay-ns", rabi_decay, "Envelope decay time (ns)");
  rabi_cmd->add_option("--t-max", t_max, "Sweep end (ns)");
  rabi_cmd->add_option("--points", rabi_points, "Sweep points");
  rabi_cmd->add_option("--noise", rabi_noise, "Gaussian signal noise sigma");

  // fit -----------------------------------------------------------------------
  auto* fit_cmd = app.add_subcommand("fit", "Least-squares fit of a model to a two-column CSV");
  std::string fit_model, fit_csv, fit_weights;
  int fit_npeaks = 2;
  fit_cmd->add_option("model", fit_model, "lorentzian | multi_lorentzian | exp_decay | damped_cosine")
      ->required();
  fit_cmd->add_option("csv", fit_csv, "Input CSV (x,y)")->required();
  fit_cmd->add_option("--n-peaks", fit_npeaks, "Peak count for multi_lorentzian");
  fit_cmd->add_option("--weights", fit_weights, "unit | poisson (default by model)");

  // analyze -------------------------------------------------------------------
  auto* analyze_cmd = app.add_subcommand("analyze", "Closed-form analyses");
  auto* purcell_cmd = analyze_cmd->add_subcommand("purcell", "Purcell factor from lifetimes");
  std::optional<double> a_tau_off, a_tau_on, a_xi, a_tau0, a_dwf;
  purcell_cmd->add_option("--tau-off", a_tau_off, "Off-resonance lifetime (ns)");
  purcell_cmd->add_option("--tau-on", a_tau_on, "On-resonance lifetime (ns)");
  purcell_cmd->add_option("--xi", a_xi, "ZPL branching ratio (lifetime-ratio route)");
  purcell_cmd->add_option("--tau0", a_tau0, "Film reference lifetime (reference route)");
  purcell_cmd->add_option("--dwf", a_dwf, "Debye-Waller factor (reference route)");

  // run -----------------------------------------------------------------------
  auto* run_cmd = app.add_subcommand("run", "Run a full scenario and emit the report");
  std::string run_config, run_targets = "data/paper_targets.json";
  run_cmd->add_option("config", run_config, "Scenario config JSON")->required();
  run_cmd->add_option("--targets", run_targets, "Targets constants file");
  bool run_serial = false;
  run_cmd->add_flag("--serial", run_serial, "Disable the parallel fan-out");

  // report --------------------------------------------------------------------
  auto* report_cmd = app.add_subcommand("report", "Inspect a scenario report");
  std::string compare_path;
  report_cmd->add_option("--compare", compare_path, "Re-check every record; exit 3 on failure")
      ->required();

  for (auto* sub : app.get_subcommands([](const CLI::App*) { return true; })) {
    sub->fallthrough();
    for (auto* nested : sub->get_subcommands([](const CLI::App*) { return true; }))
      nested->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*spec_cmd) {
      const rq::cavity::RingGeometry geom(diameter, n_eff, n_g);
      const auto modes = rq::cavity::resonance_wavelengths(geom, band_min, band_max, q);
      const auto grid = linspace(band_min, band_max, points);
      std::vector<double> intensity(grid.size(), baseline);
      for (const auto& mode : modes) {
        const auto line = rq::cavity::mode_lineshape(mode, grid);
        for (std::size_t i = 0; i < grid.size(); ++i) intensity[i] += mode_amp * line[i];
      }
      if (zpl_nm > 0.0)
        for (std::size_t i = 0; i < grid.size(); ++i) {
          const double z = 2.0 * (grid[i] - zpl_nm) / zpl_w;
          intensity[i] += zpl_amp / (1.0 + z * z);
        }
      rq::Rng rng(g.seed);
      for (auto& v : intensity) v += rng.normal(0.0, noise);
      emit_table(g, "spectrum", {"wavelength_nm", "intensity"}, {grid, intensity});
      return 0;
    }

    if (*tune_cmd) {
      auto sc = rq::pipeline::load_scenario(tune_config);
      if (seed_given) sc.seed = g.seed;
      const auto map = rq::pipeline::generate_tuning_map(sc);
      std::ofstream f(out_path(g, "tune_map.csv"), std::ios::binary);
      f << map.to_csv();
      std::cout << "wrote " << out_path(g, "tune_map.csv") << " (alpha = "
                << rq::format_double(map.alpha_nm_per_pal) << " nm per Pa*L, crossing step "
                << map.crossing_step << ")\n";
      return 0;
    }

    if (*decay_cmd) {
      const auto params = rq::emitter::EmitterParams::from_lifetime_and_dwf(tau_off, xi, tau0);
      const auto trace =
          rq::emitter::simulate_decay_trace(params, purcell_f, counts, bins, rep, g.seed, bg);
      std::vector<double> c(trace.counts.begin(), trace.counts.end());
      emit_table(g, "decay", {"time_ns", "counts"}, {trace.bin_centers_ns(), c});
      if (trace.pileup_warning) std::cerr << "warning: pile-up regime (lifetime >= period/2)\n";
      return 0;
    }

    if (*odmr_cmd) {
      const rq::spin::SpinParams p(d_mhz, e_mhz, intrinsic, lw);
      std::vector<double> grid;
      for (double f = f_min; f <= f_max_mhz + 0.5 * f_step; f += f_step) grid.push_back(f);
      auto ds = rq::spin::odmr_spectrum(p, fraction, grid);
      rq::Rng rng(g.seed);
      for (auto& v : ds.contrast) v += rng.normal(0.0, odmr_noise);
      emit_table(g, "odmr", {"freq_MHz", "contrast"}, {ds.freq_mhz, ds.contrast});
      return 0;
    }

    if (*rabi_cmd) {
      const auto t_grid = linspace(0.0, t_max, rabi_points);
      auto signal = rq::spin::rabi_trace(rabi_f, rabi_contrast, rabi_decay, t_grid);
      rq::Rng rng(g.seed);
      for (auto& v : signal) v += rng.normal(0.0, rabi_noise);
      emit_table(g, "rabi", {"duration_ns", "signal"}, {t_grid, signal});
      return 0;
    }

    if (*fit_cmd) return run_fit(g, fit_model, fit_csv, fit_npeaks, fit_weights);

    if (*purcell_cmd) {
      if (a_tau0 && a_dwf && a_tau_on && a_tau_off) {
        const auto r =
            rq::emitter::purcell_from_reference_lifetime(*a_tau0, *a_dwf, *a_tau_on, *a_tau_off);
        std::cout << "F = " << rq::format_double(r.f) << "\n";
        if (r.negative_warning) std::cerr << "warning: tau_on > tau_off gives negative F\n";
        return 0;
      }
      if (a_tau_off && a_tau_on && a_xi) {
        const auto r = rq::emitter::purcell_from_lifetime_ratio(*a_tau_off, *a_tau_on, *a_xi);
        std::cout << "F = " << rq::format_double(r.f) << "\n";
        if (r.negative_warning) std::cerr << "warning: tau_on > tau_off gives negative F\n";
        return 0;
      }
      throw rq::ValidationError(
          "analyze purcell needs --tau-off --tau-on --xi, or --tau0 --dwf --tau-on --tau-off");
    }
    if (*analyze_cmd)
      throw rq::ValidationError("analyze requires a subcommand (purcell)");

    if (*run_cmd) {
      auto sc = rq::pipeline::load_scenario(run_config);
      if (seed_given) sc.seed = g.seed;
      if (run_serial) sc.parallel = false;
      const auto targets = rq::pipeline::load_targets(run_targets);
      const auto report = rq::pipeline::run_scenario(sc, targets, g.out_dir);
      std::size_t n_pass = 0;
      for (const auto& r : report.records) n_pass += r.pass ? 1 : 0;
      std::cout << "report: " << n_pass << "/" << report.records.size() << " records pass; wrote "
                << out_path(g, "report.json") << "\n";
      return 0;
    }

    if (*report_cmd) return compare_report(compare_path);
  } catch (const rq::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
