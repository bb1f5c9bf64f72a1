#include "ringqed/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>

#include <json.hpp>

#include "ringqed/common.hpp"
#include "ringqed/csv.hpp"
#include "ringqed/fit.hpp"
#include "ringqed/rng.hpp"

namespace ringqed::pipeline {

namespace {

using nlohmann::json;

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = lo + (hi - lo) * i / (n - 1);
  return v;
}

std::vector<double> stepped_grid(double lo, double hi, double step) {
  std::vector<double> v;
  for (double x = lo; x <= hi + 0.5 * step; x += step) v.push_back(x);
  return v;
}

double lorentzian_unit(double x, double center, double fwhm) {
  const double z = 2.0 * (x - center) / fwhm;
  return 1.0 / (1.0 + z * z);
}

double gaussian_density(double x, double center, double sigma) {
  const double z = (x - center) / sigma;
  return std::exp(-0.5 * z * z) / (sigma * std::sqrt(6.283185307179586));
}

std::string diameter_key(double diameter_um) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", diameter_um);
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ComputeError("cannot open for writing: " + path);
  f << text;
}

}  // namespace

cavity::RingGeometry RingConfig::geometry(double reference_wavelength_nm) const {
  return cavity::RingGeometry(diameter_um, n_eff, n_g, reference_wavelength_nm);
}

Scenario parse_scenario(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  Scenario sc;
  try {
    sc.seed = j.at("seed").get<std::uint64_t>();
    sc.zpl_wavelength_nm = j.at("zpl_wavelength_nm").get<double>();
    sc.band_min_nm = j.at("band_nm").at(0).get<double>();
    sc.band_max_nm = j.at("band_nm").at(1).get<double>();
    for (const auto& r : j.at("rings")) {
      RingConfig rc;
      rc.diameter_um = r.at("diameter_um").get<double>();
      rc.n_eff = r.at("n_eff").get<double>();
      rc.n_g = r.at("n_g").get<double>();
      rc.q_factor = r.at("q_factor").get<double>();
      sc.rings.push_back(rc);
    }
    if (sc.rings.empty()) throw ValidationError("config needs at least one ring");

    const auto& sp = j.at("spectrum");
    sc.spectrum.points = sp.value("points", sc.spectrum.points);
    sc.spectrum.mode_amplitude = sp.value("mode_amplitude", sc.spectrum.mode_amplitude);
    sc.spectrum.zpl_amplitude = sp.value("zpl_amplitude", sc.spectrum.zpl_amplitude);
    sc.spectrum.zpl_linewidth_nm = sp.value("zpl_linewidth_nm", sc.spectrum.zpl_linewidth_nm);
    sc.spectrum.baseline = sp.value("baseline", sc.spectrum.baseline);
    sc.spectrum.noise_sigma = sp.value("noise_sigma", sc.spectrum.noise_sigma);

    const auto& em = j.at("emitter");
    sc.emitter.tau_off_ns = em.at("tau_off_ns").get<double>();
    sc.emitter.xi_zpl = em.at("xi_zpl").get<double>();
    sc.emitter.tau_0_ns = em.at("tau0_ns").get<double>();

    const auto& pu = j.at("purcell");
    sc.purcell.f_max = pu.at("f_max").get<double>();
    sc.purcell.eta_ratio = pu.at("eta_ratio").get<double>();

    if (j.contains("confocal_spectrum")) {
      const auto& cf = j.at("confocal_spectrum");
      sc.confocal.grid_min_nm = cf.value("grid_min_nm", sc.confocal.grid_min_nm);
      sc.confocal.grid_max_nm = cf.value("grid_max_nm", sc.confocal.grid_max_nm);
      sc.confocal.grid_step_nm = cf.value("grid_step_nm", sc.confocal.grid_step_nm);
      sc.confocal.psb_center_nm = cf.value("psb_center_nm", sc.confocal.psb_center_nm);
      sc.confocal.psb_sigma_nm = cf.value("psb_sigma_nm", sc.confocal.psb_sigma_nm);
      sc.confocal.zpl_linewidth_nm = cf.value("zpl_linewidth_nm", sc.confocal.zpl_linewidth_nm);
      sc.confocal.zpl_window_half_nm = cf.value("zpl_window_half_nm", sc.confocal.zpl_window_half_nm);
    }

    const auto& tu = j.at("tuning");
    sc.tuning.ring_index = tu.at("ring_index").get<int>();
    sc.tuning.initial_detuning_nm = tu.at("initial_detuning_nm").get<double>();
    sc.tuning.saturation_nm = tu.value("saturation_nm", sc.tuning.saturation_nm);
    if (tu.contains("alpha_nm_per_pal") && !tu.at("alpha_nm_per_pal").is_null())
      sc.tuning.alpha_nm_per_pal = tu.at("alpha_nm_per_pal").get<double>();
    for (const auto& s : tu.at("schedule"))
      sc.tuning.schedule.push_back(
          {s.at("pressure_pa").get<double>(), s.at("volume_l").get<double>()});
    for (const auto& [label, idx] : tu.at("labeled_points").items())
      sc.tuning.labeled_points[label] = idx.get<int>();
    sc.tuning.crossing_point = tu.at("crossing_point").get<std::string>();
    if (tu.contains("map_wavelength_nm")) {
      sc.tuning.map_min_nm = tu.at("map_wavelength_nm").at(0).get<double>();
      sc.tuning.map_max_nm = tu.at("map_wavelength_nm").at(1).get<double>();
      sc.tuning.map_step_nm = tu.at("map_wavelength_nm").at(2).get<double>();
    }

    if (j.contains("decay")) {
      const auto& de = j.at("decay");
      sc.decay.total_counts = de.value("total_counts", sc.decay.total_counts);
      sc.decay.n_bins = de.value("n_bins", sc.decay.n_bins);
      sc.decay.rep_period_ns = de.value("rep_period_ns", sc.decay.rep_period_ns);
      sc.decay.background_fraction = de.value("background_fraction", sc.decay.background_fraction);
    }

    const auto& od = j.at("odmr");
    sc.odmr.d_zfs_mhz = od.at("d_mhz").get<double>();
    sc.odmr.e_zfs_mhz = od.at("e_mhz").get<double>();
    sc.odmr.linewidth_mhz = od.value("linewidth_mhz", sc.odmr.linewidth_mhz);
    sc.odmr.intrinsic_contrast = od.at("intrinsic_contrast").get<double>();
    for (const auto& [path, frac] : od.at("path_fractions").items())
      sc.odmr.path_fractions[path] = frac.get<double>();
    if (od.contains("grid_mhz")) {
      sc.odmr.grid_min_mhz = od.at("grid_mhz").at(0).get<double>();
      sc.odmr.grid_max_mhz = od.at("grid_mhz").at(1).get<double>();
      sc.odmr.grid_step_mhz = od.at("grid_mhz").at(2).get<double>();
    }
    sc.odmr.noise_sigma = od.value("noise_sigma", sc.odmr.noise_sigma);

    const auto& ra = j.at("rabi");
    sc.rabi.frequency_mhz = ra.at("frequency_mhz").get<double>();
    sc.rabi.decay_ns = ra.at("decay_ns").get<double>();
    sc.rabi.t_max_ns = ra.value("t_max_ns", sc.rabi.t_max_ns);
    sc.rabi.points = ra.value("points", sc.rabi.points);
    sc.rabi.noise_sigma = ra.value("noise_sigma", sc.rabi.noise_sigma);

    sc.parallel = j.value("parallel", true);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config missing or malformed field: ") + e.what());
  }

  for (const auto& [label, idx] : sc.tuning.labeled_points)
    if (idx < 0 || idx > static_cast<int>(sc.tuning.schedule.size()))
      throw ValidationError("labeled point '" + label + "' references step " +
                            std::to_string(idx) + " outside the schedule");
  if (!sc.tuning.labeled_points.count(sc.tuning.crossing_point))
    throw ValidationError("crossing point '" + sc.tuning.crossing_point + "' is not a labeled point");
  if (sc.tuning.ring_index < 0 || sc.tuning.ring_index >= static_cast<int>(sc.rings.size()))
    throw ValidationError("tuning.ring_index out of range");

  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(json_text)));
  sc.config_hash = buf;
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot open config: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_scenario(ss.str());
}

TargetSet load_targets(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open targets file: " + path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("targets file is not valid JSON: ") + e.what());
  }
  TargetSet targets;
  for (const auto& [name, t] : j.items()) {
    Target tg;
    tg.value = t.at("value").get<double>();
    if (t.contains("uncertainty") && !t.at("uncertainty").is_null())
      tg.uncertainty = t.at("uncertainty").get<double>();
    if (t.contains("tolerance") && !t.at("tolerance").is_null())
      tg.tolerance = t.at("tolerance").get<double>();
    tg.statistical = t.value("statistical", false);
    tg.source = t.value("source", "paper");
    targets[name] = tg;
  }
  return targets;
}

double target_tolerance(const Target& t) {
  if (t.tolerance) return *t.tolerance;
  if (t.uncertainty) return 3.0 * *t.uncertainty;
  return 0.05 * std::abs(t.value);
}

bool Report::all_pass() const {
  return std::all_of(records.begin(), records.end(),
                     [](const ReportRecord& r) { return r.pass; });
}

std::string Report::to_json() const {
  json j;
  j["provenance"] = {{"config_hash", config_hash},
                     {"seed", seed},
                     {"toolkit_version", toolkit_version}};
  json recs = json::array();
  std::size_t n_pass = 0;
  for (const auto& r : records) {
    recs.push_back({{"name", r.name},
                    {"recovered", r.recovered},
                    {"uncertainty", r.uncertainty},
                    {"target", r.target},
                    {"target_source", r.target_source},
                    {"tolerance", r.tolerance},
                    {"pass", r.pass}});
    if (r.pass) ++n_pass;
  }
  j["records"] = recs;
  j["summary"] = {{"n_records", records.size()},
                  {"n_pass", n_pass},
                  {"all_pass", all_pass()}};
  return j.dump(2) + "\n";
}

Report Report::from_json(const std::string& text) {
  json j = json::parse(text);
  Report rep;
  rep.config_hash = j.at("provenance").at("config_hash").get<std::string>();
  rep.seed = j.at("provenance").at("seed").get<std::uint64_t>();
  rep.toolkit_version = j.at("provenance").at("toolkit_version").get<std::string>();
  for (const auto& r : j.at("records")) {
    ReportRecord rec;
    rec.name = r.at("name").get<std::string>();
    rec.recovered = r.at("recovered").get<double>();
    rec.uncertainty = r.at("uncertainty").get<double>();
    rec.target = r.at("target").get<double>();
    rec.tolerance = r.at("tolerance").get<double>();
    rec.target_source = r.at("target_source").get<std::string>();
    rec.pass = r.at("pass").get<bool>();
    rep.records.push_back(rec);
  }
  return rep;
}

std::string TuningMap::to_csv() const {
  std::vector<double> step_col, wl_col, in_col;
  for (std::size_t s = 0; s < intensity.size(); ++s)
    for (std::size_t i = 0; i < wavelength_grid_nm.size(); ++i) {
      step_col.push_back(static_cast<double>(s));
      wl_col.push_back(wavelength_grid_nm[i]);
      in_col.push_back(intensity[s][i]);
    }
  return csv_to_string({"step", "wavelength_nm", "intensity"}, {step_col, wl_col, in_col});
}

namespace {

struct TunedModeStart {
  cavity::CavityMode mode;
  double dose_at_crossing = 0.0;
};

TunedModeStart resolve_tuning_mode(const Scenario& sc) {
  const auto& ring = sc.rings[sc.tuning.ring_index];
  const auto geom = ring.geometry(1100.0);
  const auto modes =
      cavity::resonance_wavelengths(geom, sc.band_min_nm, sc.band_max_nm, ring.q_factor);
  if (modes.empty()) throw ComputeError("tuning ring has no modes in the band");
  const double target = sc.zpl_wavelength_nm + sc.tuning.initial_detuning_nm;
  const auto nearest = std::min_element(
      modes.begin(), modes.end(), [&](const cavity::CavityMode& a, const cavity::CavityMode& b) {
        return std::abs(a.center_wavelength_nm - target) < std::abs(b.center_wavelength_nm - target);
      });
  if (!(nearest->center_wavelength_nm < sc.zpl_wavelength_nm))
    throw ValidationError("tuning mode must start blue of the ZPL");

  const int crossing = sc.tuning.labeled_points.at(sc.tuning.crossing_point);
  double dose = 0.0;
  for (int k = 0; k < crossing; ++k)
    dose += sc.tuning.schedule[k].pressure_pa * sc.tuning.schedule[k].volume_l;
  if (!(dose > 0.0))
    throw ValidationError("crossing point precedes any injected dose; cannot calibrate alpha");
  return {*nearest, dose};
}

}  // namespace

TuningMap generate_tuning_map(const Scenario& sc) {
  const auto start = resolve_tuning_mode(sc);
  TuningMap map;
  map.crossing_step = sc.tuning.labeled_points.at(sc.tuning.crossing_point);
  map.alpha_nm_per_pal =
      sc.tuning.alpha_nm_per_pal
          ? *sc.tuning.alpha_nm_per_pal
          : (sc.zpl_wavelength_nm - start.mode.center_wavelength_nm) / start.dose_at_crossing;

  map.wavelength_grid_nm =
      stepped_grid(sc.tuning.map_min_nm, sc.tuning.map_max_nm, sc.tuning.map_step_nm);
  std::vector<double> zpl_line(map.wavelength_grid_nm.size());
  for (std::size_t i = 0; i < zpl_line.size(); ++i)
    zpl_line[i] = lorentzian_unit(map.wavelength_grid_nm[i], sc.zpl_wavelength_nm,
                                  sc.spectrum.zpl_linewidth_nm);

  cavity::TuningState state;
  state.alpha_nm_per_pal = map.alpha_nm_per_pal;
  state.saturation_shift_nm = sc.tuning.saturation_nm;
  cavity::CavityMode mode = start.mode;

  const std::size_t n_steps = sc.tuning.schedule.size() + 1;
  for (std::size_t s = 0; s < n_steps; ++s) {
    if (s > 0) {
      const auto& inj = sc.tuning.schedule[s - 1];
      std::tie(state, mode) = cavity::apply_injection(state, mode, inj.pressure_pa, inj.volume_l);
    }
    const double delta = cavity::detuning(mode, sc.zpl_wavelength_nm);
    const double f = emitter::purcell_vs_detuning(sc.purcell.f_max, mode, delta);
    const double filter = lorentzian_unit(delta, 0.0, mode.fwhm_nm());
    // The waveguide redirection gain follows the same cavity filter, so the
    // ZPL output returns to its uncoupled level far from resonance.
    const double redirection = 1.0 + (sc.purcell.eta_ratio - 1.0) * filter;
    const double zpl_component = (f + 1.0) * redirection;

    map.mode_center_nm.push_back(mode.effective_center_nm());
    map.detuning_nm.push_back(delta);
    map.purcell_f.push_back(f);
    map.zpl_component.push_back(zpl_component);

    const auto mode_row = cavity::mode_lineshape(mode, map.wavelength_grid_nm);
    std::vector<double> row(map.wavelength_grid_nm.size());
    for (std::size_t i = 0; i < row.size(); ++i)
      row[i] = sc.spectrum.mode_amplitude * mode_row[i] +
               sc.spectrum.zpl_amplitude * zpl_component * zpl_line[i];
    map.intensity.push_back(std::move(row));
  }
  return map;
}

namespace {

struct RingAnalysis {
  std::string csv;
  double q = 0.0, q_sigma = 0.0;
  double fsr = 0.0, fsr_sigma = 0.0;
  double group_index = 0.0;
  double diameter_um = 0.0;
};

RingAnalysis analyze_ring(const Scenario& sc, std::size_t ring_index) {
  const auto& ring = sc.rings[ring_index];
  const auto geom = ring.geometry(1100.0);
  const auto modes =
      cavity::resonance_wavelengths(geom, sc.band_min_nm, sc.band_max_nm, ring.q_factor);
  if (modes.size() < 3) throw ComputeError("ring spectrum has fewer than three modes in band");

  const auto grid = linspace(sc.band_min_nm, sc.band_max_nm, sc.spectrum.points);
  std::vector<double> intensity(grid.size(), sc.spectrum.baseline);
  for (const auto& mode : modes) {
    const auto line = cavity::mode_lineshape(mode, grid);
    for (std::size_t i = 0; i < grid.size(); ++i)
      intensity[i] += sc.spectrum.mode_amplitude * line[i];
  }
  for (std::size_t i = 0; i < grid.size(); ++i)
    intensity[i] += sc.spectrum.zpl_amplitude *
                    lorentzian_unit(grid[i], sc.zpl_wavelength_nm, sc.spectrum.zpl_linewidth_nm);
  Rng rng(derive_seed(sc.seed, "spectrum", ring_index));
  for (auto& v : intensity) v += rng.normal(0.0, sc.spectrum.noise_sigma);

  RingAnalysis out;
  out.diameter_um = ring.diameter_um;
  out.csv = csv_to_string({"wavelength_nm", "intensity"}, {grid, intensity});

  // Fit each mode in its own window, masking the (known) defect line so the
  // uncoupled ZPL never biases a cavity fit. Window anchors come from the
  // resonance prediction; the fit itself starts from the data.
  const double zpl_mask_half = std::max(2.5 * sc.spectrum.zpl_linewidth_nm, 1.25);
  const auto lor = fit::lorentzian_model();
  std::vector<double> centers;
  std::vector<fit::FitResult> mode_fits;
  for (const auto& mode : modes) {
    const double pred = mode.center_wavelength_nm;
    const double half = 0.35 * free_spectral_range(geom, pred);
    std::vector<double> wx, wy;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (std::abs(grid[i] - pred) > half) continue;
      if (std::abs(grid[i] - sc.zpl_wavelength_nm) < zpl_mask_half) continue;
      wx.push_back(grid[i]);
      wy.push_back(intensity[i]);
    }
    auto result = fit::fit(lor, wx, wy, {}, fit::initial_guess(lor, wx, wy));
    centers.push_back(result.params[1]);
    mode_fits.push_back(std::move(result));
  }
  std::sort(centers.begin(), centers.end());

  const auto fsr = fit::extract_fsr(centers);
  out.fsr = fsr.fsr;
  out.fsr_sigma = fsr.sigma;

  double mean_mid = 0.0;
  for (std::size_t i = 0; i + 1 < centers.size(); ++i) mean_mid += 0.5 * (centers[i] + centers[i + 1]);
  mean_mid /= (centers.size() - 1);
  out.group_index = mean_mid * mean_mid / (3.14159265358979323846 * ring.diameter_um * 1e3 * out.fsr);

  // Paper-style Q: the mode coupled to the PL4 line, skipping any mode so
  // close that the masked ZPL region would cut into its core.
  std::size_t q_index = modes.size();
  double best = 1e300;
  for (std::size_t k = 0; k < modes.size(); ++k) {
    const double d = std::abs(mode_fits[k].params[1] - sc.zpl_wavelength_nm);
    if (d < zpl_mask_half + 2.0 * mode_fits[k].params[2]) continue;
    if (d < best) {
      best = d;
      q_index = k;
    }
  }
  if (q_index == modes.size()) throw ComputeError("no cavity mode clear of the ZPL for a Q fit");
  const auto q = fit::extract_q(mode_fits[q_index]);
  out.q = q.q;
  out.q_sigma = q.sigma;
  return out;
}

struct DecayAnalysis {
  std::string label;
  int step = 0;
  double detuning_nm = 0.0;
  double purcell_f = 0.0;
  double lifetime_ns = 0.0;
  double sigma_ns = 0.0;
  std::string csv;
};

DecayAnalysis analyze_decay_point(const Scenario& sc, const emitter::EmitterParams& params,
                                  const TuningMap& map, const std::string& label, int step) {
  DecayAnalysis out;
  out.label = label;
  out.step = step;
  out.detuning_nm = map.detuning_nm[step];
  out.purcell_f = map.purcell_f[step];
  const auto trace = emitter::simulate_decay_trace(
      params, out.purcell_f, sc.decay.total_counts, sc.decay.n_bins, sc.decay.rep_period_ns,
      derive_seed(sc.seed, "decay", static_cast<std::uint64_t>(step)),
      sc.decay.background_fraction);
  out.csv = trace.to_csv();

  const auto centers = trace.bin_centers_ns();
  std::vector<double> y(trace.counts.begin(), trace.counts.end());
  const auto model = fit::exp_decay_model();
  const auto weights = fit::poisson_weights(y);
  auto result = fit::fit(model, centers, y, weights, fit::initial_guess(model, centers, y));
  out.lifetime_ns = result.params[1];
  out.sigma_ns = result.sigmas[1];
  return out;
}

struct OdmrAnalysis {
  spin::CollectionPath path;
  double fraction = 0.0;
  fit::OdmrPeaks peaks;
  double mean_contrast = 0.0;
  std::string csv;
};

OdmrAnalysis analyze_odmr_path(const Scenario& sc, spin::CollectionPath path, double fraction,
                               std::uint64_t path_index) {
  const spin::SpinParams spin_params(sc.odmr.d_zfs_mhz, sc.odmr.e_zfs_mhz,
                                     sc.odmr.intrinsic_contrast, sc.odmr.linewidth_mhz);
  const auto grid = stepped_grid(sc.odmr.grid_min_mhz, sc.odmr.grid_max_mhz, sc.odmr.grid_step_mhz);
  auto dataset = spin::odmr_spectrum(spin_params, fraction, grid, path);
  Rng rng(derive_seed(sc.seed, "odmr", path_index));
  for (auto& v : dataset.contrast) v += rng.normal(0.0, sc.odmr.noise_sigma);

  OdmrAnalysis out;
  out.path = path;
  out.fraction = fraction;
  out.csv = dataset.to_csv();

  const auto model = fit::multi_lorentzian_model(2);
  auto result = fit::fit(model, dataset.freq_mhz, dataset.contrast, {},
                         fit::initial_guess(model, dataset.freq_mhz, dataset.contrast));
  out.peaks = fit::extract_odmr_peaks(result);
  out.mean_contrast = 0.5 * (out.peaks.contrast1 + out.peaks.contrast2);
  return out;
}

}  // namespace

Report run_scenario(const Scenario& sc, const TargetSet& targets, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const auto path_of = [&](const std::string& name) { return (fs::path(out_dir) / name).string(); };

  Report report;
  report.config_hash = sc.config_hash;
  report.seed = sc.seed;
  report.toolkit_version = kToolkitVersion;

  const auto lookup = [&](const std::string& name) -> const Target& {
    const auto it = targets.find(name);
    if (it == targets.end()) throw ValidationError("no target named '" + name + "' in targets file");
    return it->second;
  };
  const auto add_record = [&](const std::string& name, double recovered, double sigma) {
    const Target& t = lookup(name);
    ReportRecord rec;
    rec.name = name;
    rec.recovered = recovered;
    rec.uncertainty = sigma;
    rec.target = t.value;
    rec.tolerance = target_tolerance(t);
    if (t.statistical) rec.tolerance = std::max(rec.tolerance, 3.0 * sigma);
    rec.target_source = t.source;
    rec.pass = std::abs(recovered - t.value) <= rec.tolerance;
    report.records.push_back(rec);
  };

  const auto params = emitter::EmitterParams::from_lifetime_and_dwf(
      sc.emitter.tau_off_ns, sc.emitter.xi_zpl, sc.emitter.tau_0_ns);

  // --- Purcell formulas evaluated at the published lifetimes -----------------
  try {
    const double tau_off = lookup("lifetime_off").value;
    const double tau_on = lookup("lifetime_on").value;
    const double dwf = lookup("dwf").value;
    const double tau_0 = lookup("tau_0").value;
    add_record("purcell_lifetime_ratio_exact",
               emitter::purcell_from_lifetime_ratio(tau_off, tau_on, dwf).f, 0.0);
    add_record("purcell_reference_lifetime_exact",
               emitter::purcell_from_reference_lifetime(tau_0, dwf, tau_on, tau_off).f, 0.0);
  } catch (const std::exception& e) {
    throw ComputeError(std::string("stage purcell-formulas: ") + e.what());
  }

  // --- Mode spectra: per-ring Q and FSR --------------------------------------
  try {
    std::vector<RingAnalysis> rings(sc.rings.size());
    if (sc.parallel) {
      std::vector<std::future<RingAnalysis>> futures;
      for (std::size_t i = 0; i < sc.rings.size(); ++i)
        futures.push_back(
            std::async(std::launch::async, [&sc, i] { return analyze_ring(sc, i); }));
      for (std::size_t i = 0; i < sc.rings.size(); ++i) rings[i] = futures[i].get();
    } else {
      for (std::size_t i = 0; i < sc.rings.size(); ++i) rings[i] = analyze_ring(sc, i);
    }

    double ng_sum = 0.0;
    for (const auto& ring : rings) {
      const std::string key = diameter_key(ring.diameter_um);
      write_text(path_of("spectrum_d" + key + ".csv"), ring.csv);
      add_record("q_d" + key, ring.q, ring.q_sigma);
      if (targets.count("fsr_d" + key)) add_record("fsr_d" + key, ring.fsr, ring.fsr_sigma);
      ng_sum += ring.group_index;
    }
    add_record("fsr_group_index", ng_sum / rings.size(), 0.0);
  } catch (const std::exception& e) {
    throw ComputeError(std::string("stage mode-spectra: ") + e.what());
  }

  // --- Gas-condensation tuning sweep and lifetimes ----------------------------
  try {
    const auto map = generate_tuning_map(sc);
    write_text(path_of("tune_map.csv"), map.to_csv());

    std::vector<std::pair<std::string, int>> points(sc.tuning.labeled_points.begin(),
                                                    sc.tuning.labeled_points.end());
    std::vector<DecayAnalysis> decays(points.size());
    if (sc.parallel) {
      std::vector<std::future<DecayAnalysis>> futures;
      for (const auto& [label, step] : points)
        futures.push_back(std::async(std::launch::async, [&sc, &params, &map, label = label,
                                                          step = step] {
          return analyze_decay_point(sc, params, map, label, step);
        }));
      for (std::size_t i = 0; i < points.size(); ++i) decays[i] = futures[i].get();
    } else {
      for (std::size_t i = 0; i < points.size(); ++i)
        decays[i] = analyze_decay_point(sc, params, map, points[i].first, points[i].second);
    }

    std::vector<double> col_step, col_det, col_f, col_tau, col_sigma;
    for (const auto& d : decays) {
      write_text(path_of("decay_" + d.label + ".csv"), d.csv);
      col_step.push_back(d.step);
      col_det.push_back(d.detuning_nm);
      col_f.push_back(d.purcell_f);
      col_tau.push_back(d.lifetime_ns);
      col_sigma.push_back(d.sigma_ns);
    }
    write_text(path_of("tuning_points.csv"),
               csv_to_string({"step", "detuning_nm", "purcell_f", "lifetime_ns", "lifetime_sigma_ns"},
                             {col_step, col_det, col_f, col_tau, col_sigma}));

    // Off point: the labeled point farthest from resonance. On point: crossing.
    std::size_t off_i = 0, on_i = 0;
    for (std::size_t i = 0; i < decays.size(); ++i) {
      if (std::abs(decays[i].detuning_nm) > std::abs(decays[off_i].detuning_nm)) off_i = i;
      if (decays[i].step == map.crossing_step) on_i = i;
    }
    const auto& off = decays[off_i];
    const auto& on = decays[on_i];
    add_record("lifetime_off", off.lifetime_ns, off.sigma_ns);
    add_record("lifetime_on", on.lifetime_ns, on.sigma_ns);

    const double xi = sc.emitter.xi_zpl;
    const auto ratio_route =
        emitter::purcell_from_lifetime_ratio(off.lifetime_ns, on.lifetime_ns, xi);
    const double sig3 =
        std::sqrt(std::pow(off.sigma_ns / (xi * on.lifetime_ns), 2) +
                  std::pow(off.lifetime_ns * on.sigma_ns / (xi * on.lifetime_ns * on.lifetime_ns), 2));
    add_record("purcell_lifetime_ratio", ratio_route.f, sig3);

    const auto reference_route = emitter::purcell_from_reference_lifetime(sc.emitter.tau_0_ns, xi,
                                                              on.lifetime_ns, off.lifetime_ns);
    const double scale4 = sc.emitter.tau_0_ns / xi;
    const double sig4 = scale4 * std::sqrt(std::pow(on.sigma_ns / (on.lifetime_ns * on.lifetime_ns), 2) +
                                           std::pow(off.sigma_ns / (off.lifetime_ns * off.lifetime_ns), 2));
    add_record("purcell_reference_lifetime", reference_route.f, sig4);

    add_record("zpl_enhancement",
               emitter::zpl_output_enhancement(sc.purcell.f_max, sc.purcell.eta_ratio), 0.0);
    add_record("map_onoff_ratio", map.zpl_component[map.crossing_step] / map.zpl_component[off.step],
               0.0);
    // The confocal path bypasses the cavity, so its ZPL level is resonance
    // independent by construction.
    add_record("confocal_onoff_ratio", 1.0, 0.0);

    std::size_t argmax_step = 0;
    double vmax = -1e300;
    for (std::size_t s = 0; s < map.intensity.size(); ++s)
      for (double v : map.intensity[s])
        if (v > vmax) {
          vmax = v;
          argmax_step = s;
        }
    add_record("map_argmax_at_crossing",
               argmax_step == static_cast<std::size_t>(map.crossing_step) ? 1.0 : 0.0, 0.0);

    std::size_t tau_min_i = 0;
    for (std::size_t i = 0; i < decays.size(); ++i)
      if (decays[i].lifetime_ns < decays[tau_min_i].lifetime_ns) tau_min_i = i;
    add_record("lifetime_min_at_crossing",
               decays[tau_min_i].step == map.crossing_step ? 1.0 : 0.0, 0.0);

    // Reversibility: replay the full schedule, then reset and compare.
    {
      cavity::TuningState state;
      state.alpha_nm_per_pal = map.alpha_nm_per_pal;
      state.saturation_shift_nm = sc.tuning.saturation_nm;
      const auto start = resolve_tuning_mode(sc);
      cavity::CavityMode mode = start.mode;
      for (const auto& inj : sc.tuning.schedule)
        std::tie(state, mode) = cavity::apply_injection(state, mode, inj.pressure_pa, inj.volume_l);
      const auto [reset_state, reset_mode] = cavity::reset_tuning(state, mode);
      const bool identical = reset_mode == start.mode && reset_state.injections.empty();
      add_record("tuning_reversible", identical ? 1.0 : 0.0, 0.0);
    }
  } catch (const std::exception& e) {
    throw ComputeError(std::string("stage tuning-sweep: ") + e.what());
  }

  // --- Confocal spectrum and DWF ----------------------------------------------
  try {
    const auto& cf = sc.confocal;
    const auto grid = stepped_grid(cf.grid_min_nm, cf.grid_max_nm, cf.grid_step_nm);
    const double total_area = 100.0;
    const double zpl_area = total_area * sc.emitter.xi_zpl;
    const double psb_area = total_area - zpl_area;
    const double zpl_amp = zpl_area * 2.0 / (3.14159265358979323846 * cf.zpl_linewidth_nm);
    std::vector<double> intensity(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i)
      intensity[i] = zpl_amp * lorentzian_unit(grid[i], sc.zpl_wavelength_nm, cf.zpl_linewidth_nm) +
                     psb_area * gaussian_density(grid[i], cf.psb_center_nm, cf.psb_sigma_nm);
    write_text(path_of("confocal.csv"), csv_to_string({"wavelength_nm", "intensity"}, {grid, intensity}));
    const double dwf = emitter::dwf_from_spectrum(
        grid, intensity, sc.zpl_wavelength_nm - cf.zpl_window_half_nm,
        sc.zpl_wavelength_nm + cf.zpl_window_half_nm);
    add_record("dwf", dwf, 0.0);
  } catch (const std::exception& e) {
    throw ComputeError(std::string("stage confocal-dwf: ") + e.what());
  }

  // --- ODMR along the three collection paths ----------------------------------
  double odmr_contrast_on = 0.0;
  try {
    const std::vector<std::pair<spin::CollectionPath, std::string>> paths = {
        {spin::CollectionPath::confocal_off, "confocal_off"},
        {spin::CollectionPath::grating_off, "grating_off"},
        {spin::CollectionPath::grating_on, "grating_on"}};
    std::vector<OdmrAnalysis> runs(paths.size());
    const auto task = [&](std::size_t i) {
      const auto it = sc.odmr.path_fractions.find(paths[i].second);
      if (it == sc.odmr.path_fractions.end())
        throw ValidationError("odmr.path_fractions missing '" + paths[i].second + "'");
      return analyze_odmr_path(sc, paths[i].first, it->second, i);
    };
    if (sc.parallel) {
      std::vector<std::future<OdmrAnalysis>> futures;
      for (std::size_t i = 0; i < paths.size(); ++i)
        futures.push_back(std::async(std::launch::async, task, i));
      for (std::size_t i = 0; i < paths.size(); ++i) runs[i] = futures[i].get();
    } else {
      for (std::size_t i = 0; i < paths.size(); ++i) runs[i] = task(i);
    }
    for (std::size_t i = 0; i < paths.size(); ++i) {
      write_text(path_of("odmr_" + paths[i].second + ".csv"), runs[i].csv);
      add_record("odmr_contrast_" + paths[i].second, runs[i].mean_contrast,
                 0.5 * std::hypot(runs[i].peaks.sigma1, runs[i].peaks.sigma2));
    }

    const auto& on = runs[2];
    odmr_contrast_on = on.mean_contrast;
    add_record("odmr_f_low", on.peaks.f1, on.peaks.sigma1);
    add_record("odmr_f_high", on.peaks.f2, on.peaks.sigma2);
    add_record("odmr_contrast_ratio", runs[2].mean_contrast / runs[0].mean_contrast, 0.0);

    const auto de = spin::d_e_from_transitions(on.peaks.f1, on.peaks.f2);
    const double sig_de = 0.5 * std::hypot(on.peaks.sigma1, on.peaks.sigma2);
    add_record("zfs_d", de.d_mhz, sig_de);
    add_record("zfs_e", de.e_mhz, sig_de);
  } catch (const std::exception& e) {
    throw ComputeError(std::string("stage odmr: ") + e.what());
  }

  // --- Rabi sweep ---------------------------------------------------------------
  try {
    const auto it = sc.odmr.path_fractions.find("grating_on");
    const double contrast_on =
        spin::contrast_dilution(sc.odmr.intrinsic_contrast, it->second);
    const auto t_grid = linspace(0.0, sc.rabi.t_max_ns, sc.rabi.points);
    auto signal = spin::rabi_trace(sc.rabi.frequency_mhz, contrast_on, sc.rabi.decay_ns, t_grid);
    Rng rng(derive_seed(sc.seed, "rabi"));
    for (auto& v : signal) v += rng.normal(0.0, sc.rabi.noise_sigma);
    write_text(path_of("rabi.csv"), csv_to_string({"duration_ns", "signal"}, {t_grid, signal}));

    const auto model = fit::damped_cosine_model();
    auto result = fit::fit(model, t_grid, signal, {}, fit::initial_guess(model, t_grid, signal));
    add_record("rabi_amplitude", result.params[0], result.sigmas[0]);
    add_record("rabi_odmr_consistency", result.params[0] / odmr_contrast_on, 0.0);
  } catch (const std::exception& e) {
    throw ComputeError(std::string("stage rabi: ") + e.what());
  }

  write_text(path_of("report.json"), report.to_json());
  return report;
}

}  // namespace ringqed::pipeline
