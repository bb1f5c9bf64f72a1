#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ringqed/cavity.hpp"
#include "ringqed/emitter.hpp"
#include "ringqed/spin.hpp"

namespace ringqed::pipeline {

struct RingConfig {
  double diameter_um = 0.0;
  double n_eff = 0.0;
  double n_g = 0.0;
  double q_factor = 0.0;

  cavity::RingGeometry geometry(double reference_wavelength_nm) const;
};

struct SpectrumConfig {
  int points = 2000;
  double mode_amplitude = 2.0;
  double zpl_amplitude = 0.35;
  double zpl_linewidth_nm = 0.5;
  double baseline = 0.05;
  double noise_sigma = 0.04;
};

struct EmitterConfig {
  double tau_off_ns = 0.0;
  double xi_zpl = 0.0;
  double tau_0_ns = 0.0;
};

struct PurcellConfig {
  double f_max = 0.0;
  double eta_ratio = 0.0;
};

struct ConfocalSpectrumConfig {
  double grid_min_nm = 1040.0;
  double grid_max_nm = 1260.0;
  double grid_step_nm = 0.05;
  double psb_center_nm = 1150.0;
  double psb_sigma_nm = 28.0;
  double zpl_linewidth_nm = 0.5;
  double zpl_window_half_nm = 2.0;
};

struct TuningConfig {
  int ring_index = 0;
  double initial_detuning_nm = -5.5;       // where to look for the starting mode
  double saturation_nm = 12.0;
  std::optional<double> alpha_nm_per_pal;  // absent -> calibrated to cross at the crossing point
  std::vector<cavity::Injection> schedule;
  std::map<std::string, int> labeled_points;  // e.g. "A" -> step index (0 = pre-injection)
  std::string crossing_point = "D";
  double map_min_nm = 1066.0;
  double map_max_nm = 1086.0;
  double map_step_nm = 0.025;
};

struct DecayConfig {
  std::uint64_t total_counts = 4000000;
  int n_bins = 512;
  double rep_period_ns = 100.0;  // 10 MHz laser
  double background_fraction = 0.01;
};

struct OdmrConfig {
  double d_zfs_mhz = 0.0;
  double e_zfs_mhz = 0.0;
  double linewidth_mhz = 10.0;
  double intrinsic_contrast = 0.10;
  std::map<std::string, double> path_fractions;  // confocal_off / grating_off / grating_on
  double grid_min_mhz = 1240.0;
  double grid_max_mhz = 1430.0;
  double grid_step_mhz = 1.0;
  double noise_sigma = 0.001;
};

struct RabiConfig {
  double frequency_mhz = 4.0;
  double decay_ns = 600.0;
  double t_max_ns = 500.0;
  int points = 126;
  double noise_sigma = 0.0015;
};

/// Declarative synthetic-experiment configuration (one JSON document).
struct Scenario {
  std::uint64_t seed = 0;
  double zpl_wavelength_nm = 1078.6;
  double band_min_nm = 1050.0;
  double band_max_nm = 1150.0;
  std::vector<RingConfig> rings;
  SpectrumConfig spectrum;
  EmitterConfig emitter;
  PurcellConfig purcell;
  ConfocalSpectrumConfig confocal;
  TuningConfig tuning;
  DecayConfig decay;
  OdmrConfig odmr;
  RabiConfig rabi;
  bool parallel = true;

  std::string config_hash;  // FNV-1a of the source bytes, hex
};

Scenario parse_scenario(const std::string& json_text);
Scenario load_scenario(const std::string& path);

/// Paper-value constants used as report targets; kept in a checked-in JSON
/// file, never hard-coded in pipeline logic.
struct Target {
  double value = 0.0;
  std::optional<double> uncertainty;
  std::optional<double> tolerance;  // explicit override of the default rule
  bool statistical = false;         // widen tolerance with the recovered 3 sigma
  std::string source = "paper";
};

using TargetSet = std::map<std::string, Target>;

TargetSet load_targets(const std::string& path);

/// Tolerance rule: explicit override if present, else 3x the quoted
/// uncertainty, else 5% relative.
double target_tolerance(const Target& t);

struct ReportRecord {
  std::string name;
  double recovered = 0.0;
  double uncertainty = 0.0;
  double target = 0.0;
  double tolerance = 0.0;
  std::string target_source;
  bool pass = false;
};

struct Report {
  std::vector<ReportRecord> records;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string toolkit_version;

  bool all_pass() const;
  std::string to_json() const;
  static Report from_json(const std::string& text);
};

/// Tuning intensity map (rows = injection steps, cols = wavelength grid) plus
/// the per-step decomposition used for the on/off records.
struct TuningMap {
  std::vector<double> wavelength_grid_nm;
  std::vector<std::vector<double>> intensity;  // [step][grid]
  std::vector<double> mode_center_nm;          // per step
  std::vector<double> detuning_nm;
  std::vector<double> purcell_f;
  std::vector<double> zpl_component;           // ZPL line amplitude factor per step
  int crossing_step = 0;
  double alpha_nm_per_pal = 0.0;

  std::string to_csv() const;  // columns: step,wavelength_nm,intensity
};

/// Resolve the tuned mode and build the redshift map for a scenario.
TuningMap generate_tuning_map(const Scenario& sc);

/// Run every stage (mode spectra, tuning sweep, lifetimes, ODMR, Rabi),
/// write intermediate CSVs into out_dir, and return the target comparison.
Report run_scenario(const Scenario& sc, const TargetSet& targets, const std::string& out_dir);

}  // namespace ringqed::pipeline
