#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace ringqed::spin {

/// Spin-1 zero-field parameters. With H = D*Sz^2 + E*(Sx^2 - Sy^2) the two
/// ground-state transitions sit at D - E and D + E.
struct SpinParams {
  double d_zfs_mhz = 1333.75;       // axial zero-field splitting
  double e_zfs_mhz = 18.65;         // transverse splitting
  double intrinsic_contrast = 0.10; // undiluted ODMR contrast, in (0,1)
  double odmr_linewidth_mhz = 10.0; // per-peak FWHM

  SpinParams() = default;
  SpinParams(double d_mhz, double e_mhz, double contrast, double linewidth_mhz);
};

enum class CollectionPath { confocal_off, grating_off, grating_on };

const char* to_string(CollectionPath path);

struct OdmrDataset {
  std::vector<double> freq_mhz;   // strictly increasing
  std::vector<double> contrast;   // dimensionless, positive-peak convention
  CollectionPath collection_path = CollectionPath::confocal_off;

  std::string to_csv() const;     // columns: freq_MHz,contrast
};

struct PulseSegment {
  enum class Kind { laser, microwave, wait, readout };
  Kind kind = Kind::laser;
  double duration_ns = 0.0;
  double mw_frequency_mhz = 0.0;  // microwave segments only
};

/// One repetition of the experiment sequence; must contain exactly one
/// readout segment, all durations positive.
struct PulseSequence {
  std::vector<PulseSegment> segments;

  void validate() const;
  const PulseSegment& readout() const;
  const PulseSegment* microwave() const;  // first MW segment, if any
  std::string to_json() const;
  static PulseSequence from_json(const std::string& text);
};

/// Sweep axis for the pulse engine: vary the MW pulse duration (Rabi) or the
/// MW frequency (ODMR).
struct SweepSpec {
  enum class Axis { mw_duration, mw_frequency };
  Axis axis = Axis::mw_duration;
  std::vector<double> values;  // ns for duration, MHz for frequency
};

/// Count-rate model for the readout window.
struct ReadoutModel {
  double bright_rate_per_ns = 0.01;      // PL rate at spin-bright baseline, per repetition
  double background_rate_per_ns = 0.0;   // spin-independent rate
  double photon_fraction = 1.0;          // PL4 share of collected photons, in (0,1]
  double rabi_frequency_mhz = 4.0;       // used on the duration axis
  double rabi_decay_ns = 600.0;
};

/// (D - E, D + E).
std::pair<double, double> zero_field_transitions(const SpinParams& p);

struct DEResult {
  double d_mhz = 0.0;
  double e_mhz = 0.0;
  bool swapped = false;  // inputs arrived out of order and were swapped
};

/// Inverse of zero_field_transitions: D = (f1+f2)/2, E = (f2-f1)/2.
DEResult d_e_from_transitions(double f1_mhz, double f2_mhz);

/// Two unit-peak Lorentzians at D-E and D+E, scaled by photon_fraction times
/// the intrinsic contrast (dilution by non-PL4 photons).
OdmrDataset odmr_spectrum(const SpinParams& p, double photon_fraction,
                          const std::vector<double>& freq_grid_mhz,
                          CollectionPath path = CollectionPath::confocal_off);

/// Observed contrast after photon-fraction dilution.
double contrast_dilution(double intrinsic_contrast, double path_fraction);

/// Normalized Rabi signal S(t) = 1 - (C/2)(1 - cos(2 pi f t)) exp(-t/T),
/// with f in MHz and time in ns; S(0) = 1.
std::vector<double> rabi_trace(double rabi_frequency_mhz, double contrast, double decay_time_ns,
                               const std::vector<double>& t_grid_ns);

/// Poisson photon counts per sweep point, expected value
/// repetitions * readout_duration * rate * S. Deterministic given the seed;
/// each sweep point draws from its own derived stream so points may be
/// evaluated in parallel.
std::vector<std::uint64_t> simulate_pulse_sequence(const PulseSequence& seq, const SpinParams& p,
                                                   const ReadoutModel& rates,
                                                   const SweepSpec& sweep,
                                                   std::uint64_t repetitions, std::uint64_t seed);

}  // namespace ringqed::spin
