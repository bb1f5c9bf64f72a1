#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ringqed/cavity.hpp"

namespace ringqed::emitter {

/// PL4 radiative budget. The channel lifetimes are derived fields:
///   tau_zpl = tau_off / xi_zpl,   tau_psb = tau_off / (1 - xi_zpl),
/// which keeps 1/tau_off = 1/tau_zpl + 1/tau_psb an exact identity.
struct EmitterParams {
  double tau_zpl_ns = 0.0;
  double tau_psb_ns = 0.0;
  double tau_off_ns = 0.0;   // off-resonance total lifetime
  double tau_0_ns = 0.0;     // unpatterned-film reference lifetime
  double xi_zpl = 0.0;       // branching ratio into the ZPL (DWF)

  EmitterParams() = default;
  /// Build from the measurable quantities (total lifetime, DWF, reference).
  static EmitterParams from_lifetime_and_dwf(double tau_off_ns, double xi_zpl, double tau_0_ns);
};

/// Time-binned single-photon arrival histogram over one repetition period.
struct DecayTrace {
  std::vector<double> bin_edges_ns;     // n_bins + 1 edges, within one period
  std::vector<std::uint64_t> counts;    // n_bins
  double rep_period_ns = 0.0;
  bool pileup_warning = false;          // lifetime >= rep_period / 2

  std::vector<double> bin_centers_ns() const;
  std::string to_csv() const;           // columns: time_ns,counts
};

enum class PurcellMethod { lifetime_ratio, reference_lifetime };

struct PurcellResult {
  double f = 0.0;
  PurcellMethod method = PurcellMethod::lifetime_ratio;
  bool negative_warning = false;  // noisy lifetimes can give tau_on > tau_off
  // inputs echoed
  double tau_on_ns = 0.0;
  double tau_off_ns = 0.0;
  double dwf = 0.0;
  double tau_0_ns = 0.0;
};

/// Total off-resonance emission rate, 1/tau_zpl + 1/tau_psb (1/ns).
double rate_off(const EmitterParams& p);

/// On-resonance rate with Purcell factor f on the ZPL channel:
/// (f+1)/tau_zpl + 1/tau_psb (1/ns).
double rate_on(const EmitterParams& p, double f);

/// F = (1/xi_zpl) * (tau_off/tau_on - 1) from the two measured lifetimes.
PurcellResult purcell_from_lifetime_ratio(double tau_off_ns, double tau_on_ns, double xi_zpl);

/// F = (tau_0/dwf) * (1/tau_on - 1/tau_off) against the film reference.
PurcellResult purcell_from_reference_lifetime(double tau_0_ns, double dwf, double tau_on_ns,
                                              double tau_off_ns);

/// ZPL fraction of a PL spectrum: trapezoidal integral over the ZPL window
/// divided by the full-domain integral, after subtracting a flat baseline.
double dwf_from_spectrum(const std::vector<double>& wavelength_nm,
                         const std::vector<double>& intensity, double window_min_nm,
                         double window_max_nm, double flat_baseline = 0.0);

/// Lorentzian cavity filter on the Purcell factor:
/// F(delta) = f_max / (1 + (2*delta/fwhm)^2).
double purcell_vs_detuning(double f_max, const cavity::CavityMode& mode, double detuning_nm);

/// Synthetic time-correlated decay histogram: `total_counts` exponential
/// arrivals at lifetime 1/rate_on(p, f), wrapped modulo the laser repetition
/// period, plus a flat background fraction. Deterministic for a given seed.
DecayTrace simulate_decay_trace(const EmitterParams& p, double f, std::uint64_t total_counts,
                                int n_bins, double rep_period_ns, std::uint64_t seed,
                                double background_fraction = 0.0);

/// On/off ZPL intensity ratio at the output grating, (f+1)*eta_ratio;
/// eta_ratio bundles the on-resonance waveguide redirection gain.
double zpl_output_enhancement(double f, double eta_ratio);

}  // namespace ringqed::emitter
