#pragma once

#include <utility>
#include <vector>

namespace ringqed::cavity {

/// Parametric micro-ring: diameter plus a linear-dispersion effective index.
/// n_eff(lambda) = n_eff0 + slope * (lambda - reference_wavelength), with the
/// slope pinned by the group index via n_g = n_eff(lambda) - lambda * slope,
/// an exact identity for every lambda under linear dispersion.
struct RingGeometry {
  double diameter_um = 8.1;
  double n_eff0 = 2.30;                    // effective index at the reference wavelength
  double n_g = 3.00;                       // group index (constant under linear dispersion)
  double reference_wavelength_nm = 1100.0;

  RingGeometry() = default;
  RingGeometry(double diameter_um_, double n_eff_, double n_g_,
               double reference_wavelength_nm_ = 1100.0);

  double circumference_nm() const { return 3.14159265358979323846 * diameter_um * 1e3; }
  double dispersion_slope_per_nm() const { return (n_eff0 - n_g) / reference_wavelength_nm; }
  double n_eff(double wavelength_nm) const {
    return n_eff0 + dispersion_slope_per_nm() * (wavelength_nm - reference_wavelength_nm);
  }
  double group_index(double) const { return n_g; }
};

struct CavityMode {
  int azimuthal_order = 0;
  double center_wavelength_nm = 0.0;
  double q_factor = 1.0;
  double tuning_offset_nm = 0.0;  // cumulative condensation redshift, >= 0

  CavityMode() = default;
  CavityMode(int m, double center_nm, double q, double offset_nm = 0.0);

  double effective_center_nm() const { return center_wavelength_nm + tuning_offset_nm; }
  /// FWHM linewidth, delta_lambda = lambda_c / Q.
  double fwhm_nm() const { return effective_center_nm() / q_factor; }

  bool operator==(const CavityMode&) const = default;
};

struct Injection {
  double pressure_pa = 0.0;
  double volume_l = 0.0;
};

/// Gas-condensation tuning: redshift linear in total injected pressure*volume,
/// hard-capped at saturation_shift_nm.
struct TuningState {
  std::vector<Injection> injections;
  double alpha_nm_per_pal = 0.4;  // nm per (Pa*L)
  double saturation_shift_nm = 10.0;

  double total_dose_pal() const;
  double cumulative_shift_nm() const;
};

/// All azimuthal orders whose resonance falls inside [band_min, band_max] nm,
/// sorted by wavelength ascending. Each resonance solves m*lambda =
/// pi*d*n_eff(lambda) by fixed-point iteration (tolerance 1e-6 nm, 100 iters).
/// An empty/inverted band yields an empty list.
std::vector<CavityMode> resonance_wavelengths(const RingGeometry& geom, double band_min_nm,
                                              double band_max_nm, double q_factor = 1000.0);

/// FSR = lambda^2 / (pi * d * n_g).
double free_spectral_range(const RingGeometry& geom, double wavelength_nm);

/// Unit-amplitude Lorentzian line, L = 1 / (1 + (2(lambda-lc)/fwhm)^2) with
/// lc the tuned center. Grid must be sorted ascending.
std::vector<double> mode_lineshape(const CavityMode& mode, const std::vector<double>& grid_nm);

/// One gas injection: appends to the log and redshifts the mode by
/// min(alpha*P*V, remaining headroom below saturation).
std::pair<TuningState, CavityMode> apply_injection(const TuningState& state,
                                                   const CavityMode& mode, double pressure_pa,
                                                   double volume_l);

/// Warm-up reset: clears the log and the tuning offset.
std::pair<TuningState, CavityMode> reset_tuning(const TuningState& state, const CavityMode& mode);

/// Signed detuning of the (tuned) mode from a target wavelength; negative
/// means the mode sits blue of the target.
double detuning(const CavityMode& mode, double target_wavelength_nm);

}  // namespace ringqed::cavity
