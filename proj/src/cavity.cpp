#include "ringqed/cavity.hpp"

#include <algorithm>
#include <cmath>

#include "ringqed/common.hpp"

namespace ringqed::cavity {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kFixedPointTolNm = 1e-6;
constexpr int kFixedPointMaxIter = 100;
}  // namespace

RingGeometry::RingGeometry(double diameter_um_, double n_eff_, double n_g_,
                           double reference_wavelength_nm_)
    : diameter_um(diameter_um_),
      n_eff0(n_eff_),
      n_g(n_g_),
      reference_wavelength_nm(reference_wavelength_nm_) {
  if (!(diameter_um > 0.0)) throw ValidationError("ring diameter must be positive");
  if (!(n_eff0 >= 1.0)) throw ValidationError("effective index must be >= 1");
  if (!(reference_wavelength_nm > 0.0))
    throw ValidationError("reference wavelength must be positive");
  if (n_g < n_eff0 - 1e-9)
    throw ValidationError("group index below effective index (anomalous dispersion not modeled)");
}

CavityMode::CavityMode(int m, double center_nm, double q, double offset_nm)
    : azimuthal_order(m), center_wavelength_nm(center_nm), q_factor(q),
      tuning_offset_nm(offset_nm) {
  if (m <= 0) throw ValidationError("azimuthal order must be positive");
  if (!(center_nm > 0.0)) throw ValidationError("mode center must be positive");
  if (!(q > 0.0)) throw ValidationError("quality factor must be positive");
  if (offset_nm < 0.0) throw ValidationError("tuning offset cannot be negative (condensation only redshifts)");
}

double TuningState::total_dose_pal() const {
  double s = 0.0;
  for (const auto& inj : injections) s += inj.pressure_pa * inj.volume_l;
  return s;
}

double TuningState::cumulative_shift_nm() const {
  return std::min(alpha_nm_per_pal * total_dose_pal(), saturation_shift_nm);
}

namespace {

// lambda <- pi*d*n_eff(lambda)/m; the dispersion slope is weak, so this is a
// contraction with factor ~ |slope|*lambda/n_eff.
double solve_resonance(const RingGeometry& geom, int m) {
  double lambda = geom.circumference_nm() * geom.n_eff0 / m;
  for (int it = 0; it < kFixedPointMaxIter; ++it) {
    const double next = geom.circumference_nm() * geom.n_eff(lambda) / m;
    if (std::abs(next - lambda) < kFixedPointTolNm) return next;
    if (!std::isfinite(next) || next <= 0.0)
      throw ComputeError("dispersion iteration diverged");
    lambda = next;
  }
  throw ComputeError("dispersion iteration diverged");
}

}  // namespace

std::vector<CavityMode> resonance_wavelengths(const RingGeometry& geom, double band_min_nm,
                                              double band_max_nm, double q_factor) {
  if (!(band_min_nm > 0.0)) throw ValidationError("band minimum must be positive");
  std::vector<CavityMode> modes;
  if (!(band_max_nm >= band_min_nm)) return modes;

  // Bracket the candidate orders generously; dispersion moves them a little.
  const double l_lo = geom.circumference_nm() * geom.n_eff(band_max_nm);
  const double l_hi = geom.circumference_nm() * geom.n_eff(band_min_nm);
  int m_min = std::max(1, static_cast<int>(std::floor(std::min(l_lo, l_hi) / band_max_nm)) - 2);
  int m_max = static_cast<int>(std::ceil(std::max(l_lo, l_hi) / band_min_nm)) + 2;

  for (int m = m_min; m <= m_max; ++m) {
    const double lambda = solve_resonance(geom, m);
    if (lambda >= band_min_nm && lambda <= band_max_nm)
      modes.emplace_back(m, lambda, q_factor);
  }
  std::sort(modes.begin(), modes.end(), [](const CavityMode& a, const CavityMode& b) {
    return a.center_wavelength_nm < b.center_wavelength_nm;
  });
  return modes;
}

double free_spectral_range(const RingGeometry& geom, double wavelength_nm) {
  if (!(wavelength_nm > 0.0)) throw ValidationError("wavelength must be positive");
  return wavelength_nm * wavelength_nm / (kPi * geom.diameter_um * 1e3 * geom.n_g);
}

std::vector<double> mode_lineshape(const CavityMode& mode, const std::vector<double>& grid_nm) {
  if (!std::is_sorted(grid_nm.begin(), grid_nm.end()))
    throw ValidationError("wavelength grid must be sorted ascending");
  const double lc = mode.effective_center_nm();
  const double fwhm = mode.fwhm_nm();
  std::vector<double> out(grid_nm.size());
  for (std::size_t i = 0; i < grid_nm.size(); ++i) {
    const double z = 2.0 * (grid_nm[i] - lc) / fwhm;
    out[i] = 1.0 / (1.0 + z * z);
  }
  return out;
}

std::pair<TuningState, CavityMode> apply_injection(const TuningState& state,
                                                   const CavityMode& mode, double pressure_pa,
                                                   double volume_l) {
  if (pressure_pa < 0.0 || volume_l < 0.0)
    throw ValidationError("injection pressure and volume must be nonnegative");
  TuningState next = state;
  next.injections.push_back({pressure_pa, volume_l});
  CavityMode tuned = mode;
  const double headroom = std::max(0.0, next.saturation_shift_nm - mode.tuning_offset_nm);
  tuned.tuning_offset_nm =
      mode.tuning_offset_nm + std::min(next.alpha_nm_per_pal * pressure_pa * volume_l, headroom);
  return {std::move(next), tuned};
}

std::pair<TuningState, CavityMode> reset_tuning(const TuningState& state, const CavityMode& mode) {
  TuningState next = state;
  next.injections.clear();
  CavityMode reset = mode;
  reset.tuning_offset_nm = 0.0;
  return {std::move(next), reset};
}

double detuning(const CavityMode& mode, double target_wavelength_nm) {
  return mode.effective_center_nm() - target_wavelength_nm;
}

}  // namespace ringqed::cavity
