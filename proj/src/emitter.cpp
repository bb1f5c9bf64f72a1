#include "ringqed/emitter.hpp"

#include <algorithm>
#include <cmath>

#include "ringqed/common.hpp"
#include "ringqed/csv.hpp"
#include "ringqed/rng.hpp"

namespace ringqed::emitter {

EmitterParams EmitterParams::from_lifetime_and_dwf(double tau_off_ns, double xi_zpl,
                                                   double tau_0_ns) {
  if (!(tau_off_ns > 0.0)) throw ValidationError("tau_off must be positive");
  if (!(xi_zpl > 0.0 && xi_zpl < 1.0)) throw ValidationError("xi_zpl must lie in (0,1)");
  if (!(tau_0_ns > 0.0)) throw ValidationError("tau_0 must be positive");
  EmitterParams p;
  p.tau_off_ns = tau_off_ns;
  p.xi_zpl = xi_zpl;
  p.tau_0_ns = tau_0_ns;
  p.tau_zpl_ns = tau_off_ns / xi_zpl;
  p.tau_psb_ns = tau_off_ns / (1.0 - xi_zpl);
  return p;
}

std::vector<double> DecayTrace::bin_centers_ns() const {
  std::vector<double> centers(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i)
    centers[i] = 0.5 * (bin_edges_ns[i] + bin_edges_ns[i + 1]);
  return centers;
}

std::string DecayTrace::to_csv() const {
  std::vector<double> c(counts.begin(), counts.end());
  return csv_to_string({"time_ns", "counts"}, {bin_centers_ns(), c});
}

double rate_off(const EmitterParams& p) {
  if (!(p.tau_zpl_ns > 0.0) || !(p.tau_psb_ns > 0.0))
    throw ValidationError("channel lifetimes must be positive");
  return 1.0 / p.tau_zpl_ns + 1.0 / p.tau_psb_ns;
}

double rate_on(const EmitterParams& p, double f) {
  if (f < 0.0) throw ValidationError("Purcell factor must be nonnegative");
  if (!(p.tau_zpl_ns > 0.0) || !(p.tau_psb_ns > 0.0))
    throw ValidationError("channel lifetimes must be positive");
  return (f + 1.0) / p.tau_zpl_ns + 1.0 / p.tau_psb_ns;
}

PurcellResult purcell_from_lifetime_ratio(double tau_off_ns, double tau_on_ns, double xi_zpl) {
  if (!(tau_off_ns > 0.0) || !(tau_on_ns > 0.0))
    throw ValidationError("lifetimes must be positive");
  if (!(xi_zpl > 0.0 && xi_zpl < 1.0)) throw ValidationError("xi_zpl must lie in (0,1)");
  PurcellResult r;
  r.method = PurcellMethod::lifetime_ratio;
  r.tau_off_ns = tau_off_ns;
  r.tau_on_ns = tau_on_ns;
  r.dwf = xi_zpl;
  r.f = (tau_off_ns / tau_on_ns - 1.0) / xi_zpl;
  r.negative_warning = tau_on_ns > tau_off_ns;  // noise can invert the ratio
  return r;
}

PurcellResult purcell_from_reference_lifetime(double tau_0_ns, double dwf, double tau_on_ns,
                                              double tau_off_ns) {
  if (!(tau_0_ns > 0.0) || !(tau_on_ns > 0.0) || !(tau_off_ns > 0.0))
    throw ValidationError("lifetimes must be positive");
  if (!(dwf > 0.0 && dwf < 1.0)) throw ValidationError("DWF must lie in (0,1)");
  PurcellResult r;
  r.method = PurcellMethod::reference_lifetime;
  r.tau_0_ns = tau_0_ns;
  r.tau_on_ns = tau_on_ns;
  r.tau_off_ns = tau_off_ns;
  r.dwf = dwf;
  r.f = (tau_0_ns / dwf) * (1.0 / tau_on_ns - 1.0 / tau_off_ns);
  r.negative_warning = tau_on_ns > tau_off_ns;
  return r;
}

namespace {

double trapezoid(const std::vector<double>& x, const std::vector<double>& y, double a, double b,
                 double baseline) {
  // Integrate the piecewise-linear interpolant of (x, y - baseline) over [a, b].
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    double x0 = x[i], x1 = x[i + 1];
    if (x1 <= a || x0 >= b) continue;
    double y0 = y[i] - baseline, y1 = y[i + 1] - baseline;
    const double lo = std::max(x0, a), hi = std::min(x1, b);
    const double t0 = (lo - x0) / (x1 - x0), t1 = (hi - x0) / (x1 - x0);
    const double ylo = y0 + (y1 - y0) * t0, yhi = y0 + (y1 - y0) * t1;
    sum += 0.5 * (ylo + yhi) * (hi - lo);
  }
  return sum;
}

}  // namespace

double dwf_from_spectrum(const std::vector<double>& wavelength_nm,
                         const std::vector<double>& intensity, double window_min_nm,
                         double window_max_nm, double flat_baseline) {
  if (wavelength_nm.empty() || wavelength_nm.size() != intensity.size())
    throw ValidationError("spectrum must be nonempty with matching lengths");
  if (!std::is_sorted(wavelength_nm.begin(), wavelength_nm.end()))
    throw ValidationError("spectrum wavelengths must be sorted ascending");
  if (window_min_nm > window_max_nm) throw ValidationError("ZPL window inverted");
  if (window_min_nm < wavelength_nm.front() || window_max_nm > wavelength_nm.back())
    throw ValidationError("ZPL window outside spectrum domain");
  const double total = trapezoid(wavelength_nm, intensity, wavelength_nm.front(),
                                 wavelength_nm.back(), flat_baseline);
  if (!(std::abs(total) > 0.0)) throw ComputeError("degenerate spectrum");
  const double zpl = trapezoid(wavelength_nm, intensity, window_min_nm, window_max_nm,
                               flat_baseline);
  return zpl / total;
}

double purcell_vs_detuning(double f_max, const cavity::CavityMode& mode, double detuning_nm) {
  if (f_max < 0.0) throw ValidationError("f_max must be nonnegative");
  const double z = 2.0 * detuning_nm / mode.fwhm_nm();
  return f_max / (1.0 + z * z);
}

DecayTrace simulate_decay_trace(const EmitterParams& p, double f, std::uint64_t total_counts,
                                int n_bins, double rep_period_ns, std::uint64_t seed,
                                double background_fraction) {
  if (total_counts == 0) throw ValidationError("total_counts must be positive");
  if (n_bins <= 0) throw ValidationError("n_bins must be positive");
  if (!(rep_period_ns > 0.0)) throw ValidationError("repetition period must be positive");
  if (background_fraction < 0.0 || background_fraction >= 1.0)
    throw ValidationError("background fraction must lie in [0,1)");

  const double lifetime = 1.0 / rate_on(p, f);
  DecayTrace trace;
  trace.rep_period_ns = rep_period_ns;
  trace.pileup_warning = lifetime >= 0.5 * rep_period_ns;
  trace.bin_edges_ns.resize(n_bins + 1);
  const double width = rep_period_ns / n_bins;
  for (int i = 0; i <= n_bins; ++i) trace.bin_edges_ns[i] = i * width;
  trace.counts.assign(n_bins, 0);

  Rng rng(seed);
  const auto n_background =
      static_cast<std::uint64_t>(std::llround(background_fraction * static_cast<double>(total_counts)));
  const std::uint64_t n_signal = total_counts - n_background;
  for (std::uint64_t i = 0; i < n_signal; ++i) {
    const double t = std::fmod(rng.exponential(lifetime), rep_period_ns);
    auto bin = static_cast<std::size_t>(t / width);
    if (bin >= trace.counts.size()) bin = trace.counts.size() - 1;
    ++trace.counts[bin];
  }
  for (std::uint64_t i = 0; i < n_background; ++i) {
    auto bin = static_cast<std::size_t>(rng.uniform() * n_bins);
    if (bin >= trace.counts.size()) bin = trace.counts.size() - 1;
    ++trace.counts[bin];
  }
  return trace;
}

double zpl_output_enhancement(double f, double eta_ratio) {
  if (f < 0.0) throw ValidationError("Purcell factor must be nonnegative");
  if (!(eta_ratio > 0.0)) throw ValidationError("eta_ratio must be positive");
  return (f + 1.0) * eta_ratio;
}

}  // namespace ringqed::emitter
