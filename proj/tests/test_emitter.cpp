#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "ringqed/common.hpp"
#include "ringqed/emitter.hpp"
#include "ringqed/fit.hpp"

using namespace ringqed;
using namespace ringqed::emitter;

namespace {
constexpr double kPi = 3.14159265358979323846;
}

TEST_CASE("emitter params: derived channel lifetimes keep the rate identity exact") {
  const auto p = EmitterParams::from_lifetime_and_dwf(15.85, 0.031, 14.94);
  CHECK(std::abs(1.0 / p.tau_off_ns - (1.0 / p.tau_zpl_ns + 1.0 / p.tau_psb_ns)) < 1e-12);
  CHECK(p.xi_zpl == doctest::Approx(p.tau_off_ns / p.tau_zpl_ns).epsilon(1e-14));
  CHECK(p.tau_zpl_ns == doctest::Approx(511.29).epsilon(1e-4));
  CHECK(p.tau_psb_ns == doctest::Approx(16.357).epsilon(1e-4));
  CHECK_THROWS_AS(EmitterParams::from_lifetime_and_dwf(15.85, 1.2, 14.94), ValidationError);
  CHECK_THROWS_AS(EmitterParams::from_lifetime_and_dwf(-1.0, 0.031, 14.94), ValidationError);
}

TEST_CASE("off-resonance rate: equal channels, published budget, single-channel limit") {
  EmitterParams equal;
  equal.tau_zpl_ns = 2.0;
  equal.tau_psb_ns = 2.0;
  CHECK(rate_off(equal) == doctest::Approx(1.0).epsilon(1e-14));

  EmitterParams paper;
  paper.tau_zpl_ns = 511.3;
  paper.tau_psb_ns = 16.35;
  CHECK(rate_off(paper) == doctest::Approx(1.0 / 15.85).epsilon(2e-4));

  EmitterParams single;
  single.tau_zpl_ns = 10.0;
  single.tau_psb_ns = 1e15;
  CHECK(rate_off(single) == doctest::Approx(0.1).epsilon(1e-12));

  EmitterParams bad;
  bad.tau_zpl_ns = -2.0;
  bad.tau_psb_ns = 2.0;
  CHECK_THROWS_AS(rate_off(bad), ValidationError);
}

TEST_CASE("on-resonance rate: reduces to the uncoupled rate at f = 0, gives 13.64 ns at f = 5.23") {
  const auto p = EmitterParams::from_lifetime_and_dwf(15.85, 0.031, 14.94);
  CHECK(rate_on(p, 0.0) == doctest::Approx(rate_off(p)).epsilon(1e-14));
  CHECK(1.0 / rate_on(p, 5.23) == doctest::Approx(13.64).epsilon(0.003));
  CHECK_THROWS_AS(rate_on(p, -0.5), ValidationError);

  double previous = 1.0 / rate_on(p, 0.0);
  for (double f : {1.0, 10.0}) {
    const double tau = 1.0 / rate_on(p, f);
    CHECK(tau < previous);  // lifetime strictly decreasing in f
    previous = tau;
  }
}

TEST_CASE("Purcell from lifetime ratio: published values and edge cases") {
  CHECK(purcell_from_lifetime_ratio(15.85, 13.64, 0.031).f ==
        doctest::Approx(5.23).epsilon(0.01 / 5.23));
  CHECK(purcell_from_lifetime_ratio(15.85, 15.85, 0.031).f == doctest::Approx(0.0));
  CHECK(purcell_from_lifetime_ratio(15.85, 13.64, 0.038).f ==
        doctest::Approx(4.26).epsilon(0.01 / 4.26));

  const auto noisy = purcell_from_lifetime_ratio(15.85, 16.0, 0.031);
  CHECK(noisy.f < 0.0);
  CHECK(noisy.negative_warning);
  CHECK_THROWS_AS(purcell_from_lifetime_ratio(15.85, -1.0, 0.031), ValidationError);
  CHECK_THROWS_AS(purcell_from_lifetime_ratio(15.85, 13.64, 0.0), ValidationError);
}

TEST_CASE("Purcell from reference lifetime: published value and the tau_0 = tau_off identity") {
  CHECK(purcell_from_reference_lifetime(14.94, 0.031, 13.64, 15.85).f ==
        doctest::Approx(4.93).epsilon(0.03 / 4.93));
  CHECK(purcell_from_reference_lifetime(14.94, 0.031, 15.85, 15.85).f == doctest::Approx(0.0));

  // (tau_off/DWF)(1/tau_on - 1/tau_off) == (1/DWF)(tau_off/tau_on - 1), exactly.
  std::mt19937 gen(23);
  std::uniform_real_distribution<double> tau(1.0, 100.0), dwf(0.005, 0.5), frac(0.3, 1.0);
  for (int i = 0; i < 10000; ++i) {
    const double tau_off = tau(gen);
    const double tau_on = tau_off * frac(gen);
    const double xi = dwf(gen);
    const double via_ratio = purcell_from_lifetime_ratio(tau_off, tau_on, xi).f;
    const double via_reference = purcell_from_reference_lifetime(tau_off, xi, tau_on, tau_off).f;
    CHECK(std::abs(via_ratio - via_reference) <= 1e-10 * std::max(1.0, std::abs(via_ratio)));
  }
}

TEST_CASE("rate model round trip: recovering the injected Purcell factor") {
  std::mt19937 gen(29);
  std::uniform_real_distribution<double> tau(2.0, 80.0), dwf(0.005, 0.9), f_dist(0.0, 30.0);
  for (int i = 0; i < 2000; ++i) {
    const auto p = EmitterParams::from_lifetime_and_dwf(tau(gen), dwf(gen), 14.94);
    const double f = f_dist(gen);
    const double tau_on = 1.0 / rate_on(p, f);
    const double recovered = purcell_from_lifetime_ratio(p.tau_off_ns, tau_on, p.xi_zpl).f;
    CHECK(std::abs(recovered - f) <= 1e-10 * std::max(1.0, f));
  }
}

TEST_CASE("Purcell estimator monotonicity in tau_on and xi") {
  CHECK(purcell_from_lifetime_ratio(15.85, 13.0, 0.031).f >
        purcell_from_lifetime_ratio(15.85, 13.64, 0.031).f);
  CHECK(purcell_from_lifetime_ratio(15.85, 13.64, 0.031).f >
        purcell_from_lifetime_ratio(15.85, 13.64, 0.038).f);
}

TEST_CASE("DWF from spectrum: analytic-area oracle") {
  // Lorentzian ZPL with area 3.1 plus a broad Gaussian sideband with area
  // 96.9; areas are exact, so the integral ratio is known by construction.
  const double zpl_nm = 1078.6, zpl_fwhm = 0.5;
  const double zpl_area = 3.1, psb_area = 96.9;
  const double zpl_amp = zpl_area * 2.0 / (kPi * zpl_fwhm);
  const double psb_center = 1150.0, psb_sigma = 28.0;

  std::vector<double> grid, intensity;
  for (double x = 1040.0; x <= 1260.0 + 1e-9; x += 0.05) {
    grid.push_back(x);
    const double z = 2.0 * (x - zpl_nm) / zpl_fwhm;
    const double g = (x - psb_center) / psb_sigma;
    intensity.push_back(zpl_amp / (1.0 + z * z) +
                        psb_area * std::exp(-0.5 * g * g) / (psb_sigma * std::sqrt(2.0 * kPi)));
  }
  const double dwf = dwf_from_spectrum(grid, intensity, zpl_nm - 2.0, zpl_nm + 2.0);
  CHECK(dwf == doctest::Approx(0.031).epsilon(0.002 / 0.031));

  // Window spanning the full domain -> 1 exactly; zero-width window -> 0.
  CHECK(dwf_from_spectrum(grid, intensity, grid.front(), grid.back()) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(dwf_from_spectrum(grid, intensity, zpl_nm, zpl_nm) == doctest::Approx(0.0));

  CHECK_THROWS_AS(dwf_from_spectrum(grid, intensity, 1000.0, 1100.0), ValidationError);
  std::vector<double> flat(grid.size(), 0.7);
  CHECK_THROWS_WITH_AS(dwf_from_spectrum(grid, flat, zpl_nm - 2.0, zpl_nm + 2.0, 0.7),
                       "degenerate spectrum", ComputeError);
  CHECK(dwf_from_spectrum(grid, intensity, zpl_nm - 2.0, zpl_nm + 2.0, 0.0) >
        dwf_from_spectrum(grid, intensity, zpl_nm - 1.0, zpl_nm + 1.0, 0.0));  // widens monotonically
}

TEST_CASE("DWF stays in [0,1] and grows with the window") {
  std::mt19937 gen(31);
  std::uniform_real_distribution<double> amp(0.1, 5.0), width(0.2, 30.0);
  std::vector<double> grid;
  for (double x = 1000.0; x <= 1200.0; x += 0.5) grid.push_back(x);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> intensity(grid.size(), 0.0);
    for (int peak = 0; peak < 3; ++peak) {
      const double a = amp(gen), c = 1020.0 + 160.0 * (peak + 0.5) / 3.0, w = width(gen);
      for (std::size_t i = 0; i < grid.size(); ++i) {
        const double z = 2.0 * (grid[i] - c) / w;
        intensity[i] += a / (1.0 + z * z);
      }
    }
    double previous = 0.0;
    for (double half : {2.0, 10.0, 40.0, 90.0}) {
      const double v = dwf_from_spectrum(grid, intensity, 1100.0 - half, 1100.0 + half);
      CHECK(v >= previous - 1e-12);
      CHECK(v >= 0.0);
      CHECK(v <= 1.0 + 1e-12);
      previous = v;
    }
  }
}

TEST_CASE("Purcell vs detuning: Lorentzian filter values and symmetry") {
  cavity::CavityMode mode(55, 1078.6, 1261.0);
  CHECK(purcell_vs_detuning(5.23, mode, 0.0) == doctest::Approx(5.23).epsilon(1e-14));
  CHECK(purcell_vs_detuning(5.23, mode, 0.5 * mode.fwhm_nm()) ==
        doctest::Approx(5.23 / 2.0).epsilon(1e-12));
  CHECK(purcell_vs_detuning(5.23, mode, 1.0) == doctest::Approx(0.80).epsilon(0.015));

  std::mt19937 gen(37);
  std::uniform_real_distribution<double> det(0.0, 10.0);
  double previous = purcell_vs_detuning(5.23, mode, 0.0);
  for (double d = 0.1; d < 5.0; d += 0.1) {
    const double f = purcell_vs_detuning(5.23, mode, d);
    CHECK(f < previous);  // monotone decreasing in |delta|
    previous = f;
  }
  for (int i = 0; i < 100; ++i) {
    const double d = det(gen);
    CHECK(purcell_vs_detuning(5.23, mode, d) ==
          doctest::Approx(purcell_vs_detuning(5.23, mode, -d)).epsilon(1e-14));
  }
  CHECK_THROWS_AS(purcell_vs_detuning(-1.0, mode, 0.0), ValidationError);
}

TEST_CASE("decay trace simulation: determinism, binning edge cases, pile-up flag") {
  const auto p = EmitterParams::from_lifetime_and_dwf(15.85, 0.031, 14.94);

  const auto a = simulate_decay_trace(p, 0.0, 20000, 64, 100.0, 42, 0.02);
  const auto b = simulate_decay_trace(p, 0.0, 20000, 64, 100.0, 42, 0.02);
  CHECK(a.counts == b.counts);  // same seed, same histogram
  const auto c = simulate_decay_trace(p, 0.0, 20000, 64, 100.0, 43, 0.02);
  CHECK(a.counts != c.counts);

  const auto one_bin = simulate_decay_trace(p, 0.0, 5000, 1, 100.0, 7, 0.0);
  CHECK(one_bin.counts[0] == 5000);  // everything lands in the single bin

  CHECK_FALSE(a.pileup_warning);
  const auto slow = simulate_decay_trace(p, 0.0, 1000, 16, 20.0, 7, 0.0);
  CHECK(slow.pileup_warning);  // 15.85 ns >= 20/2 ns

  const std::uint64_t total = std::accumulate(a.counts.begin(), a.counts.end(), std::uint64_t{0});
  CHECK(total == 20000);
  CHECK_THROWS_AS(simulate_decay_trace(p, 0.0, 0, 64, 100.0, 1, 0.0), ValidationError);
  CHECK_THROWS_AS(simulate_decay_trace(p, 0.0, 100, 64, -1.0, 1, 0.0), ValidationError);
}

TEST_CASE("decay trace round trip: generated lifetime recovered by the fit engine") {
  const auto p = EmitterParams::from_lifetime_and_dwf(15.85, 0.031, 14.94);
  const auto trace = simulate_decay_trace(p, 0.0, 1000000, 512, 100.0, 2024, 0.01);
  const auto centers = trace.bin_centers_ns();
  std::vector<double> y(trace.counts.begin(), trace.counts.end());
  const auto model = fit::exp_decay_model();
  const auto result =
      fit::fit(model, centers, y, fit::poisson_weights(y), fit::initial_guess(model, centers, y));
  REQUIRE(result.converged);
  CHECK(std::abs(result.params[1] - 15.85) < 3.0 * result.sigmas[1]);
}

TEST_CASE("ZPL output enhancement: calibration against the 36-fold figure") {
  CHECK(zpl_output_enhancement(0.0, 1.0) == doctest::Approx(1.0));
  CHECK(zpl_output_enhancement(5.0, 6.0) == doctest::Approx(36.0).epsilon(1e-14));
  CHECK(zpl_output_enhancement(5.23, 6.0) == doctest::Approx(37.4).epsilon(2e-3));
  CHECK_THROWS_AS(zpl_output_enhancement(-0.1, 6.0), ValidationError);
  CHECK_THROWS_AS(zpl_output_enhancement(5.0, 0.0), ValidationError);
}
