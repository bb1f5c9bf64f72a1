#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ringqed/common.hpp"
#include "ringqed/rng.hpp"
#include "ringqed/spin.hpp"

using namespace ringqed;
using namespace ringqed::spin;

TEST_CASE("zero-field transitions: D +/- E against the published peaks") {
  const SpinParams p(1333.75, 18.65, 0.10, 10.0);
  const auto [f_low, f_high] = zero_field_transitions(p);
  CHECK(f_low == doctest::Approx(1315.1).epsilon(1e-12));
  CHECK(f_high == doctest::Approx(1352.4).epsilon(1e-12));

  const SpinParams degenerate(1333.75, 0.0, 0.10, 10.0);
  const auto [d1, d2] = zero_field_transitions(degenerate);
  CHECK(d1 == d2);

  // Literature check: D = 1334.5, E = 18.5 lands on 1316 / 1353 MHz.
  const SpinParams lit(1334.5, 18.5, 0.10, 10.0);
  const auto [l1, l2] = zero_field_transitions(lit);
  CHECK(l1 == doctest::Approx(1316.0).epsilon(1e-12));
  CHECK(l2 == doctest::Approx(1353.0).epsilon(1e-12));

  CHECK_THROWS_AS(SpinParams(10.0, 20.0, 0.10, 10.0), ValidationError);
  CHECK_THROWS_AS(SpinParams(1333.75, 18.65, 0.0, 10.0), ValidationError);
}

TEST_CASE("D/E from transitions: arithmetic, degenerate pair, swap flag, round trip") {
  const auto de = d_e_from_transitions(1315.1, 1352.4);
  CHECK(de.d_mhz == doctest::Approx(1333.75).epsilon(1e-12));
  CHECK(de.e_mhz == doctest::Approx(18.65).epsilon(1e-12));
  CHECK_FALSE(de.swapped);

  const auto same = d_e_from_transitions(1316.0, 1316.0);
  CHECK(same.d_mhz == 1316.0);
  CHECK(same.e_mhz == 0.0);

  const auto flipped = d_e_from_transitions(1352.4, 1315.1);
  CHECK(flipped.swapped);
  CHECK(flipped.d_mhz == doctest::Approx(1333.75).epsilon(1e-12));

  std::mt19937 gen(41);
  std::uniform_real_distribution<double> dd(500.0, 3000.0), ee(0.0, 100.0);
  for (int i = 0; i < 2000; ++i) {
    const double d = dd(gen);
    const double e = std::min(ee(gen), d - 1.0);
    const SpinParams p(d, e, 0.10, 10.0);
    const auto [f1, f2] = zero_field_transitions(p);
    const auto back = d_e_from_transitions(f1, f2);
    CHECK(std::abs(back.d_mhz - d) < 1e-12 * d);
    CHECK(std::abs(back.e_mhz - e) < 1e-9);
  }
}

TEST_CASE("ODMR spectrum: peak value, dilution scaling, tails, symmetry") {
  const SpinParams p(1333.75, 18.65, 0.10, 10.0);
  std::vector<double> grid;
  for (double f = 1240.0; f <= 1430.0; f += 0.5) grid.push_back(f);

  const auto ds = odmr_spectrum(p, 0.32, grid);
  // At the low peak the spectrum is (photon fraction x intrinsic contrast)
  // plus the tail of the partner peak 2E away.
  const auto at = [&](double f) {
    const auto it = std::min_element(grid.begin(), grid.end(), [&](double a, double b) {
      return std::abs(a - f) < std::abs(b - f);
    });
    return ds.contrast[it - grid.begin()];
  };
  const double cross = 1.0 / (1.0 + std::pow(2.0 * 37.3 / 10.0, 2));
  CHECK(at(1315.0) == doctest::Approx(0.032 * (1.0 + cross)).epsilon(2e-3));
  CHECK(at(1315.0) == doctest::Approx(0.032).epsilon(0.02));
  CHECK(at(1430.0) < 1e-3);  // far-detuned tail

  CHECK_THROWS_AS(odmr_spectrum(p, 0.0, grid), ValidationError);
  CHECK_THROWS_AS(odmr_spectrum(p, 1.2, grid), ValidationError);
  CHECK_THROWS_AS(odmr_spectrum(p, 0.5, {1300.0, 1300.0}), ValidationError);

  // Symmetric grid around D: spectrum invariant under f -> 2D - f.
  std::vector<double> sym;
  for (double f = 1333.75 - 80.0; f <= 1333.75 + 80.0 + 1e-9; f += 1.0) sym.push_back(f);
  const auto symmetric = odmr_spectrum(p, 0.62, sym);
  const std::size_t n = symmetric.contrast.size();
  for (std::size_t i = 0; i < n; ++i)
    CHECK(symmetric.contrast[i] ==
          doctest::Approx(symmetric.contrast[n - 1 - i]).epsilon(1e-12));

  // Linearity in the photon fraction; argmax pinned at the transitions.
  const auto half = odmr_spectrum(p, 0.16, grid);
  for (std::size_t i = 0; i < grid.size(); ++i)
    CHECK(ds.contrast[i] == doctest::Approx(2.0 * half.contrast[i]).epsilon(1e-12));
  const auto argmax = [&](const OdmrDataset& d) {
    return d.freq_mhz[std::max_element(d.contrast.begin(), d.contrast.end()) - d.contrast.begin()];
  };
  const double peak_full = argmax(ds), peak_half = argmax(half);
  CHECK(peak_full == peak_half);  // filtering shifts contrast, never position
}

TEST_CASE("contrast dilution: published path fractions reproduce the three contrasts") {
  CHECK(contrast_dilution(0.10, 1.0) == doctest::Approx(0.10));
  CHECK(contrast_dilution(0.10, 0.32) == doctest::Approx(0.032).epsilon(1e-14));
  CHECK(contrast_dilution(0.10, 0.48) == doctest::Approx(0.048).epsilon(1e-14));
  CHECK(contrast_dilution(0.10, 0.62) == doctest::Approx(0.062).epsilon(1e-14));
  const double ratio = contrast_dilution(0.10, 0.62) / contrast_dilution(0.10, 0.32);
  CHECK(ratio == doctest::Approx(1.9375).epsilon(1e-12));  // the "factor of two"
  CHECK(ratio > 1.8);
  CHECK(ratio < 2.1);
  CHECK_THROWS_AS(contrast_dilution(0.10, 0.0), ValidationError);
}

TEST_CASE("Rabi trace: unit start, pi pulse, bounds, trough envelope") {
  const double omega = 4.0, contrast = 0.062;
  std::vector<double> t = {0.0};
  CHECK(rabi_trace(omega, contrast, 600.0, t)[0] == 1.0);

  // pi pulse at 1/(2 omega) = 125 ns with a negligible envelope.
  const double t_pi = 1.0 / (2.0 * omega) * 1e3;
  CHECK(rabi_trace(omega, contrast, 1e15, {t_pi})[0] ==
        doctest::Approx(1.0 - contrast).epsilon(1e-12));

  std::vector<double> grid;
  for (double x = 0.0; x <= 2000.0; x += 1.0) grid.push_back(x);
  const auto s = rabi_trace(omega, contrast, 600.0, grid);
  for (double v : s) {
    CHECK(v <= 1.0 + 1e-12);
    CHECK(v >= 1.0 - contrast - 1e-12);
  }
  // Trough sequence decays monotonically toward the bright baseline.
  std::vector<double> troughs;
  for (double tt = t_pi; tt < 2000.0; tt += 2.0 * t_pi)
    troughs.push_back(rabi_trace(omega, contrast, 600.0, {tt})[0]);
  CHECK(std::is_sorted(troughs.begin(), troughs.end()));

  CHECK_THROWS_AS(rabi_trace(0.0, contrast, 600.0, grid), ValidationError);
  CHECK_THROWS_AS(rabi_trace(omega, contrast, 0.0, grid), ValidationError);
}

TEST_CASE("pulse sequence: validation and JSON round trip") {
  PulseSequence seq;
  seq.segments = {{PulseSegment::Kind::laser, 3000.0, 0.0},
                  {PulseSegment::Kind::microwave, 125.0, 1315.1},
                  {PulseSegment::Kind::wait, 300.0, 0.0},
                  {PulseSegment::Kind::readout, 3000.0, 0.0}};
  CHECK_NOTHROW(seq.validate());
  CHECK(seq.readout().duration_ns == 3000.0);
  REQUIRE(seq.microwave() != nullptr);
  CHECK(seq.microwave()->mw_frequency_mhz == 1315.1);

  const auto text = seq.to_json();
  const auto back = PulseSequence::from_json(text);
  REQUIRE(back.segments.size() == seq.segments.size());
  for (std::size_t i = 0; i < seq.segments.size(); ++i) {
    CHECK(back.segments[i].kind == seq.segments[i].kind);
    CHECK(back.segments[i].duration_ns == seq.segments[i].duration_ns);
  }

  PulseSequence no_readout;
  no_readout.segments = {{PulseSegment::Kind::laser, 3000.0, 0.0}};
  CHECK_THROWS_AS(no_readout.validate(), ValidationError);
  PulseSequence two_readouts = seq;
  two_readouts.segments.push_back({PulseSegment::Kind::readout, 100.0, 0.0});
  CHECK_THROWS_AS(two_readouts.validate(), ValidationError);
  PulseSequence bad_duration = seq;
  bad_duration.segments[0].duration_ns = 0.0;
  CHECK_THROWS_AS(bad_duration.validate(), ValidationError);
}

TEST_CASE("pulse engine: bright baseline, determinism, Rabi shape at chi2/dof < 2") {
  PulseSequence seq;
  seq.segments = {{PulseSegment::Kind::laser, 3000.0, 0.0},
                  {PulseSegment::Kind::microwave, 100.0, 1315.1},
                  {PulseSegment::Kind::readout, 3000.0, 0.0}};
  const SpinParams p(1333.75, 18.65, 0.10, 10.0);
  ReadoutModel rates;
  rates.bright_rate_per_ns = 0.002;
  rates.photon_fraction = 0.62;
  rates.rabi_frequency_mhz = 4.0;
  rates.rabi_decay_ns = 600.0;

  SweepSpec sweep;
  sweep.axis = SweepSpec::Axis::mw_duration;
  for (double t = 0.0; t <= 500.0; t += 10.0) sweep.values.push_back(t);

  const std::uint64_t reps = 100000;
  const auto counts = simulate_pulse_sequence(seq, p, rates, sweep, reps, 99);
  const auto counts_again = simulate_pulse_sequence(seq, p, rates, sweep, reps, 99);
  CHECK(counts == counts_again);

  // Zero MW duration leaves the spin bright.
  const double bright = static_cast<double>(reps) * 3000.0 * rates.bright_rate_per_ns;
  CHECK(std::abs(static_cast<double>(counts[0]) - bright) < 3.0 * std::sqrt(bright));

  // Normalized sweep reproduces the analytic Rabi trace at Poisson precision.
  const double c_obs = contrast_dilution(p.intrinsic_contrast, rates.photon_fraction);
  const auto expected = rabi_trace(rates.rabi_frequency_mhz, c_obs, rates.rabi_decay_ns,
                                   sweep.values);
  double chi2 = 0.0;
  for (std::size_t i = 0; i < sweep.values.size(); ++i) {
    const double mu = bright * expected[i];
    chi2 += std::pow(static_cast<double>(counts[i]) - mu, 2) / mu;
  }
  CHECK(chi2 / sweep.values.size() < 2.0);

  // Frequency axis: dips at both transitions.
  SweepSpec freq_sweep;
  freq_sweep.axis = SweepSpec::Axis::mw_frequency;
  for (double f = 1240.0; f <= 1430.0; f += 2.0) freq_sweep.values.push_back(f);
  const auto odmr_counts = simulate_pulse_sequence(seq, p, rates, freq_sweep, reps, 17);
  const auto at = [&](double f) {
    std::size_t best = 0;
    for (std::size_t i = 0; i < freq_sweep.values.size(); ++i)
      if (std::abs(freq_sweep.values[i] - f) < std::abs(freq_sweep.values[best] - f)) best = i;
    return static_cast<double>(odmr_counts[best]);
  };
  CHECK(at(1315.1) < 0.98 * bright);
  CHECK(at(1352.4) < 0.98 * bright);
  CHECK(std::abs(at(1250.0) - bright) < 4.0 * std::sqrt(bright));

  PulseSequence no_readout;
  no_readout.segments = {{PulseSegment::Kind::laser, 3000.0, 0.0}};
  CHECK_THROWS_AS(simulate_pulse_sequence(no_readout, p, rates, sweep, reps, 1), ValidationError);
  CHECK_THROWS_AS(simulate_pulse_sequence(seq, p, rates, sweep, 0, 1), ValidationError);
}

TEST_CASE("derived seeds decorrelate parallel sweep points") {
  // Identical adjacent indices must not produce identical streams.
  const auto s0 = derive_seed(7, "pulse-sweep", 0);
  const auto s1 = derive_seed(7, "pulse-sweep", 1);
  CHECK(s0 != s1);
  Rng a(s0), b(s1);
  int equal = 0;
  for (int i = 0; i < 64; ++i)
    if (a.next_u64() == b.next_u64()) ++equal;
  CHECK(equal == 0);
}
