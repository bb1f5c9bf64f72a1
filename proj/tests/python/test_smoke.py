"""Smoke tests for the python bindings: a few closed-form numbers, one fit,
and one end-to-end scenario run."""

import json
import math
import os

import pytest

import ringqed


def test_purcell_formulas():
    assert ringqed.purcell_from_lifetime_ratio(15.85, 13.64, 0.031).f == pytest.approx(
        5.23, abs=0.01
    )
    assert ringqed.purcell_from_reference_lifetime(14.94, 0.031, 13.64, 15.85).f == pytest.approx(
        4.93, abs=0.03
    )
    with pytest.raises(ValueError):
        ringqed.purcell_from_lifetime_ratio(15.85, 13.64, 1.5)


def test_rates_round_trip():
    params = ringqed.EmitterParams.from_lifetime_and_dwf(15.85, 0.031, 14.94)
    assert 1.0 / ringqed.rate_off(params) == pytest.approx(15.85, rel=1e-12)
    tau_on = 1.0 / ringqed.rate_on(params, 5.23)
    assert tau_on == pytest.approx(13.64, abs=0.05)
    recovered = ringqed.purcell_from_lifetime_ratio(15.85, tau_on, 0.031).f
    assert recovered == pytest.approx(5.23, rel=1e-10)


def test_ring_resonances_and_fsr():
    geom = ringqed.RingGeometry(7.3, 2.30, 3.07)
    assert ringqed.free_spectral_range(geom, 1100.0) == pytest.approx(17.2, abs=0.1)
    modes = ringqed.resonance_wavelengths(geom, 1050.0, 1150.0, 1188.0)
    assert len(modes) >= 3
    spacings = [
        b.center_wavelength_nm - a.center_wavelength_nm for a, b in zip(modes, modes[1:])
    ]
    assert all(15.0 < s < 19.0 for s in spacings)


def test_zero_field_transitions():
    spin = ringqed.SpinParams(1333.75, 18.65, 0.10, 10.0)
    f_low, f_high = ringqed.zero_field_transitions(spin)
    assert (f_low, f_high) == (pytest.approx(1315.1), pytest.approx(1352.4))
    de = ringqed.d_e_from_transitions(f_low, f_high)
    assert de.d_mhz == pytest.approx(1333.75)
    assert de.e_mhz == pytest.approx(18.65)


def test_lorentzian_fit_recovers_q():
    model = ringqed.lorentzian_model()
    truth = [1.0, 1100.0, 0.8723, 0.05]
    x = [1096.0 + 8.0 * i / 199 for i in range(200)]
    y = [model(v, truth) for v in x]
    result = ringqed.fit(model, x, y, [], [1.2, 1100.3, 0.7, 0.04])
    assert result.converged
    q = ringqed.extract_q(result)
    assert q.q == pytest.approx(1261.0, abs=0.5)


def test_decay_trace_determinism():
    params = ringqed.EmitterParams.from_lifetime_and_dwf(15.85, 0.031, 14.94)
    a = ringqed.simulate_decay_trace(params, 0.0, 20000, 64, 100.0, 42, 0.02)
    b = ringqed.simulate_decay_trace(params, 0.0, 20000, 64, 100.0, 42, 0.02)
    assert a.counts == b.counts


def test_scenario_report_all_pass():
    repo = os.environ.get("RINGQED_REPO", os.path.join(os.path.dirname(__file__), "..", ".."))
    scenario = ringqed.load_scenario(os.path.join(repo, "configs", "paper.json"))
    targets = ringqed.load_targets(os.path.join(repo, "data", "paper_targets.json"))
    out_dir = os.path.join(os.environ.get("TMPDIR", "/tmp"), "ringqed-python-smoke")
    report = ringqed.run_scenario(scenario, targets, out_dir)
    assert report.all_pass()
    parsed = json.loads(report.to_json())
    assert parsed["summary"]["all_pass"] is True
    assert parsed["provenance"]["seed"] == scenario.seed
    names = {r["name"] for r in parsed["records"]}
    assert {"purcell_lifetime_ratio_exact", "q_d8.1", "odmr_f_low", "rabi_amplitude"} <= names
