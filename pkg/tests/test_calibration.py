import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dqdcavity import calibration as cal
from dqdcavity import presets
from dqdcavity.data_io import generate_thermal_series
from dqdcavity.errors import InsufficientDataError, SingularGeometryError, ValidationError
from dqdcavity.units import K_B_EV, dbm_to_watt, watt_to_dbm


def test_bare_coupling_values():
    pair = presets.DEVICE_TUNINGS["pair"]
    tcdev = presets.DEVICE_TUNINGS["tc"]
    assert cal.bare_coupling_g0(pair.alpha_s1_eps, pair.fr, pair.z0r) == pytest.approx(5.504e6, abs=1e3)
    assert cal.bare_coupling_g0(tcdev.alpha_s1_eps, tcdev.fr, tcdev.z0r) == pytest.approx(4.128e6, abs=1e3)


def test_kappa_from_quality_factors():
    fr = presets.DEVICE_TUNINGS["pair"].fr
    k = cal.kappa_from_q(fr, presets.Q_LOADED)
    assert k == pytest.approx(124.49e3, abs=10)
    s = cal.kappa_sigma(fr, presets.Q_LOADED, presets.Q_LOADED_SIGMA)
    # quadrature of 32 and 46 over two samples
    assert s == pytest.approx(fr / 10473**2 * math.hypot(32, 46) / 2, rel=1e-12)
    with pytest.raises(ValidationError):
        cal.kappa_from_q(fr, [])
    with pytest.raises(ValidationError):
        cal.kappa_sigma(fr, [1, 2], [1])


def test_power_budget_chains():
    for key in ("pair", "tc"):
        gen, att = presets.POWER_CHAINS[key]
        p = cal.power_budget(cal.PowerBudget(gen, att))
        assert p == pytest.approx(20e-12, rel=0.01)
    with pytest.raises(ValidationError):
        cal.PowerBudget(0.0, (-5.0,))
    with pytest.raises(ValidationError):
        cal.PowerBudget(0.0, (), z0g=0.0)


def test_dbm_roundtrip():
    assert dbm_to_watt(0.0) == pytest.approx(1e-3)
    assert watt_to_dbm(dbm_to_watt(-77.0)) == pytest.approx(-77.0)


def test_drive_estimates():
    budget = cal.PowerBudget(*presets.POWER_CHAINS["pair"])
    p3 = cal.estimate_drive("pair-P3", budget, 0.09, 124.49e3, beta=2.89e-3)
    assert round(p3.eps_q / 1e6) == -137
    assert round(p3.n_photons) == 41
    pair = presets.BEST_FITS["pair"]
    s1 = cal.estimate_drive("pair-S1", budget, 0.09, 124.49e3, beta=pair.beta2, channel="S1",
                            c_ratio=pair.c_eps2 / pair.c_eps3)
    assert round(s1.eps_q / 1e6) == 27
    assert round(s1.n_photons) == 30
    with pytest.raises(ValidationError):
        cal.estimate_drive("x", budget, 0.09, 1e5, 1e-3, channel="S1")
    with pytest.raises(ValidationError):
        cal.estimate_drive("x", budget, 0.09, 1e5, 1e-3, channel="P2")


def test_photon_number_value():
    assert cal.photon_number(397e3, 124.5e3) == pytest.approx(40.67, abs=0.01)
    with pytest.raises(ValidationError):
        cal.photon_number(1.0, 0.0)


def test_lever_arms_from_fixture():
    arms = cal.lever_arms(cal.SlopeSet(*[getattr(presets.SLOPES, k) for k in
                                         ("m2", "m3", "m_pol", "dv_p2_s1", "dv_p3_s1")]),
                          presets.SLOPES.alpha_p33)
    assert arms["alpha_p3_eps"] == pytest.approx(0.09, rel=1e-12)
    assert arms["alpha_p2_eps"] == pytest.approx(0.11, rel=1e-12)
    assert arms["alpha_p22"] == pytest.approx(0.15, rel=1e-12)
    assert arms["alpha_s1_eps"] == pytest.approx(0.04, rel=1e-12)


@pytest.mark.parametrize(
    "slopes, word",
    [
        ((0.5, 0.5, 0.8, 0.1, 0.1), "m3 - m2"),
        ((0.5, 0.0, 0.8, 0.1, 0.1), "m3"),
        ((0.5, 3.0, -0.5, 0.1, 0.1), "m2 + m_pol"),
    ],
)
def test_lever_arms_singular(slopes, word):
    with pytest.raises(SingularGeometryError, match=word.replace("+", r"\+")):
        cal.lever_arms(cal.SlopeSet(*slopes), 0.149)


def test_lever_arms_reject_nonfinite():
    with pytest.raises(ValidationError):
        cal.SlopeSet(float("nan"), 1, 1, 1, 1)
    with pytest.raises(ValidationError):
        cal.lever_arms(cal.SlopeSet(0.4, 3.7, 0.8, 0.3, 0.07), 0.0)


def test_coupling_table_reference():
    rows = cal.coupling_table(presets.coupling_inputs())
    for row, ref in zip(rows, presets.PRINTED_COUPLINGS):
        assert cal.compare_coupling_row(row, ref), row
    text = cal.format_coupling_table(rows, presets.PRINTED_COUPLINGS)
    assert text.count("PASS") == 8 and "FAIL" not in text


def test_thermal_fwhm_definition():
    alpha, te = 0.149, 0.3
    w = cal.thermal_fwhm(alpha, te)
    v = np.array([-w / 2, 0.0, w / 2])
    y = cal.thermal_model(v, 0.0, 1.0, 0.0, alpha, te)
    assert y[0] == pytest.approx(0.5 * y[1]) and y[2] == pytest.approx(0.5 * y[1])


def test_thermal_series_roundtrip():
    scans = generate_thermal_series(0.149, 0.212, [0.05, 0.1, 0.2, 0.3, 0.4, 0.6], seed=3)
    res = cal.fit_thermal_series(scans)
    assert res.alpha_p33 == pytest.approx(0.149, rel=0.05)
    assert res.te0 == pytest.approx(0.212, rel=0.05)
    assert np.all(res.widths > 0)


def test_thermal_series_needs_spread():
    scans = generate_thermal_series(0.149, 0.212, [0.1, 0.1, 0.15], seed=0)
    with pytest.raises(InsufficientDataError):
        cal.fit_thermal_series(scans)
    scans = generate_thermal_series(0.149, 0.212, [0.10, 0.12, 0.15], seed=0)
    with pytest.raises(InsufficientDataError):
        cal.fit_thermal_series(scans)


def test_thermal_scan_validation():
    with pytest.raises(InsufficientDataError):
        cal.ThermalScan(np.arange(10.0), np.ones(10), 0.1)
    with pytest.raises(ValidationError):
        cal.ThermalScan(np.arange(30.0), np.ones(30), -0.1)
    with pytest.raises(ValidationError):
        cal.electron_temperature(-1.0, 0.2)


# ---------------------------------------------------------------- properties


@given(st.floats(0.01, 0.5), st.floats(1e-15, 1e-9), st.floats(0.01, 100.0))
def test_drive_amplitude_homogeneous_half(alpha, p, lam):
    a = cal.drive_amplitude(alpha, 1.0, p)
    b = cal.drive_amplitude(alpha, 1.0, lam * p)
    assert b == pytest.approx(math.sqrt(lam) * a, rel=1e-12)
    assert a <= 0


@given(st.floats(1e3, 1e7), st.floats(1e4, 1e6), st.floats(0.01, 100.0))
def test_photon_number_homogeneous_two(eps_r, kappa, lam):
    assert cal.photon_number(lam * eps_r, kappa) == pytest.approx(lam**2 * cal.photon_number(eps_r, kappa),
                                                                  rel=1e-12)


@given(st.floats(0.0, 10.0), st.floats(0.0, 10.0))
def test_electron_temperature_bound(t, te0):
    assert cal.electron_temperature(t, te0) >= max(t, te0)


@given(st.floats(0.001, 0.5), st.floats(0.1e9, 20e9), st.floats(0.1, 100.0))
def test_g0_linear(alpha, fr, lam):
    g = cal.bare_coupling_g0(alpha, fr, 575.0)
    assert cal.bare_coupling_g0(lam * alpha, fr, 575.0) == pytest.approx(lam * g, rel=1e-12)
    assert cal.bare_coupling_g0(alpha, lam * fr, 575.0) == pytest.approx(lam * g, rel=1e-12)


def test_thermal_width_convention():
    # sech^2 argument alpha (V - V0) / (2 k_B T)
    v = 2 * K_B_EV * 0.2 / 0.149
    y = cal.thermal_model([v], 0.0, 1.0, 0.0, 0.149, 0.2)[0]
    assert y == pytest.approx(-1.0 / math.cosh(1.0) ** 2)
