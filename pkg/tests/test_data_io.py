import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dqdcavity import data_io, presets
from dqdcavity.calibration import PowerBudget
from dqdcavity.errors import ParseError, SchemaVersionError, ValidationError
from dqdcavity.model import DeviceParams, QubitTuning, coupling_set, iq_linecut, transmission_spectrum
from dqdcavity.records import Diagram, LineCut

finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


def _setup(label="pair-P3"):
    return presets.synthetic_setup(label)


# ---------------------------------------------------------------- generation


def test_noise_is_deterministic_per_seed():
    s = _setup()
    grid = np.linspace(-200, 200, 101)
    a = data_io.generate_linecut(s.device, s.tc, s.settings, grid, data_io.NoiseModel(1e-4, 7), c=s.c)
    b = data_io.generate_linecut(s.device, s.tc, s.settings, grid, data_io.NoiseModel(1e-4, 7), c=s.c)
    c = data_io.generate_linecut(s.device, s.tc, s.settings, grid, data_io.NoiseModel(1e-4, 8), c=s.c)
    assert np.array_equal(a.iq, b.iq)
    assert not np.array_equal(a.iq, c.iq)


def test_noise_standard_deviation():
    s = _setup()
    grid = np.linspace(-200, 200, 10000)
    clean = iq_linecut(s.device, grid * 2.417989e8, s.tc, s.settings, s.c)
    noisy = data_io.generate_linecut(s.device, s.tc, s.settings, grid, data_io.NoiseModel(1e-4, 1), c=s.c)
    n = noisy.meta["n_photons"]
    measured = np.std(noisy.iq - clean.iq, ddof=1)
    assert measured == pytest.approx(1e-4 / np.sqrt(n), rel=0.03)


def test_noise_needs_photons():
    with pytest.raises(ValidationError):
        data_io.NoiseModel(-1.0)
    assert data_io.NoiseModel(0.0).sigma_at(0.0) == 0.0
    with pytest.raises(ValidationError):
        data_io.NoiseModel(1e-4).sigma_at(0.0)


@pytest.mark.parametrize("label", presets.SYNTHETIC_LABELS)
def test_generated_cuts_even_before_noise(label):
    s = _setup(label)
    grid = np.linspace(-150, 150, 61)
    lc = data_io.generate_linecut(s.device, s.tc, s.settings, grid, c=s.c)
    assert np.array_equal(lc.iq, lc.iq[::-1])


def test_dc_offset_handling():
    s = _setup()
    grid = np.linspace(-200, 200, 101)
    lc = data_io.generate_linecut(s.device, s.tc, s.settings, grid, dc_offset=0.01, c=s.c)
    back = data_io.subtract_dc_offset(lc, "given", offset=0.01)
    ref = data_io.generate_linecut(s.device, s.tc, s.settings, grid, c=s.c)
    assert np.allclose(back.iq, ref.iq, atol=1e-15)
    assert back.meta["dc_offset_subtracted"] == 0.01
    tails = data_io.subtract_dc_offset(lc, "median-of-tails")
    assert abs(np.median(tails.iq[:15])) < 1e-4
    with pytest.raises(ValidationError):
        data_io.subtract_dc_offset(lc, "given")
    with pytest.raises(ValidationError):
        data_io.subtract_dc_offset(lc, "mean")
    assert data_io.subtract_dc_offset(lc, "given", offset=0.0) is lc


def test_diagram_polarization_line():
    s = _setup()
    v = np.linspace(-2e-3, 2e-3, 41)
    dia = data_io.generate_diagram(s.device, s.tc, s.settings, v, v, c=s.c)
    eps = data_io.detuning_map(s.device, v, v)
    # maximum of the P3 peak sits on eps0 = 0
    i, j = np.unravel_index(np.argmax(dia.iq), dia.iq.shape)
    assert abs(eps[i, j]) <= np.abs(eps).max() * 0.05
    with pytest.raises(ValidationError):
        data_io.generate_diagram(s.device, s.tc, s.settings, [], v)


def test_thermal_series_noise_level():
    scans = data_io.generate_thermal_series(0.149, 0.212, [0.1, 0.2], n_points=4001, noise_frac=0.02, seed=1)
    clean = data_io.generate_thermal_series(0.149, 0.212, [0.1, 0.2], n_points=4001, noise_frac=0.0)
    assert np.std(scans[0].iq_mag - clean[0].iq_mag) == pytest.approx(0.01, rel=0.05)


# ---------------------------------------------------------------- records


def test_linecut_validation():
    with pytest.raises(ValidationError):
        LineCut.from_ueV([0.0, 1.0, 1.0], [1, 2, 3])
    with pytest.raises(ValidationError):
        LineCut.from_ueV([0.0, 1.0], [1.0])
    with pytest.raises(ValidationError):
        LineCut([0.0, 1.0], [0.0, 1.0], [1.0, 2.0])
    with pytest.raises(ValidationError):
        Diagram(np.zeros(2), np.zeros(3), np.zeros((3, 2)))
    lc = LineCut.from_ueV([0.0, 1.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        lc.iq[0] = 5.0


# ---------------------------------------------------------------- serialization


@given(arrays(np.float64, st.integers(2, 40), elements=finite))
def test_linecut_roundtrip_lossless(tmp_path_factory, iq):
    grid = np.cumsum(np.linspace(0.5, 1.5, len(iq))) - 7.3
    lc = LineCut.from_ueV(grid, iq, {"seed": 3, "note": "x"})
    path = tmp_path_factory.mktemp("lc") / "a.csv"
    data_io.write_linecut(path, lc)
    back = data_io.read_linecut(path)
    assert np.array_equal(back.iq, lc.iq)
    assert np.array_equal(back.eps0_ueV, lc.eps0_ueV)
    assert np.array_equal(back.eps0_hz, lc.eps0_hz)
    assert back.meta == lc.meta


@given(arrays(np.float64, (3, 4), elements=finite))
def test_diagram_roundtrip_lossless(tmp_path_factory, iq):
    dia = Diagram(np.array([0.1, 0.2, 0.3]), np.array([1e-3, 2e-3, 3e-3, 4.000000000000001e-3]), iq, {"a": 1})
    path = tmp_path_factory.mktemp("d") / "d.csv"
    data_io.write_diagram(path, dia)
    back = data_io.read_diagram(path)
    assert np.array_equal(back.iq, dia.iq) and np.array_equal(back.vp3, dia.vp3)
    assert back.meta == {"a": 1}


def test_thermal_scan_roundtrip(tmp_path):
    scan = data_io.generate_thermal_series(0.149, 0.212, [0.3], seed=2)[0]
    data_io.write_thermal_scan(tmp_path / "t.csv", scan)
    back = data_io.read_thermal_scan(tmp_path / "t.csv")
    assert np.array_equal(back.iq_mag, scan.iq_mag) and back.t_mc == scan.t_mc


def test_columns_and_spectrum(tmp_path):
    cs = coupling_set(QubitTuning(0.0, 6e9), 5.5e6, -137e6)
    spec = transmission_spectrum(cs, 4e5, 1.245e5, 1.3038e9, 1e6, 101)
    data_io.write_spectrum(tmp_path / "s.csv", spec)
    meta, cols = data_io.read_columns(tmp_path / "s.csv", data_io.SPECTRUM_COLUMNS)
    assert np.array_equal(cols["magnitude"], spec.magnitude)
    assert meta["peak_center_hz"] == spec.peak_center_hz
    with pytest.raises(ValidationError):
        data_io.write_columns(tmp_path / "x.csv", {"a": [1, 2], "b": [1]})


@pytest.mark.parametrize(
    "text, exc, match",
    [
        ("", ParseError, "empty"),
        ("eps0_ueV,iq_volts\n1,2\n", ParseError, "version"),
        ("# v2\neps0_ueV,iq_volts\n", SchemaVersionError, "v2"),
        ("# v1\neps0_ueV,iq\n1,2\n", ParseError, "'iq'"),
        ("# v1\neps0_ueV\n1\n", ParseError, "<missing>"),
        ("# v1\neps0_ueV,iq_volts,extra\n", ParseError, "extra"),
        ("# v1\neps0_ueV,iq_volts\n1,2,3\n", ParseError, ":3:"),
        ("# v1\neps0_ueV,iq_volts\n1,abc\n", ParseError, ":3:"),
        ("# v1\n# meta: {bad\neps0_ueV,iq_volts\n", ParseError, "meta"),
        ("# v1\n", ParseError, "header"),
    ],
)
def test_malformed_csv(tmp_path, text, exc, match):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(exc, match=match):
        data_io.read_linecut(path)


def test_missing_file_raises():
    with pytest.raises(FileNotFoundError):
        data_io.read_linecut("/nonexistent/file.csv")


def test_json_versioning(tmp_path):
    p = tmp_path / "a.json"
    data_io.write_json(p, {"x": np.float64(1.5), "arr": np.arange(3)})
    assert data_io.read_json(p)["arr"] == [0, 1, 2]
    p.write_text(json.dumps({"format_version": 9}))
    with pytest.raises(SchemaVersionError):
        data_io.read_json(p)
    p.write_text("[1, 2]")
    with pytest.raises(ParseError):
        data_io.read_json(p)
    p.write_text("{not json")
    with pytest.raises(ParseError):
        data_io.read_json(p)


def test_device_file_roundtrip(tmp_path):
    dev = DeviceParams(fr=1.3038e9, kappa=124491.5, g0=5503922.06)
    budget = PowerBudget(6.0, (33.0, 40.0, 10.0))
    data_io.write_device(tmp_path / "d.json", dev, budget)
    back = data_io.read_device(tmp_path / "d.json")
    assert back.device == dev
    assert back.budget == budget


def test_device_file_derived_fields(tmp_path):
    payload = {
        "format_version": 1,
        "lever_arms_eV_per_V": {"alpha_p2_eps": 0.11, "alpha_p3_eps": 0.09, "alpha_s1_eps": 0.04},
        "fr_hz": 1.3038e9,
        "z0r_ohm": 575.0,
        "q_loaded": [10470, 10476],
    }
    dev = data_io.parse_device(payload).device
    assert dev.g0 == pytest.approx(5.504e6, abs=1e3)
    assert dev.kappa == pytest.approx(124.49e3, abs=10)
    del payload["q_loaded"]
    with pytest.raises(ParseError, match="kappa_hz or q_loaded"):
        data_io.parse_device(payload)
    with pytest.raises(ParseError, match="fr_hz"):
        data_io.parse_device({"lever_arms_eV_per_V": {}})


def test_coupling_rows_file(tmp_path):
    p = tmp_path / "rows.json"
    data_io.write_json(p, {"rows": [{"label": "a", "tc_ghz": 6.14, "eps_q_mhz": -137}]})
    rows = data_io.read_coupling_rows(p)
    assert rows[0]["tc"] == pytest.approx(6.14e9) and rows[0]["g0"] is None
    data_io.write_json(p, {"rows": [{"label": "a", "tc_ghz": 6.14}]})
    with pytest.raises(ParseError, match="eps_q_mhz"):
        data_io.read_coupling_rows(p)
    data_io.write_json(p, {"rows": []})
    with pytest.raises(ParseError):
        data_io.read_coupling_rows(p)
