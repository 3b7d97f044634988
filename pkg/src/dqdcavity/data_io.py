"""Synthetic data generation, offset handling and file formats.

File formats (all UTF-8, ``\\n`` line endings, floats written with 17
significant digits so a write/read cycle is lossless):

line cut CSV
    ``# v1``, an optional ``# meta: {json}`` line, header
    ``eps0_ueV,iq_volts``, one sample per row.
diagram CSV
    ``# v1`` then ``len(vp2)`` rows of ``len(vp3)`` IQ values (row ``i``
    belongs to ``vp2[i]``); the axes live in a ``.axes.json`` sidecar.
thermal scan CSV
    ``# v1``, ``# meta: {"t_mc_k": ...}``, header ``vp3_volts,iq_mag_volts``.
trajectory CSV
    ``# v1``, header ``t,re_a,im_a,n_expect,trace_err``.
JSON artifacts
    carry ``"format_version": 1``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .calibration import (
    PowerBudget,
    ThermalScan,
    bare_coupling_g0,
    electron_temperature,
    kappa_from_q,
    photon_number,
    thermal_model,
)
from .errors import ParseError, SchemaVersionError, ValidationError
from .model import DeviceParams, DriveSettings, iq_closed_form, iq_linecut, resolve_drive
from .records import Diagram, LineCut
from .units import EV_TO_HZ, GHZ, MHZ, ueV_to_hz

FORMAT_VERSION = 1
_FMT = ".17g"

# ---------------------------------------------------------------- generation


@dataclass(frozen=True)
class NoiseModel:
    """Additive Gaussian noise of standard deviation ``sigma0 / sqrt(<n>)``."""

    sigma0: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not (np.isfinite(self.sigma0) and self.sigma0 >= 0):
            raise ValidationError("sigma0 must be finite and non-negative")

    def sigma_at(self, n_photons: float) -> float:
        if self.sigma0 == 0:
            return 0.0
        if not n_photons > 0:
            raise ValidationError("noise level is undefined without cavity photons (<n> = 0)")
        return self.sigma0 / math.sqrt(n_photons)


def symmetric_grid(half_span: float, n_points: int) -> np.ndarray:
    """``n_points`` evenly spaced samples on ``[-half_span, half_span]``."""
    if n_points < 2 or not half_span > 0:
        raise ValidationError("grid needs at least two points and a positive half span")
    return np.linspace(-half_span, half_span, int(n_points))


def generate_linecut(
    device: DeviceParams,
    tc: float,
    settings: DriveSettings,
    eps0_ueV,
    noise: NoiseModel = NoiseModel(),
    dc_offset: float = 0.0,
    c: float = 1.0,
) -> LineCut:
    """Closed-form line cut plus seeded Gaussian noise and a dc offset."""
    grid = np.asarray(eps0_ueV, dtype=float)
    clean = iq_linecut(device, ueV_to_hz(grid), tc, settings, c)
    n_ph = float(photon_number(resolve_drive(settings).eps_r, device.kappa))
    sigma = noise.sigma_at(n_ph)
    rng = np.random.default_rng(noise.seed)
    iq = clean.iq + (rng.normal(0.0, sigma, len(grid)) if sigma > 0 else 0.0) + dc_offset
    meta = dict(clean.meta)
    meta.update(
        device=asdict(device),
        seed=noise.seed,
        sigma0=noise.sigma0,
        noise_sigma=sigma,
        n_photons=n_ph,
        dc_offset=dc_offset,
    )
    return LineCut(clean.eps0_ueV, clean.eps0_hz, iq, meta)


def detuning_map(device: DeviceParams, vp2, vp3, anchor=(0.0, 0.0)):
    """Detuning in Hz on the ``(vp2, vp3)`` grid, shape ``(len(vp2), len(vp3))``."""
    v2 = np.asarray(vp2, dtype=float)[:, None] - anchor[0]
    v3 = np.asarray(vp3, dtype=float)[None, :] - anchor[1]
    return (device.alpha_p2_eps * v2 - device.alpha_p3_eps * v3) * EV_TO_HZ


def generate_diagram(
    device: DeviceParams,
    tc: float,
    settings: DriveSettings,
    vp2_grid,
    vp3_grid,
    anchor=(0.0, 0.0),
    c: float = 1.0,
    noise: NoiseModel = NoiseModel(),
) -> Diagram:
    """IQ map around a single polarization line (reservoir lines are not modelled)."""
    vp2 = np.asarray(vp2_grid, dtype=float)
    vp3 = np.asarray(vp3_grid, dtype=float)
    if vp2.ndim != 1 or vp3.ndim != 1 or vp2.size == 0 or vp3.size == 0:
        raise ValidationError("gate-voltage grids must be non-empty 1-d arrays")
    eps = detuning_map(device, vp2, vp3, anchor)
    iq = iq_closed_form(eps, tc, settings, device.g0, device.kappa, c)
    n_ph = float(photon_number(resolve_drive(settings).eps_r, device.kappa))
    sigma = noise.sigma_at(n_ph) if noise.sigma0 > 0 else 0.0
    if sigma > 0:
        iq = iq + np.random.default_rng(noise.seed).normal(0.0, sigma, iq.shape)
    meta = {
        "channel": settings.channel.value,
        "tc_hz": tc,
        "anchor_v": list(anchor),
        "alpha_p2_eps": device.alpha_p2_eps,
        "alpha_p3_eps": device.alpha_p3_eps,
        "c": c,
        "seed": noise.seed,
        "noise_sigma": sigma,
    }
    return Diagram(vp2, vp3, iq, meta)


def generate_thermal_series(
    alpha: float,
    te0: float,
    t_mc,
    v_span: float = 3e-3,
    n_points: int = 121,
    amp: float = 0.5,
    offset: float = 1.0,
    noise_frac: float = 0.02,
    seed: int = 0,
    v0: float = 0.0,
) -> list:
    """Thermally broadened transitions at several fridge temperatures.

    Noise is Gaussian with standard deviation ``noise_frac * amp``.
    """
    rng = np.random.default_rng(seed)
    v = np.linspace(v0 - v_span, v0 + v_span, n_points)
    scans = []
    for t in np.atleast_1d(np.asarray(t_mc, dtype=float)):
        te = float(electron_temperature(t, te0))
        y = thermal_model(v, v0, amp, offset, alpha, te)
        if noise_frac > 0:
            y = y + rng.normal(0.0, noise_frac * amp, n_points)
        scans.append(ThermalScan(v, y, float(t)))
    return scans


# ---------------------------------------------------------------- offsets


def subtract_dc_offset(linecut: LineCut, method: str = "given", offset: float | None = None,
                       tail_fraction: float = 0.15) -> LineCut:
    """Remove a constant dc offset from the IQ values.

    ``method="given"`` subtracts ``offset``.  ``method="median-of-tails"``
    takes the median of the outer ``tail_fraction`` of samples on each side;
    it attributes the whole tail level to the offset and so suits reference
    traces without a transmission background.
    """
    if method == "given":
        if offset is None:
            raise ValidationError("method 'given' needs an offset value")
        value = float(offset)
    elif method == "median-of-tails":
        n = len(linecut)
        k = max(1, int(round(tail_fraction * n)))
        value = float(np.median(np.concatenate([linecut.iq[:k], linecut.iq[-k:]])))
    else:
        raise ValidationError(f"unknown offset method {method!r}")
    if value == 0.0:
        return linecut
    done = float(linecut.meta.get("dc_offset_subtracted", 0.0)) + value
    return linecut.with_iq(linecut.iq - value, dc_offset_subtracted=done, dc_offset_method=method)


# ---------------------------------------------------------------- CSV helpers


def _fmt(x) -> str:
    return format(float(x), _FMT)


def _open_write(path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return open(path, "w", encoding="utf-8", newline="\n")


def _check_version_line(line: str, path):
    line = line.strip()
    if not line.startswith("# v"):
        raise ParseError(f"{path}: missing '# v{FORMAT_VERSION}' version line")
    if line != f"# v{FORMAT_VERSION}":
        raise SchemaVersionError(f"{path}: unsupported format version {line[2:]!r}")


def _read_table(path, columns):
    """Return (meta, float array of shape (n, len(columns)))."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path}: not UTF-8 text") from exc
    if not lines:
        raise ParseError(f"{path}: empty file")
    _check_version_line(lines[0], path)
    meta = {}
    k = 1
    while k < len(lines) and lines[k].startswith("#"):
        body = lines[k][1:].strip()
        if body.startswith("meta:"):
            try:
                meta = json.loads(body[5:])
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}: malformed meta line: {exc}") from exc
        k += 1
    if k >= len(lines):
        raise ParseError(f"{path}: missing header line")
    header = [h.strip() for h in lines[k].split(",")]
    for pos, want in enumerate(columns):
        got = header[pos] if pos < len(header) else "<missing>"
        if got != want:
            raise ParseError(f"{path}: header column {pos + 1} is {got!r}, expected {want!r}")
    if len(header) != len(columns):
        raise ParseError(f"{path}: unexpected extra column {header[len(columns)]!r}")
    rows = []
    for lineno, line in enumerate(lines[k + 1 :], start=k + 2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != len(columns):
            raise ParseError(f"{path}:{lineno}: expected {len(columns)} values, got {len(parts)}")
        try:
            rows.append([float(v) for v in parts])
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from exc
    return meta, np.array(rows, dtype=float).reshape(-1, len(columns))


def _write_table(path, columns, data, meta=None):
    with _open_write(path) as fh:
        fh.write(f"# v{FORMAT_VERSION}\n")
        if meta is not None:
            fh.write("# meta: " + json.dumps(_plain(meta), sort_keys=True) + "\n")
        fh.write(",".join(columns) + "\n")
        for row in zip(*data):
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if hasattr(obj, "value") and hasattr(obj, "name"):  # enums
        return obj.value
    return obj


LINECUT_COLUMNS = ("eps0_ueV", "iq_volts")
THERMAL_COLUMNS = ("vp3_volts", "iq_mag_volts")
TRAJECTORY_COLUMNS = ("t", "re_a", "im_a", "n_expect", "trace_err")
SPECTRUM_COLUMNS = ("freq_hz", "magnitude")


def write_linecut(path, linecut: LineCut):
    _write_table(path, LINECUT_COLUMNS, (linecut.eps0_ueV, linecut.iq), linecut.meta)


def read_linecut(path) -> LineCut:
    meta, arr = _read_table(path, LINECUT_COLUMNS)
    return LineCut.from_ueV(arr[:, 0], arr[:, 1], meta)


def write_thermal_scan(path, scan: ThermalScan):
    _write_table(path, THERMAL_COLUMNS, (scan.vp3, scan.iq_mag), {"t_mc_k": scan.t_mc})


def read_thermal_scan(path) -> ThermalScan:
    meta, arr = _read_table(path, THERMAL_COLUMNS)
    if "t_mc_k" not in meta:
        raise ParseError(f"{path}: meta line must give t_mc_k")
    return ThermalScan(arr[:, 0], arr[:, 1], float(meta["t_mc_k"]))


def write_trajectory(path, traj, stride: int = 1):
    sl = slice(None, None, max(1, int(stride)))
    a = traj.a_expect[sl]
    _write_table(path, TRAJECTORY_COLUMNS, (traj.t[sl], a.real, a.imag, traj.n_expect[sl], traj.trace_err[sl]))


def write_spectrum(path, spectrum):
    meta = dict(spectrum.meta)
    meta["peak_center_hz"] = spectrum.peak_center_hz
    _write_table(path, SPECTRUM_COLUMNS, (spectrum.freq_hz, spectrum.magnitude), meta)


def _sidecar(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".axes.json")


def write_diagram(path, diagram: Diagram):
    iq = np.asarray(diagram.iq, dtype=float)
    with _open_write(path) as fh:
        fh.write(f"# v{FORMAT_VERSION}\n")
        for row in iq:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    side = {
        "format_version": FORMAT_VERSION,
        "vp2_volts": [float(v) for v in diagram.vp2],
        "vp3_volts": [float(v) for v in diagram.vp3],
        "meta": _plain(diagram.meta),
    }
    write_json(_sidecar(path), side)


def read_diagram(path) -> Diagram:
    path = Path(path)
    side = read_json(_sidecar(path))
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ParseError(f"{path}: empty file")
    _check_version_line(lines[0], path)
    try:
        rows = [[float(v) for v in ln.split(",")] for ln in lines[1:] if ln.strip()]
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if len({len(r) for r in rows}) > 1:
        raise ParseError(f"{path}: ragged rows")
    return Diagram(np.array(side["vp2_volts"]), np.array(side["vp3_volts"]), np.array(rows), side.get("meta", {}))


# ---------------------------------------------------------------- JSON


def write_json(path, payload: dict):
    payload = dict(_plain(payload))
    payload.setdefault("format_version", FORMAT_VERSION)
    with _open_write(path) as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path) -> dict:
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise ParseError(f"{path}: top level must be an object")
    version = payload.get("format_version")
    if version != FORMAT_VERSION:
        raise SchemaVersionError(f"{path}: format_version {version!r}, expected {FORMAT_VERSION}")
    return payload


def write_fit_report(path, result, extra: dict | None = None):
    payload = result.to_dict()
    if extra:
        payload.update(_plain(extra))
    write_json(path, payload)


@dataclass(frozen=True)
class DeviceFile:
    device: DeviceParams
    budget: PowerBudget
    raw: dict


_LEVER_KEYS = ("alpha_p2_eps", "alpha_p3_eps", "alpha_s1_eps")


def device_to_json(device: DeviceParams, budget: PowerBudget | None = None, q_loaded=None) -> dict:
    out = {
        "format_version": FORMAT_VERSION,
        "lever_arms_eV_per_V": {k: getattr(device, k) for k in _LEVER_KEYS},
        "fr_hz": device.fr,
        "z0r_ohm": device.z0r,
        "z0g_ohm": device.z0g,
        "g0_hz": device.g0,
    }
    if q_loaded is not None:
        out["q_loaded"] = [float(q) for q in q_loaded]
    else:
        out["kappa_hz"] = device.kappa
    if budget is not None:
        out["generator_dbm"] = budget.generator_dbm
        out["attenuations_db"] = list(budget.attenuations_db)
    return out


def parse_device(payload: dict, source="device file") -> DeviceFile:
    """Build device parameters from a device-file payload.

    ``kappa_hz`` may be replaced by ``q_loaded``; ``g0_hz`` is optional and
    otherwise computed from the S1 lever arm and the resonator impedance.
    """
    try:
        levers = payload["lever_arms_eV_per_V"]
        fr = float(payload["fr_hz"])
        z0r = float(payload["z0r_ohm"])
        z0g = float(payload.get("z0g_ohm", 1.0))
        arms = {k: float(levers[k]) for k in _LEVER_KEYS}
    except KeyError as exc:
        raise ParseError(f"{source}: missing field {exc.args[0]!r}") from exc
    if "kappa_hz" in payload:
        kappa = float(payload["kappa_hz"])
    elif "q_loaded" in payload:
        kappa = kappa_from_q(fr, payload["q_loaded"])
    else:
        raise ParseError(f"{source}: need kappa_hz or q_loaded")
    g0 = payload.get("g0_hz")
    g0 = float(g0) if g0 is not None else bare_coupling_g0(arms["alpha_s1_eps"], fr, z0r)
    device = DeviceParams(fr=fr, kappa=kappa, g0=g0, z0r=z0r, z0g=z0g, **arms)
    budget = PowerBudget(
        float(payload.get("generator_dbm", 0.0)),
        tuple(payload.get("attenuations_db", ())),
        z0g,
    )
    return DeviceFile(device, budget, dict(payload))


def write_device(path, device: DeviceParams, budget: PowerBudget | None = None, q_loaded=None):
    write_json(path, device_to_json(device, budget, q_loaded))


def read_device(path) -> DeviceFile:
    return parse_device(read_json(path), str(path))


def write_columns(path, columns: dict, meta: dict | None = None):
    """Plot-ready CSV of equal-length named columns."""
    names = tuple(columns)
    arrays = [np.asarray(columns[n], dtype=float) for n in names]
    if len({a.shape for a in arrays}) > 1:
        raise ValidationError("columns must have equal length")
    _write_table(path, names, arrays, meta)


def read_columns(path, names) -> tuple:
    meta, arr = _read_table(path, tuple(names))
    return meta, {n: arr[:, k] for k, n in enumerate(names)}


def read_coupling_rows(path) -> list:
    """Rows file for the coupling table: ``{"rows": [{label, tc_ghz, eps_q_mhz[, g0_mhz]}]}``.

    Returned rows are in Hz; ``g0`` is ``None`` when the row does not set it.
    """
    payload = read_json(path)
    rows = []
    for k, row in enumerate(payload.get("rows", [])):
        try:
            rows.append(
                {
                    "label": str(row.get("label", k)),
                    "tc": float(row["tc_ghz"]) * GHZ,
                    "eps_q": float(row["eps_q_mhz"]) * MHZ,
                    "g0": float(row["g0_mhz"]) * MHZ if "g0_mhz" in row else None,
                }
            )
        except KeyError as exc:
            raise ParseError(f"{path}: row {k} is missing {exc.args[0]!r}") from exc
    if not rows:
        raise ParseError(f"{path}: no rows")
    return rows
