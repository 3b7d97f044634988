"""Device-parameter extraction: lever arms, bare coupling, cavity decay,
microwave power budget, drive amplitude and photon number.

Lever arms are in eV/V, temperatures in K, powers in W and every energy or
rate in Hz (frequency units, see :mod:`dqdcavity.units`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, InsufficientDataError, SingularGeometryError, ValidationError
from .fitting.estimators import ThermalTransitionRegressor
from .fitting.lm import FitResult, ParameterSpec, least_squares
from .fitting.models import sech2
from .model import QubitTuning, coupling_set, tunability_ratio
from .units import EV_TO_HZ, K_B_EV, R_K, dbm_to_watt

# ---------------------------------------------------------------- thermal


def thermal_model(vp3, v0, amp, offset, alpha, te):
    """Thermally broadened transition ``offset - |amp| sech^2(alpha (V - V0) / 2 k_B T_e)``."""
    if not (alpha > 0 and te > 0):
        raise ValidationError("alpha and te must be positive")
    u = alpha * (np.asarray(vp3, dtype=float) - v0) / (2.0 * K_B_EV * te)
    return offset - abs(amp) * sech2(u)


def electron_temperature(t_mc, te0):
    """``sqrt(t_mc**2 + te0**2)``."""
    if np.any(np.asarray(t_mc) < 0) or np.any(np.asarray(te0) < 0):
        raise ValidationError("temperatures must be non-negative")
    return np.hypot(t_mc, te0)


def thermal_fwhm(alpha, te):
    """Full width at half depth in volts."""
    return (2.0 * K_B_EV * te / alpha) * 2.0 * math.acosh(math.sqrt(2.0))


@dataclass(frozen=True)
class ThermalScan:
    vp3: np.ndarray
    iq_mag: np.ndarray
    t_mc: float

    def __post_init__(self):
        vp3 = np.asarray(self.vp3, dtype=float)
        iq = np.asarray(self.iq_mag, dtype=float)
        if vp3.shape != iq.shape or vp3.ndim != 1:
            raise ValidationError("vp3 and iq_mag must be 1-d arrays of equal length")
        if len(vp3) < 20:
            raise InsufficientDataError(f"thermal scan needs at least 20 samples, got {len(vp3)}")
        if not (np.all(np.isfinite(vp3)) and np.all(np.isfinite(iq))):
            raise ValidationError("thermal scan contains non-finite values")
        if not self.t_mc >= 0:
            raise ValidationError("t_mc must be non-negative")
        object.__setattr__(self, "vp3", vp3)
        object.__setattr__(self, "iq_mag", iq)


@dataclass
class ThermalSeriesResult:
    alpha_p33: float
    alpha_sigma: float
    te0: float
    te0_sigma: float
    t_mc: np.ndarray
    widths: np.ndarray
    width_sigmas: np.ndarray
    series_fit: FitResult
    scan_fits: list = field(default_factory=list)


def _width_model(p, t, _block=0):
    return p["alpha"] / (2.0 * K_B_EV * np.hypot(t, p["te0"]))


def fit_thermal_series(scans) -> ThermalSeriesResult:
    """Two-stage lever-arm and base-temperature extraction.

    Each scan is fitted for its width ``w = alpha / (2 k_B T_e)``; the widths
    are then fitted against ``T_e = sqrt(T_mc^2 + T_e0^2)``.  A single scan
    constrains only ``alpha / T_e``, so at least three distinct temperatures
    spanning a factor of two are required.
    """
    scans = list(scans)
    t_mc = np.array([s.t_mc for s in scans], dtype=float)
    distinct = np.unique(t_mc)
    if len(distinct) < 3:
        raise InsufficientDataError(
            f"need at least 3 distinct mixing-chamber temperatures, got {len(distinct)}"
        )
    lo, hi = distinct.min(), distinct.max()
    if lo > 0 and hi < 2.0 * lo:
        raise InsufficientDataError(
            f"temperature spread {lo:g}-{hi:g} K is below a factor of two"
        )

    fits = [ThermalTransitionRegressor().fit(s.vp3, s.iq_mag) for s in scans]
    bad = [s.t_mc for s, f in zip(scans, fits) if not f.result_.converged]
    if bad:
        raise ConvergenceError(f"per-scan width fit did not converge at T_mc = {bad}")
    w = np.array([f.params_["width"] for f in fits])
    w_sig = np.array([f.sigma_["width"] for f in fits])
    if not np.all(np.isfinite(w_sig) & (w_sig > 0)):
        w_sig = None

    # linearised start: 1/w^2 = (2 k_B / alpha)^2 (T^2 + T_e0^2)
    slope, intercept = np.polyfit(t_mc**2, 1.0 / w**2, 1)
    alpha0 = 2.0 * K_B_EV / math.sqrt(slope) if slope > 0 else 2.0 * K_B_EV * hi * w.min()
    te0_0 = math.sqrt(intercept / slope) if slope > 0 and intercept > 0 else 0.5 * max(lo, 1e-3)
    specs = [ParameterSpec("alpha", alpha0, 0.0, np.inf), ParameterSpec("te0", te0_0, 0.0, np.inf)]
    data = (t_mc, w) if w_sig is None else (t_mc, w, w_sig)
    res = least_squares(_width_model, data, specs)
    if not res.converged:
        raise ConvergenceError(f"temperature-series fit did not converge: {res.message}")
    return ThermalSeriesResult(
        alpha_p33=res["alpha"],
        alpha_sigma=res.sigma["alpha"],
        te0=res["te0"],
        te0_sigma=res.sigma["te0"],
        t_mc=t_mc,
        widths=w,
        width_sigmas=w_sig if w_sig is not None else np.full_like(w, np.nan),
        series_fit=res,
        scan_fits=[f.result_ for f in fits],
    )


# ---------------------------------------------------------------- lever arms


@dataclass(frozen=True)
class SlopeSet:
    """Transition-line slopes ``dV_P2/dV_P3`` (as positive magnitudes for the
    dot-2 and dot-3 lines) and the S1 voltage ratios of the two dot lines."""

    m2: float
    m3: float
    m_pol: float
    dv_p2_s1: float
    dv_p3_s1: float

    def __post_init__(self):
        for name in ("m2", "m3", "m_pol", "dv_p2_s1", "dv_p3_s1"):
            if not np.isfinite(getattr(self, name)):
                raise ValidationError(f"slope {name} must be finite")


def _nonzero(value, what):
    if abs(value) < 1e-12:
        raise SingularGeometryError(f"degenerate slopes: denominator {what} vanishes")


def lever_arms(slopes: SlopeSet, alpha_p33: float) -> dict:
    """Detuning lever arms of P3, P2 and S1 plus ``alpha_P2,2`` from line slopes."""
    s = slopes
    if not alpha_p33 > 0:
        raise ValidationError("alpha_p33 must be positive")
    _nonzero(s.m3, "m3")
    _nonzero(s.m2 + s.m_pol, "m2 + m_pol")
    _nonzero(s.m_pol, "m_pol")
    _nonzero(s.m3 - s.m2, "m3 - m2")
    a_p3 = alpha_p33 * (s.m_pol / s.m3) * (s.m3 - s.m2) / (s.m2 + s.m_pol)
    a_p2 = a_p3 / s.m_pol
    a_p22 = (s.m3 * a_p2 + a_p3) / (s.m3 - s.m2)
    a_s1 = a_p22 * s.dv_p2_s1 - alpha_p33 * s.dv_p3_s1
    return {"alpha_p3_eps": a_p3, "alpha_p2_eps": a_p2, "alpha_p22": a_p22, "alpha_s1_eps": a_s1}


# ---------------------------------------------------------------- cavity


def bare_coupling_g0(alpha_s1_eps: float, fr: float, z0r: float) -> float:
    """``g0 = (alpha fr / 2) sqrt(2 Z0r / R_K)`` in Hz (alpha in eV/V)."""
    if alpha_s1_eps < 0 or not (fr > 0 and z0r > 0):
        raise ValidationError("alpha must be non-negative, fr and z0r positive")
    return alpha_s1_eps * fr / 2.0 * math.sqrt(2.0 * z0r / R_K)


def kappa_from_q(fr: float, q_loaded) -> float:
    """Decay rate ``fr / mean(Q_L)``."""
    q = np.atleast_1d(np.asarray(q_loaded, dtype=float))
    if q.size == 0 or not np.all(q > 0):
        raise ValidationError("loaded quality factors must be positive")
    return fr / float(q.mean())


def kappa_sigma(fr: float, q_loaded, q_sigma) -> float:
    """1-sigma of :func:`kappa_from_q` with the Q errors added in quadrature."""
    q = np.atleast_1d(np.asarray(q_loaded, dtype=float))
    dq = np.atleast_1d(np.asarray(q_sigma, dtype=float))
    if dq.shape != q.shape:
        raise ValidationError("q_sigma must match q_loaded")
    q_mean = q.mean()
    return fr / q_mean**2 * math.sqrt(float(np.sum(dq**2))) / q.size


# ---------------------------------------------------------------- drive power


@dataclass(frozen=True)
class PowerBudget:
    """Generator power and attenuation chain (dB, all entries non-negative
    in total); the bias-lead mismatch is one configurable entry."""

    generator_dbm: float
    attenuations_db: tuple = ()
    z0g: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "attenuations_db", tuple(float(a) for a in self.attenuations_db))
        if self.total_attenuation_db < 0:
            raise ValidationError("total attenuation must be non-negative")
        if not self.z0g > 0:
            raise ValidationError("z0g must be positive")

    @property
    def total_attenuation_db(self) -> float:
        return float(sum(self.attenuations_db))

    @property
    def input_dbm(self) -> float:
        return self.generator_dbm - self.total_attenuation_db


def power_budget(budget: PowerBudget) -> float:
    """Upper-bound power at the gate, in W."""
    return dbm_to_watt(budget.input_dbm)


def drive_amplitude(alpha_eps: float, z0g: float, p_in: float) -> float:
    """Detuning drive ``-alpha sqrt(2 Z0g P_in)`` in Hz for a plunger drive.

    The sqrt(2) converts rms to peak amplitude; the sign is that of a P3
    drive.  This is an upper bound, inheriting the attenuation bound.
    """
    if alpha_eps < 0 or not z0g > 0 or p_in < 0:
        raise ValidationError("alpha_eps and p_in must be non-negative, z0g positive")
    return 0.0 - alpha_eps * math.sqrt(2.0 * z0g * p_in) * EV_TO_HZ


def s1_drive_estimate(eps_q_p3: float, c_eps2: float, c_eps3: float) -> float:
    """S1 drive amplitude scaled from the P3 estimate by the fitted ratio ``c eps2 / c eps3``."""
    if not (c_eps2 > 0 and c_eps3 > 0):
        raise ValidationError("fitted amplitudes must be positive")
    return abs(eps_q_p3) * c_eps2 / c_eps3


def photon_number(eps_r, kappa):
    """Mean cavity occupation ``4 eps_r^2 / kappa^2``."""
    if not kappa > 0:
        raise ValidationError("kappa must be positive")
    return 4.0 * np.square(eps_r) / kappa**2


@dataclass(frozen=True)
class DriveEstimate:
    label: str
    channel: str
    p_in: float
    eps_q: float
    eps_r: float
    n_photons: float


def estimate_drive(
    label: str,
    budget: PowerBudget,
    alpha_p3_eps: float,
    kappa: float,
    beta: float,
    channel: str = "P3",
    c_ratio: float | None = None,
) -> DriveEstimate:
    """Drive amplitudes and photon number from a power budget.

    The crosstalk correction is neglected (``eps_q ~ eps_3``).  For P3,
    ``beta`` is beta3 and ``eps_r = beta3 |eps_q|``.  For S1 the P3 estimate
    is scaled by ``c_ratio = (c eps2)/(c eps3)`` and ``beta`` is beta2.
    """
    p = power_budget(budget)
    eps3 = drive_amplitude(alpha_p3_eps, budget.z0g, p)
    if channel == "P3":
        eps_q = eps3
    elif channel == "S1":
        if c_ratio is None:
            raise ValidationError("S1 estimate needs c_ratio = (c eps2)/(c eps3)")
        eps_q = abs(eps3) * c_ratio
    else:
        raise ValidationError(f"unknown channel {channel!r}")
    eps_r = beta * abs(eps_q)
    return DriveEstimate(label, channel, p, eps_q, eps_r, float(photon_number(eps_r, kappa)))


# ---------------------------------------------------------------- coupling table


@dataclass(frozen=True)
class CouplingRow:
    label: str
    tc: float
    g0: float
    eps_q: float
    delta_omega: float
    g_dy: float
    ratio: float


def coupling_table(rows) -> list:
    """Couplings at the symmetric point ``eps0 = 0`` for each ``{tc, g0, eps_q}`` row."""
    out = []
    for i, row in enumerate(rows):
        tc, g0, eps_q = float(row["tc"]), float(row["g0"]), float(row["eps_q"])
        cs = coupling_set(QubitTuning(0.0, tc), g0, eps_q)
        out.append(
            CouplingRow(
                label=str(row.get("label", i)),
                tc=tc,
                g0=g0,
                eps_q=eps_q,
                delta_omega=cs.delta_omega,
                g_dy=cs.g_dy,
                ratio=tunability_ratio(eps_q, g0),
            )
        )
    return out


def compare_coupling_row(row: CouplingRow, reference, coupling_tol=150.0, ratio_tol=0.1) -> bool:
    """True when ``row`` matches a reference with ``delta_omega``, ``g_dy`` (Hz) and ``ratio``."""
    return (
        abs(row.delta_omega - reference.delta_omega) <= coupling_tol
        and abs(row.g_dy - reference.g_dy) <= coupling_tol
        and abs(row.ratio - reference.ratio) <= ratio_tol
    )


def format_coupling_table(rows, references=None) -> str:
    """Plain-text table in GHz/kHz; adds a pass/fail column when references are given."""
    head = f"{'row':<10} {'tc/GHz':>7} {'dw/kHz':>8} {'g_dy/kHz':>9} {'ratio':>6}"
    if references is not None:
        head += f" {'ref dw':>7} {'ref g_dy':>9} {'ref ratio':>9}  check"
    lines = [head]
    for i, r in enumerate(rows):
        line = f"{r.label:<10} {r.tc / 1e9:7.2f} {r.delta_omega / 1e3:8.2f} {r.g_dy / 1e3:9.2f} {r.ratio:6.2f}"
        if references is not None:
            ref = references[i]
            ok = compare_coupling_row(r, ref)
            line += (
                f" {ref.delta_omega / 1e3:7.1f} {ref.g_dy / 1e3:9.1f} {ref.ratio:9.1f}  "
                + ("PASS" if ok else "FAIL")
            )
        lines.append(line)
    return "\n".join(lines)
