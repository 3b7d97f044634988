"""Closed-form effective model of the driven double dot and the cavity.

Units: every energy is a frequency E/h and every rate is omega/2pi, both in
Hz (see :mod:`dqdcavity.units`).  In those units the curvature couplings read

    E_q0  = sqrt(eps0**2 + 4 tc**2)
    g_st  = eps0 g0 / E_q0
    g_dy  = 4 tc**2 g0 eps_q / E_q0**3
    dw    = 8 tc**2 g0**2 / E_q0**3

and the homodyne output for qubit branch s = +/-1 is
``c (eps_r + s g_dy/2) / sqrt(dw**2 + kappa**2/4)``.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InvalidDriveError, ResonanceError, ValidationError
from .records import LineCut, Spectrum


class Channel(str, enum.Enum):
    """Gate carrying the ac drive: S1 (cavity-side gate) or plunger P3."""

    S1 = "S1"
    P3 = "P3"


def _finite(name, value):
    if not np.all(np.isfinite(value)):
        raise ValidationError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class QubitTuning:
    eps0: float
    tc: float

    def __post_init__(self):
        _finite("eps0", self.eps0)
        _finite("tc", self.tc)
        if not self.tc > 0:
            raise ValidationError(f"tunnel coupling must be positive, got tc={self.tc}")


@dataclass(frozen=True)
class DriveSettings:
    """Raw drive amplitudes and cavity cross-coupling ratios.

    ``eps2`` is the detuning drive through dot 2 (gate S1), ``eps3`` through
    dot 3 (gate P3).  ``beta2``/``beta3`` convert each into a cavity drive.
    """

    channel: Channel
    eps2: float = 0.0
    eps3: float = 0.0
    beta2: float = 1.27e-2
    beta3: float = 2.89e-3

    def __post_init__(self):
        object.__setattr__(self, "channel", Channel(self.channel))
        for name in ("eps2", "eps3", "beta2", "beta3"):
            _finite(name, getattr(self, name))
        if self.eps2 < 0 or self.eps3 < 0:
            raise ValidationError("drive amplitudes eps2, eps3 must be non-negative")
        if self.eps2 != 0 and self.eps3 != 0:
            raise InvalidDriveError("only one of eps2 (S1) and eps3 (P3) may be nonzero")
        if self.channel is Channel.S1 and self.eps3 != 0:
            raise InvalidDriveError("S1 channel requires eps3 = 0")
        if self.channel is Channel.P3 and self.eps2 != 0:
            raise InvalidDriveError("P3 channel requires eps2 = 0")
        if not (0 < self.beta3 < self.beta2 < 1):
            raise ValidationError(
                f"expected 0 < beta3 < beta2 < 1, got beta2={self.beta2}, beta3={self.beta3}"
            )

    @property
    def amplitude(self) -> float:
        return self.eps2 if self.channel is Channel.S1 else self.eps3


@dataclass(frozen=True)
class EffectiveDrive:
    eps_q: float
    eps_r: float


@dataclass(frozen=True)
class ResonatorParams:
    fr: float
    kappa: float
    z0r: float = 575.0

    def __post_init__(self):
        if not (self.fr > 0 and self.kappa > 0):
            raise ValidationError("resonator frequency and decay rate must be positive")
        if self.kappa > 0.1 * self.fr:
            raise ValidationError("kappa must be much smaller than fr")


@dataclass(frozen=True)
class DeviceParams:
    """Static device/calibration record.

    Lever arms are in eV/V, frequencies and rates in Hz, impedances in ohm.
    """

    fr: float = 1.3038e9
    kappa: float = 124.5e3
    g0: float = 5.5e6
    z0r: float = 575.0
    z0g: float = 1.0
    alpha_p2_eps: float = 0.11
    alpha_p3_eps: float = 0.09
    alpha_s1_eps: float = 0.04

    def __post_init__(self):
        for name in ("fr", "kappa", "g0", "z0r", "z0g"):
            value = getattr(self, name)
            _finite(name, value)
            if value <= 0:
                raise ValidationError(f"{name} must be positive, got {value}")
        ResonatorParams(self.fr, self.kappa, self.z0r)

    @property
    def resonator(self) -> ResonatorParams:
        return ResonatorParams(self.fr, self.kappa, self.z0r)


@dataclass(frozen=True)
class CouplingSet:
    e_q0: float
    g_st: float
    g_dy: float
    delta_omega: float
    g_perp: float


def qubit_energy(tuning: QubitTuning) -> float:
    """Bare qubit splitting ``sqrt(eps0**2 + 4 tc**2)``."""
    return math.hypot(tuning.eps0, 2.0 * tuning.tc)


def curvature_couplings(eps0, tc, g0, eps_q):
    """Vectorised couplings; returns ``(e_q0, g_st, g_dy, delta_omega, g_perp)``.

    Broadcasts over array arguments.  No validation: callers check ``tc > 0``.
    """
    eps0 = np.asarray(eps0, dtype=float)
    e = np.hypot(eps0, 2.0 * tc)
    e3 = e**3
    tc2 = tc * tc
    return (
        e,
        eps0 * g0 / e,
        4.0 * tc2 * g0 * eps_q / e3,
        8.0 * tc2 * g0 * g0 / e3,
        2.0 * tc * g0 / e,
    )


def resolve_drive(settings: DriveSettings) -> EffectiveDrive:
    """Map raw gate drives onto the qubit detuning drive and the cavity drive.

    The two gates sit on opposite sides of the double dot, so they enter the
    detuning with opposite sign but drive the cavity with the same sign; the
    P3 detuning drive is reduced by the cross-talk factor ``1 - beta3/beta2``.
    """
    s = settings
    eps_q = s.eps2 - (1.0 - s.beta3 / s.beta2) * s.eps3
    eps_r = s.beta2 * s.eps2 + s.beta3 * s.eps3
    return EffectiveDrive(eps_q=eps_q, eps_r=eps_r)


def coupling_set(tuning: QubitTuning, g0: float, eps_q: float) -> CouplingSet:
    _finite("g0", g0)
    _finite("eps_q", eps_q)
    e, g_st, g_dy, dw, g_perp = curvature_couplings(tuning.eps0, tuning.tc, g0, eps_q)
    return CouplingSet(float(e), float(g_st), float(g_dy), float(dw), float(g_perp))


def schrieffer_wolff_shift(g_perp: float, fq: float, fr: float) -> float:
    """Dispersive shift from second-order perturbation theory in ``g_perp``.

    Keeps both the co- and counter-rotating denominators,
    ``g_perp**2 * (1/(fq - fr) + 1/(fq + fr))``.
    """
    if fr <= 0 or fq <= 0:
        raise ValidationError("fq and fr must be positive")
    if fq == fr:
        raise ResonanceError("qubit and resonator are degenerate (fq == fr)")
    return g_perp * g_perp * (1.0 / (fq - fr) + 1.0 / (fq + fr))


def _check_sign(qubit_sign):
    if qubit_sign not in (-1, 1):
        raise ValidationError(f"qubit_sign must be +1 or -1, got {qubit_sign!r}")


def steady_state_alpha(
    couplings: CouplingSet,
    eps_r: float,
    kappa: float,
    qubit_sign: int = -1,
    drive_detuning=0.0,
):
    """Stationary coherent amplitude of the cavity for one qubit branch.

    ``drive_detuning`` is drive frequency minus bare cavity frequency and may
    be an array.  At zero detuning this is the rotating-frame fixed point
    ``-(eps_r + s g_dy/2) / (s dw - i kappa/2)``.
    """
    _check_sign(qubit_sign)
    if not kappa > 0:
        raise ValidationError("kappa must be positive")
    s = qubit_sign
    num = eps_r + s * couplings.g_dy / 2.0
    den = (s * couplings.delta_omega - np.asarray(drive_detuning, dtype=float)) - 0.5j * kappa
    out = -num / den
    return complex(out) if np.ndim(out) == 0 else out


def iq_signal(c: float, couplings: CouplingSet, eps_r: float, kappa: float, qubit_sign: int = -1):
    """Homodyne IQ output ``c (eps_r + s g_dy/2) / sqrt(dw**2 + kappa**2/4)``.

    The numerator keeps its sign, so the value is ``c |alpha|`` whenever the
    direct cavity drive dominates the longitudinal term.
    """
    _check_sign(qubit_sign)
    if not kappa > 0:
        raise ValidationError("kappa must be positive")
    return (
        c
        * (eps_r + qubit_sign * couplings.g_dy / 2.0)
        / math.sqrt(couplings.delta_omega**2 + kappa**2 / 4.0)
    )


def iq_closed_form(eps0, tc, settings: DriveSettings, g0: float, kappa: float, c: float = 1.0):
    """Ground-branch IQ along a detuning sweep from the per-channel closed forms.

    S1: ``c eps2 (beta2 - 2 tc^2 g0/E^3) / D``;
    P3: ``c eps3 (beta3 + (1 - beta3/beta2) 2 tc^2 g0/E^3) / D``,
    with ``D = sqrt(dw^2 + kappa^2/4)``.
    """
    eps0 = np.asarray(eps0, dtype=float)
    e3 = np.hypot(eps0, 2.0 * tc) ** 3
    curv = 2.0 * tc * tc * g0 / e3
    denom = np.sqrt((4.0 * curv * g0) ** 2 + kappa**2 / 4.0)
    s = settings
    if s.channel is Channel.S1:
        num = s.eps2 * (s.beta2 - curv)
    else:
        num = s.eps3 * (s.beta3 + (1.0 - s.beta3 / s.beta2) * curv)
    return c * num / denom


def iq_linecut(
    device: DeviceParams,
    eps0_sweep,
    tc: float,
    settings: DriveSettings,
    c: float = 1.0,
) -> LineCut:
    """Noise-free line cut across the charge transition (eps0 in Hz)."""
    sweep = np.asarray(eps0_sweep, dtype=float)
    if sweep.size == 0:
        raise ValidationError("detuning sweep is empty")
    QubitTuning(0.0, tc)
    iq = iq_closed_form(sweep, tc, settings, device.g0, device.kappa, c)
    meta = {
        "channel": settings.channel.value,
        "tc_hz": tc,
        "c": c,
        "eps2": settings.eps2,
        "eps3": settings.eps3,
        "beta2": settings.beta2,
        "beta3": settings.beta3,
        "g0_hz": device.g0,
        "kappa_hz": device.kappa,
    }
    return LineCut.from_hz(sweep, iq, meta)


def background_level(settings: DriveSettings, kappa: float, c: float = 1.0) -> float:
    """Far-detuned IQ level ``2 c eps_r / kappa``."""
    return 2.0 * c * resolve_drive(settings).eps_r / kappa


def tunability_ratio(eps_q: float, g0: float) -> float:
    """``|g_dy / dw| = |eps_q| / (2 g0)``, independent of detuning and tc."""
    if not g0 > 0:
        raise ValidationError("g0 must be positive")
    return abs(eps_q) / (2.0 * g0)


def _parabolic_vertex(x, y, i):
    if i == 0 or i == len(y) - 1:
        return float(x[i])
    y0, y1, y2 = y[i - 1], y[i], y[i + 1]
    den = y0 - 2.0 * y1 + y2
    if den == 0:
        return float(x[i])
    h = x[i + 1] - x[i]
    return float(x[i] + 0.5 * h * (y0 - y2) / den)


def transmission_spectrum(
    couplings: CouplingSet,
    eps_r: float,
    kappa: float,
    fr: float,
    span: float,
    n_points: int,
    qubit_sign: int = -1,
) -> Spectrum:
    """Sample ``|alpha(Delta)|`` for drive detunings in ``[-span/2, span/2]``.

    The peak position is the sampled maximum refined by a three-point
    parabola and reported as an absolute frequency.
    """
    if not span > 0:
        raise ValidationError("span must be positive")
    if n_points < 3:
        raise ValidationError("need at least three spectrum points")
    if n_points % 2 == 0:
        warnings.warn("even n_points: the bare resonance is not a sample point", stacklevel=2)
    detuning = np.linspace(-span / 2.0, span / 2.0, n_points)
    mag = np.abs(steady_state_alpha(couplings, eps_r, kappa, qubit_sign, detuning))
    i = int(np.argmax(mag))
    center = fr + _parabolic_vertex(detuning, mag, i)
    meta = {"fr_hz": fr, "kappa_hz": kappa, "delta_omega_hz": couplings.delta_omega}
    return Spectrum(fr + detuning, mag, center, meta)
