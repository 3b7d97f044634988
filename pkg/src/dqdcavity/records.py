"""Plain data records shared by the model, fitting and I/O layers."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from .errors import ValidationError
from .units import hz_to_ueV, ueV_to_hz


def _frozen_array(x, name: str) -> np.ndarray:
    arr = np.array(x, dtype=float, copy=True)
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class LineCut:
    """IQ magnitude sampled along the detuning axis.

    The detuning axis is kept twice: in micro-eV (what figures show) and as a
    frequency in Hz (what the model consumes).  Use :meth:`from_ueV` or
    :meth:`from_hz` rather than filling both by hand.
    """

    eps0_ueV: np.ndarray
    eps0_hz: np.ndarray
    iq: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "eps0_ueV", _frozen_array(self.eps0_ueV, "eps0_ueV"))
        object.__setattr__(self, "eps0_hz", _frozen_array(self.eps0_hz, "eps0_hz"))
        object.__setattr__(self, "iq", _frozen_array(self.iq, "iq"))
        n = len(self.iq)
        if len(self.eps0_ueV) != n or len(self.eps0_hz) != n:
            raise ValidationError(
                f"length mismatch: eps0 has {len(self.eps0_ueV)} samples, iq has {n}"
            )
        if n < 2:
            raise ValidationError("a line cut needs at least two samples")
        d = np.diff(self.eps0_ueV)
        if not (np.all(d > 0) or np.all(d < 0)):
            raise ValidationError("eps0 must be strictly monotone")
        if not np.allclose(ueV_to_hz(self.eps0_ueV), self.eps0_hz, rtol=1e-12, atol=0):
            raise ValidationError("eps0_ueV and eps0_hz disagree")

    @classmethod
    def from_ueV(cls, eps0_ueV, iq, meta: dict | None = None) -> "LineCut":
        eps0_ueV = np.asarray(eps0_ueV, dtype=float)
        return cls(eps0_ueV, ueV_to_hz(eps0_ueV), iq, dict(meta or {}))

    @classmethod
    def from_hz(cls, eps0_hz, iq, meta: dict | None = None) -> "LineCut":
        eps0_hz = np.asarray(eps0_hz, dtype=float)
        return cls(hz_to_ueV(eps0_hz), eps0_hz, iq, dict(meta or {}))

    def __len__(self) -> int:
        return len(self.iq)

    def with_iq(self, iq, **meta_updates: Any) -> "LineCut":
        meta = dict(self.meta)
        meta.update(meta_updates)
        return replace(self, iq=np.asarray(iq, dtype=float), meta=meta)


@dataclass(frozen=True)
class Spectrum:
    """Cavity response magnitude versus absolute drive frequency."""

    freq_hz: np.ndarray
    magnitude: np.ndarray
    peak_center_hz: float
    meta: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Diagram:
    """IQ signal on a (V_P2, V_P3) grid; ``iq[i, j]`` belongs to ``vp2[i], vp3[j]``."""

    vp2: np.ndarray
    vp3: np.ndarray
    iq: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        iq = np.asarray(self.iq, dtype=float)
        if iq.shape != (len(self.vp2), len(self.vp3)):
            raise ValidationError(
                f"iq shape {iq.shape} does not match axes ({len(self.vp2)}, {len(self.vp3)})"
            )
