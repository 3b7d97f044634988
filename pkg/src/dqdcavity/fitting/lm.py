"""Damped (Levenberg-Marquardt) least squares over named parameters.

Parameters carry a role: ``free`` and ``shared`` are optimised (``shared``
only annotates that several data blocks depend on the value), ``frozen`` are
held at their value.  Parameters with a non-negative lower bound are
optimised in log space, which keeps them positive without a constrained
solver; the rest are clipped to their bounds after each step.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..errors import ValidationError


class Role(str, enum.Enum):
    FREE = "free"
    SHARED = "shared-across-datasets"
    FROZEN = "frozen"


@dataclass(frozen=True)
class ParameterSpec:
    name: str
    value: float
    lower: float = -np.inf
    upper: float = np.inf
    role: Role = Role.FREE
    scale: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "role", Role(self.role))
        if not np.isfinite(self.value):
            raise ValidationError(f"{self.name}: initial value must be finite")
        if not (self.lower <= self.value <= self.upper):
            raise ValidationError(
                f"{self.name}: initial value {self.value} outside bounds [{self.lower}, {self.upper}]"
            )
        if self.log_scaled and self.value <= 0:
            raise ValidationError(f"{self.name}: log-scaled parameter needs a positive start")
        if self.scale is not None and not self.scale > 0:
            raise ValidationError(f"{self.name}: scale must be positive")

    @property
    def typical(self) -> float:
        """Magnitude used to normalise a linear (non-log) parameter."""
        if self.scale is not None:
            return float(self.scale)
        return abs(self.value) if self.value != 0 else 1.0

    @property
    def fitted(self) -> bool:
        return self.role is not Role.FROZEN

    @property
    def log_scaled(self) -> bool:
        return self.role is not Role.FROZEN and self.lower >= 0


@dataclass
class FitResult:
    """Outcome of a least-squares fit.

    ``covariance`` is over the fitted (non-frozen) parameters in the order of
    ``fitted_names``; ``sigma`` holds 1-sigma errors (zero for frozen ones).
    """

    names: list
    best_fit: dict
    sigma: dict
    covariance: np.ndarray
    fitted_names: list
    roles: dict
    residual_norm: float
    n_iterations: int
    converged: bool
    message: str = ""
    identifiable: bool = True
    diagnostic: str = ""
    cost_history: list = field(default_factory=list)
    dof: int = 0
    extras: dict = field(default_factory=dict)

    def __getitem__(self, name):
        return self.best_fit[name]

    def correlation(self) -> np.ndarray:
        d = np.sqrt(np.diag(self.covariance))
        with np.errstate(invalid="ignore", divide="ignore"):
            return self.covariance / np.outer(d, d)

    def to_dict(self) -> dict:
        return {
            "parameters": [
                {
                    "name": n,
                    "value": self.best_fit[n],
                    "sigma": self.sigma[n],
                    "role": self.roles[n],
                }
                for n in self.names
            ],
            "fitted_names": list(self.fitted_names),
            "covariance": np.asarray(self.covariance).tolist(),
            "residual_norm": self.residual_norm,
            "n_iterations": self.n_iterations,
            "converged": self.converged,
            "identifiable": self.identifiable,
            "message": self.message,
            "diagnostic": self.diagnostic,
            "dof": self.dof,
            "extras": _jsonable(self.extras),
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


ModelFn = Callable[[dict, np.ndarray, int], np.ndarray]


def _one_block(d):
    if hasattr(d, "eps0_hz") and hasattr(d, "iq"):
        return np.asarray(d.eps0_hz, float), np.asarray(d.iq, float), None
    if len(d) == 2:
        return np.asarray(d[0], float), np.asarray(d[1], float), None
    if len(d) == 3:
        y = np.asarray(d[1], float)
        sig = None if d[2] is None else np.broadcast_to(np.asarray(d[2], float), y.shape)
        return np.asarray(d[0], float), y, sig
    raise ValidationError("data block must be (x, y) or (x, y, sigma)")


def _as_blocks(data):
    # a list holds several blocks; a tuple or LineCut is a single block
    if isinstance(data, list):
        return [_one_block(d) for d in data]
    return [_one_block(data)]


class _Problem:
    def __init__(self, model, blocks, specs):
        self.model = model
        self.blocks = blocks
        self.specs = list(specs)
        self.free = [s for s in self.specs if s.fitted]
        self.log = np.array([s.log_scaled for s in self.free], dtype=bool)
        self.scale = np.array([1.0 if s.log_scaled else s.typical for s in self.free], float)
        lo = np.array([s.lower for s in self.free], float)
        hi = np.array([s.upper for s in self.free], float)
        with np.errstate(divide="ignore"):
            self.lo = np.where(self.log, np.log(np.maximum(lo, 0.0)), lo / self.scale)
            self.hi = np.where(self.log, np.log(hi), hi / self.scale)
        self.fixed = {s.name: s.value for s in self.specs if not s.fitted}
        # residual scale: keeps gradients O(1) so absolute tolerances mean something
        scales = []
        for _, y, sig in blocks:
            if sig is not None:
                scales.append(np.ones_like(y) / sig)
            else:
                ref = np.max(np.abs(y)) if np.any(y) else 1.0
                scales.append(np.full_like(y, 1.0 / ref))
        self.weights = scales
        self.has_sigma = all(sig is not None for _, _, sig in blocks)

    def to_internal(self, values):
        v = np.asarray(values, float)
        return np.where(self.log, np.log(np.where(self.log, v, 1.0)), v / self.scale)

    def to_natural(self, z):
        with np.errstate(over="ignore"):
            return np.where(self.log, np.exp(np.where(self.log, z, 0.0)), z * self.scale)

    def params(self, z) -> dict:
        p = dict(self.fixed)
        for s, v in zip(self.free, self.to_natural(z)):
            p[s.name] = float(v)
        return p

    def raw_residuals(self, z):
        p = self.params(z)
        out = []
        # trial steps may hit a bound (e.g. a width of 0); the non-finite
        # cost is rejected by the damping loop, so silence the warning
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            for i, (x, y, _) in enumerate(self.blocks):
                out.append(np.asarray(self.model(p, x, i), float) - y)
        return np.concatenate(out)

    def residuals(self, z):
        r = self.raw_residuals(z)
        return r * np.concatenate(self.weights)

    def jacobian(self, z, r0=None):
        n = len(z)
        cols = []
        for k in range(n):
            h = 1e-6 * max(1.0, abs(z[k]))
            zp = z.copy()
            zm = z.copy()
            zp[k] += h
            zm[k] -= h
            cols.append((self.residuals(zp) - self.residuals(zm)) / (2.0 * h))
        return np.column_stack(cols) if cols else np.zeros((len(r0), 0))

    def clip(self, z):
        return np.clip(z, self.lo, self.hi)


def _identifiability(jtj, names, tol=1e-10):
    # scale to unit diagonal so the test is independent of parameter units
    d = np.sqrt(np.abs(np.diag(jtj)))
    if np.any(d == 0):
        bad = [n for n, di in zip(names, d) if di == 0]
        return False, "model output does not depend on: " + ", ".join(bad)
    corr = jtj / np.outer(d, d)
    w, v = np.linalg.eigh(corr)
    if w[0] > tol * w[-1]:
        return True, ""
    vec = v[:, 0]
    involved = [n for n, c in zip(names, vec) if abs(c) > 0.1]
    return False, (
        "singular Jacobian: only a combination of "
        + ", ".join(involved)
        + f" is determined (condition number {w[-1] / max(w[0], 1e-300):.3g})"
    )


def least_squares(
    model: ModelFn,
    data,
    specs: Sequence[ParameterSpec],
    *,
    max_iter: int = 200,
    ftol: float = 1e-10,
    gtol: float = 1e-12,
    lambda0: float = 1e-3,
) -> FitResult:
    """Minimise the sum of squared residuals ``model(params, x, block) - y``.

    Parameters
    ----------
    model : callable
        ``model(params, x, block_index) -> prediction``; ``params`` is a dict
        holding every parameter (fitted and frozen) by name.
    data : (x, y), (x, y, sigma), LineCut, or a list of those
        One entry per data block.  With ``sigma`` given for every block the
        residuals are weighted and the covariance is not rescaled.
    specs : sequence of ParameterSpec
    max_iter : int
        Iteration budget.  Exhausting it returns ``converged=False``.

    Returns
    -------
    FitResult
        Covariance is ``s^2 (J^T J)^-1`` at the optimum with ``J`` taken with
        respect to the natural (untransformed) parameters and ``s^2`` the
        residual variance (1 when sigmas were supplied).
    """
    blocks = _as_blocks(data)
    specs = list(specs)
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise ValidationError("duplicate parameter names")
    prob = _Problem(model, blocks, specs)
    n_points = sum(len(y) for _, y, _ in blocks)
    n_free = len(prob.free)
    if n_points <= n_free:
        raise ValidationError(f"{n_points} points cannot constrain {n_free} free parameters")

    z = prob.to_internal([s.value for s in prob.free])
    r = prob.residuals(z)
    cost = 0.5 * float(r @ r)
    history = [cost]
    lam = lambda0
    converged = False
    message = "maximum number of iterations reached"
    it = 0
    for it in range(1, max_iter + 1):
        J = prob.jacobian(z, r)
        g = J.T @ r
        if np.max(np.abs(g), initial=0.0) < gtol:
            converged, message = True, "gradient norm below tolerance"
            break
        A = J.T @ J
        dA = np.diag(A).copy()
        dA[dA == 0] = 1.0
        accepted = False
        while lam < 1e16:
            try:
                step = np.linalg.solve(A + lam * np.diag(dA), -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            z_new = prob.clip(z + step)
            r_new = prob.residuals(z_new)
            cost_new = 0.5 * float(r_new @ r_new)
            if np.isfinite(cost_new) and cost_new < cost:
                accepted = True
                lam = max(lam / 10.0, 1e-12)
                break
            lam *= 10.0
        if not accepted:
            converged, message = True, "no downhill step at machine precision"
            break
        rel = (cost - cost_new) / max(cost, 1e-300)
        z, r, cost = z_new, r_new, cost_new
        history.append(cost)
        if rel < ftol:
            converged, message = True, "relative cost change below tolerance"
            break
        if cost == 0.0:
            converged, message = True, "exact fit"
            break

    # covariance in natural parameters
    values = prob.to_natural(z)
    fitted_names = [s.name for s in prob.free]
    J = prob.jacobian(z, r)
    chain = np.where(prob.log, values, prob.scale)
    weights = np.concatenate(prob.weights)
    raw = prob.raw_residuals(z)
    with np.errstate(divide="ignore", invalid="ignore"):
        J_nat = (J / chain) / weights[:, None]
    dof = n_points - n_free
    if prob.has_sigma:
        Jw = J_nat * weights[:, None]
        s2 = 1.0
    else:
        Jw = J_nat
        s2 = float(raw @ raw) / dof
    jtj = Jw.T @ Jw
    identifiable, diagnostic = _identifiability(jtj, fitted_names) if n_free else (True, "")
    if identifiable:
        cov = s2 * np.linalg.inv(jtj)
        cov = 0.5 * (cov + cov.T)
    else:
        cov = s2 * np.linalg.pinv(jtj)
        cov = 0.5 * (cov + cov.T)
    best = {s.name: float(s.value) for s in specs}
    sigma = {s.name: 0.0 for s in specs}
    for k, name in enumerate(fitted_names):
        best[name] = float(values[k])
        sigma[name] = float(math.sqrt(max(cov[k, k], 0.0))) if identifiable else math.inf
    return FitResult(
        names=names,
        best_fit=best,
        sigma=sigma,
        covariance=cov,
        fitted_names=fitted_names,
        roles={s.name: s.role.value for s in specs},
        residual_norm=float(np.sqrt(raw @ raw)),
        n_iterations=it,
        converged=converged,
        message=message,
        identifiable=identifiable,
        diagnostic=diagnostic,
        cost_history=history,
        dof=dof,
    )
