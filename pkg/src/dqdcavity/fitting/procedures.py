"""Line-cut fitting workflows built on the estimators.

Backgrounds ``2 c eps beta / kappa`` are computed after each fit and
subtracted from both data and model; raw and subtracted series are kept in
``FitResult.extras["curves"]``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy import stats

from ..errors import ValidationError
from ..records import LineCut
from .estimators import IQPeakRegressor, JointIQRegressor, LorentzianRegressor
from .lm import FitResult

BETA2_DEFAULT = 1.27e-2


def _curves(linecut: LineCut, fitted, background: float) -> dict:
    return {
        "eps0_ueV": np.asarray(linecut.eps0_ueV),
        "data": np.asarray(linecut.iq),
        "fit": np.asarray(fitted),
        "data_subtracted": np.asarray(linecut.iq) - background,
        "fit_subtracted": np.asarray(fitted) - background,
    }


def simultaneous_fit(s1: LineCut | None, p3: LineCut | None, g0: float, kappa: float,
                     n_starts: int = 5) -> FitResult:
    """Joint fit of an S1 and a P3 line cut with shared ``beta2`` and ``tc``.

    Free parameters: ``c_eps2``, ``c_eps3``, ``beta2``, ``beta3``, ``tc``.
    Both line cuts are required: a P3 cut alone constrains beta2 only
    through the weak crosstalk factor.
    """
    if s1 is None or p3 is None:
        raise ValidationError(
            "simultaneous fit needs both the S1 and the P3 line cut; beta2 is not "
            "identifiable from P3 data alone"
        )
    x = np.concatenate([s1.eps0_hz, p3.eps0_hz])
    flag = np.concatenate([np.zeros(len(s1)), np.ones(len(p3))])
    y = np.concatenate([s1.iq, p3.iq])
    est = JointIQRegressor(g0=g0, kappa=kappa, n_starts=n_starts).fit(np.column_stack([x, flag]), y)
    res = est.result_
    bg = est.background_
    fit_s1 = est.predict(np.column_stack([s1.eps0_hz, np.zeros(len(s1))]))
    fit_p3 = est.predict(np.column_stack([p3.eps0_hz, np.ones(len(p3))]))
    res.extras["background_ratio"] = bg["P3"] / bg["S1"]
    res.extras["curves"] = {"S1": _curves(s1, fit_s1, bg["S1"]), "P3": _curves(p3, fit_p3, bg["P3"])}
    return res


def _fit_one_peak(lc: LineCut, beta3, beta2, g0, kappa, n_starts) -> FitResult:
    est = IQPeakRegressor("P3", g0=g0, kappa=kappa, beta2=beta2, beta3=beta3, n_starts=n_starts)
    est.fit(lc.eps0_hz, lc.iq)
    res = est.result_
    res.extras["curves"] = _curves(lc, est.predict(lc.eps0_hz), est.background_)
    return res


def per_peak_fit(peaks, beta3: float, beta2: float = BETA2_DEFAULT, g0: float = 5.5e6,
                 kappa: float = 124.5e3, n_starts: int = 5, threads: int = 1) -> list:
    """Independent P3 fits of ``(c_eps3, tc)`` with beta2 and beta3 frozen."""
    peaks = list(peaks)
    if not peaks:
        raise ValidationError("no line cuts to fit")
    if not (beta3 > 0 and beta2 > 0):
        raise ValidationError("frozen beta2 and beta3 must be positive")

    def job(lc):
        return _fit_one_peak(lc, beta3, beta2, g0, kappa, n_starts)

    if threads <= 1 or len(peaks) == 1:
        return [job(lc) for lc in peaks]
    with ThreadPoolExecutor(max_workers=int(threads)) as pool:
        return list(pool.map(job, peaks))


def lorentzian_peak_fit(linecut: LineCut, offset: float | None = None,
                        window: float | None = None) -> FitResult:
    """Lorentzian on the micro-eV axis; ``amplitude`` is signed (dips negative).

    Parameters
    ----------
    linecut : LineCut
        Raw or background-subtracted line cut.
    offset : float or None
        Frozen offset (0 after background subtraction); ``None`` fits it.
    window : float or None
        Keep only ``|eps0| <= window`` (micro-eV), i.e. the peak core where
        the lineshape is closest to a Lorentzian.
    """
    x = np.asarray(linecut.eps0_ueV, dtype=float)
    y = np.asarray(linecut.iq, dtype=float)
    if window is not None:
        keep = np.abs(x) <= window
        x, y = x[keep], y[keep]
    est = LorentzianRegressor(offset=offset).fit(x, y)
    est.result_.extras["x_units"] = "ueV"
    return est.result_


def peak_contrast(result: FitResult) -> float:
    """Model peak height above background at ``eps0 = 0`` for a P3 result."""
    curves = result.extras.get("curves")
    if curves is None:
        raise ValidationError("result carries no fitted curves")
    x = curves["eps0_ueV"]
    return float(curves["fit_subtracted"][int(np.argmin(np.abs(x)))])


def longitudinal_amplitude(result: FitResult) -> float:
    """``|c g_dy|`` at ``eps0 = 0`` from a P3 fit, ``c eps3 (1 - beta3/beta2) g0 / (2 tc)``."""
    p = result.best_fit
    return abs(p["c_eps3"] * (1.0 - p["beta3"] / p["beta2"]) * p["g0"] / (2.0 * p["tc"]))


def longitudinal_amplitude_sigma(result: FitResult) -> float:
    """1-sigma of :func:`longitudinal_amplitude` from the ``(c_eps3, tc)`` covariance."""
    names = list(result.fitted_names)
    if "c_eps3" not in names or "tc" not in names:
        raise ValidationError("result does not fit both c_eps3 and tc")
    i, j = names.index("c_eps3"), names.index("tc")
    cov = np.asarray(result.covariance)
    a, t = result.best_fit["c_eps3"], result.best_fit["tc"]
    rel2 = cov[i, i] / a**2 + cov[j, j] / t**2 - 2.0 * cov[i, j] / (a * t)
    return longitudinal_amplitude(result) * float(np.sqrt(max(rel2, 0.0)))


def dispersive_shift(result: FitResult) -> float:
    """``g0^2 / tc`` at ``eps0 = 0`` from a fit's ``tc``."""
    return result.best_fit["g0"] ** 2 / result.best_fit["tc"]


def trend_exponent(x, y, sigma=None) -> dict:
    """Slope of ``log y`` against ``log x`` with its standard error.

    Parameters
    ----------
    x, y : array_like
        Positive values.
    sigma : array_like or None
        1-sigma uncertainties of ``y``.  When given, points are weighted by
        ``y / sigma`` (inverse error of ``log y``), which keeps low
        signal-to-noise points from dominating the slope.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
        raise ValidationError("x and y must be 1-d arrays of equal length >= 2")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValidationError("trend exponent needs positive values")
    if sigma is not None:
        sigma = np.asarray(sigma, dtype=float)
        if sigma.shape != y.shape or not np.all(np.isfinite(sigma) & (sigma > 0)):
            raise ValidationError("sigma must be positive and match y")
        if len(x) < 4:
            raise ValidationError("weighted trend needs at least 4 points")
        coef, cov = np.polyfit(np.log(x), np.log(y), 1, w=y / sigma, cov=True)
        return {"exponent": float(coef[0]), "sigma": float(np.sqrt(cov[0, 0])),
                "prefactor": float(np.exp(coef[1]))}
    if len(x) == 2:
        slope = float(np.diff(np.log(y))[0] / np.diff(np.log(x))[0])
        return {"exponent": slope, "sigma": float("nan"), "prefactor": float(y[0] / x[0] ** slope)}
    fit = stats.linregress(np.log(x), np.log(y))
    return {"exponent": float(fit.slope), "sigma": float(fit.stderr), "prefactor": float(np.exp(fit.intercept))}
