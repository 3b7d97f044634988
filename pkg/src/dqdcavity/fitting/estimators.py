"""Scikit-learn style regressors wrapping the least-squares engine.

All estimators take the swept variable as ``X`` of shape ``(n_samples, 1)``
(a 1-d array is accepted too) and expose ``fit``/``predict``/``score`` plus
the usual ``get_params``/``set_params``, so they drop into pipelines and
model-selection utilities.  Fitted attributes end in an underscore.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ..errors import ValidationError
from .lm import FitResult, ParameterSpec, Role, least_squares
from .models import iq_background, lorentzian, model_iq_p3, model_iq_s1, thermal_lineshape

# FWHM of (1 + (eps0 / 2 tc)^2)^(-3/2) is 4 tc sqrt(2^(2/3) - 1)
_FWHM_PER_TC = 4.0 * np.sqrt(2.0 ** (2.0 / 3.0) - 1.0)
_START_FACTORS = (1.0, 0.7, 1.4, 0.5, 2.0)


def _column(X, y=None):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if y is None:
        return check_array(X)
    return check_X_y(X, y, y_numeric=True)


def _tails(x, y, frac=0.15):
    order = np.argsort(np.abs(x))
    k = max(2, int(frac * len(x)))
    return y[order[-k:]]


def _excess_profile(x, y, sign):
    """Background, contrast at x=0 and FWHM of the feature for the given sign."""
    bg = float(np.median(_tails(x, y)))
    near = np.argsort(np.abs(x))[:3]
    contrast = float(np.mean(y[near]) - bg)
    if sign * contrast <= 0:
        contrast = sign * max(np.std(y), 1e-300)
    excess = sign * (y - bg)
    above = excess >= 0.5 * abs(contrast)
    dx = np.median(np.abs(np.diff(np.sort(x))))
    fwhm = max(int(np.count_nonzero(above)), 2) * dx
    return bg, contrast, fwhm


def _flag_degenerate(res: FitResult) -> FitResult:
    # flat or featureless data: report failure instead of arbitrary parameters
    if not res.identifiable:
        res.converged = False
        res.message = "degenerate fit: " + res.diagnostic
    return res


def _flag_unresolved(res: FitResult, x) -> FitResult:
    # a feature narrower than two samples or wider than the sweep carries no tc information
    fwhm = _FWHM_PER_TC * res.best_fit["tc"]
    dx = float(np.median(np.diff(np.sort(np.unique(x))))) if len(np.unique(x)) > 1 else 0.0
    if res.converged and not (2.0 * dx <= fwhm <= float(np.ptp(x))):
        res.converged = False
        res.message = f"degenerate fit: fitted feature width {fwhm:.3g} Hz is not resolved by the sweep"
    return res


def _best_of(results, x=None):
    results = [_flag_degenerate(r) for r in results]
    if x is not None:
        results = [_flag_unresolved(r, x) for r in results]
    ok = [r for r in results if r.converged]
    pool = ok or results
    return min(pool, key=lambda r: r.residual_norm)


class IQPeakRegressor(RegressorMixin, BaseEstimator):
    """Fit one detuning line cut to the ground-branch IQ closed form.

    Parameters
    ----------
    channel : {"P3", "S1"}
        Driven gate.  P3 fits ``c_eps3``, ``tc`` and (unless ``beta3`` is
        given) ``beta3`` with ``beta2`` frozen.  S1 fits ``c_eps2``, ``beta2``
        and ``tc``.
    g0, kappa : float
        Bare coupling and cavity decay rate in Hz, held fixed.
    beta2 : float
        Frozen S1 cross-coupling used by the P3 crosstalk factor.
    beta3 : float or None
        Frozen value for beta3; ``None`` fits it.
    tc_init : float or None
        Starting tunnel coupling in Hz; ``None`` uses the half-width heuristic.
    n_starts : int
        Number of starts, scaling the initial ``tc`` by fixed factors.
    """

    def __init__(
        self,
        channel="P3",
        g0=5.5e6,
        kappa=124.5e3,
        beta2=1.27e-2,
        beta3=None,
        tc_init=None,
        n_starts=5,
        max_iter=200,
    ):
        self.channel = channel
        self.g0 = g0
        self.kappa = kappa
        self.beta2 = beta2
        self.beta3 = beta3
        self.tc_init = tc_init
        self.n_starts = n_starts
        self.max_iter = max_iter

    def _specs(self, x, y, tc_scale):
        sign = 1.0 if self.channel == "P3" else -1.0
        bg, contrast, fwhm = _excess_profile(x, y, sign)
        tc0 = self.tc_init if self.tc_init is not None else fwhm / _FWHM_PER_TC
        tc0 *= tc_scale
        k, g0 = self.kappa, self.g0
        peak_scale = 2.0 / k * g0 / (4.0 * tc0)
        if self.channel == "P3":
            b2 = self.beta2
            c3 = abs(contrast) / ((1.0 - 0.25) * peak_scale) if self.beta3 is None else None
            if self.beta3 is None:
                # solve background and contrast for (c_eps3, beta3)
                c3 = abs(contrast) / peak_scale + bg * k / (2.0 * b2)
                b3 = min(max(bg * k / (2.0 * c3), 1e-6 * b2), 0.9 * b2)
            else:
                b3 = self.beta3
                c3 = max(bg * k / (2.0 * b3), 1e-300)
            return [
                ParameterSpec("c_eps3", c3, 0.0, np.inf),
                ParameterSpec("beta3", b3, 0.0, 1.0, Role.FROZEN if self.beta3 is not None else Role.FREE),
                ParameterSpec("tc", tc0, 0.0, np.inf),
                ParameterSpec("beta2", b2, role=Role.FROZEN),
                ParameterSpec("g0", g0, role=Role.FROZEN),
                ParameterSpec("kappa", k, role=Role.FROZEN),
            ]
        if self.channel == "S1":
            c2 = abs(contrast) / peak_scale
            b2 = min(max(bg * k / (2.0 * c2), 1e-8), 0.99)
            return [
                ParameterSpec("c_eps2", c2, 0.0, np.inf),
                ParameterSpec("beta2", b2, 0.0, 1.0),
                ParameterSpec("tc", tc0, 0.0, np.inf),
                ParameterSpec("g0", g0, role=Role.FROZEN),
                ParameterSpec("kappa", k, role=Role.FROZEN),
            ]
        raise ValidationError(f"unknown channel {self.channel!r}")

    @staticmethod
    def _model(p, x, _block=0, channel="P3"):
        if channel == "P3":
            return model_iq_p3(x, p["c_eps3"], p["beta3"], p["tc"], p["beta2"], p["g0"], p["kappa"])
        return model_iq_s1(x, p["c_eps2"], p["beta2"], p["tc"], p["g0"], p["kappa"])

    def fit(self, X, y):
        X, y = _column(X, y)
        x = X[:, 0]
        channel = self.channel

        def model(p, xx, i):
            return self._model(p, xx, i, channel)

        results = []
        for f in _START_FACTORS[: max(1, int(self.n_starts))]:
            results.append(least_squares(model, (x, y), self._specs(x, y, f), max_iter=self.max_iter))
        res = _best_of(results, x)
        p = res.best_fit
        if channel == "P3":
            res.extras["background"] = iq_background(p["c_eps3"], p["beta3"], p["kappa"])
        else:
            res.extras["background"] = iq_background(p["c_eps2"], p["beta2"], p["kappa"])
        self.result_ = res
        self.params_ = dict(res.best_fit)
        self.sigma_ = dict(res.sigma)
        self.background_ = res.extras["background"]
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "params_")
        x = _column(X)[:, 0]
        return self._model(self.params_, x, 0, self.channel)


class JointIQRegressor(RegressorMixin, BaseEstimator):
    """Simultaneous S1 + P3 fit sharing ``beta2`` and ``tc``.

    ``X`` has two columns: detuning in Hz and a channel flag (0 for S1,
    1 for P3).  Free parameters are ``c_eps2``, ``c_eps3``, ``beta2``,
    ``beta3`` and ``tc``; ``g0`` and ``kappa`` stay fixed.
    """

    def __init__(self, g0=5.5e6, kappa=124.5e3, n_starts=5, max_iter=300):
        self.g0 = g0
        self.kappa = kappa
        self.n_starts = n_starts
        self.max_iter = max_iter

    @staticmethod
    def _split(X):
        X = check_array(X)
        if X.shape[1] != 2:
            raise ValidationError("JointIQRegressor expects X with columns (eps0_hz, is_p3)")
        flag = X[:, 1]
        if not np.all((flag == 0) | (flag == 1)):
            raise ValidationError("channel flag column must contain only 0 (S1) or 1 (P3)")
        return X[:, 0], flag.astype(bool)

    def _initial(self, xs, ys, xp, yp, factor):
        k, g0 = self.kappa, self.g0
        bg_s, con_s, fw_s = _excess_profile(xs, ys, -1.0)
        bg_p, con_p, fw_p = _excess_profile(xp, yp, +1.0)
        # the P3 peak has the better contrast; trust its width
        tc0 = factor * fw_p / _FWHM_PER_TC
        peak_scale = 2.0 / k * g0 / (4.0 * tc0)
        c2 = abs(con_s) / peak_scale
        b2 = min(max(bg_s * k / (2.0 * c2), 1e-6), 0.5)
        c3 = abs(con_p) / peak_scale + bg_p * k / (2.0 * b2)
        b3 = min(max(bg_p * k / (2.0 * c3), 1e-6 * b2), 0.9 * b2)
        return [
            ParameterSpec("c_eps2", c2, 0.0, np.inf),
            ParameterSpec("c_eps3", c3, 0.0, np.inf),
            ParameterSpec("beta2", b2, 0.0, 1.0, Role.SHARED),
            ParameterSpec("beta3", b3, 0.0, 1.0),
            ParameterSpec("tc", tc0, 0.0, np.inf, Role.SHARED),
            ParameterSpec("g0", g0, role=Role.FROZEN),
            ParameterSpec("kappa", k, role=Role.FROZEN),
        ]

    @staticmethod
    def _model(p, x, block):
        if block == 0:
            return model_iq_s1(x, p["c_eps2"], p["beta2"], p["tc"], p["g0"], p["kappa"])
        return model_iq_p3(x, p["c_eps3"], p["beta3"], p["tc"], p["beta2"], p["g0"], p["kappa"])

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        x, is_p3 = self._split(X)
        if is_p3.all() or not is_p3.any():
            raise ValidationError(
                "simultaneous fit needs both an S1 and a P3 line cut: beta2 is not "
                "identifiable from a single channel"
            )
        xs, ys = x[~is_p3], y[~is_p3]
        xp, yp = x[is_p3], y[is_p3]
        data = [(xs, ys), (xp, yp)]
        results = [
            least_squares(self._model, data, self._initial(xs, ys, xp, yp, f), max_iter=self.max_iter)
            for f in _START_FACTORS[: max(1, int(self.n_starts))]
        ]
        res = _best_of(results, x)
        p = res.best_fit
        res.extras["background"] = {
            "S1": iq_background(p["c_eps2"], p["beta2"], p["kappa"]),
            "P3": iq_background(p["c_eps3"], p["beta3"], p["kappa"]),
        }
        self.result_ = res
        self.params_ = dict(p)
        self.sigma_ = dict(res.sigma)
        self.background_ = dict(res.extras["background"])
        self.n_features_in_ = 2
        return self

    def predict(self, X):
        check_is_fitted(self, "params_")
        x, is_p3 = self._split(X)
        out = np.empty_like(x)
        out[~is_p3] = self._model(self.params_, x[~is_p3], 0)
        out[is_p3] = self._model(self.params_, x[is_p3], 1)
        return out


class LorentzianRegressor(RegressorMixin, BaseEstimator):
    """``offset + amplitude / (1 + ((x - center)/hwhm)^2)``; amplitude is signed.

    Parameters
    ----------
    max_iter : int
        Iteration cap of the least-squares engine.
    offset : float or None
        Frozen offset, e.g. 0 for background-subtracted data; ``None`` fits it.
    """

    def __init__(self, max_iter=200, offset=None):
        self.max_iter = max_iter
        self.offset = offset

    def fit(self, X, y):
        X, y = _column(X, y)
        x = X[:, 0]
        if len(x) < 7:
            raise ValidationError("Lorentzian fit needs at least 7 points spanning the peak")
        if self.offset is None:
            offset = float(np.median(_tails(x - np.median(x), y)))
        else:
            offset = float(self.offset)
        dev = y - offset
        i = int(np.argmax(np.abs(dev)))
        amp = float(dev[i])
        span = float(np.ptp(x))
        above = np.sign(amp) * dev >= 0.5 * abs(amp)
        dx = span / (len(x) - 1)
        hwhm = max(0.5 * np.count_nonzero(above) * dx, dx)
        scale = max(abs(amp), float(np.std(y)), abs(offset), 1e-300)
        specs = [
            ParameterSpec("amplitude", amp, scale=scale),
            ParameterSpec("center", float(x[i]), x.min(), x.max(), scale=span),
            ParameterSpec("hwhm", hwhm, 0.0, 10.0 * span),
            ParameterSpec("offset", offset, scale=scale,
                          role=Role.FREE if self.offset is None else Role.FROZEN),
        ]

        def model(p, xx, _i):
            return lorentzian(xx, p["amplitude"], p["center"], p["hwhm"], p["offset"])

        res = _flag_degenerate(least_squares(model, (x, y), specs, max_iter=self.max_iter))
        self.result_ = res
        self.params_ = dict(res.best_fit)
        self.sigma_ = dict(res.sigma)
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "params_")
        p = self.params_
        return lorentzian(_column(X)[:, 0], p["amplitude"], p["center"], p["hwhm"], p["offset"])


class ThermalTransitionRegressor(RegressorMixin, BaseEstimator):
    """Thermally broadened charge transition, ``offset - |amp| sech^2(width (V - V0))``.

    ``width`` equals ``alpha / (2 k_B T_e)`` in 1/V; a single scan fixes only
    this ratio, so lever arm and temperature are separated across scans.
    """

    def __init__(self, max_iter=200):
        self.max_iter = max_iter

    def fit(self, X, y):
        X, y = _column(X, y)
        v = X[:, 0]
        order = np.argsort(v)
        v, yy = v[order], y[order]
        offset = float(np.median(_tails(v - np.median(v), yy)))
        i = int(np.argmin(yy))
        amp = max(offset - float(yy[i]), 1e-12 * max(abs(offset), 1.0))
        below = offset - yy >= 0.5 * amp
        dv = float(np.median(np.diff(v)))
        fwhm = max(np.count_nonzero(below) * dv, dv)
        # sech^2(u) = 1/2 at u = arcsech(1/sqrt 2)
        width = 2.0 * np.arccosh(np.sqrt(2.0)) / fwhm
        span = float(np.ptp(v))
        specs = [
            ParameterSpec("v0", float(v[i]), v.min(), v.max(), scale=span),
            ParameterSpec("amp", amp, 0.0, np.inf),
            ParameterSpec("offset", offset, scale=max(abs(offset), amp)),
            ParameterSpec("width", width, 0.0, np.inf),
        ]

        def model(p, xx, _i):
            return thermal_lineshape(xx, p["v0"], p["amp"], p["offset"], p["width"])

        self.result_ = _flag_degenerate(least_squares(model, (v, yy), specs, max_iter=self.max_iter))
        self.params_ = dict(self.result_.best_fit)
        self.sigma_ = dict(self.result_.sigma)
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "params_")
        p = self.params_
        return thermal_lineshape(_column(X)[:, 0], p["v0"], p["amp"], p["offset"], p["width"])


__all__ = [
    "FitResult",
    "IQPeakRegressor",
    "JointIQRegressor",
    "LorentzianRegressor",
    "ThermalTransitionRegressor",
]
