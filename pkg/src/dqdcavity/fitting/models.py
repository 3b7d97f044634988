"""Fit functions for line cuts, in frequency units (eps0, tc, g0, kappa in Hz).

The amplitude parameters are products ``c * eps`` of the unknown detector
gain and the raw gate drive; only the product is observable.
"""

import numpy as np


def _curvature(eps0, tc, g0):
    e3 = np.hypot(np.asarray(eps0, dtype=float), 2.0 * tc) ** 3
    return 2.0 * tc * tc * g0 / e3


def _denominator(curv, g0, kappa):
    # dispersive shift is 8 tc^2 g0^2 / E^3 = 4 g0 * curv
    return np.sqrt((4.0 * g0 * curv) ** 2 + kappa**2 / 4.0)


def model_iq_s1(eps0, c_eps2, beta2, tc, g0, kappa):
    """IQ for an S1 drive: a dip at eps0 = 0 on a ``2 c eps2 beta2 / kappa`` background."""
    curv = _curvature(eps0, tc, g0)
    return c_eps2 * (beta2 - curv) / _denominator(curv, g0, kappa)


def model_iq_p3(eps0, c_eps3, beta3, tc, beta2, g0, kappa):
    """IQ for a P3 drive: the longitudinal term adds to the cavity drive, giving a peak."""
    curv = _curvature(eps0, tc, g0)
    return c_eps3 * (beta3 + (1.0 - beta3 / beta2) * curv) / _denominator(curv, g0, kappa)


def iq_background(c_eps, beta, kappa):
    """Far-detuned limit ``2 c eps beta / kappa`` of either channel."""
    return 2.0 * c_eps * beta / kappa


def lorentzian(x, amplitude, center, hwhm, offset):
    return offset + amplitude / (1.0 + ((np.asarray(x, dtype=float) - center) / hwhm) ** 2)


def sech2(u):
    """``sech(u)**2`` without overflow in the tails."""
    e = np.exp(-2.0 * np.abs(np.asarray(u, dtype=float)))
    return 4.0 * e / (1.0 + e) ** 2


def thermal_lineshape(v, v0, amp, offset, width):
    """``offset - |amp| sech^2(width (v - v0))``; ``width`` is alpha / (2 k_B T_e) in 1/V."""
    u = width * (np.asarray(v, dtype=float) - v0)
    return offset - abs(amp) * sech2(u)
