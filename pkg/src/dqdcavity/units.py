"""Physical constants and unit conversions.

Every energy inside the package is an ordinary frequency E/h in Hz and every
angular rate (g0, dispersive shift, longitudinal coupling, cavity decay) is
stored as omega/2pi in Hz.  With that convention hbar and the 2pi factors drop
out of all closed forms, so conversions happen only at the I/O boundary
(micro-eV axes, dBm, kelvin, eV/V lever arms).
"""

import numpy as np

#: Boltzmann constant in eV/K.
K_B_EV = 8.617333e-5
#: von Klitzing constant h/e^2 in ohm.
R_K = 25812.807
#: 1 eV expressed as a frequency E/h, in Hz.
EV_TO_HZ = 2.41798935e14
#: 1 micro-eV expressed as a frequency, in Hz.
UEV_TO_HZ = EV_TO_HZ * 1e-6

GHZ = 1e9
MHZ = 1e6
KHZ = 1e3


def _scaled(x, factor):
    out = np.asarray(x, dtype=float) * factor
    return out if out.ndim else float(out)


def ueV_to_hz(x):
    return _scaled(x, UEV_TO_HZ)


def hz_to_ueV(x):
    return _scaled(x, 1.0 / UEV_TO_HZ)


def ev_to_hz(x):
    return _scaled(x, EV_TO_HZ)


def dbm_to_watt(p_dbm):
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


def watt_to_dbm(p_w):
    return 10.0 * np.log10(p_w) + 30.0

PICOWATT = 1e-12
MILLIKELVIN = 1e-3
MILLIVOLT = 1e-3
