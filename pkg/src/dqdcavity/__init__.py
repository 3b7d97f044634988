"""Driven double quantum dot coupled longitudinally to a microwave cavity.

Closed-form effective model, brute-force Lindblad oracle, calibration chain,
least-squares fitting and synthetic data I/O.  All energies are frequencies
E/h in Hz and all rates are omega/2pi in Hz; see :mod:`dqdcavity.units`.
"""

__version__ = "0.1.0"
