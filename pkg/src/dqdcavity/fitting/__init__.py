"""Least-squares engine, fit functions and estimators for line cuts."""

from .estimators import (
    IQPeakRegressor,
    JointIQRegressor,
    LorentzianRegressor,
    ThermalTransitionRegressor,
)
from .lm import FitResult, ParameterSpec, Role, least_squares
from .models import iq_background, lorentzian, model_iq_p3, model_iq_s1, thermal_lineshape

__all__ = [
    "FitResult",
    "IQPeakRegressor",
    "JointIQRegressor",
    "LorentzianRegressor",
    "ParameterSpec",
    "Role",
    "ThermalTransitionRegressor",
    "iq_background",
    "least_squares",
    "lorentzian",
    "model_iq_p3",
    "model_iq_s1",
    "thermal_lineshape",
]
