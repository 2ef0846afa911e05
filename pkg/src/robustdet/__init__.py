"""Robust adaptive radar detection: statistics, calibration, simulation."""

from . import calibration, config, detectors, distributions, errors, linalg, montecarlo, scenario

__version__ = "0.1.0"

__all__ = [
    "calibration",
    "config",
    "detectors",
    "distributions",
    "errors",
    "linalg",
    "montecarlo",
    "scenario",
    "__version__",
]
