"""Thin array-interchange bindings for the sigscore forecast scorer."""

from sigscore import NumericalError, ValidationError

from .bridge import (
    METRICS,
    fit_censor,
    score_window,
    synth_dependency,
    synth_focus,
    synth_gp,
    synth_power,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "METRICS",
    "NumericalError",
    "ValidationError",
    "fit_censor",
    "score_window",
    "synth_dependency",
    "synth_focus",
    "synth_gp",
    "synth_power",
]
