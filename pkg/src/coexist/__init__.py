"""Certifier and simulator for two-species competition systems with chemotaxis."""
from .errors import *  # noqa: F401,F403
from .params import (
    CoefficientField,
    HypothesisReport,
    ModelConstants,
    ModelSpec,
    UltimateBounds,
    band_spec,
    check_hypotheses,
    constant_spec,
    derive_bounds,
    validate_field_bounds,
)
from .rectangle import (
    ClosedFormCoefficients,
    IterationTrace,
    Rectangle,
    chi_zero_rectangle,
    closed_form_rectangle,
    constant_coefficient_check,
    iterate_rectangle,
)

__version__ = "0.1.0"
