"""Layered-earth EMI forward model and regularized inversion."""

from ._core import (
    Device,
    InversionFailure,
    Model,
    Orientation,
    ParseError,
    add_noise,
    cmd_explorer,
    discretize,
    doi,
    forward,
    integrated_sensitivity,
    invert,
    jacobian,
    nominal_snr_db,
    profile_gaussian,
    profile_step,
)

__all__ = [
    "Device", "InversionFailure", "Model", "Orientation", "ParseError", "add_noise",
    "cmd_explorer", "discretize", "doi", "forward", "integrated_sensitivity", "invert",
    "jacobian", "nominal_snr_db", "profile_gaussian", "profile_step",
]
