"""Reciprocity, passivity and relaxation analysis of input-output systems."""

from ._recipkit import (
    LinearSystem,
    RecipkitError,
    check_linear_reciprocity,
    check_model_reciprocity,
    christoffel,
    compatible_storage,
    format_number,
    impulse_response,
    legendre_conjugate,
    list_models,
    lmi_residual,
    model_linear_system,
    model_metric,
    simulate,
    solve_dual_isomorphism,
)

__all__ = [
    "LinearSystem",
    "RecipkitError",
    "check_linear_reciprocity",
    "check_model_reciprocity",
    "christoffel",
    "compatible_storage",
    "format_number",
    "impulse_response",
    "legendre_conjugate",
    "list_models",
    "lmi_residual",
    "model_linear_system",
    "model_metric",
    "simulate",
    "solve_dual_isomorphism",
]
