"""Periodic-grid tensor fields and Levi-Civita calculus."""
from confcov.geometry.calculus import (
    Curvature,
    bianchi_residual,
    christoffel,
    conformal_killing_op,
    conformal_laplacian,
    covariant_derivative,
    curvature,
    divergence,
    full_contraction,
    laplacian,
    lower_index,
    raise_index,
    ricci,
    riemann,
    scalar_curvature,
    spectral_partial,
    trace,
    trace_free,
)
from confcov.geometry.fields import (
    CO,
    CONTRA,
    MetricField,
    OneFormField,
    Riemann4Field,
    ScalarField,
    SymTensor2Field,
    VectorField,
)
from confcov.geometry.grid import Grid, dealiasing, set_dealias, set_threads

__all__ = [
    "CO",
    "CONTRA",
    "Curvature",
    "Grid",
    "MetricField",
    "OneFormField",
    "Riemann4Field",
    "ScalarField",
    "SymTensor2Field",
    "VectorField",
    "bianchi_residual",
    "christoffel",
    "conformal_killing_op",
    "conformal_laplacian",
    "covariant_derivative",
    "curvature",
    "dealiasing",
    "divergence",
    "full_contraction",
    "laplacian",
    "lower_index",
    "raise_index",
    "ricci",
    "riemann",
    "scalar_curvature",
    "set_dealias",
    "set_threads",
    "spectral_partial",
    "trace",
    "trace_free",
]
