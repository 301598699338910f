"""Conformal rescalings and numerical checks of conformal covariance.

An operator ``P_g`` acting on sections ``e = (e_1, ..., e_k)`` is
conformally covariant with weights ``(a, b, c)`` when, for every positive
``psi``::

    psi^b * P_{psi^c g}(psi^a * e) == P_g(e)

componentwise.  :func:`check_covariance` measures the failure of that
identity on random band-limited data for any operator in
:data:`OPERATORS`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np

from confcov.errors import ValidationError
from confcov.geometry import calculus
from confcov.geometry.fields import MetricField, OneFormField, ScalarField, SymTensor2Field
from confcov.geometry.generate import (
    perturbed_metric,
    positive_scalar,
    smooth_oneform,
    smooth_scalar,
    smooth_sym2,
)
from confcov.geometry.grid import Grid


@dataclass(frozen=True)
class ConformalWeight:
    """The critical exponent ``N = 2n / (n - 2)``."""

    n: int

    def __post_init__(self):
        if self.n < 3:
            raise ValidationError(f"conformal weight needs n >= 3, got {self.n}")

    @property
    def N(self) -> float:
        return 2.0 * self.n / (self.n - 2)


def critical_exponent(n: int) -> float:
    return ConformalWeight(n).N


def relative_residual(a: np.ndarray, b: np.ndarray) -> float:
    """``max|a - b| / max(1, max|b|)``."""
    a = np.asarray(a)
    b = np.asarray(b)
    scale = max(1.0, float(np.max(np.abs(b))) if b.size else 0.0)
    return float(np.max(np.abs(a - b)) / scale) if a.size else 0.0


def rescale_metric(g: MetricField, psi: ScalarField) -> MetricField:
    """``psi^(N-2) g`` for ``psi > 0``."""
    psi.require_positive("conformal factor psi")
    N = critical_exponent(g.grid.n)
    return MetricField(g.grid, g.values * psi.values ** (N - 2))


def check_divergence_covariance(g: MetricField, psi: ScalarField, h: SymTensor2Field,
                                exponent: float | None = None) -> float:
    """Residual of ``div_{g~} h = psi^-N div_g(psi^2 h)`` with ``g~ = psi^(N-2) g``.

    The identity holds for g-trace-free ``h``; the trace part of ``h`` is
    removed before testing.  ``exponent`` replaces ``-N`` (negative controls).
    """
    psi.require_positive("conformal factor psi")
    N = critical_exponent(g.grid.n)
    p = -N if exponent is None else exponent
    h = calculus.trace_free(g, h)
    lhs = calculus.divergence(rescale_metric(g, psi), h).values
    rhs = psi.values**p * calculus.divergence(g, h.scaled(psi.values**2)).values
    return relative_residual(lhs, rhs)


def check_cko_covariance(g: MetricField, psi: ScalarField, W: OneFormField,
                         exponent: float | None = None) -> float:
    """Residual of ``L_{g~} W = psi^(N-2) L_g(psi^(2-N) W)``."""
    psi.require_positive("conformal factor psi")
    N = critical_exponent(g.grid.n)
    p = N - 2 if exponent is None else exponent
    lhs = calculus.conformal_killing_op(rescale_metric(g, psi), W).values
    rhs = psi.values**p * calculus.conformal_killing_op(g, W.scaled(psi.values ** (2 - N))).values
    return relative_residual(lhs, rhs)


# -- generic covariance checker ---------------------------------------------

@dataclass(frozen=True)
class OperatorEntry:
    """A registered operator ``(metrics, inputs) -> outputs``.

    ``inputs`` lists field kinds ("scalar", "oneform", "sym2") drawn at
    random for each trial; ``n_outputs`` and ``n_metrics`` fix the lengths of
    the ``b`` and ``c`` weight vectors.
    """

    fn: Callable
    inputs: tuple
    n_outputs: int = 1
    n_metrics: int = 1


def _tf_divergence(g, h):
    return (calculus.divergence(g, calculus.trace_free(g, h)),)


OPERATORS: dict[str, OperatorEntry] = {
    "divergence": OperatorEntry(_tf_divergence, ("sym2",)),
    "conformal_killing_op": OperatorEntry(
        lambda g, W: (calculus.conformal_killing_op(g, W),), ("oneform",)),
    "scalar_curvature": OperatorEntry(lambda g: (calculus.scalar_curvature(g),), ()),
    "conformal_laplacian": OperatorEntry(
        lambda g, u: (calculus.conformal_laplacian(g, u),), ("scalar",)),
}


@dataclass(frozen=True)
class CovarianceSpec:
    operator: str
    a: tuple = ()
    b: tuple = (0.0,)
    c: tuple = (0.0,)

    def __post_init__(self):
        entry = OPERATORS.get(self.operator)
        if entry is None:
            raise ValidationError(
                f"unknown operator {self.operator!r}; known: {sorted(OPERATORS)}"
            )
        for name, vec, want in (("a", self.a, len(entry.inputs)),
                                ("b", self.b, entry.n_outputs),
                                ("c", self.c, entry.n_metrics)):
            object.__setattr__(self, name, tuple(float(x) for x in vec))
            if len(getattr(self, name)) != want:
                raise ValidationError(
                    f"{self.operator}: weight vector {name} needs length {want}, got {len(vec)}"
                )

    @classmethod
    def standard(cls, operator: str, n: int) -> "CovarianceSpec":
        """The known covariant weights of the built-in conformal operators."""
        N = critical_exponent(n)
        # Weights for psi^b P_{psi^c g}(psi^a e) = P_g(e).  The transformation
        # laws are usually quoted as P_{g~}(e) = psi^-b P_g(psi^-a e), which
        # shows the same numbers with opposite signs.
        table = {
            "divergence": ((-2.0,), (N,)),
            "conformal_killing_op": ((N - 2,), (2.0 - N,)),
            "conformal_laplacian": ((-1.0,), (N - 1,)),
        }
        if operator not in table:
            raise ValidationError(f"no standard weights for {operator!r}")
        a, b = table[operator]
        return cls(operator, a, b, (N - 2,))

    def to_dict(self) -> dict:
        return {"a": list(self.a), "b": list(self.b), "c": list(self.c)}


def _draw(kind: str, grid: Grid, rng, band: dict):
    if kind == "scalar":
        return smooth_scalar(grid, rng, 1.0, **band)
    if kind == "oneform":
        return smooth_oneform(grid, rng, 1.0, **band)
    if kind == "sym2":
        return smooth_sym2(grid, rng, 1.0, **band)
    raise ValidationError(f"unknown section kind {kind!r}")


def covariance_trials(spec: CovarianceSpec, trials: int, rng_seed: int,
                      grid: Grid | None = None, psi_amplitude: float = 0.2,
                      metric_amplitude: float = 0.1, band: dict | None = None,
                      psi_one: bool = False) -> Iterator[dict]:
    """Yield one record ``{operator, weights, grid, seed, trial, residual}`` per trial."""
    entry = OPERATORS[spec.operator]
    grid = grid or Grid.cube(3, 24)
    band = band or {}
    rng = np.random.default_rng(rng_seed)
    for t in range(trials):
        metrics = [perturbed_metric(grid, rng, metric_amplitude, **band)
                   for _ in range(entry.n_metrics)]
        sections = [_draw(kind, grid, rng, band) for kind in entry.inputs]
        if psi_one:
            psi = ScalarField.constant(grid, 1.0)
        else:
            psi = positive_scalar(grid, rng, psi_amplitude, **band)
        p = psi.values
        base = entry.fn(*metrics, *sections)
        scaled_metrics = [MetricField(grid, g.values * p**c) for g, c in zip(metrics, spec.c)]
        scaled_sections = [e.scaled(p**a) for e, a in zip(sections, spec.a)]
        moved = entry.fn(*scaled_metrics, *scaled_sections)
        res = max(relative_residual(out.values * p**b, ref.values)
                  for out, ref, b in zip(moved, base, spec.b))
        yield {
            "operator": spec.operator,
            "weights": spec.to_dict(),
            "grid": grid.to_dict(),
            "seed": rng_seed,
            "trial": t,
            "residual": res,
        }


def check_covariance(spec: CovarianceSpec, trials: int, rng_seed: int, **kwargs) -> float:
    """Worst relative residual of the covariance identity over ``trials`` draws."""
    return max((rec["residual"] for rec in covariance_trials(spec, trials, rng_seed, **kwargs)),
               default=0.0)


def draw_conformal_identity_case(grid: Grid, rng, psi_amplitude: float = 0.2,
                                 metric_amplitude: float = 0.1, band: dict | None = None):
    """Random ``(g, psi, h, W)`` used by the identity suites."""
    band = band or {}
    g = perturbed_metric(grid, rng, metric_amplitude, **band)
    psi = positive_scalar(grid, rng, psi_amplitude, **band)
    h = smooth_sym2(grid, rng, 1.0, **band)
    W = smooth_oneform(grid, rng, 1.0, **band)
    return g, psi, h, W


def identity_residuals(grid: Grid, trials: int, rng_seed: int, **kwargs) -> Sequence[tuple]:
    """``(div_residual, cko_residual)`` for each random trial."""
    rng = np.random.default_rng(rng_seed)
    out = []
    for _ in range(trials):
        g, psi, h, W = draw_conformal_identity_case(grid, rng, **kwargs)
        out.append((check_divergence_covariance(g, psi, h), check_cko_covariance(g, psi, W)))
    return out
