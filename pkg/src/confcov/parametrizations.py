"""Conformal parametrizations of initial data.

Free data ``(g, tau, sigma)`` together with the unknowns ``(phi, W)`` are
assembled into physical data::

    g^ = phi^(N-2) g
    K^ = (tau/n) g^ + phi^-2 (sigma + psi^N L_g W)

where the scheme fixes ``psi``: 1 (method A), ``phi`` (method B), a given
positive function (thin sandwich) or ``phi^s`` (power rule).  The reduced
systems are never expanded by hand; residuals are always
``rho o assemble`` and ``J o assemble``.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from confcov.conformal import critical_exponent, relative_residual, rescale_metric
from confcov.constraints import ResidualReport, residual_report
from confcov.errors import ValidationError
from confcov.geometry import calculus
from confcov.geometry.fields import (
    CO,
    MetricField,
    OneFormField,
    ScalarField,
    SymTensor2Field,
    require_same_grid,
)


@dataclass(frozen=True)
class MethodA:
    name = "A"

    def psi(self, phi: ScalarField) -> np.ndarray:
        return np.ones_like(phi.values)

    def to_dict(self):
        return {"type": "A"}


@dataclass(frozen=True)
class MethodB:
    name = "B"

    def psi(self, phi: ScalarField) -> np.ndarray:
        return phi.values

    def to_dict(self):
        return {"type": "B"}


@dataclass(frozen=True)
class ThinSandwich:
    """Fixed positive weight ``psi``."""

    psi_field: ScalarField
    name = "thin-sandwich"

    def __post_init__(self):
        self.psi_field.require_positive("thin-sandwich psi")

    def psi(self, phi: ScalarField) -> np.ndarray:
        require_same_grid(phi, self.psi_field)
        return self.psi_field.values

    def to_dict(self):
        return {"type": "thin-sandwich"}


@dataclass(frozen=True)
class PowerRule:
    """``psi = phi^s``; ``s = 1`` is method B, ``s = 0`` method A."""

    s: float = 1.0
    name = "power"

    def psi(self, phi: ScalarField) -> np.ndarray:
        return phi.values**self.s

    def to_dict(self):
        return {"type": "power", "s": self.s}


Scheme = (MethodA, MethodB, ThinSandwich, PowerRule)


@dataclass(frozen=True)
class Seed:
    """Free data plus unknowns; validated on construction.

    ``sigma`` must be g-trace-free (``trace_tol``) and g-divergence-free
    (``div_tol``), both relative to ``max(1, |sigma|)``.
    """

    g: MetricField
    tau: ScalarField
    sigma: SymTensor2Field
    phi: ScalarField
    W: OneFormField
    scheme: object = MethodB()
    trace_tol: float = 1e-10
    div_tol: float = 1e-8
    validate: bool = True

    def __post_init__(self):
        require_same_grid(self.g, self.tau, self.sigma, self.phi, self.W)
        if not isinstance(self.scheme, Scheme):
            raise ValidationError(f"unknown scheme {self.scheme!r}")
        if self.sigma.variance != CO:
            raise ValidationError("sigma must be covariant")
        self.phi.require_positive("phi")
        if self.validate:
            scale = max(1.0, self.sigma.max_abs())
            tr = float(np.max(np.abs(calculus.trace(self.g, self.sigma).values)))
            if tr > self.trace_tol * scale:
                raise ValidationError(f"sigma is not trace-free: max |tr| = {tr:.3e}")
            div = float(np.max(np.abs(calculus.divergence(self.g, self.sigma).values)))
            if div > self.div_tol * scale:
                raise ValidationError(f"sigma is not divergence-free: max |div| = {div:.3e}")

    @property
    def grid(self):
        return self.g.grid

    def replace(self, **changes) -> "Seed":
        return dataclasses.replace(self, **changes)

    def tau_is_constant(self, rtol: float = 1e-14) -> bool:
        t = self.tau.values
        return float(np.ptp(t)) <= rtol * max(1.0, float(np.max(np.abs(t))))


def assemble(seed: Seed) -> tuple[MetricField, SymTensor2Field]:
    """Physical data ``(g^, K^)`` described by ``seed``."""
    g = seed.g
    n = g.grid.n
    N = critical_exponent(n)
    phi = seed.phi
    ghat = rescale_metric(g, phi)
    psi_n = seed.scheme.psi(phi) ** N
    LW = calculus.conformal_killing_op(g, seed.W)
    tt = seed.sigma.values + psi_n * LW.values
    K = (seed.tau.values / n) * ghat.values + phi.values**-2 * tt
    return ghat, SymTensor2Field(g.grid, K, CO)


def system_residual(seed: Seed, model, provenance: dict | None = None) -> ResidualReport:
    """Constraint residuals of the assembled data."""
    ghat, Khat = assemble(seed)
    prov = {"scheme": seed.scheme.to_dict()}
    prov.update(provenance or {})
    return residual_report(model, ghat, Khat, prov)


def gauge_transform(seed: Seed, psi: ScalarField, *, any_scheme: bool = False) -> Seed:
    """Move method-B free data to the conformal metric ``psi^(N-2) g``.

    Returns the seed ``(psi^(N-2) g, tau, psi^-2 sigma, phi/psi, psi^(N-2) W)``.
    Covariance is only claimed for method B; ``any_scheme=True`` lets other
    schemes through (used to demonstrate that they are not covariant).
    """
    if not any_scheme and not _is_method_b(seed.scheme):
        raise ValidationError("gauge_transform is defined for method-B seeds")
    psi.require_positive("gauge factor psi")
    require_same_grid(seed.g, psi)
    N = critical_exponent(seed.grid.n)
    p = psi.values
    return seed.replace(
        g=rescale_metric(seed.g, psi),
        sigma=seed.sigma.scaled(p**-2),
        phi=ScalarField(seed.grid, seed.phi.values / p),
        W=seed.W.scaled(p ** (N - 2)),
    )


def _is_method_b(scheme) -> bool:
    return isinstance(scheme, MethodB) or (isinstance(scheme, PowerRule) and scheme.s == 1.0)


def assembled_difference(a: Seed, b: Seed) -> float:
    """Largest relative difference between the assembled data of two seeds."""
    ga, Ka = assemble(a)
    gb, Kb = assemble(b)
    return max(relative_residual(ga.values, gb.values), relative_residual(Ka.values, Kb.values))


def random_seed(grid, rng, scheme=None, *, sigma_amplitude=0.1, w_amplitude=0.1,
                phi_amplitude=0.2, base_amplitude=0.2, tau=None, band=None) -> Seed:
    """Band-limited random seed with a conformally flat base metric.

    ``sigma`` is the flat TT projection of a random tensor carried to
    ``g = psi0^(N-2) delta`` as ``psi0^-2 sigma``, so it stays TT with respect
    to ``g`` by conformal covariance of the divergence.
    """
    from confcov.geometry.generate import positive_scalar, smooth_oneform, smooth_scalar, smooth_sym2
    from confcov.york import tt_project_flat

    band = band or {}
    N = critical_exponent(grid.n)
    psi0 = positive_scalar(grid, rng, base_amplitude, **band)
    flat = MetricField.flat(grid)
    sigma_flat = tt_project_flat(smooth_sym2(grid, rng, sigma_amplitude, **band))
    g = rescale_metric(flat, psi0)
    sigma = sigma_flat.scaled(psi0.values**-2)
    if tau is None:
        tau_field = smooth_scalar(grid, rng, 0.5, **band)
    else:
        tau_field = ScalarField.constant(grid, tau)
    phi = positive_scalar(grid, rng, phi_amplitude, **band)
    W = smooth_oneform(grid, rng, w_amplitude, **band)
    return Seed(g, tau_field, sigma, phi, W, scheme if scheme is not None else MethodB())
