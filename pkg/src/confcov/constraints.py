"""Hamiltonian and momentum constraint operators.

Three gravity models are supported:

* :class:`GR` -- ``rho = R + (tr K)^2 - K.K``, ``J = -2 N``;
* :class:`EGB` -- Einstein-Gauss-Bonnet with coupling ``alpha``;
* :class:`FofR` -- f(R) gravity with polynomial ``f`` and free data
  ``scalR`` (initial scalar curvature of spacetime) and ``scalR_dot``.

Every model returns ``J`` itself.  The source formulas are written for
``-J/2`` (EGB) and ``J/2`` (f(R)); the prefactors are undone here so that
all models share one sign convention and ``momentum(GR) == -2 N_i``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from numpy.polynomial import polynomial as P

from confcov.errors import NonPositiveError, ValidationError
from confcov.geometry import calculus
from confcov.geometry.fields import (
    CO,
    MetricField,
    OneFormField,
    Riemann4Field,
    ScalarField,
    SymTensor2Field,
    require_same_grid,
    require_variance,
)
from confcov.geometry.grid import grid_sum

_E = dict(optimize=True)


@dataclass(frozen=True)
class GR:
    tag = "gr"


@dataclass(frozen=True)
class EGB:
    alpha: float = 0.0
    tag = "egb"


@dataclass(frozen=True)
class FofR:
    """f(R) gravity with ``f(x) = sum_k coeffs[k] x^k``.

    ``strict=True`` enforces ``f'(R) > 0`` (the domain of ``ln f'``);
    otherwise the logarithmic derivative is evaluated as ``grad f' / f'`` and
    only ``|f'| > floor`` is required.
    """

    coeffs: tuple
    scalR: ScalarField
    scalR_dot: ScalarField
    floor: float = 1e-10
    strict: bool = False
    tag = "fofr"

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        if not self.coeffs:
            raise ValidationError("f(R) needs at least one coefficient")
        require_same_grid(self.scalR, self.scalR_dot)

    def f(self, x):
        return P.polyval(x, self.coeffs)

    def fprime(self, x):
        return P.polyval(x, P.polyder(self.coeffs)) if len(self.coeffs) > 1 else np.zeros_like(x)

    def fsecond(self, x):
        return P.polyval(x, P.polyder(self.coeffs, 2)) if len(self.coeffs) > 2 else np.zeros_like(x)

    def checked_fprime(self) -> np.ndarray:
        fp = self.fprime(self.scalR.values)
        bad = fp <= self.floor if self.strict else np.abs(fp) <= self.floor
        if np.any(bad):
            worst = np.argmin(fp if self.strict else np.abs(fp))
            idx = tuple(int(i) for i in np.unravel_index(worst, fp.shape))
            raise NonPositiveError(
                f"f'(R) = {fp[idx]:.3e} at grid point {idx} violates the floor {self.floor:g}",
                index=idx,
            )
        return fp


GravityModel = Union[GR, EGB, FofR]


def model_tag(model) -> dict:
    if isinstance(model, EGB):
        return {"model": "egb", "alpha": model.alpha}
    if isinstance(model, FofR):
        return {"model": "fofr", "coeffs": list(model.coeffs), "strict": model.strict}
    if isinstance(model, GR):
        return {"model": "gr"}
    raise ValidationError(f"unknown gravity model {model!r}")


@dataclass(frozen=True)
class EgbBlocks:
    """Gauss-Codazzi building blocks of the EGB constraints."""

    M4: Riemann4Field
    M2: SymTensor2Field
    M: ScalarField
    N3: np.ndarray  # N_ijk = ∇_i K_jk − ∇_j K_ik
    N1: OneFormField


def _check_pair(g: MetricField, K: SymTensor2Field) -> None:
    require_same_grid(g, K)
    require_variance(K, CO, "extrinsic curvature K")


def egb_blocks(g: MetricField, K: SymTensor2Field) -> EgbBlocks:
    _check_pair(g, K)
    curv = calculus.curvature(g)
    k = K.full()
    gi = g.inverse
    trK = np.einsum("ij...,ij...->...", gi, k)
    k_mixed = np.einsum("jl...,lk...->jk...", gi, k)  # K^j_k
    kk = np.einsum("ij...,ji...->...", k_mixed, k_mixed)
    quad4 = np.einsum("ik...,jl...->ijkl...", k, k) - np.einsum("il...,jk...->ijkl...", k, k)
    M4 = Riemann4Field.from_full(g.grid, curv.riemann.full() + quad4)
    M2 = curv.ricci.full() + trK * k - np.einsum("il...,lj...->ij...", k, k_mixed)
    M = curv.scalar.values + trK**2 - kk
    dk = calculus.covariant_derivative(g, K)  # dk[i, j, k] = ∇_i K_jk
    N3 = dk - dk.swapaxes(0, 1)
    N1 = np.einsum("jl...,lji...->i...", gi, dk, **_E) - calculus.gradient_of(g.grid, trK)
    return EgbBlocks(M4, SymTensor2Field.from_full(g.grid, M2, CO), ScalarField(g.grid, M),
                     N3, OneFormField(g.grid, N1))


def _gr_parts(g: MetricField, K: SymTensor2Field):
    """``(R + (trK)^2 - K.K, N_i, trK)`` without building the rank-4 blocks."""
    _check_pair(g, K)
    k = K.full()
    gi = g.inverse
    trK = np.einsum("ij...,ij...->...", gi, k)
    kk = calculus.full_contraction(g, K, K).values
    M = calculus.scalar_curvature(g).values + trK**2 - kk
    dk = calculus.covariant_derivative(g, K)
    N1 = np.einsum("jl...,lji...->i...", gi, dk, **_E) - calculus.gradient_of(g.grid, trK)
    return M, N1, trK


class _Shared:
    """Lazily computed pieces shared by ``rho`` and ``J``."""

    def __init__(self, g, K):
        self.g, self.K = g, K
        self._gr = self._egb = None

    @property
    def gr(self):
        if self._gr is None:
            self._gr = _gr_parts(self.g, self.K)
        return self._gr

    @property
    def egb(self):
        if self._egb is None:
            self._egb = egb_blocks(self.g, self.K)
        return self._egb


def rho(model, g: MetricField, K: SymTensor2Field, _shared=None) -> ScalarField:
    """Pointwise Hamiltonian constraint ``rho(g, K)``."""
    sh = _shared or _Shared(g, K)
    if isinstance(model, EGB) and model.alpha != 0.0:
        b = sh.egb
        gi = g.inverse
        M2 = b.M2.full()
        m2sq = np.einsum("ia...,jb...,ij...,ab...->...", gi, gi, M2, M2, **_E)
        M4 = b.M4.full()
        M4up = np.einsum("ia...,jb...,kc...,ld...,abcd...->ijkl...", gi, gi, gi, gi, M4, **_E)
        m4sq = np.einsum("ijkl...,ijkl...->...", M4, M4up, **_E)
        gb = b.M.values**2 - 4.0 * m2sq + m4sq
        return ScalarField(g.grid, b.M.values + model.alpha * gb)
    M, _, trK = sh.gr
    if isinstance(model, (GR, EGB)):
        return ScalarField(g.grid, M)
    if isinstance(model, FofR):
        require_same_grid(g, model.scalR)
        R = model.scalR.values
        fp = model.checked_fprime()
        bracket = (2.0 * calculus.laplacian(g, ScalarField(g.grid, fp)).values
                   + 2.0 * trK * model.fsecond(R) * model.scalR_dot.values
                   - model.f(R) - R * fp)
        return ScalarField(g.grid, M - bracket / fp)
    raise ValidationError(f"unknown gravity model {model!r}")


def momentum(model, g: MetricField, K: SymTensor2Field, _shared=None) -> OneFormField:
    """Momentum constraint one-form ``J_i(g, K)``."""
    sh = _shared or _Shared(g, K)
    if isinstance(model, EGB) and model.alpha != 0.0:
        b = sh.egb
        gi = g.inverse
        N = b.N1.values
        M2 = b.M2.full()
        M2_mixed = np.einsum("ik...,kj...->ij...", M2, gi)  # M_i^j
        M2_up = np.einsum("ka...,lb...,ab...->kl...", gi, gi, M2, **_E)
        M4_mixed = np.einsum("jp...,kq...,lr...,ipqr...->ijkl...", gi, gi, gi, b.M4.full(), **_E)
        corr = (b.M.values * N
                - 2.0 * np.einsum("ij...,j...->i...", M2_mixed, N)
                + 2.0 * np.einsum("kl...,ikl...->i...", M2_up, b.N3, **_E)
                - np.einsum("ijkl...,klj...->i...", M4_mixed, b.N3, **_E))
        return OneFormField(g.grid, -2.0 * (N + 2.0 * model.alpha * corr))
    _, N, _ = sh.gr
    if isinstance(model, (GR, EGB)):
        return OneFormField(g.grid, -2.0 * N)
    if isinstance(model, FofR):
        require_same_grid(g, model.scalR)
        R = model.scalR.values
        fp = model.checked_fprime()
        grid = g.grid
        src = calculus.gradient_of(grid, model.fsecond(R) * model.scalR_dot.values)
        dlog = calculus.gradient_of(grid, fp) / fp
        k_mixed = np.einsum("ia...,aj...->ij...", g.inverse, K.full())  # K^i_j
        half = -N - src / fp - np.einsum("ij...,i...->j...", k_mixed, dlog)
        return OneFormField(grid, 2.0 * half)
    raise ValidationError(f"unknown gravity model {model!r}")


@dataclass
class ResidualReport:
    """Norms of the constraint residuals.

    ``*_l2`` norms are coordinate-volume weighted,
    ``sqrt(sum |f|^2 * cell_volume)``; for ``J`` the pointwise magnitude is
    the Euclidean norm of the components.  ``*_linf`` is the largest
    absolute component.
    """

    rho_linf: float
    rho_l2: float
    J_linf: float
    J_l2: float
    model: dict
    grid: dict
    provenance: dict = field(default_factory=dict)

    def max_norm(self) -> float:
        return max(self.rho_linf, self.J_linf)

    def to_dict(self) -> dict:
        return {
            "rho_linf": self.rho_linf,
            "rho_l2": self.rho_l2,
            "J_linf": self.J_linf,
            "J_l2": self.J_l2,
            "model": self.model,
            "grid": self.grid,
            "provenance": self.provenance,
        }


def report_from_fields(model, rho_field: ScalarField, J: OneFormField,
                       provenance: dict | None = None) -> ResidualReport:
    grid = rho_field.grid
    r = rho_field.values
    j = J.values
    return ResidualReport(
        rho_linf=float(np.max(np.abs(r))),
        rho_l2=float(np.sqrt(grid_sum(grid, r**2))),
        J_linf=float(np.max(np.abs(j))),
        J_l2=float(np.sqrt(grid_sum(grid, np.sum(j**2, axis=0)))),
        model=model_tag(model),
        grid=grid.to_dict(),
        provenance=dict(provenance or {}),
    )


def constraint_fields(model, g: MetricField, K: SymTensor2Field) -> tuple[ScalarField, OneFormField]:
    """``(rho, J)`` evaluated together, sharing curvature and ``∇K``."""
    sh = _Shared(g, K)
    return rho(model, g, K, sh), momentum(model, g, K, sh)


def residual_report(model, g: MetricField, K: SymTensor2Field,
                    provenance: dict | None = None) -> ResidualReport:
    return report_from_fields(model, *constraint_fields(model, g, K), provenance)


def evaluate(models: Sequence, g: MetricField, K: SymTensor2Field) -> list[ResidualReport]:
    return [residual_report(m, g, K) for m in models]
