"""Levi-Civita calculus on periodic grids.

Conventions
-----------
* ``Gamma[k, i, j] = Γ^k_ij = ½ g^kl (∂_i g_jl + ∂_j g_il − ∂_l g_ij)``.
* ``R^l_kij = ∂_i Γ^l_jk − ∂_j Γ^l_ik + Γ^l_im Γ^m_jk − Γ^l_jm Γ^m_ik``,
  ``R_ijkl = g_im R^m_jkl``, ``R_ij = R^k_ikj``, ``R = g^ij R_ij``.
  The unit round sphere has ``R_ijkl = g_ik g_jl − g_il g_jk`` and ``R > 0``.
* ``(div_g h)_i = −∇^k h_ki`` (note the minus sign).
* ``(L W)_ij = ∇_i W_j + ∇_j W_i − (2/n) ∇^k W_k g_ij``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from confcov.geometry.fields import (
    CO,
    CONTRA,
    MetricField,
    OneFormField,
    Riemann4Field,
    ScalarField,
    SymTensor2Field,
    VectorField,
    require_same_grid,
    require_variance,
)
from confcov.geometry.grid import gradient, partial

_E = dict(optimize=True)


def gradient_of(grid, arr: np.ndarray) -> np.ndarray:
    """Partials of a raw array with trailing grid axes, derivative index first."""
    return gradient(grid, arr)


def spectral_partial(f: ScalarField, axis: int) -> ScalarField:
    """Fourier-collocation derivative of a scalar field along one axis."""
    return ScalarField(f.grid, partial(f.grid, f.values, axis))


def christoffel(g: MetricField) -> np.ndarray:
    """Christoffel symbols ``Γ^k_ij`` as an ``(n, n, n, *shape)`` array."""
    dg = gradient(g.grid, g.full())  # dg[a, b, c] = ∂_a g_bc
    first = 0.5 * (
        np.einsum("ijl...->lij...", dg) + np.einsum("jil...->lij...", dg) - dg
    )
    gam = np.einsum("kl...,lij...->kij...", g.inverse, first, **_E)
    return 0.5 * (gam + gam.swapaxes(1, 2))


def _gamma(g: MetricField) -> np.ndarray:
    return g.christoffel


@dataclass(frozen=True)
class Curvature:
    riemann: Riemann4Field
    ricci: SymTensor2Field
    scalar: ScalarField


def _mixed_riemann(g: MetricField) -> np.ndarray:
    gam = _gamma(g)
    dgam = gradient(g.grid, gam)  # dgam[a, l, b, c] = ∂_a Γ^l_bc
    out = np.einsum("iljk...->lkij...", dgam) - np.einsum("jlik...->lkij...", dgam)
    quad = np.einsum("lim...,mjk...->lkij...", gam, gam, **_E)
    out += quad - np.einsum("lkij...->lkji...", quad)
    return out


def curvature(g: MetricField) -> Curvature:
    """Riemann, Ricci and scalar curvature of ``g`` in one pass."""
    mixed = _mixed_riemann(g)
    low = np.einsum("im...,mjkl...->ijkl...", g.full(), mixed, **_E)
    ric_full = np.einsum("kikj...->ij...", mixed)
    ric = SymTensor2Field.from_full(g.grid, ric_full, CO)
    scal = np.einsum("ij...,ij...->...", g.inverse, ric.full())
    return Curvature(Riemann4Field.from_full(g.grid, low), ric, ScalarField(g.grid, scal))


def riemann(g: MetricField) -> Riemann4Field:
    return curvature(g).riemann


def ricci(g: MetricField) -> SymTensor2Field:
    """Ricci tensor from contracted Christoffel derivatives (no Riemann pass)."""
    grid = g.grid
    gam = _gamma(g)
    n = grid.n
    div = np.zeros((n, n) + grid.shape)  # ∂_k Γ^k_ij
    for i in range(n):
        for j in range(i, n):
            div[i, j] = sum(partial(grid, gam[k, i, j], k) for k in range(n))
            div[j, i] = div[i, j]
    trace_gam = np.einsum("kki...->i...", gam)
    dtr = gradient(grid, trace_gam)  # dtr[j, i] = ∂_j Γ^k_ki
    out = (div - 0.5 * (dtr + dtr.swapaxes(0, 1))
           + np.einsum("m...,mij...->ij...", trace_gam, gam, **_E)
           - np.einsum("kjm...,mki...->ij...", gam, gam, **_E))
    return SymTensor2Field.from_full(grid, out, CO)


def scalar_curvature(g: MetricField) -> ScalarField:
    ric = ricci(g)
    return ScalarField(g.grid, np.einsum("ij...,ij...->...", g.inverse, ric.full()))


def bianchi_residual(R: Riemann4Field) -> float:
    """Max of ``|R_ijkl + R_iklj + R_iljk|`` relative to ``max(1, |R|)``."""
    full = R.full()
    cyc = full + np.einsum("iklj...->ijkl...", full) + np.einsum("iljk...->ijkl...", full)
    return float(np.max(np.abs(cyc)) / max(1.0, float(np.max(np.abs(full)))))


# -- index gymnastics --------------------------------------------------------

def raise_index(g: MetricField, t):
    """Raise all indices of a one-form or covariant symmetric 2-tensor."""
    require_same_grid(g, t)
    if isinstance(t, OneFormField):
        return VectorField(g.grid, np.einsum("ij...,j...->i...", g.inverse, t.values))
    if isinstance(t, SymTensor2Field):
        require_variance(t, CO)
        gi = g.inverse
        full = np.einsum("ia...,jb...,ab...->ij...", gi, gi, t.full(), **_E)
        return SymTensor2Field.from_full(g.grid, full, CONTRA)
    raise TypeError(f"cannot raise indices of {type(t).__name__}")


def lower_index(g: MetricField, t):
    """Lower all indices of a vector or contravariant symmetric 2-tensor."""
    require_same_grid(g, t)
    gl = g.full()
    if isinstance(t, VectorField):
        return OneFormField(g.grid, np.einsum("ij...,j...->i...", gl, t.values))
    if isinstance(t, SymTensor2Field):
        require_variance(t, CONTRA)
        full = np.einsum("ia...,jb...,ab...->ij...", gl, gl, t.full(), **_E)
        return SymTensor2Field.from_full(g.grid, full, CO)
    raise TypeError(f"cannot lower indices of {type(t).__name__}")


def trace(g: MetricField, h: SymTensor2Field) -> ScalarField:
    require_same_grid(g, h)
    metric = g.inverse if h.variance == CO else g.full()
    return ScalarField(g.grid, np.einsum("ij...,ij...->...", metric, h.full()))


def full_contraction(g: MetricField, h: SymTensor2Field, k: SymTensor2Field) -> ScalarField:
    """``h_ij k^ij`` for covariant ``h`` and ``k``."""
    require_same_grid(g, h, k)
    require_variance(h, CO)
    require_variance(k, CO)
    gi = g.inverse
    val = np.einsum("ia...,jb...,ij...,ab...->...", gi, gi, h.full(), k.full(), **_E)
    return ScalarField(g.grid, val)


def trace_free(g: MetricField, h: SymTensor2Field) -> SymTensor2Field:
    """``h − (tr_g h / n) g`` for covariant ``h``."""
    require_variance(h, CO)
    tr = trace(g, h).values
    return SymTensor2Field(g.grid, h.values - (tr / g.grid.n) * g.values, CO)


# -- covariant derivatives ---------------------------------------------------

def covariant_derivative(g: MetricField, t) -> np.ndarray:
    """``∇_i`` applied to a scalar, one-form, vector or symmetric 2-tensor.

    The derivative index comes first: for a one-form the result is
    ``D[i, j] = ∇_i W_j``; for a covariant 2-tensor ``D[i, j, k] = ∇_i h_jk``.
    """
    require_same_grid(g, t)
    grid = g.grid
    if isinstance(t, ScalarField):
        return gradient(grid, t.values)
    gam = _gamma(g)
    if isinstance(t, OneFormField):
        d = gradient(grid, t.values)
        return d - np.einsum("kij...,k...->ij...", gam, t.values)
    if isinstance(t, VectorField):
        d = gradient(grid, t.values)
        return d + np.einsum("jik...,k...->ij...", gam, t.values)
    if isinstance(t, SymTensor2Field):
        h = t.full()
        d = gradient(grid, h)
        if t.variance == CO:
            c = np.einsum("mij...,mk...->ijk...", gam, h, **_E)
            return d - c - np.einsum("ijk...->ikj...", c)
        c = np.einsum("jim...,mk...->ijk...", gam, h, **_E)
        return d + c + np.einsum("ijk...->ikj...", c)
    raise TypeError(f"no covariant derivative for {type(t).__name__}")


def laplacian(g: MetricField, u: ScalarField) -> ScalarField:
    """``Δ_g u = g^ij (∂_i ∂_j u − Γ^k_ij ∂_k u)``."""
    require_same_grid(g, u)
    du = gradient(g.grid, u.values)
    hess = gradient(g.grid, du) - np.einsum("kij...,k...->ij...", _gamma(g), du)
    return ScalarField(g.grid, np.einsum("ij...,ij...->...", g.inverse, hess))


def divergence(g: MetricField, h: SymTensor2Field) -> OneFormField:
    """``(div_g h)_i = −g^kl ∇_l h_ki`` for a covariant symmetric ``h``."""
    require_same_grid(g, h)
    require_variance(h, CO, "divergence argument")
    dh = covariant_derivative(g, h)  # dh[l, k, i]
    return OneFormField(g.grid, -np.einsum("kl...,lki...->i...", g.inverse, dh, **_E))


def conformal_killing_op(g: MetricField, W: OneFormField) -> SymTensor2Field:
    """Conformal Killing operator ``∇_i W_j + ∇_j W_i − (2/n) ∇^k W_k g_ij``."""
    require_same_grid(g, W)
    if not isinstance(W, OneFormField):
        raise TypeError("conformal_killing_op expects a OneFormField")
    dw = covariant_derivative(g, W)
    sym = dw + dw.swapaxes(0, 1)
    div = np.einsum("ij...,ij...->...", g.inverse, dw)
    full = sym - (2.0 / g.grid.n) * div * g.full()
    return SymTensor2Field.from_full(g.grid, full, CO)


def conformal_laplacian(g: MetricField, u: ScalarField) -> ScalarField:
    """Yamabe operator ``−4(n−1)/(n−2) Δ_g u + R(g) u``."""
    n = g.grid.n
    c = 4.0 * (n - 1) / (n - 2)
    return ScalarField(g.grid, -c * laplacian(g, u).values + scalar_curvature(g).values * u.values)
