"""York split of a trace-free symmetric tensor: ``h = sigma + L_g W``.

``W`` solves the vector equation ``div_g(L_g W) = div_g h`` (with the
negative-divergence convention the operator is positive semi-definite).
On a torus the constant one-forms (and, discretely, pure Nyquist modes)
are annihilated by every spectral derivative; they are projected out of the
right-hand side and the iterates, which fixes ``W`` uniquely in the
zero-mean gauge.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from confcov.errors import NumericalError, ValidationError
from confcov.geometry import calculus
from confcov.geometry.fields import CO, MetricField, OneFormField, SymTensor2Field, require_same_grid
from confcov.geometry.grid import Grid


class FlatVectorPreconditioner:
    """Exact inverse of the flat ``div o L`` on non-kernel Fourier modes.

    In Fourier space the flat operator is ``|k|^2 I + (1 - 2/n) k k^T``; its
    inverse is ``(I - c/(1+c) k^ k^T) / |k|^2``.  ``scale`` divides the
    result (used when the operator appears multiplied by a constant).
    """

    def __init__(self, grid: Grid, scale: float = 1.0):
        self.grid = grid
        self.scale = float(scale)
        n = grid.n
        self.c = 1.0 - 2.0 / n
        if 1.0 + self.c <= 0:
            raise NumericalError("flat preconditioner symbol is not positive definite")
        ksq = grid.k_squared
        self.kernel = grid.kernel_mask
        safe = np.where(self.kernel, 1.0, ksq)
        self.inv_ksq = np.where(self.kernel, 0.0, 1.0 / safe)
        self.khat = np.stack([k / np.sqrt(safe) for k in grid.wavevector()])
        self.khat[:, self.kernel] = 0.0

    def apply(self, values: np.ndarray) -> np.ndarray:
        grid = self.grid
        spec = grid.fft(values)
        proj = np.einsum("i...,i...->...", self.khat, spec)
        spec = (spec - (self.c / (1.0 + self.c)) * self.khat * proj) * self.inv_ksq
        return grid.ifft(spec) / self.scale

    def forward(self, values: np.ndarray) -> np.ndarray:
        """The flat operator itself, times ``scale``."""
        grid = self.grid
        spec = grid.fft(values)
        k = np.stack(grid.wavevector())
        kdot = np.einsum("i...,i...->...", k, spec)
        spec = grid.k_squared * spec + self.c * k * kdot
        return grid.ifft(spec) * self.scale


def project_kernel(grid: Grid, values: np.ndarray) -> tuple[np.ndarray, float]:
    """Remove derivative-kernel Fourier modes; also return their max-norm."""
    spec = grid.fft(values)
    kpart = np.where(grid.kernel_mask, spec, 0.0)
    removed = grid.ifft(kpart)
    return values - removed, float(np.max(np.abs(removed))) if removed.size else 0.0


def york_operator(g: MetricField, W: OneFormField) -> OneFormField:
    """``div_g(L_g W)``."""
    return calculus.divergence(g, calculus.conformal_killing_op(g, W))


@dataclass
class YorkSplit:
    sigma: SymTensor2Field
    W: OneFormField
    iterations: int
    residual: float  # max |div sigma| without pure-Nyquist modes
    kernel_norm: float  # max |div sigma| on pure-Nyquist modes (uncontrollable)
    trace_removed: float
    history: list = field(default_factory=list)

    def diagnostics(self) -> dict:
        return {
            "iterations": self.iterations,
            "residual": self.residual,
            "kernel_norm": self.kernel_norm,
            "trace_removed": self.trace_removed,
            "history": list(self.history),
        }


def york_decompose(g: MetricField, h: SymTensor2Field, tol: float = 1e-10,
                   max_iter: int = 500, strict: bool = False,
                   W0: OneFormField | None = None, restart: int = 30) -> YorkSplit:
    """Split ``h`` into a TT part and a conformal-Killing image.

    Parameters
    ----------
    g : MetricField
    h : SymTensor2Field
        Covariant; its g-trace is removed first (``strict`` makes a trace above
        ``1e-10`` relative an error instead).
    tol : float
        Target max-norm of the linear residual ``div_g h - div_g L_g W``
        (equivalently of ``div_g sigma``).
    max_iter : int
        Budget of preconditioned GMRES iterations.
    W0 : OneFormField, optional
        Initial guess.

    Raises
    ------
    NumericalError
        If the residual target is not met within ``max_iter`` iterations; the
        residual history is attached.
    """
    require_same_grid(g, h)
    if h.variance != CO:
        raise ValidationError("york_decompose expects a covariant tensor")
    grid = g.grid
    n = grid.n
    tr = calculus.trace(g, h).values
    trace_removed = float(np.max(np.abs(tr)))
    if strict and trace_removed > 1e-10 * max(1.0, h.max_abs()):
        raise ValidationError(f"input is not trace-free (max |tr| = {trace_removed:.3e})")
    h = calculus.trace_free(g, h)

    precond = FlatVectorPreconditioner(grid)
    shape = (n,) + grid.shape
    size = int(np.prod(shape))

    def apply_A(w):
        return york_operator(g, OneFormField(grid, w)).values

    def matvec(y):
        w = precond.apply(y.reshape(shape))
        out, _ = project_kernel(grid, apply_A(w))
        return out.ravel()

    op = spla.LinearOperator((size, size), matvec=matvec, dtype=float)
    history = []
    budget = [0]

    def solve_projected(rhs, w):
        """Preconditioned GMRES cycles on the kernel-projected system."""
        rhs, _ = project_kernel(grid, rhs)
        while True:
            r = rhs - project_kernel(grid, apply_A(w))[0]
            res = float(np.max(np.abs(r)))
            history.append(res)
            if res < 0.1 * tol:
                return w
            if budget[0] >= max_iter:
                raise NumericalError(
                    f"York solve did not reach tol={tol:g} in {max_iter} iterations "
                    f"(residual {res:.3e})",
                    history=history,
                )
            counter = []
            cycle = min(restart, max_iter - budget[0])
            y, _ = spla.gmres(op, r.ravel(), rtol=min(0.1, 0.01 * tol / res), atol=0.0,
                              restart=cycle, maxiter=1,
                              callback=lambda _x: counter.append(1), callback_type="pr_norm")
            budget[0] += max(1, len(counter))
            w = w + precond.apply(y.reshape(shape))

    if W0 is None:
        w = np.zeros(shape)
    else:
        require_same_grid(g, W0)
        w, _ = project_kernel(grid, W0.values)
    b = calculus.divergence(g, h).values
    w = solve_projected(b, w)

    # Constant one-forms are only a kernel of the flat operator.  If the
    # constant-mode residual survives, the metric admits no such kernel and
    # the solution acquires a mean: solve the n x n system for it.
    axes = tuple(range(1, n + 1))
    kres = np.mean(b - apply_A(w), axis=axes)
    if np.max(np.abs(kres)) >= 0.1 * tol:
        columns = []
        corrections = []
        for a in range(n):
            e = np.zeros(shape)
            e[a] = 1.0
            z = solve_projected(-apply_A(e), np.zeros(shape))
            corrections.append(e + z)
            columns.append(np.mean(apply_A(e + z), axis=axes))
        coef, *_ = np.linalg.lstsq(np.stack(columns, axis=1), kres, rcond=1e-8)
        w = w + sum(c * v for c, v in zip(coef, corrections))
        w = solve_projected(b, w)
    iterations = budget[0]

    W = OneFormField(grid, w)
    LW = calculus.conformal_killing_op(g, W)
    sigma = SymTensor2Field(grid, h.values - LW.values, CO)
    final = calculus.divergence(g, sigma).values
    nyq = _nyquist_part(grid, final)
    return YorkSplit(sigma, W, iterations, float(np.max(np.abs(final - nyq))),
                     float(np.max(np.abs(nyq))), trace_removed, history)


def _nyquist_part(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Component on kernel modes other than the constant one."""
    mask = grid.kernel_mask.copy()
    mask[(0,) * grid.n] = False
    return grid.ifft(np.where(mask, grid.fft(values), 0.0))


def tt_project_flat(h: SymTensor2Field) -> SymTensor2Field:
    """Flat-metric transverse-traceless projection computed in Fourier space.

    Non-kernel modes get ``P h P - P tr(P h) / (n-1)`` with
    ``P = I - k^ k^T``; kernel modes (constant and pure-Nyquist) only lose
    their trace.
    """
    if h.variance != CO:
        raise ValidationError("tt_project_flat expects a covariant tensor")
    grid = h.grid
    n = grid.n
    spec = grid.fft(h.full())
    kernel = grid.kernel_mask
    ksq = np.where(kernel, 1.0, grid.k_squared)
    khat = np.stack([k / np.sqrt(ksq) for k in grid.wavevector()])
    khat[:, kernel] = 0.0
    eye = np.eye(n).reshape((n, n) + (1,) * n)
    P = eye - np.einsum("i...,j...->ij...", khat, khat)
    php = np.einsum("ia...,ab...,bj...->ij...", P, spec, P, optimize=True)
    tr = np.einsum("ii...->...", php)
    out = php - P * tr / (n - 1)
    spec_tr = np.einsum("ii...->...", spec)
    kernel_part = spec - eye * spec_tr / n
    out = np.where(kernel, kernel_part, out)
    return SymTensor2Field.from_full(grid, grid.ifft(out), CO)


def l2_inner(g: MetricField, a: SymTensor2Field, b: SymTensor2Field) -> float:
    """``∫ <a, b>_g dV_g`` with the coordinate quadrature of the grid."""
    val = calculus.full_contraction(g, a, b).values * g.sqrt_det
    return float(np.sum(val) * g.grid.cell_volume)
