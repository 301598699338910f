"""Matrix-free Newton-Krylov solver for the parametrized constraint systems.

The unknowns are ``phi`` (and ``W`` in the coupled mode); the residual is
the composed map ``(phi, W) -> (rho, J)(assemble(seed))``.  Jacobian-vector
products are central finite differences of that map, so the same code
serves every gravity model.  Inner solves use right-preconditioned GMRES
with flat Fourier inverses: a shifted Laplacian on the ``phi`` block and
the York operator inverse on the ``W`` block.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from confcov.conformal import critical_exponent
from confcov.constraints import ResidualReport, constraint_fields, report_from_fields
from confcov.errors import NumericalError, ValidationError
from confcov.geometry.fields import OneFormField, ScalarField
from confcov.parametrizations import Seed, assemble
from confcov.york import FlatVectorPreconditioner

MIN_PHI = 1e-3


class SolveMode(str, enum.Enum):
    COUPLED_FULL = "full"
    CMC_SCALAR_ONLY = "cmc"


@dataclass
class SolveOptions:
    tol: float = 1e-8
    max_newton: int = 30
    fd_epsilon: float = 1e-6
    damping: float = 0.5
    min_step: float = 1e-4
    mode: SolveMode = SolveMode.COUPLED_FULL
    max_krylov: int = 100
    restart: int = 50

    def __post_init__(self):
        self.mode = SolveMode(self.mode)
        if not self.tol > 0:
            raise ValidationError("tol must be positive")
        if not 0 < self.damping < 1:
            raise ValidationError("damping must lie in (0, 1)")
        if not self.fd_epsilon > 0:
            raise ValidationError("fd_epsilon must be positive")


@dataclass
class SolveResult:
    seed_out: Seed
    report: ResidualReport
    trace: list = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return len(self.trace) - 1


class _Problem:
    """Flat-vector view of ``(phi, W) -> (rho, J)`` around a seed."""

    def __init__(self, seed: Seed, model, mode: SolveMode, rhs=None):
        self.seed = seed.replace(validate=False)
        self.model = model
        self.mode = mode
        self.grid = seed.grid
        self.npts = self.grid.npoints
        self.n = self.grid.n
        self.rhs = rhs

    @property
    def coupled(self) -> bool:
        return self.mode is SolveMode.COUPLED_FULL

    def pack(self, seed: Seed) -> np.ndarray:
        if self.coupled:
            return np.concatenate([seed.phi.values.ravel(), seed.W.values.ravel()])
        return seed.phi.values.ravel().copy()

    def split(self, x: np.ndarray):
        phi = x[: self.npts].reshape(self.grid.shape)
        if self.coupled:
            W = x[self.npts:].reshape((self.n,) + self.grid.shape)
        else:
            W = self.seed.W.values
        return phi, W

    def seed_at(self, x: np.ndarray, validate: bool = False) -> Seed:
        phi, W = self.split(x)
        return self.seed.replace(phi=ScalarField(self.grid, phi), W=OneFormField(self.grid, W),
                                 validate=validate)

    def fields(self, x: np.ndarray):
        ghat, Khat = assemble(self.seed_at(x))
        r, J = (f.values for f in constraint_fields(self.model, ghat, Khat))
        if self.rhs is not None:
            r = r - self.rhs[0]
            J = J - self.rhs[1]
        return r, J

    def residual(self, x: np.ndarray) -> np.ndarray:
        r, J = self.fields(x)
        if self.coupled:
            return np.concatenate([r.ravel(), J.ravel()])
        return r.ravel()

    def min_phi(self, x: np.ndarray) -> float:
        return float(np.min(x[: self.npts]))

    def jvp(self, x: np.ndarray, v: np.ndarray, eps: float) -> np.ndarray:
        scale = float(np.max(np.abs(v)))
        if scale == 0.0:
            return np.zeros(self.npts * (1 + self.n) if self.coupled else self.npts)
        u = v / scale
        h = eps
        while self.min_phi(x - h * u) <= 0 or self.min_phi(x + h * u) <= 0:
            h *= 0.5
            if h < 1e-12:
                raise NumericalError("finite-difference step shrank below 1e-12 (phi <= 0)")
        return scale * (self.residual(x + h * u) - self.residual(x - h * u)) / (2 * h)


class _BlockPreconditioner:
    """Right preconditioner built from flat Fourier inverses.

    The principal parts are ``a(x) (-Δ)`` on ``phi`` and ``c(x) div L`` on
    ``W`` with pointwise coefficients; each block divides by its coefficient
    and then applies the flat inverse.  The ``phi`` block is shifted by the
    measured response to a constant perturbation.  Constant ``W`` modes are
    passed through unchanged: they lie in the kernel of the flat operator
    only.
    """

    def __init__(self, problem: _Problem, x: np.ndarray, eps: float):
        grid = problem.grid
        self.problem = problem
        self.grid = grid
        N = critical_exponent(grid.n)
        seed = problem.seed_at(x)
        phi = seed.phi.values
        gi_scale = np.einsum("ii...->...", seed.g.inverse) / grid.n
        self.a = (N + 2) * phi ** (1 - N) * gi_scale
        ones = np.zeros_like(x)
        ones[: problem.npts] = 1.0
        resp = problem.jvp(x, ones, eps)[: problem.npts]
        abar = float(np.mean(self.a))
        s = float(np.mean(resp)) / abar
        self.shift = s if abs(s) > 1e-3 else np.copysign(1e-3, s or 1.0)
        if problem.coupled:
            psi = seed.scheme.psi(seed.phi)
            self.c = 2.0 * phi**-N * psi**N * gi_scale
            self.vector = FlatVectorPreconditioner(grid)

    def apply(self, y: np.ndarray) -> np.ndarray:
        p = self.problem
        grid = self.grid
        spec = grid.fft(y[: p.npts].reshape(grid.shape) / self.a)
        out_phi = grid.ifft(spec / (grid.k_squared + self.shift)).ravel()
        if not p.coupled:
            return out_phi
        z = y[p.npts:].reshape((grid.n,) + grid.shape) / self.c
        w = self.vector.apply(z)
        w += z.mean(axis=tuple(range(1, grid.n + 1)), keepdims=True)
        return np.concatenate([out_phi, w.ravel()])


def _norms(problem: _Problem, F: np.ndarray) -> tuple:
    r = F[: problem.npts]
    J = F[problem.npts:]
    return float(np.max(np.abs(r))), (float(np.max(np.abs(J))) if J.size else 0.0)


def jacobian_vector_product(seed: Seed, model, direction, eps: float = 1e-6):
    """Central-difference directional derivative of ``(rho, J) o assemble``.

    ``direction`` is a pair ``(dphi, dW)`` of fields (or arrays).  Returns
    ``(drho, dJ)`` as ``(ScalarField, OneFormField)``.  ``eps`` is halved while
    ``phi +- eps dphi`` fails to stay positive.
    """
    if eps <= 0:
        raise ValidationError("eps must be positive")
    grid = seed.grid
    dphi, dW = direction
    dphi = np.asarray(getattr(dphi, "values", dphi), dtype=float)
    dW = np.asarray(getattr(dW, "values", dW), dtype=float)
    prob = _Problem(seed, model, SolveMode.COUPLED_FULL)
    x = prob.pack(prob.seed)
    v = np.concatenate([dphi.ravel(), dW.ravel()])
    if not np.any(v):
        return ScalarField.constant(grid, 0.0), OneFormField(grid, np.zeros((grid.n,) + grid.shape))
    h = eps
    while prob.min_phi(x - h * v) <= 0 or prob.min_phi(x + h * v) <= 0:
        h *= 0.5
        if h < 1e-12:
            raise NumericalError("finite-difference step shrank below 1e-12 (phi <= 0)")
    out = (prob.residual(x + h * v) - prob.residual(x - h * v)) / (2 * h)
    return (ScalarField(grid, out[: prob.npts].reshape(grid.shape)),
            OneFormField(grid, out[prob.npts:].reshape((grid.n,) + grid.shape)))


def solve(seed0: Seed, model, opts: SolveOptions | None = None, rhs=None) -> SolveResult:
    """Newton-Krylov solve of ``(rho, J)(assemble(seed)) = rhs`` (default 0).

    In CMC mode only ``phi`` is updated (``tau`` must be constant and ``W``
    stays at ``seed0.W``); convergence still requires the momentum residual
    to be below ``tol``.

    Raises
    ------
    NumericalError
        On stagnation (relative decrease below 1e-3 over five iterations),
        on an unrecoverable line search, or when ``max_newton`` is exhausted.
        The iteration trace is attached as ``history``.
    """
    opts = opts or SolveOptions()
    if opts.mode is SolveMode.CMC_SCALAR_ONLY and not seed0.tau_is_constant():
        raise ValidationError("CMC mode requires a constant tau")
    prob = _Problem(seed0, model, opts.mode, rhs)
    x = prob.pack(seed0)
    F = prob.residual(x)
    r_inf, j_inf = _norms(prob, F)
    trace = [{"iter": 0, "rho_linf": r_inf, "J_linf": j_inf, "step": 0.0}]
    merit = [float(np.linalg.norm(F))]

    def converged():
        return r_inf < opts.tol and (j_inf < opts.tol or not prob.coupled)

    it = 0
    while not converged():
        it += 1
        if it > opts.max_newton:
            raise NumericalError(f"no convergence in {opts.max_newton} Newton steps", history=trace)
        pc = _BlockPreconditioner(prob, x, opts.fd_epsilon)
        size = x.size
        op = spla.LinearOperator(
            (F.size, size), dtype=float,
            matvec=lambda y: prob.jvp(x, pc.apply(y), opts.fd_epsilon),
        )
        eta = min(0.1, max(1e-6, 0.1 * merit[-1] / max(merit[0], 1e-300)))
        y, _ = spla.gmres(op, -F, rtol=eta, atol=0.0, restart=opts.restart,
                          maxiter=max(1, opts.max_krylov // opts.restart))
        delta = pc.apply(y)

        t = 1.0
        while True:
            x_new = x + t * delta
            if prob.min_phi(x_new) >= MIN_PHI:
                F_new = prob.residual(x_new)
                m_new = float(np.linalg.norm(F_new))
                if m_new < (1 - 1e-4 * t) * merit[-1]:
                    break
            t *= opts.damping
            if t < opts.min_step:
                if prob.min_phi(x + opts.min_step * delta) < MIN_PHI:
                    msg = "line search cannot keep phi positive"
                else:
                    msg = "line search found no decrease"
                raise NumericalError(msg, history=trace)
        x, F = x_new, F_new
        merit.append(m_new)
        r_inf, j_inf = _norms(prob, F)
        trace.append({"iter": it, "rho_linf": r_inf, "J_linf": j_inf, "step": t})
        if len(merit) > 5 and (merit[-6] - merit[-1]) < 1e-3 * merit[-6]:
            raise NumericalError("Newton iteration stagnated", history=trace)

    seed_out = prob.seed_at(x, validate=True).replace(validate=seed0.validate)
    r, J = prob.fields(x)
    report = report_from_fields(model, ScalarField(prob.grid, r), OneFormField(prob.grid, J),
                                {"scheme": seed0.scheme.to_dict(), "mode": opts.mode.value,
                                 "newton_iterations": it})
    if report.max_norm() >= opts.tol:
        raise NumericalError(
            f"converged phi but residual {report.max_norm():.3e} >= tol "
            f"(momentum is not solved for in {opts.mode.value} mode)",
            history=trace,
        )
    return SolveResult(seed_out, report, trace)
