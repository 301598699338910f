"""Immutable tensor fields sampled on a :class:`~confcov.geometry.grid.Grid`.

Symmetric rank-2 tensors store only their ``n(n+1)/2`` independent
components (``i <= j`` lexicographic) so ``h_ij == h_ji`` holds by
construction.  Riemann-type tensors store one symmetric matrix over
antisymmetric index pairs ``(i < j)``.
"""
from __future__ import annotations

import itertools
from functools import cached_property, lru_cache

import numpy as np

from confcov.errors import GridMismatchError, NonPositiveError, ValidationError, VarianceError
from confcov.geometry.grid import Grid, check_grid_array

CO = "co"
CONTRA = "contra"


@lru_cache(maxsize=None)
def sym_pairs(n: int) -> tuple:
    return tuple((i, j) for i in range(n) for j in range(i, n))


@lru_cache(maxsize=None)
def _sym_index(n: int) -> np.ndarray:
    idx = np.empty((n, n), dtype=int)
    for p, (i, j) in enumerate(sym_pairs(n)):
        idx[i, j] = idx[j, i] = p
    return idx


@lru_cache(maxsize=None)
def anti_pairs(n: int) -> tuple:
    return tuple((i, j) for i in range(n) for j in range(i + 1, n))


@lru_cache(maxsize=None)
def _riemann_layout(n: int):
    """Packed positions and signs for every (i, j, k, l)."""
    pairs = anti_pairs(n)
    m = len(pairs)
    pair_of = {}
    for p, (i, j) in enumerate(pairs):
        pair_of[(i, j)] = (p, 1.0)
        pair_of[(j, i)] = (p, -1.0)
    pq_index = np.empty((m, m), dtype=int)
    for q, (P, Q) in enumerate((P, Q) for P in range(m) for Q in range(P, m)):
        pq_index[P, Q] = pq_index[Q, P] = q
    pos = np.zeros((n,) * 4, dtype=int)
    sign = np.zeros((n,) * 4)
    for i, j, k, l in itertools.product(range(n), repeat=4):
        if i == j or k == l:
            continue
        P, s1 = pair_of[(i, j)]
        Q, s2 = pair_of[(k, l)]
        pos[i, j, k, l] = pq_index[P, Q]
        sign[i, j, k, l] = s1 * s2
    return pos, sign, m * (m + 1) // 2


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=np.float64, copy=True)
    arr.setflags(write=False)
    return arr


def _finite(arr: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(arr)):
        bad = tuple(int(i) for i in np.argwhere(~np.isfinite(arr))[0])
        raise ValidationError(f"{what}: non-finite value at array index {bad}")


class Field:
    """Common behaviour: a grid, a read-only value array, elementwise scaling."""

    ncomp_shape: tuple = ()
    rank = 0

    def __init__(self, grid: Grid, values):
        if not isinstance(grid, Grid):
            raise ValidationError("grid must be a Grid")
        values = np.asarray(values, dtype=np.float64)
        expected = self._expected_shape(grid)
        if values.shape != expected:
            raise ValidationError(
                f"{type(self).__name__} expects values of shape {expected}, got {values.shape}"
            )
        _finite(values, type(self).__name__)
        self.grid = grid
        self.values = _readonly(values)

    def _expected_shape(self, grid: Grid) -> tuple:
        return grid.shape

    def _new(self, values):
        return type(self)(self.grid, values)

    def scaled(self, factor) -> "Field":
        """Pointwise product with a scalar array or number."""
        factor = np.asarray(factor.values if isinstance(factor, ScalarField) else factor)
        return self._new(self.values * factor)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def __repr__(self):
        return f"{type(self).__name__}(grid={self.grid.shape})"


class ScalarField(Field):
    """Function on the grid."""

    @classmethod
    def constant(cls, grid: Grid, value: float) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(value)))

    def __add__(self, other):
        other = other.values if isinstance(other, ScalarField) else other
        return ScalarField(self.grid, self.values + other)

    def __mul__(self, other):
        other = other.values if isinstance(other, ScalarField) else other
        return ScalarField(self.grid, self.values * other)

    __rmul__ = __mul__

    def __pow__(self, p):
        return ScalarField(self.grid, self.values**p)

    def require_positive(self, what: str = "field") -> None:
        if np.any(self.values <= 0):
            idx = np.unravel_index(int(np.argmin(self.values)), self.values.shape)
            idx = tuple(int(i) for i in idx)
            raise NonPositiveError(
                f"{what} must be > 0 everywhere; min {self.values[idx]:.3e} at grid point {idx}",
                index=idx,
            )


class _RankOne(Field):
    rank = 1
    variance = CO

    def _expected_shape(self, grid):
        return (grid.n,) + grid.shape


class OneFormField(_RankOne):
    """Covariant vector field ``W_i``."""

    variance = CO


class VectorField(_RankOne):
    """Contravariant vector field ``V^i``."""

    variance = CONTRA


class SymTensor2Field(Field):
    """Symmetric 2-tensor ``h_ij`` (or ``h^ij``) in packed storage."""

    rank = 2

    def __init__(self, grid: Grid, packed, variance: str = CO):
        if variance not in (CO, CONTRA):
            raise VarianceError(f"variance must be 'co' or 'contra', got {variance!r}")
        self._variance = variance
        super().__init__(grid, packed)

    @property
    def variance(self) -> str:
        return self._variance

    def _expected_shape(self, grid):
        return (grid.n * (grid.n + 1) // 2,) + grid.shape

    def _new(self, values):
        return SymTensor2Field(self.grid, values, self.variance)

    @classmethod
    def from_full(cls, grid: Grid, full, variance: str = CO) -> "SymTensor2Field":
        """Pack an ``(n, n, *shape)`` array, averaging its two triangles."""
        full = np.asarray(full, dtype=float)
        n = grid.n
        if full.shape != (n, n) + grid.shape:
            raise ValidationError(f"expected full shape {(n, n) + grid.shape}, got {full.shape}")
        packed = np.stack([0.5 * (full[i, j] + full[j, i]) if i != j else full[i, i]
                           for i, j in sym_pairs(n)])
        return cls(grid, packed, variance)

    @classmethod
    def identity(cls, grid: Grid, variance: str = CO) -> "SymTensor2Field":
        n = grid.n
        full = np.zeros((n, n) + grid.shape)
        for i in range(n):
            full[i, i] = 1.0
        return cls.from_full(grid, full, variance)

    def full(self) -> np.ndarray:
        """Expanded ``(n, n, *shape)`` array (a fresh copy)."""
        return self.values[_sym_index(self.grid.n)]

    def component(self, i: int, j: int) -> np.ndarray:
        return self.values[_sym_index(self.grid.n)[i, j]]

    def __add__(self, other):
        if not isinstance(other, SymTensor2Field):
            return NotImplemented
        require_same_grid(self, other)
        if other.variance != self.variance:
            raise VarianceError("cannot add tensors of different variance")
        return SymTensor2Field(self.grid, self.values + other.values, self.variance)

    def __sub__(self, other):
        return self + other.scaled(-1.0)


class MetricField(SymTensor2Field):
    """Riemannian metric ``g_ij``: covariant, symmetric positive definite.

    The constructor Cholesky-factors every point; failure aborts with the
    offending grid point.  The inverse is formed from the factor,
    ``g^-1 = L^-T L^-1``, and is exactly symmetric.
    """

    def __init__(self, grid: Grid, packed, variance: str = CO):
        if variance != CO:
            raise VarianceError("a metric must be covariant")
        super().__init__(grid, packed, CO)
        n = grid.n
        mats = np.moveaxis(self.full().reshape(n, n, -1), -1, 0)
        try:
            chol = np.linalg.cholesky(mats)
        except np.linalg.LinAlgError:
            eig = np.linalg.eigvalsh(mats)[:, 0]
            bad = int(np.argmin(eig))
            idx = tuple(int(i) for i in np.unravel_index(bad, grid.shape))
            raise NonPositiveError(
                f"metric not positive definite at grid point {idx} (min eigenvalue {eig[bad]:.3e})",
                index=idx,
            ) from None
        linv = np.linalg.inv(chol)
        inv = np.einsum("pki,pkj->pij", linv, linv)
        inv = 0.5 * (inv + np.swapaxes(inv, 1, 2))
        self._inverse = _readonly(np.moveaxis(inv, 0, -1).reshape((n, n) + grid.shape))
        logdiag = np.log(np.diagonal(chol, axis1=1, axis2=2)).sum(axis=1)
        self._sqrt_det = _readonly(np.exp(logdiag).reshape(grid.shape))

    @classmethod
    def flat(cls, grid: Grid) -> "MetricField":
        return cls(grid, SymTensor2Field.identity(grid).values)

    @classmethod
    def from_sym(cls, h: SymTensor2Field) -> "MetricField":
        require_variance(h, CO, "metric")
        return cls(h.grid, h.values)

    @classmethod
    def from_full(cls, grid: Grid, full, variance: str = CO) -> "MetricField":
        return cls.from_sym(SymTensor2Field.from_full(grid, full, variance))

    def _new(self, values):
        return MetricField(self.grid, values)

    @property
    def inverse(self) -> np.ndarray:
        """Pointwise inverse ``g^ij`` as an ``(n, n, *shape)`` array."""
        return self._inverse

    @property
    def sqrt_det(self) -> np.ndarray:
        return self._sqrt_det

    @cached_property
    def christoffel(self) -> np.ndarray:
        from confcov.geometry.calculus import christoffel

        out = christoffel(self)
        out.setflags(write=False)
        return out

    def as_sym(self) -> SymTensor2Field:
        return SymTensor2Field(self.grid, self.values, CO)


class Riemann4Field(Field):
    """Covariant ``R_ijkl`` with pair (anti)symmetries built into the storage."""

    rank = 4

    def _expected_shape(self, grid):
        return (_riemann_layout(grid.n)[2],) + grid.shape

    @classmethod
    def from_full(cls, grid: Grid, full) -> "Riemann4Field":
        """Project an ``(n,)*4 + shape`` array onto the symmetric storage.

        The packed value is the average over the eight index permutations
        generated by ``ij`` antisymmetry, ``kl`` antisymmetry and pair swap.
        """
        full = np.asarray(full, dtype=float)
        sym = full - full.swapaxes(0, 1)
        sym = sym - sym.swapaxes(2, 3)
        sym = sym + np.transpose(sym, (2, 3, 0, 1) + tuple(range(4, full.ndim)))
        sym = sym / 8.0
        n = grid.n
        packed = []
        pairs = anti_pairs(n)
        for P in range(len(pairs)):
            for Q in range(P, len(pairs)):
                (i, j), (k, l) = pairs[P], pairs[Q]
                packed.append(sym[i, j, k, l])
        if not packed:
            packed = np.zeros((0,) + grid.shape)
        return cls(grid, np.stack(packed) if isinstance(packed, list) else packed)

    def full(self) -> np.ndarray:
        pos, sign, _ = _riemann_layout(self.grid.n)
        bshape = sign.shape + (1,) * self.grid.n
        return self.values[pos] * sign.reshape(bshape)


def require_same_grid(*fields) -> Grid:
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise GridMismatchError(f"grid mismatch: {grid.shape} vs {f.grid.shape}")
    return grid


def require_variance(field, variance: str, what: str = "tensor") -> None:
    if field.variance != variance:
        raise VarianceError(f"{what} must be {variance}variant, got {field.variance}variant")


__all__ = [
    "CO",
    "CONTRA",
    "Field",
    "ScalarField",
    "OneFormField",
    "VectorField",
    "SymTensor2Field",
    "MetricField",
    "Riemann4Field",
    "require_same_grid",
    "require_variance",
    "sym_pairs",
    "anti_pairs",
    "check_grid_array",
]
