"""Periodic rectangular grids and Fourier-collocation differentiation.

Every field in the package is sampled on a :class:`Grid`, i.e. the flat
torus ``prod_a [0, L_a)`` with ``shape[a]`` uniformly spaced points per axis.
Array layout convention: component axes first, grid axes last, so a
one-form on a 3-d grid has shape ``(3, N0, N1, N2)``.
"""
from __future__ import annotations

import contextlib
import contextvars
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.fft

from confcov.errors import ValidationError

_DEALIAS = contextvars.ContextVar("confcov_dealias", default=False)
_WORKERS = contextvars.ContextVar("confcov_workers", default=1)


def set_dealias(flag: bool) -> None:
    """Globally enable or disable 2/3-rule filtering before differentiation."""
    _DEALIAS.set(bool(flag))


def dealias_enabled() -> bool:
    return _DEALIAS.get()


@contextlib.contextmanager
def dealiasing(flag: bool = True):
    token = _DEALIAS.set(bool(flag))
    try:
        yield
    finally:
        _DEALIAS.reset(token)


def set_threads(workers: int) -> None:
    """Number of worker threads handed to ``scipy.fft``."""
    if workers < 1:
        raise ValidationError("thread count must be >= 1")
    _WORKERS.set(int(workers))


@dataclass(frozen=True)
class Grid:
    """Uniform periodic lattice on a flat torus.

    Parameters
    ----------
    shape : tuple of int
        Points per axis; each entry even and >= 4.
    periods : tuple of float
        Period ``L_a`` of each axis.  Defaults to ``2*pi`` so that Fourier
        wavenumbers are integers.
    """

    shape: tuple
    periods: tuple = None

    def __post_init__(self):
        shape = tuple(int(s) for s in self.shape)
        periods = self.periods
        if periods is None:
            periods = (2 * math.pi,) * len(shape)
        periods = tuple(float(p) for p in periods)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "periods", periods)
        if len(shape) < 3:
            raise ValidationError(f"grid dimension must be >= 3, got {len(shape)}")
        if len(periods) != len(shape):
            raise ValidationError("shape and periods differ in length")
        for s in shape:
            if s < 4 or s % 2:
                raise ValidationError(f"per-axis point counts must be even and >= 4, got {shape}")
        for p in periods:
            if not (p > 0 and math.isfinite(p)):
                raise ValidationError(f"periods must be positive, got {periods}")

    @classmethod
    def cube(cls, n: int, size: int, period: float = 2 * math.pi) -> "Grid":
        return cls((size,) * n, (period,) * n)

    @property
    def n(self) -> int:
        return len(self.shape)

    @property
    def npoints(self) -> int:
        return int(np.prod(self.shape))

    @property
    def spacing(self) -> tuple:
        return tuple(L / s for L, s in zip(self.periods, self.shape))

    @property
    def volume(self) -> float:
        return float(np.prod(self.periods))

    @property
    def cell_volume(self) -> float:
        return self.volume / self.npoints

    def coords(self) -> list[np.ndarray]:
        """Coordinate arrays ``x_a = i_a L_a / N_a`` broadcast to the full grid."""
        axes = [np.arange(s) * (L / s) for s, L in zip(self.shape, self.periods)]
        return list(np.meshgrid(*axes, indexing="ij"))

    def to_dict(self) -> dict:
        return {"n": self.n, "shape": list(self.shape), "periods": list(self.periods)}

    # -- spectral machinery -------------------------------------------------
    def _mode_index(self, axis: int, half: bool) -> np.ndarray:
        s = self.shape[axis]
        m = np.fft.rfftfreq(s, 1.0 / s) if half else np.fft.fftfreq(s, 1.0 / s)
        return m

    @cached_property
    def _deriv_wavenumbers(self) -> tuple:
        """Per-axis ``i k`` multipliers for the real-to-complex layout.

        The Nyquist mode is zeroed: its derivative is not representable as a
        real trigonometric interpolant.
        """
        n = self.n
        out = []
        for a in range(n):
            m = self._mode_index(a, half=(a == n - 1))
            k = 2 * np.pi / self.periods[a] * m
            k[np.abs(m) == self.shape[a] // 2] = 0.0
            bshape = [1] * n
            bshape[a] = k.size
            out.append(k.reshape(bshape))
        return tuple(out)

    @cached_property
    def _dealias_mask(self) -> np.ndarray:
        n = self.n
        mask = np.ones([1] * n, dtype=bool)
        for a in range(n):
            m = self._mode_index(a, half=(a == n - 1))
            keep = np.abs(m) <= self.shape[a] / 3.0
            bshape = [1] * n
            bshape[a] = m.size
            mask = mask & keep.reshape(bshape)
        return mask

    @cached_property
    def kernel_mask(self) -> np.ndarray:
        """True on rfft modes annihilated by every spectral derivative."""
        mask = np.ones([1] * self.n, dtype=bool)
        for k in self._deriv_wavenumbers:
            mask = mask & (k == 0)
        return np.broadcast_to(mask, self.spectral_shape).copy()

    @property
    def spectral_shape(self) -> tuple:
        return self.shape[:-1] + (self.shape[-1] // 2 + 1,)

    @cached_property
    def k_squared(self) -> np.ndarray:
        """``|k|^2`` built from derivative wavenumbers (Nyquist excluded)."""
        out = 0.0
        for k in self._deriv_wavenumbers:
            out = out + k**2
        return np.broadcast_to(out, self.spectral_shape).copy()

    def wavevector(self) -> list[np.ndarray]:
        return [np.broadcast_to(k, self.spectral_shape) for k in self._deriv_wavenumbers]

    def fft(self, arr: np.ndarray) -> np.ndarray:
        axes = tuple(range(arr.ndim - self.n, arr.ndim))
        return scipy.fft.rfftn(arr, axes=axes, workers=_WORKERS.get())

    def ifft(self, spec: np.ndarray) -> np.ndarray:
        axes = tuple(range(spec.ndim - self.n, spec.ndim))
        return scipy.fft.irfftn(spec, s=self.shape, axes=axes, workers=_WORKERS.get())


def _check_finite(arr: np.ndarray) -> None:
    if not np.all(np.isfinite(arr)):
        bad = np.argwhere(~np.isfinite(arr))[0]
        raise ValidationError(f"non-finite value in field at array index {tuple(int(i) for i in bad)}")


def check_grid_array(grid: Grid, arr: np.ndarray) -> None:
    if tuple(arr.shape[arr.ndim - grid.n:]) != grid.shape:
        raise ValidationError(f"array trailing shape {arr.shape} does not match grid {grid.shape}")


def gradient(grid: Grid, arr: np.ndarray) -> np.ndarray:
    """All first partials of an array with trailing grid axes.

    Returns an array of shape ``(n,) + arr.shape`` whose leading index is the
    differentiation axis.
    """
    arr = np.asarray(arr, dtype=float)
    check_grid_array(grid, arr)
    _check_finite(arr)
    spec = grid.fft(arr)
    if _DEALIAS.get():
        spec = spec * grid._dealias_mask
    out = np.empty((grid.n,) + arr.shape)
    for a, k in enumerate(grid._deriv_wavenumbers):
        out[a] = grid.ifft(spec * (1j * k))
    return out


def partial(grid: Grid, arr: np.ndarray, axis: int) -> np.ndarray:
    """Single partial derivative ``d/dx_axis`` of an array with trailing grid axes."""
    if not 0 <= axis < grid.n:
        raise ValidationError(f"axis {axis} out of range for n={grid.n}")
    arr = np.asarray(arr, dtype=float)
    check_grid_array(grid, arr)
    _check_finite(arr)
    spec = grid.fft(arr)
    if _DEALIAS.get():
        spec = spec * grid._dealias_mask
    return grid.ifft(spec * (1j * grid._deriv_wavenumbers[axis]))


def dealias_filter(grid: Grid, arr: np.ndarray) -> np.ndarray:
    """Zero the top third of Fourier modes along every axis (2/3 rule)."""
    return grid.ifft(grid.fft(arr) * grid._dealias_mask)


def flat_laplacian(grid: Grid, arr: np.ndarray) -> np.ndarray:
    return grid.ifft(-grid.k_squared * grid.fft(arr))


def grid_sum(grid: Grid, arr: np.ndarray) -> np.ndarray:
    """Coordinate integral ``sum(arr) * cell_volume`` over the grid axes."""
    axes = tuple(range(arr.ndim - grid.n, arr.ndim))
    return np.sum(arr, axis=axes) * grid.cell_volume


def same_grid(*grids: Sequence[Grid]) -> bool:
    first = grids[0]
    return all(g == first for g in grids[1:])
