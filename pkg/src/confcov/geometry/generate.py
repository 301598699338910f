"""Reproducible band-limited test fields.

A :class:`BandLimited` object is a fixed trigonometric polynomial (random
Gaussian Fourier coefficients with envelope ``exp(-|m|^2 / k0^2)`` on the
mode box ``|m_a| <= mmax``).  Because it is a continuum function it can be
sampled on any grid fine enough to carry its modes, which is what the
convergence studies need.
"""
from __future__ import annotations

import numpy as np

from confcov.errors import ValidationError
from confcov.geometry.fields import (
    CO,
    MetricField,
    OneFormField,
    ScalarField,
    SymTensor2Field,
)
from confcov.geometry.grid import Grid


class BandLimited:
    """Real trigonometric polynomial with ``ncomp`` components.

    Parameters
    ----------
    n : int
        Spatial dimension.
    mmax : int
        Largest retained integer mode per axis.
    k0 : float
        Envelope width in integer mode units.
    rng : numpy.random.Generator
    ncomp : int
        Number of independent components drawn.
    amplitude : float
        Max-norm of each component, measured on a reference grid of
        ``4*mmax + 4`` points per axis (grid-independent normalization).
    """

    def __init__(self, n, mmax, k0, rng, ncomp=1, amplitude=1.0):
        if mmax < 1:
            raise ValidationError("mmax must be >= 1")
        self.n = n
        self.mmax = int(mmax)
        self.ncomp = int(ncomp)
        side = 2 * self.mmax + 1
        m = np.arange(-self.mmax, self.mmax + 1)
        msq = sum(np.meshgrid(*([m**2] * n), indexing="ij"))
        envelope = np.exp(-msq / float(k0) ** 2)
        shape = (self.ncomp,) + (side,) * n
        coeffs = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * envelope
        # Hermitian symmetrization makes the synthesized field real.
        flipped = np.conj(np.flip(coeffs, axis=tuple(range(1, n + 1))))
        self.coeffs = 0.5 * (coeffs + flipped)
        ref = Grid((4 * self.mmax + 4,) * n)
        peak = np.max(np.abs(self._synth(ref).reshape(self.ncomp, -1)), axis=1)
        peak[peak == 0] = 1.0
        self.coeffs *= (amplitude / peak).reshape((self.ncomp,) + (1,) * n)

    def _synth(self, grid: Grid) -> np.ndarray:
        n = self.n
        for s in grid.shape:
            if s <= 2 * self.mmax:
                raise ValidationError(
                    f"grid with {s} points per axis cannot carry modes up to {self.mmax}"
                )
        full = np.zeros((self.ncomp,) + grid.shape, dtype=complex)
        m = np.arange(-self.mmax, self.mmax + 1)
        idx = np.ix_(*([np.arange(self.ncomp)] + [m % s for s in grid.shape]))
        full[idx] = self.coeffs
        axes = tuple(range(1, n + 1))
        # Period rescaling is irrelevant: modes are integers per period.
        vals = np.fft.ifftn(full, axes=axes) * grid.npoints
        return vals.real

    def sample(self, grid: Grid) -> np.ndarray:
        if grid.n != self.n:
            raise ValidationError("dimension mismatch")
        return self._synth(grid)


DEFAULT_MMAX = 2
DEFAULT_K0 = 1.0


def grid_band(grid: Grid) -> tuple:
    """Grid-relative band: ``k0 = N/6`` with the top third of modes cut."""
    size = min(grid.shape)
    return max(1, size // 3), size / 6.0


def _band(grid, mmax, k0):
    # Products of fields with k0 = N/6 alias at the 1e-6 level on 24^3, so
    # the default is a fixed low band that every grid >= 8 resolves.
    return (DEFAULT_MMAX if mmax is None else mmax), (DEFAULT_K0 if k0 is None else k0)


def smooth_array(grid, rng, ncomp=1, amplitude=1.0, mmax=None, k0=None) -> np.ndarray:
    mmax, k0 = _band(grid, mmax, k0)
    return BandLimited(grid.n, mmax, k0, rng, ncomp, amplitude).sample(grid)


def smooth_scalar(grid, rng, amplitude=1.0, mmax=None, k0=None) -> ScalarField:
    return ScalarField(grid, smooth_array(grid, rng, 1, amplitude, mmax, k0)[0])


def positive_scalar(grid, rng, amplitude=0.5, mmax=None, k0=None) -> ScalarField:
    """``exp(u)`` for band-limited ``u`` with ``|u| <= amplitude`` (<= 1)."""
    if amplitude > 1:
        raise ValidationError("log-amplitude of a conformal factor is capped at 1")
    u = smooth_array(grid, rng, 1, amplitude, mmax, k0)[0]
    return ScalarField(grid, np.exp(np.clip(u, -1.0, 1.0)))


def smooth_oneform(grid, rng, amplitude=1.0, mmax=None, k0=None, zero_mean=False) -> OneFormField:
    vals = smooth_array(grid, rng, grid.n, amplitude, mmax, k0)
    if zero_mean:
        vals = vals - vals.mean(axis=tuple(range(1, grid.n + 1)), keepdims=True)
    return OneFormField(grid, vals)


def smooth_sym2(grid, rng, amplitude=1.0, mmax=None, k0=None) -> SymTensor2Field:
    n = grid.n
    vals = smooth_array(grid, rng, n * (n + 1) // 2, amplitude, mmax, k0)
    return SymTensor2Field(grid, vals, CO)


def conformally_flat_metric(grid: Grid, omega: ScalarField) -> MetricField:
    """``exp(2 omega) * delta``."""
    flat = MetricField.flat(grid)
    return MetricField(grid, flat.values * np.exp(2.0 * omega.values))


def perturbed_metric(grid, rng, amplitude=0.1, mmax=None, k0=None) -> MetricField:
    """``delta + B`` with band-limited symmetric ``B``, ``|B_ij| <= amplitude``.

    ``amplitude * n < 1`` guarantees positivity by diagonal dominance.
    """
    if amplitude * grid.n >= 1:
        raise ValidationError("perturbation too large to guarantee positivity")
    B = smooth_sym2(grid, rng, amplitude, mmax, k0)
    return MetricField(grid, MetricField.flat(grid).values + B.values)
