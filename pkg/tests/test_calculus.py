import numpy as np
import pytest

from confcov.geometry import (
    CONTRA,
    Grid,
    MetricField,
    OneFormField,
    ScalarField,
    SymTensor2Field,
    bianchi_residual,
    christoffel,
    conformal_killing_op,
    covariant_derivative,
    curvature,
    divergence,
    laplacian,
    lower_index,
    raise_index,
    ricci,
    scalar_curvature,
    trace,
    trace_free,
)
from confcov.geometry.generate import (
    conformally_flat_metric,
    perturbed_metric,
    smooth_oneform,
    smooth_scalar,
    smooth_sym2,
)
from confcov.geometry.grid import flat_laplacian, gradient

import oracles


def test_flat_metric_has_no_curvature(grid16):
    g = MetricField.flat(grid16)
    assert np.all(christoffel(g) == 0.0)
    c = curvature(g)
    assert np.all(c.riemann.values == 0.0)
    assert np.all(c.scalar.values == 0.0)


def test_conformally_flat_christoffel(grid24, rng):
    omega = smooth_scalar(grid24, rng, 0.2)
    g = conformally_flat_metric(grid24, omega)
    dw = gradient(grid24, omega.values)
    d = np.eye(3).reshape(3, 3, 1, 1, 1)
    expect = (np.einsum("ki...,j...->kij...", d, dw) + np.einsum("kj...,i...->kij...", d, dw)
              - np.einsum("ij...,k...->kij...", d, dw))
    assert np.max(np.abs(christoffel(g) - expect)) < 1e-10


@pytest.mark.parametrize("n", [3, 4])
def test_conformally_flat_scalar_curvature(n):
    grid = Grid.cube(n, 16 if n == 4 else 24)
    omega = smooth_scalar(grid, np.random.default_rng(n), 0.1)
    w = omega.values
    dw = gradient(grid, w)
    exact = np.exp(-2 * w) * (-2 * (n - 1) * flat_laplacian(grid, w)
                              - (n - 1) * (n - 2) * np.sum(dw**2, axis=0))
    got = scalar_curvature(conformally_flat_metric(grid, omega)).values
    assert np.max(np.abs(got - exact)) / np.max(np.abs(exact)) < 1e-8


def test_curvature_matches_sympy_oracle():
    grid = Grid.cube(3, 32)
    xs = grid.coords()
    ref = oracles.diagonal_test_metric()
    full = np.stack([np.stack([oracles.evaluate(ref["g"][i][j], xs) for j in range(3)])
                     for i in range(3)])
    g = MetricField.from_full(grid, full)
    c = curvature(g)
    R = c.riemann.full()
    for key, fn in ref["riemann"].items():
        assert np.max(np.abs(R[key] - oracles.evaluate(fn, xs))) < 1e-9, key
    ric = c.ricci.full()
    for i in range(3):
        for j in range(3):
            assert np.max(np.abs(ric[i, j] - oracles.evaluate(ref["ricci"][i][j], xs))) < 1e-9
    assert np.max(np.abs(c.scalar.values - oracles.evaluate(ref["scalar"], xs))) < 1e-9


def test_sign_convention_sphere_oracle():
    assert oracles.sphere_scalar_curvature() == 2


def test_fast_ricci_equals_riemann_contraction(grid16, rng):
    g = perturbed_metric(grid16, rng, 0.15)
    c = curvature(g)
    assert np.max(np.abs(ricci(g).values - c.ricci.values)) < 1e-12
    assert np.max(np.abs(scalar_curvature(g).values - c.scalar.values)) < 1e-12


def test_bianchi_and_symmetries(grid24, rng):
    g = perturbed_metric(grid24, rng, 0.2)
    R = curvature(g).riemann
    assert bianchi_residual(R) < 1e-10


def test_raise_lower_roundtrip(grid16, rng):
    g = perturbed_metric(grid16, rng)
    h = smooth_sym2(grid16, rng)
    up = raise_index(g, h)
    assert up.variance == CONTRA
    assert np.max(np.abs(lower_index(g, up).values - h.values)) < 1e-13
    W = smooth_oneform(grid16, rng)
    assert np.max(np.abs(lower_index(g, raise_index(g, W)).values - W.values)) < 1e-13
    assert np.max(np.abs(trace(g, h).values - trace(g, up).values)) < 1e-13


def test_trace_free(grid16, rng):
    g = perturbed_metric(grid16, rng)
    h = trace_free(g, smooth_sym2(grid16, rng))
    assert np.max(np.abs(trace(g, h).values)) < 1e-14


def test_metric_compatibility(grid24, rng):
    g = perturbed_metric(grid24, rng, 0.1)
    assert np.max(np.abs(covariant_derivative(g, g.as_sym()))) < 1e-10


def test_flat_divergence_of_hessian(grid16, rng):
    g = MetricField.flat(grid16)
    u = smooth_scalar(grid16, rng).values
    hess = gradient(grid16, gradient(grid16, u))
    h = SymTensor2Field.from_full(grid16, hess)
    expect = -gradient(grid16, flat_laplacian(grid16, u))
    assert np.max(np.abs(divergence(g, h).values - expect)) < 1e-10


def test_laplacian_of_constant_and_flat(grid16, rng):
    g = perturbed_metric(grid16, rng)
    assert np.max(np.abs(laplacian(g, ScalarField.constant(grid16, 2.0)).values)) == 0.0
    u = smooth_scalar(grid16, rng)
    flat = MetricField.flat(grid16)
    assert np.max(np.abs(laplacian(flat, u).values - flat_laplacian(grid16, u.values))) < 1e-12


def test_laplacian_divergence_form(grid24, rng):
    """Δ_g u = |g|^-1/2 ∂_i(|g|^1/2 g^ij ∂_j u)."""
    g = perturbed_metric(grid24, rng, 0.1)
    u = smooth_scalar(grid24, rng)
    flux = g.sqrt_det * np.einsum("ij...,j...->i...", g.inverse, gradient(grid24, u.values))
    div = sum(gradient(grid24, flux[i])[i] for i in range(3)) / g.sqrt_det
    assert np.max(np.abs(laplacian(g, u).values - div)) < 1e-9


def test_cko_symmetric_trace_free_over_random_seeds(grid16):
    rng = np.random.default_rng(100)
    for _ in range(100):
        g = perturbed_metric(grid16, rng, 0.1)
        L = conformal_killing_op(g, smooth_oneform(grid16, rng))
        full = L.full()
        assert np.array_equal(full, full.swapaxes(0, 1))
        assert np.max(np.abs(trace(g, L).values)) < 1e-12 * max(1.0, L.max_abs())


def test_constant_oneform_is_conformal_killing_on_flat(grid16):
    W = OneFormField(grid16, np.ones((3,) + grid16.shape))
    assert np.max(np.abs(conformal_killing_op(MetricField.flat(grid16), W).values)) == 0.0


def test_covariant_derivative_type_errors(grid16):
    from confcov.geometry import Riemann4Field

    R = Riemann4Field(grid16, np.zeros((6,) + grid16.shape))
    with pytest.raises(TypeError):
        covariant_derivative(MetricField.flat(grid16), R)
