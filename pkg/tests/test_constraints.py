import numpy as np
import pytest
import sympy as sp

from confcov.constraints import (
    EGB,
    GR,
    FofR,
    constraint_fields,
    egb_blocks,
    evaluate,
    model_tag,
    momentum,
    residual_report,
    rho,
)
from confcov.errors import NonPositiveError, ValidationError, VarianceError
from confcov.geometry import CONTRA, Grid, MetricField, ScalarField, SymTensor2Field, bianchi_residual
from confcov.geometry.generate import perturbed_metric, smooth_scalar, smooth_sym2

import oracles


def _constant_K(grid, lam):
    return SymTensor2Field.identity(grid).scaled(lam)


def _random_pair(grid, rng):
    return perturbed_metric(grid, rng, 0.1), smooth_sym2(grid, rng, 0.3)


@pytest.mark.parametrize("n", [3, 4, 5])
def test_egb_constant_K_matches_cas(n):
    lam, alpha = sp.symbols("lambda alpha")
    closed = n * (n - 1) * lam**2 + alpha * n * (n - 1) * (n - 2) * (n - 3) * lam**4
    assert sp.simplify(oracles.egb_constant_K_rho(n, lam, alpha) - closed) == 0


@pytest.mark.parametrize("alpha", [0.0, 1.0, -2.0])
def test_egb_constant_K_numeric_n4(alpha):
    grid = Grid.cube(4, 4)
    lam, n = 0.3, 4
    g, K = MetricField.flat(grid), _constant_K(grid, lam)
    expect = n * (n - 1) * lam**2 + alpha * n * (n - 1) * (n - 2) * (n - 3) * lam**4
    assert np.max(np.abs(rho(EGB(alpha), g, K).values - expect)) < 1e-12
    assert np.max(np.abs(momentum(EGB(alpha), g, K).values)) < 1e-12


def test_gauss_bonnet_term_vanishes_in_three_dimensions(grid24, rng):
    g, K = _random_pair(grid24, rng)
    r0, J0 = constraint_fields(EGB(1.0), g, K)
    for alpha in (0.5, -2.0):
        r, J = constraint_fields(EGB(alpha), g, K)
        assert np.max(np.abs(r.values - r0.values)) < 1e-12
        assert np.max(np.abs(J.values - J0.values)) < 1e-12
    assert np.max(np.abs(r0.values - rho(GR(), g, K).values)) < 1e-12


def test_egb_zero_alpha_equals_gr(rng):
    grid = Grid.cube(4, 8)
    g, K = _random_pair(grid, rng)
    r_gr, J_gr = constraint_fields(GR(), g, K)
    assert np.array_equal(rho(EGB(0.0), g, K).values, r_gr.values)
    assert np.array_equal(momentum(EGB(0.0), g, K).values, J_gr.values)


def test_egb_in_four_dimensions_depends_on_alpha(rng):
    grid = Grid.cube(4, 8)
    g, K = _random_pair(grid, rng)
    assert np.max(np.abs(rho(EGB(1.0), g, K).values - rho(GR(), g, K).values)) > 1e-4


def test_egb_blocks_symmetries(grid16, rng):
    g, K = _random_pair(grid16, rng)
    b = egb_blocks(g, K)
    assert bianchi_residual(b.M4) < 1e-10
    assert np.allclose(b.N3, -b.N3.swapaxes(0, 1))
    M2 = b.M2.full()
    assert np.array_equal(M2, M2.swapaxes(0, 1))


@pytest.mark.parametrize("n", [3, 4])
def test_gr_constant_K(n):
    grid = Grid.cube(n, 4)
    lam = 0.3
    g, K = MetricField.flat(grid), _constant_K(grid, lam)
    assert np.max(np.abs(rho(GR(), g, K).values - n * (n - 1) * lam**2)) < 1e-14
    assert np.max(np.abs(momentum(GR(), g, K).values)) == 0.0


def test_gr_momentum_is_minus_twice_codazzi(grid24, rng):
    """J = 2 div_g(K - tr K g) with the package's (negative) divergence."""
    from confcov.geometry import divergence, trace

    g, K = _random_pair(grid24, rng)
    tr = trace(g, K).values
    P = SymTensor2Field(grid24, K.values - tr * g.values)
    assert np.max(np.abs(momentum(GR(), g, K).values - 2 * divergence(g, P).values)) < 1e-12


def test_fofr_linear_reduces_to_gr(grid16):
    rng = np.random.default_rng(20)
    zero = ScalarField.constant(grid16, 0.0)
    model = FofR((0.0, 1.0), zero, zero)
    for _ in range(3):
        g, K = _random_pair(grid16, rng)
        r0, J0 = constraint_fields(GR(), g, K)
        r, J = constraint_fields(model, g, K)
        assert np.max(np.abs(r.values - r0.values)) < 1e-12
        assert np.max(np.abs(J.values - J0.values)) < 1e-12


def test_fofr_polynomial_helpers(grid16):
    zero = ScalarField.constant(grid16, 0.0)
    m = FofR([1.0, 2.0, 3.0], zero, zero)
    assert m.f(2.0) == pytest.approx(17.0)
    assert m.fprime(2.0) == pytest.approx(14.0)
    assert m.fsecond(2.0) == pytest.approx(6.0)
    assert m.coeffs == (1.0, 2.0, 3.0)


def test_fofr_constant_curvature_source(grid16, rng):
    """Constant R0: rho picks up (f(R0) + R0 f'(R0)) / f'(R0) and nothing else."""
    g, K = _random_pair(grid16, rng)
    R0 = 0.4
    model = FofR((0.0, 1.0, 0.1), ScalarField.constant(grid16, R0), ScalarField.constant(grid16, 0.0))
    f, fp = R0 + 0.1 * R0**2, 1 + 0.2 * R0
    shift = (f + R0 * fp) / fp
    assert np.max(np.abs(rho(model, g, K).values - rho(GR(), g, K).values - shift)) < 1e-12
    assert np.max(np.abs(momentum(model, g, K).values - momentum(GR(), g, K).values)) < 1e-12


def test_fofr_floor_reports_point(grid16):
    scal = np.zeros(grid16.shape)
    scal[3, 1, 4] = -5.0
    model = FofR((0.0, 1.0, 0.1), ScalarField(grid16, scal), ScalarField.constant(grid16, 0.0))
    g, K = MetricField.flat(grid16), _constant_K(grid16, 0.1)
    with pytest.raises(NonPositiveError) as info:
        rho(model, g, K)
    assert info.value.index == (3, 1, 4)
    scal[3, 1, 4] = -4.0  # f' = 0.2 > 0 strictly, fine in both modes
    strict = FofR((0.0, 1.0, 0.1), ScalarField(grid16, scal), ScalarField.constant(grid16, 0.0),
                  strict=True)
    rho(strict, g, K)


def test_fofr_requires_coefficients(grid16):
    zero = ScalarField.constant(grid16, 0.0)
    with pytest.raises(ValidationError):
        FofR((), zero, zero)


def test_contravariant_K_rejected(grid16, rng):
    g = MetricField.flat(grid16)
    K = SymTensor2Field(grid16, smooth_sym2(grid16, rng).values, CONTRA)
    with pytest.raises(VarianceError):
        rho(GR(), g, K)


def test_reports(grid16, rng):
    g, K = _random_pair(grid16, rng)
    rep = residual_report(GR(), g, K, {"note": "x"})
    r = rho(GR(), g, K).values
    assert rep.rho_linf == pytest.approx(np.max(np.abs(r)))
    assert rep.rho_l2 == pytest.approx(np.sqrt(np.sum(r**2) * grid16.cell_volume))
    d = rep.to_dict()
    assert d["model"] == {"model": "gr"} and d["provenance"] == {"note": "x"}
    assert rep.max_norm() == max(rep.rho_linf, rep.J_linf)
    reps = evaluate([GR(), EGB(1.0)], g, K)
    assert reps[1].model == {"model": "egb", "alpha": 1.0}


def test_model_tag_rejects_unknown():
    with pytest.raises(ValidationError):
        model_tag("gr")
