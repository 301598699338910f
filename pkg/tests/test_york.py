import numpy as np
import pytest

from confcov.conformal import critical_exponent, rescale_metric
from confcov.errors import NumericalError, ValidationError
from confcov.geometry import (
    CONTRA,
    Grid,
    MetricField,
    OneFormField,
    SymTensor2Field,
    conformal_killing_op,
    divergence,
    trace,
)
from confcov.geometry.generate import positive_scalar, smooth_oneform, smooth_sym2
from confcov.york import (
    FlatVectorPreconditioner,
    l2_inner,
    project_kernel,
    tt_project_flat,
    york_decompose,
    york_operator,
)


def _max(a):
    return float(np.max(np.abs(a)))


def _curved_case(grid, rng):
    """Conformally flat metric with a TT tensor carried over by covariance."""
    N = critical_exponent(grid.n)
    psi0 = positive_scalar(grid, rng, 0.2)
    g = rescale_metric(MetricField.flat(grid), psi0)
    sigma = tt_project_flat(smooth_sym2(grid, rng, 0.3)).scaled(psi0.values**-2)
    W = smooth_oneform(grid, rng, 0.3, zero_mean=True).scaled(psi0.values ** (N - 2))
    return g, sigma, W


def test_tt_projection_is_tt_and_idempotent(grid16, rng):
    flat = MetricField.flat(grid16)
    s = tt_project_flat(smooth_sym2(grid16, rng))
    assert _max(trace(flat, s).values) < 1e-13
    assert _max(divergence(flat, s).values) < 1e-12
    assert _max(tt_project_flat(s).values - s.values) < 1e-13


def test_tt_projection_rejects_contravariant(grid16, rng):
    h = SymTensor2Field(grid16, smooth_sym2(grid16, rng).values, CONTRA)
    with pytest.raises(ValidationError):
        tt_project_flat(h)


def test_flat_preconditioner_inverts_flat_operator(grid16, rng):
    pc = FlatVectorPreconditioner(grid16)
    w, _ = project_kernel(grid16, smooth_oneform(grid16, rng).values)
    assert _max(pc.apply(pc.forward(w)) - w) < 1e-13
    flat = MetricField.flat(grid16)
    direct = york_operator(flat, OneFormField(grid16, w)).values
    assert _max(pc.forward(w) - direct) < 1e-12


def test_project_kernel_removes_constants(grid16, rng):
    w = smooth_oneform(grid16, rng).values + 3.0
    out, norm = project_kernel(grid16, w)
    assert _max(out.mean(axis=(1, 2, 3))) < 1e-14
    assert norm > 2.0


def test_flat_round_trip(grid16, rng):
    flat = MetricField.flat(grid16)
    sigma = tt_project_flat(smooth_sym2(grid16, rng, 0.5))
    W = smooth_oneform(grid16, rng, 0.5, zero_mean=True)
    h = SymTensor2Field(grid16, sigma.values + conformal_killing_op(flat, W).values)
    split = york_decompose(flat, h)
    assert _max(split.sigma.values - sigma.values) < 1e-10
    assert _max(split.W.values - W.values) < 1e-10
    assert split.residual < 1e-10


@pytest.mark.parametrize("size", [16, 32])
def test_curved_round_trip(size):
    rng = np.random.default_rng(size)
    grid = Grid.cube(3, size)
    g, sigma, W = _curved_case(grid, rng)
    LW = conformal_killing_op(g, W)
    h = SymTensor2Field(grid, sigma.values + LW.values)
    split = york_decompose(g, h)
    assert _max(split.sigma.values - sigma.values) < 1e-7
    assert _max(conformal_killing_op(g, split.W).values - LW.values) < 1e-7


def test_orthogonality_and_trace(grid16, rng):
    g, sigma, W = _curved_case(grid16, rng)
    h = SymTensor2Field(grid16, sigma.values + conformal_killing_op(g, W).values)
    split = york_decompose(g, h)
    LW = conformal_killing_op(g, split.W)
    scale = np.sqrt(l2_inner(g, h, h))
    assert abs(l2_inner(g, split.sigma, LW)) / scale**2 < 1e-9
    assert _max(trace(g, split.sigma).values) < 1e-12
    assert _max(trace(g, LW).values) < 1e-12
    total = l2_inner(g, split.sigma, split.sigma) + l2_inner(g, LW, LW)
    assert total == pytest.approx(l2_inner(g, h, h), rel=1e-9)


def test_trace_is_removed_or_rejected(grid16, rng):
    flat = MetricField.flat(grid16)
    h = smooth_sym2(grid16, rng)
    split = york_decompose(flat, h)
    assert split.trace_removed > 0.1
    assert _max(trace(flat, split.sigma).values) < 1e-13
    with pytest.raises(ValidationError):
        york_decompose(flat, h, strict=True)


def test_budget_exhaustion_reports_history(grid16, rng):
    g, sigma, W = _curved_case(grid16, rng)
    h = SymTensor2Field(grid16, sigma.values + conformal_killing_op(g, W).values)
    with pytest.raises(NumericalError) as info:
        york_decompose(g, h, tol=1e-14, max_iter=1)
    assert len(info.value.history) >= 1


def test_generic_metric_split(grid16, rng):
    from confcov.geometry.generate import perturbed_metric

    g = perturbed_metric(grid16, rng, 0.1)
    h = smooth_sym2(grid16, rng, 0.3)
    split = york_decompose(g, h)
    assert split.residual < 1e-10
    d = split.diagnostics()
    assert set(d) == {"iterations", "residual", "kernel_norm", "trace_removed", "history"}


def test_warm_start(grid16, rng):
    flat = MetricField.flat(grid16)
    W = smooth_oneform(grid16, rng, 0.5, zero_mean=True)
    h = conformal_killing_op(flat, W)
    split = york_decompose(flat, h, W0=W)
    assert split.iterations == 0
