import numpy as np
import pytest

from l0fourier import _fallback as py
from l0fourier.operators import MeasurementOperator, build_band_plan, k_adjoint, make_hermitian

cy = pytest.importorskip("l0fourier._kernels")


@pytest.fixture(params=[(32, 6.0, 2), (129, 15.0, 3), (64, 31.0, 1)])
def op(request):
    M, fmax, levels = request.param
    return MeasurementOperator.build(build_band_plan(M, 1.0, 1.0, fmax), levels)


def test_transforms_agree(op, rng):
    L, M, N = op.framelet.levels, op.spec.M, op.N
    v, y = rng.normal(size=M), rng.normal(size=N)
    a, b = np.empty(N), np.empty(N)
    np.testing.assert_allclose(cy.analysis(v, L, a), py.analysis(v, L, b), atol=1e-14)
    a, b = np.empty(M), np.empty(M)
    np.testing.assert_allclose(cy.synthesis(y, L, a), py.synthesis(y, L, b), atol=1e-13)
    a, b = np.empty(N), np.empty(N)
    cy.gram_apply(y, L, op.projector, a)
    py.gram_apply(y, L, op.projector, b)
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_circulant_and_lowrank_projectors_agree(op, rng):
    y = rng.normal(size=op.N)
    circ = np.ascontiguousarray(op.circulant_kernel[None, :])
    for mod in (cy, py):
        a, b = np.empty(op.N), np.empty(op.N)
        mod.gram_apply(y, op.framelet.levels, circ, a)
        mod.gram_apply(y, op.framelet.levels, op.projector, b)
        np.testing.assert_allclose(a, b, atol=1e-12)


def test_thresholds_agree(rng):
    z = rng.normal(size=500)
    z[:3] = [0.5, -0.5, 0.0]
    a, b = np.empty(500), np.empty(500)
    assert cy.hard_threshold(z, 0.5, a) == py.hard_threshold(z, 0.5, b)
    np.testing.assert_array_equal(a, b)
    cy.soft_threshold(z, 0.3, a)
    py.soft_threshold(z, 0.3, b)
    np.testing.assert_allclose(a, b, atol=1e-15)
    assert cy.support_hash(a) == py.support_hash(b)


def _data(op, rng):
    return make_hermitian(op.plan, {r: complex(*rng.normal(size=2)) for r in op.plan.low_rows()})


@pytest.mark.parametrize("inner", [0, 200])
def test_el0m_runs_agree(op, rng, inner):
    ksr = np.ascontiguousarray(k_adjoint(op, _data(op, rng)))
    n = 400
    out = []
    for mod in (cy, py):
        y, x = np.zeros(op.N), np.zeros(op.N)
        rec, h = np.zeros((n, py.NCOL)), np.zeros(n, dtype=np.uint64)
        k, st = mod.el0m_run(ksr, y, x, 0.02, 0.05, op.framelet.levels, op.projector, 1e-9, n,
                             inner, 1e-12, rec, h)
        out.append((k, st, y, x, rec[:k], h[:k]))
    (k1, s1, y1, x1, r1, h1), (k2, s2, y2, x2, r2, h2) = out
    assert (k1, s1) == (k2, s2)
    np.testing.assert_allclose(y1, y2, atol=1e-10)
    np.testing.assert_array_equal(x1 != 0, x2 != 0)
    np.testing.assert_array_equal(h1, h2)
    np.testing.assert_allclose(r1[:, :4], r2[:, :4], rtol=1e-8, atol=1e-12)


def test_l1m_runs_agree(op, rng):
    ksr = np.ascontiguousarray(k_adjoint(op, _data(op, rng)))
    out = []
    for mod in (cy, py):
        y = np.zeros(op.N)
        rec = np.zeros((300, 3))
        k, st = mod.l1m_run(ksr, y, 0.01, op.framelet.levels, op.projector, 1e-9, 300, rec)
        out.append((k, st, y))
    assert out[0][:2] == out[1][:2]
    np.testing.assert_allclose(out[0][2], out[1][2], atol=1e-10)


def test_buffer_checks():
    for mod in (cy, py):
        with pytest.raises(ValueError):
            mod.analysis(np.zeros(8), 1, np.zeros(20))
