import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from l0fourier.operators import (MeasurementOperator, build_band_plan, framelet_analysis,
                                 k_adjoint, k_apply,
                                 make_hermitian, normal_solve, plan_from_rows)
from l0fourier.regularization import RegParams, objective_F, soft_threshold
from l0fourier.solvers import (NumericalError, SolverConfig, assert_trace, check_trace,
                               el0m_inner_step, el0m_solve, l1_fixed_point_ok, l1m_solve,
                               reconstruct_signal)

from conftest import dense_dft, dense_framelet, dense_selector


def _random_data(op, rng):
    return make_hermitian(op.plan, {r: complex(*rng.normal(size=2)) for r in op.plan.low_rows()})


def test_full_sampling_recovers_sparse_signal():
    M = 32
    plan = plan_from_rows(M, range(1, M // 2 + 2))
    op = MeasurementOperator.build(plan, 2)
    v0 = np.zeros(M)
    v0[[5, 20]] = [3.0, -2.0]
    y0 = framelet_analysis(op.framelet, v0)
    thr = 0.01
    assert np.abs(y0[y0 != 0]).min() > thr
    r = k_apply(op, y0)
    cfg = SolverConfig(RegParams.from_threshold(thr, 0.5), tol=1e-8, max_iter=5000)
    x, y, tr = el0m_solve(op, r, cfg)
    assert tr.converged
    assert np.linalg.norm(k_apply(op, y) - r) <= 10 * cfg.tol * max(1.0, np.linalg.norm(r))
    assert check_trace(tr).ok


@pytest.mark.parametrize("seed", range(5))
def test_el0m_trace_invariants_random(seed):
    rng = np.random.default_rng(seed)
    op = MeasurementOperator.build(build_band_plan(64, 1.0, 1.0, 10.0), 2)
    r = _random_data(op, rng)
    p = RegParams.from_threshold(0.3, 0.4)
    x, y, tr = el0m_solve(op, r, SolverConfig(p, tol=1e-7, max_iter=20000))
    rep = assert_trace(tr)
    assert rep.stabilization_index <= tr.iterations
    # row k of the trace is F at the k-th iterate
    assert tr.F[-1] == pytest.approx(objective_F(x, y, op, r, p), rel=1e-9, abs=1e-14)
    assert tr.records.shape[0] == tr.iterations + 1


def test_inner_loop_matches_normal_solve(rng):
    op = MeasurementOperator.build(build_band_plan(32, 1.0, 1.0, 6.0), 2)
    r = _random_data(op, rng)
    x = rng.normal(size=op.N)
    c = 0.5
    v = np.zeros(op.N)
    for _ in range(50):
        v = el0m_inner_step(op, x, v, c, r)
    np.testing.assert_allclose(v, normal_solve(op, c, x + c * k_adjoint(op, r)), atol=1e-9)


def test_update_modes_agree(rng):
    op = MeasurementOperator.build(build_band_plan(64, 1.0, 1.0, 10.0), 2)
    r = _random_data(op, rng)
    p = RegParams.from_threshold(0.3, 0.4)
    _, y1, _ = el0m_solve(op, r, SolverConfig(p, tol=1e-9, max_iter=20000))
    _, y2, _ = el0m_solve(op, r, SolverConfig(p, tol=1e-9, max_iter=20000, y_update="inner_loop"))
    assert np.linalg.norm(y1 - y2) <= 1e-6 * np.linalg.norm(y1)


def _dense_k(plan, levels):
    M = plan.M
    return dense_selector(M, plan.rows) @ dense_dft(M) @ dense_framelet(M, levels).T


def test_l1m_matches_dense_ista(rng):
    plan = plan_from_rows(8, [2, 3])
    op = MeasurementOperator.build(plan, 1)
    r = _random_data(op, rng)
    K = _dense_k(plan, 1)
    gamma = 0.05
    y = np.zeros(op.N)
    for _ in range(20000):
        y = soft_threshold(y - (K.conj().T @ (K @ y - r)).real, gamma)
    got, tr = l1m_solve(op, r, gamma, tol=1e-12, max_iter=20000)
    assert tr.converged and l1_fixed_point_ok(got, tr)
    lasso = lambda v: 0.5 * np.linalg.norm(K @ v - r) ** 2 + gamma * np.abs(v).sum()
    assert lasso(got) == pytest.approx(lasso(y), rel=1e-9)


def test_l1m_objective_nonincreasing_tail(rng):
    op = MeasurementOperator.build(build_band_plan(64, 1.0, 1.0, 10.0), 2)
    y, tr = l1m_solve(op, _random_data(op, rng), 0.01, max_iter=3000)
    assert tr.objective[-1] <= tr.objective[0]


def test_zero_data_gives_zero():
    op = MeasurementOperator.build(build_band_plan(32, 1.0, 1.0, 5.0), 2)
    r = np.zeros(op.d, dtype=complex)
    x, y, tr = el0m_solve(op, r, SolverConfig(RegParams(0.01, 0.05)))
    assert not y.any() and not x.any() and tr.converged
    y, _ = l1m_solve(op, r, 0.1)
    assert not y.any()


def test_config_validation():
    p = RegParams(1.0, 1.0)
    with pytest.raises(ValueError):
        SolverConfig(p)
    SolverConfig(p, allow_inadmissible=True)
    with pytest.raises(ValueError):
        SolverConfig(RegParams(0.1, 1.0), tol=0.0)
    with pytest.raises(ValueError):
        SolverConfig(RegParams(0.1, 1.0), y_update="newton")


def test_bad_data_rejected():
    op = MeasurementOperator.build(build_band_plan(32, 1.0, 1.0, 5.0), 2)
    cfg = SolverConfig(RegParams(0.01, 0.05))
    with pytest.raises(ValueError):
        el0m_solve(op, np.ones(op.d + 1), cfg)
    bad = np.ones(op.d, dtype=complex)
    bad[0] = 1j
    with pytest.raises(ValueError):
        el0m_solve(op, bad, cfg)
    with pytest.raises((ValueError, NumericalError)):
        el0m_solve(op, np.full(op.d, np.nan), cfg)


def test_nonconvergence_flagged(rng):
    op = MeasurementOperator.build(build_band_plan(64, 1.0, 1.0, 10.0), 2)
    _, _, tr = el0m_solve(op, _random_data(op, rng),
                          SolverConfig(RegParams.from_threshold(1e-3, 0.6), tol=1e-14, max_iter=3))
    assert not tr.converged and tr.iterations == 3
    assert not check_trace(tr).fixed_point


def test_reconstruct_signal_scaling():
    from l0fourier.operators import FrameletSystem, framelet_analysis
    fw = FrameletSystem(16, 2)
    u = np.arange(16.0)
    np.testing.assert_allclose(reconstruct_signal(fw, framelet_analysis(fw, u), 0.5), 2 * u)
    with pytest.raises(ValueError):
        reconstruct_signal(fw, np.zeros(fw.N), 0.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.05, 1.0), st.floats(0.1, 0.6))
def test_property_objective_monotone(seed, thr, ratio):
    rng = np.random.default_rng(seed)
    op = MeasurementOperator.build(build_band_plan(32, 1.0, 1.0, 6.0), 2)
    r = _random_data(op, rng)
    _, _, tr = el0m_solve(op, r, SolverConfig(RegParams.from_threshold(thr, ratio),
                                              max_iter=300))
    assert np.all(np.diff(tr.F) <= 1e-12)
    rep = check_trace(tr)
    assert rep.jump_bound and rep.prox_consistent
