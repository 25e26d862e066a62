import mpmath
import numpy as np
import pytest

from l0fourier.operators import FrameletSystem, MeasurementOperator, build_band_plan, framelet_analysis, k_apply
from l0fourier.seismic import (IDFT, HelmholtzProblem, Seismogram, ShotRecord, SourceWavelet,
                               TimeGrid, VelocityModel, analytic_receiver_spectra,
                               assemble_measurements, dalembert_seismogram, first_arrival,
                               gaussian_deriv, gaussian_deriv_ft, greens_2d, helmholtz_matrix,
                               helmholtz_solve, interior, quadrature_ft, reconstruct, ricker)


def test_ricker_high_precision():
    mpmath.mp.dps = 40
    a = (mpmath.pi * 25 * mpmath.mpf("0.02")) ** 2
    ref = float((1 - 2 * a) * mpmath.exp(-a))
    assert ricker(0.02, 25.0) == pytest.approx(ref, rel=1e-14)


def test_gaussian_transform_closed_form():
    # continuous transform by numerical integration
    mpmath.mp.dps = 30
    for f in (0.5, 3.0, 7.5):
        g = lambda t: -400 * (t - 1) * mpmath.exp(-200 * (t - 1) ** 2)
        re = mpmath.quad(lambda t: g(t) * mpmath.cos(2 * mpmath.pi * f * t), [0, 1, 2])
        im = -mpmath.quad(lambda t: g(t) * mpmath.sin(2 * mpmath.pi * f * t), [0, 1, 2])
        got = gaussian_deriv_ft(f, 1.0, 200.0)
        assert abs(got - complex(re, im)) <= 1e-10 * abs(got)


def test_quadrature_matches_transform_at_3hz():
    grid = TimeGrid(2.0, 129)
    exact = gaussian_deriv_ft(3.0, 1.0, 200.0)
    coarse = quadrature_ft(gaussian_deriv(grid.times(), 1.0, 200.0), grid, 3.0)
    fine_grid = TimeGrid(2.0, 1290)
    fine = quadrature_ft(gaussian_deriv(fine_grid.times(), 1.0, 200.0), fine_grid, 3.0)
    assert abs(coarse - fine) / abs(fine) <= 1e-3
    assert abs(coarse - exact) / abs(exact) <= 1e-3


def test_quadrature_hand_sum():
    assert quadrature_ft([1.0, 0, 0, 0], TimeGrid(1.0, 4), 1.0) == pytest.approx(0.25)


def test_wavelet_validation():
    with pytest.raises(ValueError):
        SourceWavelet("boxcar")
    with pytest.raises(ValueError):
        SourceWavelet.ricker(0.0)
    with pytest.raises(ValueError):
        gaussian_deriv(0.0, 1.0, -1.0)


def test_dalembert_delay():
    grid = TimeGrid(2.0, 2000)
    s = dalembert_seismogram(1500.0, SourceWavelet.ricker(25.0), (0, 0), (1000, 0), grid)
    assert grid.times()[np.argmax(s.samples)] == pytest.approx(1000 / 1500, abs=grid.lam)
    assert s.samples.max() == pytest.approx(1 / (4 * np.pi * 1000), rel=5e-3)


def test_dalembert_reference_geometry():
    grid = TimeGrid(1.344, 168)
    s = dalembert_seismogram(1500.0, SourceWavelet.ricker(25.0), (500, 1000), (1500, 1000), grid)
    assert abs(grid.times()[np.argmax(s.samples)] - 2 / 3) <= grid.lam
    with pytest.raises(ValueError):
        dalembert_seismogram(1500.0, SourceWavelet.ricker(25.0), (0, 0), (0, 0), grid)


def test_full_band_data_identity(rng):
    M, T = 64, 1.0
    grid = TimeGrid(T, M)
    u = rng.normal(size=M)
    plan = build_band_plan(M, T, 1.0, 31.0)
    fields = {f: quadrature_ft(u, grid, f) for f in (np.array(plan.low_rows()) - 1) / T}
    r = assemble_measurements(fields, plan, grid)
    op = MeasurementOperator.build(plan, 2)
    w = grid.lam * k_apply(op, framelet_analysis(op.framelet, u))
    assert np.linalg.norm(w - r) <= 1e-10


def test_idft_reconstruction_of_band_limited_signal():
    M, T = 64, 1.0
    grid = TimeGrid(T, M)
    t = grid.times()
    u = np.cos(2 * np.pi * 3 * t) + 0.5 * np.sin(2 * np.pi * 7 * t)
    plan = build_band_plan(M, T, 1.0, 10.0)
    fields = {f: quadrature_ft(u, grid, f) for f in (np.array(plan.low_rows()) - 1) / T}
    rec = reconstruct(assemble_measurements(fields, plan, grid), plan, grid, None, IDFT())
    np.testing.assert_allclose(rec.seismogram.samples, u, atol=1e-12)


def test_missing_frequency_rejected():
    grid = TimeGrid(1.0, 16)
    plan = build_band_plan(16, 1.0, 1.0, 3.0)
    with pytest.raises(ValueError):
        assemble_measurements({1.0: 1.0, 2.0: 1.0}, plan, grid)


def test_greens_function_against_mpmath():
    mpmath.mp.dps = 25
    for x in (0.3, 4.0, 41.9):
        ref = -0.25j * complex(mpmath.hankel2(0, x))
        assert greens_2d(1.0, x) == pytest.approx(ref, rel=1e-12)
        assert greens_2d(1.0, x, "physics") == pytest.approx(np.conj(ref), rel=1e-12)
    with pytest.raises(ValueError):
        greens_2d(1.0, 1.0, "other")


def _small(**kw):
    return HelmholtzProblem(VelocityModel.homogeneous(1500.0, 41, 41, 10.0), 5.0, (200.0, 200.0), **kw)


def test_helmholtz_zero_source():
    p = _small(amplitude=0.0)
    assert not np.any(helmholtz_solve(p))
    assert interior(p, helmholtz_solve(p)).shape == (41, 41)


def test_helmholtz_symmetry_and_conventions():
    a = helmholtz_solve(_small())
    b = helmholtz_solve(_small(convention="physics"))
    np.testing.assert_allclose(a, np.conj(b), atol=1e-14)
    f = interior(_small(), a)
    np.testing.assert_allclose(f, f[::-1], atol=1e-12)
    np.testing.assert_allclose(f, f.T, atol=1e-12)


def test_helmholtz_linear_in_amplitude():
    a = helmholtz_solve(_small())
    b = helmholtz_solve(_small(amplitude=2 - 1j))
    np.testing.assert_allclose(b, (2 - 1j) * a, atol=1e-12)


def test_helmholtz_receivers_and_matrix():
    p = _small()
    field, vals = helmholtz_solve(p, [(0.0, 0.0), (300.0, 200.0)])
    assert vals[1] == field[p.padded_node(300.0, 200.0)]
    a = helmholtz_matrix(p)
    assert a.shape == (p.shape[0] * p.shape[1],) * 2


def test_helmholtz_resolution_guard():
    m = VelocityModel.homogeneous(1500.0, 21, 21, 10.0)
    p = HelmholtzProblem(m, 60.0, (100.0, 100.0))
    assert p.kh > 1.8
    with pytest.raises(ValueError):
        helmholtz_solve(p)


def test_problem_validation():
    m = VelocityModel.homogeneous(1500.0, 21, 21, 10.0)
    with pytest.raises(ValueError):
        HelmholtzProblem(m, 10.0, (1000.0, 0.0))
    with pytest.raises(ValueError):
        HelmholtzProblem(m, -1.0, (0.0, 0.0))
    with pytest.raises(ValueError):
        HelmholtzProblem(m, 10.0, (0.0, 0.0), scheme="spectral")
    with pytest.raises(ValueError):
        VelocityModel(np.zeros((3, 3)), 10.0)
    with pytest.raises(ValueError):
        VelocityModel.three_layer(5, 5, 10.0, (600.0, 300.0))


def test_three_layer_degenerates_to_homogeneous():
    a = VelocityModel.three_layer(11, 11, 10.0, (30.0, 60.0), (2000.0, 2000.0, 2000.0))
    np.testing.assert_array_equal(a.velocity, VelocityModel.homogeneous(2000.0, 11, 11, 10.0).velocity)


def test_first_arrival():
    tr = np.array([0.0, 0.01, -0.05, 0.2, 1.0, -0.5])
    assert first_arrival(tr) == 3
    assert first_arrival(tr, 0.04) == 2
    with pytest.raises(ValueError):
        first_arrival(np.zeros(4))


def test_analytic_spectra_and_records():
    grid = TimeGrid(1.344, 168)
    plan = build_band_plan(168, 1.344, 1.0, 20.0, snap=True)
    wav = SourceWavelet.ricker(25.0)
    sp = analytic_receiver_spectra(1500.0, wav, (0, 0), [(1000, 0), (0, 1000)], grid, plan)
    f = next(iter(sp))
    assert sp[f][0] == pytest.approx(sp[f][1])
    with pytest.raises(ValueError):
        ShotRecord([(0, 0)], grid, np.zeros((167, 1)))
    with pytest.raises(ValueError):
        Seismogram((0, 0), grid, np.zeros(3))


def test_time_grid():
    g = TimeGrid(2.24, 280)
    assert g.lam == pytest.approx(8e-3)
    assert g.delta_f == pytest.approx(1 / 2.24)
    with pytest.raises(ValueError):
        TimeGrid(0.0, 4)
    assert FrameletSystem(280, 3).N == 7 * 280


def test_reciprocity_heterogeneous():
    m = VelocityModel.three_layer(41, 41, 10.0, (120.0, 260.0))
    a, b = (130.0, 60.0), (290.0, 330.0)
    _, va = helmholtz_solve(HelmholtzProblem(m, 12.0, a), [b])
    _, vb = helmholtz_solve(HelmholtzProblem(m, 12.0, b), [a])
    assert abs(va[0] - vb[0]) <= 1e-6 * abs(va[0])


def test_pml_reflection_small():
    # the same source in a domain twice as wide: the shared region must agree
    small = VelocityModel.homogeneous(1500.0, 61, 61, 10.0)
    big = VelocityModel(np.full((121, 121), 1500.0), 10.0, x0=-300.0, z0=-300.0)
    fs = interior(p := HelmholtzProblem(small, 10.0, (300.0, 300.0)), helmholtz_solve(p))
    fb = interior(q := HelmholtzProblem(big, 10.0, (300.0, 300.0)), helmholtz_solve(q))
    shared = fb[30:91, 30:91]
    lam_nodes = 10
    ring = np.hypot(*np.meshgrid(np.arange(61) - 30, np.arange(61) - 30)) >= lam_nodes
    err = np.abs(fs - shared)[ring].max() / np.abs(shared[30, 30 + lam_nodes])
    assert err <= 1e-2


def test_source_spectrum_is_quadrature_of_samples():
    grid = TimeGrid(1.344, 168)
    wav = SourceWavelet.ricker(25.0)
    f = np.array([1 / 1.344, 10 / 1.344])
    np.testing.assert_array_equal(wav.spectrum(grid, f), quadrature_ft(wav.sampled(grid), grid, f))
