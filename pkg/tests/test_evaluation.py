import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from l0fourier.evaluation import (REPORT_COLUMNS, ExperimentReport, GaussianSetup, NoiseSpec,
                                  add_noise, aligned_snr, full_band_plan, run_table2, snr)
from l0fourier.io import read_csv
from l0fourier.operators import build_band_plan, hermitian_defect


def test_snr_values():
    assert snr([1.0, 0.0], [1.0, 0.0]) == np.inf
    assert snr([1.0, 1.0], [1.1, 0.9]) == pytest.approx(20.0)
    with pytest.raises(ValueError):
        snr([1.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        snr([0.0, 0.0], [1.0, 0.0])


def test_aligned_snr_recovers_shift_and_gain(rng):
    u = rng.normal(size=50)
    val, lag, gain = aligned_snr(u, 0.5 * np.roll(u, 3), 5, fit_gain=True)
    assert (lag, val) == (-3, np.inf) and gain == pytest.approx(2.0)
    val, lag, _ = aligned_snr(u, np.roll(u, 7), 5)
    assert val < 10


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_property_aligned_at_least_raw(seed):
    rng = np.random.default_rng(seed)
    u, v = rng.normal(size=30), rng.normal(size=30)
    assert aligned_snr(u, v)[0] >= snr(u, v)
    assert aligned_snr(u, v, fit_gain=True)[0] >= aligned_snr(u, v)[0] - 1e-12


def test_noise_statistics():
    plan = build_band_plan(129, 2.0, 0.5, 15.0)
    clean = GaussianSetup().spectrum_at(plan)
    spec = NoiseSpec(0.3, seed=5)
    re = []
    for trial in range(10_000 // len(plan.low_rows()) + 1):
        noisy = add_noise(clean, plan, spec, trial)
        assert hermitian_defect(plan, noisy) == 0.0
        re.extend((noisy - clean).real[:len(plan.low_rows())])
    assert len(re) >= 10_000
    assert np.std(re) == pytest.approx(0.3, rel=0.05)


def test_noise_seeding():
    plan = build_band_plan(129, 2.0, 0.5, 6.0)
    clean = GaussianSetup().spectrum_at(plan)
    a = add_noise(clean, plan, NoiseSpec(0.1, 1), 0)
    np.testing.assert_array_equal(a, add_noise(clean, plan, NoiseSpec(0.1, 1), 0))
    assert not np.array_equal(a, add_noise(clean, plan, NoiseSpec(0.1, 1), 1))
    np.testing.assert_array_equal(add_noise(clean, plan, NoiseSpec(0.0, 1)), clean)
    with pytest.raises(ValueError):
        NoiseSpec(-1.0)


def test_report_csv(tmp_path):
    rep = ExperimentReport("demo")
    rep.add("a", 0, "EL0M", 12.5, 10, 3.0, 0.1, 0.2, 7, signal=([1.0, 2.0], [1.0, 1.5]))
    rep.add("a", 1, "EL0M", 14.5)
    assert rep.mean("a", "EL0M") == 13.5
    rep.to_csv(tmp_path / "r.csv")
    text = (tmp_path / "r.csv").read_bytes()
    assert b"\r" not in text and text.startswith(",".join(REPORT_COLUMNS).encode())
    cols = read_csv(tmp_path / "r.csv", REPORT_COLUMNS)
    assert cols["wall_ms"] == ["", ""] and cols["seed"] == ["7", ""]
    rep.to_csv(tmp_path / "t.csv", timings=True)
    assert read_csv(tmp_path / "t.csv", ["wall_ms"])["wall_ms"][0] == "3.0"
    assert list(rep.signal_rows())[1] == ("a", 0, "EL0M", 1, 2.0, 1.5)
    with pytest.raises(KeyError):
        rep.mean("b", "EL0M")


def test_full_band_plan():
    assert full_band_plan(8, 1.0).low_rows() == [2, 3, 4]
    assert full_band_plan(9, 1.0).rows == tuple(range(2, 10))


def test_table2_single_case_recomputable():
    rep = run_table2(fmax_values=(7.5,))
    for (case, trial, method), (orig, reco) in rep.signals.items():
        assert snr(orig, reco) == rep.value(case, method, trial)
    setup = GaussianSetup()
    np.testing.assert_array_equal(rep.signals[("7.5", 0, "EL0M")][0], setup.signal())


def test_gaussian_homogeneous_fast_ordering():
    from l0fourier.evaluation import run_homogeneous
    rep = run_homogeneous("gaussian", 9.0, mode="fast")
    for oracle in ("dalembert", "exact2d"):
        case = f"fmax=9;oracle={oracle};metric=aligned"
        e = rep.mean(case, "EL0M")
        assert e > rep.mean(case, "IDFT") and e >= rep.mean(case, "L1M")
    with pytest.raises(ValueError):
        run_homogeneous("gaussian", 9.0, mode="slow")
