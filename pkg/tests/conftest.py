import numpy as np
import pytest


def dense_dft(M):
    j = np.arange(M)
    return np.exp(-2j * np.pi * np.outer(j, j) / M) / np.sqrt(M)


def periodic_filter_matrix(M, taps, s):
    """Rows act as out[n] = taps[0]*v[n+s] + taps[1]*v[n] + taps[2]*v[n-s]."""
    A = np.zeros((M, M))
    for n in range(M):
        A[n, (n + s) % M] += taps[0]
        A[n, n] += taps[1]
        A[n, (n - s) % M] += taps[2]
    return A


def dense_framelet(M, levels):
    """Undecimated piecewise-linear spline frame assembled block by block."""
    a = np.sqrt(2.0) / 4.0
    low, band, high = (0.25, 0.5, 0.25), (a, 0.0, -a), (-0.25, 0.5, -0.25)
    blocks = []
    cur = np.eye(M)
    for lev in range(levels):
        s = (2 ** lev) % M
        blocks.append(periodic_filter_matrix(M, band, s) @ cur)
        blocks.append(periodic_filter_matrix(M, high, s) @ cur)
        cur = periodic_filter_matrix(M, low, s) @ cur
    return np.vstack([cur] + blocks)


def dense_selector(M, rows):
    R = np.zeros((len(rows), M))
    for i, r in enumerate(rows):
        R[i, r - 1] = 1.0
    return R


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
