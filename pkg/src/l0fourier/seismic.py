"""Frequency-domain acoustic modeling and seismogram reconstruction.

Forward transforms use ``exp(-i 2 pi f t)``.  Under that convention the
outgoing 2D Green's function is ``(-i/4) H0^(2)(kappa r)``; the alternative
``exp(+i 2 pi f t)`` convention gives ``(i/4) H0^(1)(kappa r)``.  Both are
available through ``convention`` ("causal" and "physics" respectively).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.special import hankel1, hankel2

from .operators import (FrameletSystem, MeasurementOperator, SamplingPlan, FourierSpec,
                        hermitian_defect, make_hermitian)
from .solvers import NumericalError, SolverConfig, el0m_solve, l1m_solve, reconstruct_signal

log = logging.getLogger(__name__)

# centered second-difference weights c_j for offsets j = 1, 2, ...:
# d2u/dx2 ~ sum_j c_j (u[i+j] - 2 u[i] + u[i-j]) / h^2
SCHEMES = {
    # 3-point second difference, i.e. the 5-point Laplacian
    "compact": (1.0,),
    # minimax fit of the numerical wavenumber over kh in [0, 1.65]
    "optimized": (1.6172329631, -0.2023930099, 0.021521703),
}
# largest kappa*h accepted without override, per scheme
RESOLUTION_LIMIT = {"compact": 1.0, "optimized": 1.8}
CONVENTIONS = ("causal", "physics")
REFINE_STEPS = 8
REFINE_TOL = 1e-11


# --------------------------------------------------------------------------- time grid

@dataclass(frozen=True)
class TimeGrid:
    T: float
    M: int

    def __post_init__(self):
        if not self.T > 0 or int(self.M) != self.M or self.M < 1:
            raise ValueError("need T > 0 and a positive integer M")

    @property
    def lam(self) -> float:
        return self.T / self.M

    @property
    def delta_f(self) -> float:
        return 1.0 / self.T

    def times(self) -> np.ndarray:
        return self.lam * np.arange(self.M)

    def freqs(self) -> np.ndarray:
        return np.arange(self.M) / self.T


# --------------------------------------------------------------------------- wavelets

def ricker(t, f0: float):
    a = (np.pi * f0 * np.asarray(t, dtype=float)) ** 2
    return (1.0 - 2.0 * a) * np.exp(-a)


def _check_alpha(alpha):
    if not alpha > 0:
        raise ValueError("alpha must be positive")


def gaussian_deriv(t, t0: float, alpha: float):
    _check_alpha(alpha)
    s = np.asarray(t, dtype=float) - t0
    return -2.0 * alpha * s * np.exp(-alpha * s * s)


def gaussian_deriv_ft(f, t0: float, alpha: float):
    """Continuous Fourier transform of ``gaussian_deriv``."""
    _check_alpha(alpha)
    f = np.asarray(f, dtype=float)
    amp = 2.0 * np.sqrt(np.pi / alpha) * np.pi * f * np.exp(-np.pi ** 2 * f * f / alpha)
    ph = 2.0 * np.pi * f * t0
    return amp * (np.sin(ph) + 1j * np.cos(ph))


@dataclass(frozen=True)
class SourceWavelet:
    kind: str                 # "ricker" or "gaussian"
    f0: float = 25.0
    t0: float = 1.0
    alpha: float = 200.0

    def __post_init__(self):
        if self.kind not in ("ricker", "gaussian"):
            raise ValueError(f"unknown wavelet {self.kind!r}")
        if self.kind == "ricker" and not self.f0 > 0:
            raise ValueError("f0 must be positive")
        if self.kind == "gaussian":
            _check_alpha(self.alpha)

    @classmethod
    def ricker(cls, f0: float) -> "SourceWavelet":
        return cls("ricker", f0=f0)

    @classmethod
    def gaussian(cls, t0: float, alpha: float) -> "SourceWavelet":
        return cls("gaussian", t0=t0, alpha=alpha)

    def __call__(self, t):
        if self.kind == "ricker":
            return ricker(t, self.f0)
        return gaussian_deriv(t, self.t0, self.alpha)

    def sampled(self, grid: TimeGrid, delay: float = 0.0, wraps: int = 2) -> np.ndarray:
        """Samples of ``q(t - delay)`` on the grid, summed over periods of length T."""
        t = grid.times() - delay
        return sum(self(t + k * grid.T) for k in range(-wraps, wraps + 1))

    def spectrum(self, grid: TimeGrid, f):
        return quadrature_ft(self.sampled(grid), grid, f)


def quadrature_ft(samples, grid: TimeGrid, f):
    """Rectangle-rule transform lambda * sum_n u(lambda n) exp(-i 2 pi f lambda n)."""
    u = np.asarray(samples, dtype=float)
    if u.shape != (grid.M,):
        raise ValueError(f"samples must have length {grid.M}")
    f = np.asarray(f, dtype=float)
    ph = np.exp(-2j * np.pi * np.multiply.outer(f, grid.times()))
    return grid.lam * (ph @ u)


# --------------------------------------------------------------------------- models

@dataclass(frozen=True, eq=False)
class VelocityModel:
    """Velocity on nodes ``x = x0 + ix*h``, ``z = z0 + iz*h``; array is (nz, nx)."""

    velocity: np.ndarray
    h: float
    x0: float = 0.0
    z0: float = 0.0

    def __post_init__(self):
        v = np.array(self.velocity, dtype=float)
        if v.ndim != 2 or min(v.shape) < 1:
            raise ValueError("velocity must be a 2D grid")
        if not np.all(v > 0) or not self.h > 0:
            raise ValueError("velocities and spacing must be positive")
        v.flags.writeable = False
        object.__setattr__(self, "velocity", v)

    @property
    def nz(self) -> int:
        return self.velocity.shape[0]

    @property
    def nx(self) -> int:
        return self.velocity.shape[1]

    @classmethod
    def homogeneous(cls, v: float, nx: int, nz: int, h: float) -> "VelocityModel":
        return cls(np.full((nz, nx), float(v)), h)

    @classmethod
    def three_layer(cls, nx: int, nz: int, h: float, depths=(600.0, 1300.0),
                    velocities=(2000.0, 2500.0, 4000.0)) -> "VelocityModel":
        d1, d2 = depths
        if not 0 < d1 < d2:
            raise ValueError("interface depths must increase")
        z = h * np.arange(nz)[:, None]
        v1, v2, v3 = velocities
        vel = np.where(z < d1, v1, np.where(z < d2, v2, v3)) * np.ones((1, nx))
        return cls(vel, h)

    def node(self, x: float, z: float) -> tuple[int, int]:
        """Nearest grid node (iz, ix) to a physical point."""
        ix = int(round((x - self.x0) / self.h))
        iz = int(round((z - self.z0) / self.h))
        if not (0 <= ix < self.nx and 0 <= iz < self.nz):
            raise ValueError(f"point ({x}, {z}) lies outside the model")
        return iz, ix


@dataclass(frozen=True)
class HelmholtzProblem:
    model: VelocityModel
    frequency: float
    source: tuple[float, float]
    amplitude: complex = 1.0
    pml_width: int = 20
    pml_strength: float | None = None
    scheme: str = "optimized"
    convention: str = "causal"
    allow_coarse: bool = False

    def __post_init__(self):
        if not self.frequency > 0:
            raise ValueError("frequency must be positive")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.convention not in CONVENTIONS:
            raise ValueError(f"unknown convention {self.convention!r}")
        if self.pml_width < 1:
            raise ValueError("pml_width must be at least one cell")
        self.model.node(*self.source)

    @property
    def kh(self) -> float:
        return 2 * np.pi * self.frequency * self.model.h / float(self.model.velocity.min())

    @property
    def strength(self) -> float:
        if self.pml_strength is not None:
            return self.pml_strength
        # quadratic profile with a nominal 1e-5 round-trip reflection
        w = self.pml_width * self.model.h
        return 1.5 * float(self.model.velocity.max()) / w * np.log(1e5)

    @property
    def shape(self) -> tuple[int, int]:
        p = self.pml_width
        return self.model.nz + 2 * p, self.model.nx + 2 * p

    def padded_node(self, x: float, z: float) -> tuple[int, int]:
        iz, ix = self.model.node(x, z)
        return iz + self.pml_width, ix + self.pml_width


def _stretch(n_phys: int, pml: int, pos, strength: float, omega: float, sign: float):
    # pos: (possibly fractional) node coordinate on the padded axis
    lo, hi = pml, pml + n_phys - 1
    depth = np.maximum(np.maximum(lo - pos, pos - hi), 0.0) / pml
    return 1.0 + sign * 1j * strength * depth ** 2 / omega


def helmholtz_matrix(problem: HelmholtzProblem) -> sp.csc_matrix:
    """Complex-symmetric system for -lap(u) - kappa^2 u with stretched coordinates.

    Each axis contributes -d/dx (a du/dx) in the symmetric form
    sum_j c_j [a(i+j/2) (u_i - u_{i+j}) + a(i-j/2) (u_i - u_{i-j})] / h^2 with
    a = s_z/s_x along x and s_x/s_z along z; the field vanishes off the grid.
    """
    m = problem.model
    p = problem.pml_width
    nz, nx = problem.shape
    omega = 2 * np.pi * problem.frequency
    sign = -1.0 if problem.convention == "causal" else 1.0
    st = problem.strength
    ix = np.arange(nx, dtype=float)
    iz = np.arange(nz, dtype=float)
    sxn = _stretch(m.nx, p, ix, st, omega, sign)
    szn = _stretch(m.nz, p, iz, st, omega, sign)
    idx = np.arange(nz * nx).reshape(nz, nx)
    h2 = m.h ** 2
    diag = np.zeros((nz, nx), dtype=complex)
    rows, cols, vals = [], [], []
    for j, c in enumerate(SCHEMES[problem.scheme], start=1):
        # couplings along x: node (z, x) with (z, x + j)
        ax_right = c * np.outer(szn, 1.0 / _stretch(m.nx, p, ix + j / 2, st, omega, sign)) / h2
        ax_left = c * np.outer(szn, 1.0 / _stretch(m.nx, p, ix - j / 2, st, omega, sign)) / h2
        diag += ax_right + ax_left
        w = ax_right[:, :nx - j]
        rows += [idx[:, :nx - j].ravel(), idx[:, j:].ravel()]
        cols += [idx[:, j:].ravel(), idx[:, :nx - j].ravel()]
        vals += [-w.ravel(), -w.ravel()]
        az_down = c * np.outer(1.0 / _stretch(m.nz, p, iz + j / 2, st, omega, sign), sxn) / h2
        az_up = c * np.outer(1.0 / _stretch(m.nz, p, iz - j / 2, st, omega, sign), sxn) / h2
        diag += az_down + az_up
        w = az_down[:nz - j, :]
        rows += [idx[:nz - j, :].ravel(), idx[j:, :].ravel()]
        cols += [idx[j:, :].ravel(), idx[:nz - j, :].ravel()]
        vals += [-w.ravel(), -w.ravel()]
    vel = np.pad(m.velocity, p, mode="edge")
    diag -= (omega / vel) ** 2 * np.outer(szn, sxn)
    rows.append(idx.ravel())
    cols.append(idx.ravel())
    vals.append(diag.ravel())
    a = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(nz * nx, nz * nx))
    return a.tocsc()


def _dissection_order(nz: int, nx: int, sep: int, leaf: int = 64) -> np.ndarray:
    """Geometric nested dissection of an nz x nx grid with separators ``sep`` lines thick."""
    idx = np.arange(nz * nx).reshape(nz, nx)
    parts = []

    def split(z0, z1, x0, x1):
        h, w = z1 - z0, x1 - x0
        if h <= 0 or w <= 0:
            return
        if h * w <= leaf or max(h, w) <= 2 * sep + 2:
            parts.append(idx[z0:z1, x0:x1].ravel())
        elif w >= h:
            m = x0 + (w - sep) // 2
            split(z0, z1, x0, m)
            split(z0, z1, m + sep, x1)
            parts.append(idx[z0:z1, m:m + sep].ravel())
        else:
            m = z0 + (h - sep) // 2
            split(z0, m, x0, x1)
            split(m + sep, z1, x0, x1)
            parts.append(idx[m:m + sep, x0:x1].ravel())

    split(0, nz, 0, nx)
    return np.concatenate(parts)


def _factorize(a, nz: int, nx: int, reach: int):
    """Solver callable for the complex-symmetric Helmholtz matrix.

    The LU factors are computed in single precision, without pivoting, in a
    nested-dissection order; callers refine against ``a`` in double precision.
    Pivoted double-precision LU is the fallback.
    """
    perm = _dissection_order(nz, nx, reach)
    try:
        lu = spla.splu(a[perm][:, perm].tocsc().astype(np.complex64), permc_spec="NATURAL",
                       diag_pivot_thresh=0.0, options={"SymmetricMode": True})
    except RuntimeError:
        log.info("unpivoted factorization failed; retrying with pivoting")
        try:
            plain = spla.splu(a)
        except RuntimeError as exc:
            raise NumericalError(f"Helmholtz factorization failed: {exc}") from exc
        return plain.solve

    def solve(b):
        out = np.empty_like(b)
        out[perm] = lu.solve(b[perm].astype(np.complex64))
        return out

    return solve


def helmholtz_solve(problem: HelmholtzProblem, receivers=None):
    """Field on the padded grid (model plus PML), shape ``problem.shape``.

    The source is a grid delta of weight 1/h^2 at the nearest node.  With
    ``receivers`` (a list of (x, z) points) the values there are returned too.
    """
    if problem.kh > RESOLUTION_LIMIT[problem.scheme] and not problem.allow_coarse:
        raise ValueError(f"kappa*h = {problem.kh:.3f} exceeds {RESOLUTION_LIMIT[problem.scheme]}"
                         f" for scheme {problem.scheme!r}; set allow_coarse to proceed")
    nz, nx = problem.shape
    field = np.zeros((nz, nx), dtype=complex)
    if problem.amplitude != 0:
        a = helmholtz_matrix(problem)
        b = np.zeros(nz * nx, dtype=complex)
        iz, ix = problem.padded_node(*problem.source)
        b[iz * nx + ix] = problem.amplitude / problem.model.h ** 2
        lu = _factorize(a, nz, nx, len(SCHEMES[problem.scheme]))
        u = lu(b)
        nb = np.linalg.norm(b)
        # iterative refinement; each step gains about four digits
        for _ in range(REFINE_STEPS):
            r = b - a @ u
            res = np.linalg.norm(r) / nb
            if res <= REFINE_TOL or not np.isfinite(res):
                break
            u = u + lu(r)
        res = np.linalg.norm(a @ u - b) / nb
        if not np.isfinite(res) or res > 1e-8:
            raise NumericalError(f"Helmholtz residual {res:.2e} above 1e-8")
        field = u.reshape(nz, nx)
    if receivers is None:
        return field
    return field, np.array([field[problem.padded_node(x, z)] for x, z in receivers])


def interior(problem: HelmholtzProblem, field) -> np.ndarray:
    p = problem.pml_width
    return field[p:-p, p:-p]


def greens_2d(kappa, r, convention: str = "causal"):
    """Free-space Green's function of -lap - kappa^2 in 2D."""
    if convention == "causal":
        return -0.25j * hankel2(0, np.multiply(kappa, r))
    if convention == "physics":
        return 0.25j * hankel1(0, np.multiply(kappa, r))
    raise ValueError(f"unknown convention {convention!r}")


# --------------------------------------------------------------------------- seismograms

@dataclass
class Seismogram:
    receiver: tuple[float, float]
    grid: TimeGrid
    samples: np.ndarray

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.shape != (self.grid.M,):
            raise ValueError("sample count does not match the time grid")


@dataclass
class ShotRecord:
    receivers: list
    grid: TimeGrid
    data: np.ndarray          # (M, n_receivers)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.shape != (self.grid.M, len(self.receivers)):
            raise ValueError("record shape does not match grid and receivers")


def _distance(a, b) -> float:
    return float(np.hypot(a[0] - b[0], a[1] - b[1]))


def dalembert_seismogram(v: float, source: SourceWavelet, src_pos, rcv_pos,
                         grid: TimeGrid) -> Seismogram:
    """q(t - r/v) / (4 pi r) sampled on the grid (periodic in T like the source)."""
    r = _distance(src_pos, rcv_pos)
    if r == 0:
        raise ValueError("source and receiver coincide")
    return Seismogram(tuple(rcv_pos), grid, source.sampled(grid, delay=r / v) / (4 * np.pi * r))


def _row_lookup(fields: dict, f: float):
    for key, val in fields.items():
        if abs(key - f) <= 1e-9 * max(abs(f), 1.0):
            return val
    raise KeyError(f"no receiver value for frequency {f} Hz")


def assemble_measurements(fields, plan: SamplingPlan, grid: TimeGrid) -> np.ndarray:
    """Hermitian-consistent data vector from per-frequency receiver values."""
    if plan.M != grid.M:
        raise ValueError("plan and time grid disagree on M")
    low = {}
    for row in plan.low_rows():
        try:
            low[row] = _row_lookup(fields, (row - 1) / grid.T)
        except KeyError as exc:
            raise ValueError(str(exc)) from None
    r = make_hermitian(plan, low) / np.sqrt(grid.M)
    assert hermitian_defect(plan, r) == 0.0 or not np.any(r)
    return r


@dataclass(frozen=True)
class EL0M:
    config: SolverConfig


@dataclass(frozen=True)
class L1M:
    gamma: float
    tol: float = 1e-6
    max_iter: int = 5000


@dataclass(frozen=True)
class IDFT:
    pass


@dataclass
class Reconstruction:
    seismogram: Seismogram
    iterations: int = 0
    trace: object = field(default=None, repr=False)


def reconstruct(r, plan: SamplingPlan, grid: TimeGrid, framelet: FrameletSystem | None,
                method, receiver=(0.0, 0.0)) -> Reconstruction:
    r = np.asarray(r, dtype=complex)
    if isinstance(method, IDFT):
        z = np.zeros(grid.M, dtype=complex)
        z[plan.index] = r
        u = np.fft.ifft(z, norm="ortho").real / grid.lam
        return Reconstruction(Seismogram(tuple(receiver), grid, u))
    if framelet is None or framelet.M != grid.M:
        raise ValueError("a framelet system of length M is required")
    op = MeasurementOperator(FourierSpec(grid.M), plan, framelet)
    if isinstance(method, EL0M):
        _, y, trace = el0m_solve(op, r, method.config)
    elif isinstance(method, L1M):
        y, trace = l1m_solve(op, r, method.gamma, method.tol, method.max_iter)
    else:
        raise TypeError(f"unknown reconstruction method {method!r}")
    u = reconstruct_signal(framelet, y, grid.lam)
    return Reconstruction(Seismogram(tuple(receiver), grid, u), trace.iterations, trace)


def reconstruct_seismogram(r, plan, grid, framelet, method, receiver=(0.0, 0.0)) -> Seismogram:
    return reconstruct(r, plan, grid, framelet, method, receiver).seismogram


def receiver_spectra(model: VelocityModel, source: SourceWavelet, src_pos, receivers,
                     grid: TimeGrid, plan: SamplingPlan, **problem_kw) -> dict:
    """One Helmholtz solve per observed frequency; returns f -> receiver values."""
    out = {}
    for row in plan.low_rows():
        f = (row - 1) / grid.T
        if f == 0:
            out[f] = np.zeros(len(receivers), dtype=complex)
            continue
        q = complex(source.spectrum(grid, f))
        prob = HelmholtzProblem(model, f, tuple(src_pos), q, **problem_kw)
        _, vals = helmholtz_solve(prob, receivers)
        out[f] = vals
    return out


def analytic_receiver_spectra(v: float, source: SourceWavelet, src_pos, receivers,
                              grid: TimeGrid, plan: SamplingPlan,
                              convention: str = "causal") -> dict:
    """Free-space 2D values q(f) G(kappa r); the fast counterpart of ``receiver_spectra``."""
    dist = np.array([_distance(src_pos, p) for p in receivers])
    out = {}
    for row in plan.low_rows():
        f = (row - 1) / grid.T
        if f == 0:
            out[f] = np.zeros(len(receivers), dtype=complex)
            continue
        q = complex(source.spectrum(grid, f))
        out[f] = q * greens_2d(2 * np.pi * f / v, dist, convention)
    return out


def generate_shot_record(model: VelocityModel, source: SourceWavelet, src_pos, receivers,
                         grid: TimeGrid, plan: SamplingPlan, method,
                         framelet: FrameletSystem | None = None, spectra=None,
                         **problem_kw) -> ShotRecord:
    receivers = [tuple(map(float, p)) for p in receivers]
    if spectra is None:
        spectra = receiver_spectra(model, source, src_pos, receivers, grid, plan, **problem_kw)
    data = np.empty((grid.M, len(receivers)))
    for j, rcv in enumerate(receivers):
        r = assemble_measurements({f: v[j] for f, v in spectra.items()}, plan, grid)
        data[:, j] = reconstruct_seismogram(r, plan, grid, framelet, method, rcv).samples
    return ShotRecord(receivers, grid, data)


def first_arrival(trace, frac: float = 0.1) -> int:
    """Index of the first sample whose magnitude exceeds ``frac`` of the trace maximum."""
    a = np.abs(np.asarray(trace, dtype=float))
    if not np.any(a):
        raise ValueError("trace is identically zero")
    return int(np.argmax(a > frac * a.max()))
