"""Linear operators of the incomplete-Fourier inversion problem.

Row indices are 1-based on every public interface: row ``m`` of the DFT
matrix is the frequency ``(m - 1) / T``.  Storage inside the dataclasses is
numpy, but callers only ever see 1-based integers.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels

log = logging.getLogger(__name__)

# Frequencies closer than this (relative) to a grid point count as on-grid.
_GRID_RTOL = 1e-9


def _as_vector(v, n, name, dtype):
    arr = np.asarray(v, dtype=dtype)
    if arr.ndim != 1 or arr.shape[0] != n:
        raise ValueError(f"{name} must be a vector of length {n}, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class FourierSpec:
    """Unitary DFT of length ``M`` (entries ``exp(-2j*pi*(m-1)(n-1)/M)/sqrt(M)``)."""

    M: int

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 1:
            raise ValueError(f"M must be a positive integer, got {self.M}")


def conjugate_row(M: int, row: int) -> int:
    """1-based row whose DFT row is the complex conjugate of ``row``."""
    return 1 if row == 1 else M - row + 2


@dataclass(frozen=True)
class SamplingPlan:
    """Conjugate-closed set of observed DFT rows (1-based, strictly increasing)."""

    M: int
    rows: tuple[int, ...]
    freq_meta: dict[int, float] | None = field(default=None, compare=False)

    def __post_init__(self):
        rows = tuple(int(r) for r in self.rows)
        object.__setattr__(self, "rows", rows)
        if self.M < 1:
            raise ValueError("M must be positive")
        if not rows:
            raise ValueError("a sampling plan needs at least one row")
        if any(b <= a for a, b in zip(rows, rows[1:])):
            raise ValueError("rows must be strictly increasing")
        if rows[0] < 1 or rows[-1] > self.M:
            raise ValueError(f"rows must lie in 1..{self.M}")
        members = set(rows)
        for r in rows:
            if conjugate_row(self.M, r) not in members:
                raise ValueError(f"row {r} present without its conjugate row "
                                 f"{conjugate_row(self.M, r)}")

    @property
    def d(self) -> int:
        return len(self.rows)

    @property
    def index(self) -> np.ndarray:
        """0-based positions, for internal numpy indexing."""
        return np.asarray(self.rows, dtype=np.intp) - 1

    @property
    def mask(self) -> np.ndarray:
        m = np.zeros(self.M, dtype=bool)
        m[self.index] = True
        return m

    def low_rows(self) -> list[int]:
        """Rows that carry independent data: DC and rows 2..floor(M/2)+1."""
        return [r for r in self.rows if r <= self.M // 2 + 1]

    def partner_positions(self) -> np.ndarray:
        """For each plan position, the position of its conjugate row."""
        pos = {r: i for i, r in enumerate(self.rows)}
        return np.array([pos[conjugate_row(self.M, r)] for r in self.rows], dtype=np.intp)


def plan_from_rows(M: int, rows, T: float | None = None) -> SamplingPlan:
    """Close ``rows`` under conjugation and build a plan."""
    closed = set()
    for r in rows:
        r = int(r)
        if not 1 <= r <= M:
            raise ValueError(f"row {r} outside 1..{M}")
        closed.add(r)
        closed.add(conjugate_row(M, r))
    ordered = tuple(sorted(closed))
    meta = None
    if T is not None:
        meta = {r: (r - 1) / T for r in ordered if r <= M // 2 + 1}
    return SamplingPlan(M, ordered, meta)


def build_band_plan(M: int, T: float, f_min: float, f_max: float,
                    snap: bool = False) -> SamplingPlan:
    """All grid frequencies ``m/T`` in ``[f_min, f_max]`` plus their conjugates.

    The band edges must be grid frequencies unless ``snap`` is set, in which
    case the grid frequencies lying inside the band are taken.
    """
    if T <= 0:
        raise ValueError("T must be positive")
    if not 0 < f_min <= f_max:
        raise ValueError(f"need 0 < f_min <= f_max, got [{f_min}, {f_max}]")
    lo, hi = f_min * T, f_max * T
    m_lo, m_hi = round(lo), round(hi)
    for val, m in ((lo, m_lo), (hi, m_hi)):
        if abs(val - m) > _GRID_RTOL * max(abs(val), 1.0):
            if not snap:
                raise ValueError(f"frequency {val / T} Hz is not a multiple of 1/T = {1 / T} Hz")
    if snap:
        tol = _GRID_RTOL * max(hi, 1.0)
        m_lo, m_hi = int(np.ceil(lo - tol)), int(np.floor(hi + tol))
        if m_lo > m_hi:
            raise ValueError(f"no grid frequency inside [{f_min}, {f_max}]")
    if m_hi >= M:
        raise ValueError(f"f_max={f_max} Hz is not below M/T = {M / T} Hz")
    return plan_from_rows(M, [m + 1 for m in range(m_lo, m_hi + 1)], T=T)


def build_random_plan(M: int, candidate_rows, fraction: float, seed: int,
                      T: float | None = None) -> SamplingPlan:
    """Seeded uniform draw of ``round(fraction * len(candidates))`` low-half rows.

    Rounding is half-up; the draw uses ``numpy.random.default_rng(seed)``.
    """
    cand = sorted({int(r) for r in candidate_rows})
    if not cand:
        raise ValueError("no candidate rows")
    if not 0 < fraction <= 1:
        raise ValueError("fraction must lie in (0, 1]")
    if cand[0] < 2 or cand[-1] > (M + 1) // 2 + 1:
        raise ValueError("candidate rows must lie in the low half 2..ceil(M/2)+1")
    k = int(np.floor(fraction * len(cand) + 0.5))
    if k == 0:
        raise ValueError("selection is empty after rounding")
    rng = np.random.default_rng(seed)
    picked = rng.choice(np.asarray(cand), size=k, replace=False)
    return plan_from_rows(M, picked.tolist(), T=T)


def band_rows(M: int, T: float, f_min: float, f_max: float, snap: bool = False) -> list[int]:
    """Low-half rows of ``build_band_plan`` (the candidates for random sampling)."""
    return build_band_plan(M, T, f_min, f_max, snap).low_rows()


def dft_apply(spec: FourierSpec, v) -> np.ndarray:
    v = _as_vector(v, spec.M, "v", complex)
    return np.fft.fft(v, norm="ortho")


def dft_adjoint(spec: FourierSpec, z) -> np.ndarray:
    z = _as_vector(z, spec.M, "z", complex)
    return np.fft.ifft(z, norm="ortho")


def select(plan: SamplingPlan, z) -> np.ndarray:
    z = _as_vector(z, plan.M, "z", complex)
    return z[plan.index]


def select_adjoint(plan: SamplingPlan, w) -> np.ndarray:
    w = _as_vector(w, plan.d, "w", complex)
    out = np.zeros(plan.M, dtype=complex)
    out[plan.index] = w
    return out


def hermitian_defect(plan: SamplingPlan, w) -> float:
    """max |w_i - conj(w_partner(i))| relative to max |w|; 0 for consistent data."""
    w = np.asarray(w, dtype=complex)
    scale = max(float(np.max(np.abs(w))), np.finfo(float).tiny) if w.size else 1.0
    return float(np.max(np.abs(w - np.conj(w[plan.partner_positions()])))) / scale


def make_hermitian(plan: SamplingPlan, values_low: dict[int, complex]) -> np.ndarray:
    """Plan-ordered vector from values at low-half rows, conjugates mirrored."""
    out = np.zeros(plan.d, dtype=complex)
    for i, r in enumerate(plan.rows):
        if r <= plan.M // 2 + 1:
            val = complex(values_low[r])
            if r == 1 or (plan.M % 2 == 0 and r == plan.M // 2 + 1):
                val = complex(val.real, 0.0)
            out[i] = val
    for i, j in enumerate(plan.partner_positions()):
        if plan.rows[i] > plan.M // 2 + 1:
            out[i] = np.conj(out[j])
    return out


@dataclass(frozen=True)
class FrameletSystem:
    """Undecimated piecewise-linear spline tight frame with periodic boundary.

    Coefficient layout: final lowpass band, then (bandpass, highpass) for
    levels 1..L.  Filters are upsampled by ``2**(level-1)``.
    """

    M: int
    levels: int = 1

    def __post_init__(self):
        if self.M < 3:
            raise ValueError(f"framelet needs M >= 3 (filter length), got {self.M}")
        if self.levels < 1:
            raise ValueError("levels must be >= 1")

    @property
    def redundancy(self) -> int:
        return 2 * self.levels + 1

    @property
    def N(self) -> int:
        return self.redundancy * self.M

    @classmethod
    def from_redundancy(cls, M: int, l: int) -> "FrameletSystem":
        """Map a redundancy factor ``l`` (N = l*M) onto a level count."""
        if l < 2:
            raise ValueError("redundancy must be at least 2")
        levels = max(1, int(np.floor((l - 1) / 2 + 0.5)))
        if 2 * levels + 1 != l:
            log.warning("redundancy %d has no 2L+1 form; using %d levels (N = %dM)",
                        l, levels, 2 * levels + 1)
        return cls(M, levels)


def framelet_analysis(sys: FrameletSystem, v) -> np.ndarray:
    v = np.ascontiguousarray(_as_vector(v, sys.M, "v", float))
    out = np.empty(sys.N)
    kernels.analysis(v, sys.levels, out)
    return out


def framelet_synthesis(sys: FrameletSystem, y) -> np.ndarray:
    y = np.ascontiguousarray(_as_vector(y, sys.N, "y", float))
    out = np.empty(sys.M)
    kernels.synthesis(y, sys.levels, out)
    return out


@dataclass(frozen=True, eq=False)
class MeasurementOperator:
    """K = R F W*, from real coefficients (length N) to plan rows (length d)."""

    spec: FourierSpec
    plan: SamplingPlan
    framelet: FrameletSystem
    # K*K = W C W^T with C = Re(F* R* R F).  ``projector`` stores C either as
    # one row (its circulant first column) or as p orthonormal rows B, C = B^T B.
    _kernel: np.ndarray = field(init=False, repr=False)
    _proj: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.spec.M == self.plan.M == self.framelet.M:
            raise ValueError(f"dimension mismatch: spec M={self.spec.M}, plan M="
                             f"{self.plan.M}, framelet M={self.framelet.M}")
        e = np.zeros(self.spec.M, dtype=complex)
        e[0] = 1.0
        z = np.fft.fft(e, norm="ortho") * self.plan.mask
        kern = np.ascontiguousarray(np.fft.ifft(z, norm="ortho").real)
        kern.flags.writeable = False
        object.__setattr__(self, "_kernel", kern)
        d, M = self.plan.d, self.spec.M
        proj = _row_basis(self.plan) if 2 <= d and 2 * d < M else kern[None, :]
        proj = np.ascontiguousarray(proj)
        proj.flags.writeable = False
        object.__setattr__(self, "_proj", proj)

    @classmethod
    def build(cls, plan: SamplingPlan, levels: int = 1) -> "MeasurementOperator":
        return cls(FourierSpec(plan.M), plan, FrameletSystem(plan.M, levels))

    @property
    def N(self) -> int:
        return self.framelet.N

    @property
    def d(self) -> int:
        return self.plan.d

    @property
    def circulant_kernel(self) -> np.ndarray:
        return self._kernel

    @property
    def projector(self) -> np.ndarray:
        return self._proj

    def gram(self, b) -> np.ndarray:
        """K*K b (real, idempotent)."""
        b = np.ascontiguousarray(_as_vector(b, self.N, "b", float))
        out = np.empty(self.N)
        kernels.gram_apply(b, self.framelet.levels, self._proj, out)
        return out


def _row_basis(plan: SamplingPlan) -> np.ndarray:
    """Orthonormal real rows spanning the observed frequencies (cos/sin pairs)."""
    M = plan.M
    n = np.arange(M)
    rows = []
    for r in plan.rows:
        m = r - 1
        partner = conjugate_row(M, r)
        if partner == r:
            # DC, or Nyquist for even M
            rows.append(np.cos(2 * np.pi * m * n / M))
            rows[-1] = rows[-1] / np.sqrt(M)
        elif r < partner:
            ph = 2 * np.pi * m * n / M
            rows.append(np.sqrt(2.0 / M) * np.cos(ph))
            rows.append(np.sqrt(2.0 / M) * np.sin(ph))
    return np.array(rows)


def k_apply(op: MeasurementOperator, y) -> np.ndarray:
    y = _as_vector(y, op.N, "y", float)
    v = framelet_synthesis(op.framelet, y)
    return select(op.plan, dft_apply(op.spec, v))


def k_adjoint(op: MeasurementOperator, w, check: bool = False) -> np.ndarray:
    """Real part of W F* R* w.

    The imaginary part vanishes for Hermitian-consistent ``w``; with
    ``check=True`` inconsistent input (defect > 1e-6) raises.
    """
    w = _as_vector(w, op.d, "w", complex)
    if check and hermitian_defect(op.plan, w) > 1e-6:
        raise ValueError("measurement vector is not Hermitian-consistent")
    v = dft_adjoint(op.spec, select_adjoint(op.plan, w)).real
    return framelet_analysis(op.framelet, np.ascontiguousarray(v))


def normal_solve(op: MeasurementOperator, c: float, b) -> np.ndarray:
    """Solve (I + c K*K) x = b using (K*K)^2 = K*K."""
    if not c > 0:
        raise ValueError(f"c must be positive, got {c}")
    b = _as_vector(b, op.N, "b", float)
    return b - (c / (1.0 + c)) * op.gram(b)
