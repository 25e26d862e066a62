"""EL0M fixed-point proximity iteration, the FISTA baseline for the l1 model,
and their iteration traces."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels
from .operators import (FrameletSystem, MeasurementOperator, framelet_synthesis,
                        hermitian_defect, k_adjoint)
from .regularization import (GOLDEN_BOUND, RegParams, data_misfit, env_l0, l1_objective,
                             prox_l0, soft_threshold)

log = logging.getLogger(__name__)

_EPS = np.finfo(float).eps
_REC_COLS = ("F", "Q", "G", "support_size", "rel_change", "fp_residual",
             "step_x", "support_changed", "inner_iters")
TRACE_CSV_COLUMNS = ("iter", "F", "Q", "G", "support_size", "rel_change", "fp_residual")
HERMITIAN_TOL = 1e-6


class NumericalError(ArithmeticError):
    """A solve produced non-finite values or failed to converge where required."""


@dataclass(frozen=True)
class SolverConfig:
    params: RegParams
    tol: float = 1e-6
    max_iter: int = 5000
    y_update: str = "closed_form"
    inner_max: int = 500
    inner_tol: float = 1e-12
    allow_inadmissible: bool = False
    y0: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValueError("max_iter must be a positive integer")
        if self.y_update not in ("closed_form", "inner_loop"):
            raise ValueError(f"unknown y_update {self.y_update!r}")
        if self.y_update == "inner_loop":
            if self.params.ratio >= 1.0:
                raise ValueError("inner loop needs beta/gamma < 1 to contract")
            if self.inner_max < 1 or not self.inner_tol > 0:
                raise ValueError("inner_max must be >= 1 and inner_tol > 0")
        if not self.params.admissible and not self.allow_inadmissible:
            raise ValueError(f"beta/gamma = {self.params.ratio:.6g} is not below "
                             f"{GOLDEN_BOUND:.6f}; pass allow_inadmissible to force it")


@dataclass
class SolveTrace:
    """Per-iteration diagnostics of an EL0M run.

    Row 0 describes the starting point; row k the iterate after k sweeps.
    """

    records: np.ndarray          # (iterations + 1, len(_REC_COLS))
    hashes: np.ndarray           # support hash per row, uint64
    x: np.ndarray
    y: np.ndarray
    iterations: int
    converged: bool
    beta: float
    gamma: float
    tol: float

    def column(self, name: str) -> np.ndarray:
        return self.records[:, _REC_COLS.index(name)]

    @property
    def F(self):
        return self.column("F")

    @property
    def support_sizes(self):
        return self.column("support_size").astype(int)

    @property
    def fp_residual(self) -> float:
        return float(self.records[-1, _REC_COLS.index("fp_residual")])

    @property
    def stabilization_index(self) -> int:
        """Smallest V with the same support at every row k >= V."""
        h = self.hashes
        diff = np.flatnonzero(h[1:] != h[:-1])
        return int(diff[-1] + 1) if diff.size else 0

    def rows(self):
        for k, rec in enumerate(self.records):
            yield (k, rec[0], rec[1], rec[2], int(rec[3]), rec[4], rec[5])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRACE_CSV_COLUMNS)
            for row in self.rows():
                w.writerow([row[0]] + [repr(float(v)) for v in row[1:4]]
                           + [row[4]] + [repr(float(v)) for v in row[5:]])


@dataclass
class L1Trace:
    objective: np.ndarray
    rel_change: np.ndarray
    support_sizes: np.ndarray
    iterations: int
    converged: bool
    fp_residual: float


def _check_data(op: MeasurementOperator, r) -> np.ndarray:
    r = np.asarray(r, dtype=complex)
    if r.ndim != 1 or r.shape[0] != op.d:
        raise ValueError(f"r must have length d={op.d}, got shape {r.shape}")
    if r.size and hermitian_defect(op.plan, r) > HERMITIAN_TOL:
        raise ValueError("measurement vector is not Hermitian-consistent")
    return r


def _raise_nonfinite(where, k):
    raise NumericalError(f"{where}: non-finite value at iteration {k}")


def el0m_inner_step(op: MeasurementOperator, x, v_prev, c: float, r) -> np.ndarray:
    """v = x - c K*(K v_prev - r)."""
    if not 0 < c < 1:
        raise ValueError("inner iteration needs 0 < c < 1")
    x = np.asarray(x, dtype=float)
    return x - c * (op.gram(v_prev) - k_adjoint(op, r))


def _initial_record(op, r, ksr, y, params):
    x = np.zeros_like(y)
    mis = data_misfit(y, op, r)
    dxy = float(y @ y)
    G = mis + params.gamma / (2 * params.beta) * dxy
    xy = prox_l0(y, params.beta)
    fp = np.linalg.norm(y - xy + params.ratio * (op.gram(y) - ksr))
    rec = (G, mis + params.gamma * env_l0(y, params.beta), G, 0, 0.0, fp, 0.0, 0.0, 0.0)
    return np.array(rec), x


def el0m_solve(op: MeasurementOperator, r, config: SolverConfig):
    """Minimize the envelope model by the fixed-point proximity iteration.

    Returns ``(x, y, trace)`` with ``x = prox(y)`` recomputed from the final y.
    """
    r = _check_data(op, r)
    p = config.params
    ksr = np.ascontiguousarray(k_adjoint(op, r))
    if config.y0 is None:
        y = np.zeros(op.N)
    else:
        y = np.array(config.y0, dtype=float)
        if y.shape != (op.N,):
            raise ValueError(f"y0 must have length {op.N}")
    rec0, x = _initial_record(op, r, ksr, y, p)
    n = config.max_iter
    rec = np.zeros((n + 1, len(_REC_COLS)))
    hashes = np.zeros(n + 1, dtype=np.uint64)
    rec[0] = rec0
    inner_max = config.inner_max if config.y_update == "inner_loop" else 0
    k, status = kernels.el0m_run(ksr, y, x, p.beta, p.gamma, op.framelet.levels,
                                 op.projector, config.tol, n, inner_max,
                                 config.inner_tol, rec[1:], hashes[1:])
    if status < 0:
        _raise_nonfinite("el0m_solve", k)
    trace = SolveTrace(rec[:k + 1].copy(), hashes[:k + 1].copy(), x, y, k, status == 1,
                       p.beta, p.gamma, config.tol)
    if not trace.converged:
        log.info("el0m_solve: no convergence within %d iterations (rel change %.3g)",
                 n, rec[k, 4])
    return x, y, trace


def l1m_solve(op: MeasurementOperator, r, gamma: float, tol: float = 1e-6,
              max_iter: int = 5000):
    """FISTA with unit step on 1/2|Ky - r|^2 + gamma |y|_1, from zero."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    if not tol > 0 or max_iter < 1:
        raise ValueError("need tol > 0 and max_iter >= 1")
    r = _check_data(op, r)
    ksr = np.ascontiguousarray(k_adjoint(op, r))
    y = np.zeros(op.N)
    rec = np.zeros((max_iter, 3))
    k, status = kernels.l1m_run(ksr, y, float(gamma), op.framelet.levels,
                                op.projector, tol, int(max_iter), rec)
    if status < 0:
        _raise_nonfinite("l1m_solve", k)
    fp = float(np.linalg.norm(y - soft_threshold(y - (op.gram(y) - ksr), gamma)))
    trace = L1Trace(rec[:k, 0].copy(), rec[:k, 1].copy(), rec[:k, 2].astype(int), k,
                    status == 1, fp)
    return y, trace


def l1_fixed_point_ok(y, trace: L1Trace) -> bool:
    return trace.fp_residual <= 1e-4 * max(float(np.linalg.norm(y)), 1.0)


def reconstruct_signal(framelet: FrameletSystem, y, lam: float) -> np.ndarray:
    """u = W^T y / lambda."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    return framelet_synthesis(framelet, y) / lam


@dataclass(frozen=True)
class TraceReport:
    monotone: bool
    jump_bound: bool
    stabilized: bool
    fixed_point: bool
    prox_consistent: bool
    local_min: bool
    stabilization_index: int

    @property
    def ok(self) -> bool:
        return all((self.monotone, self.jump_bound, self.stabilized, self.fixed_point,
                    self.prox_consistent, self.local_min))

    def failures(self) -> list[str]:
        names = ("monotone", "jump_bound", "stabilized", "fixed_point",
                 "prox_consistent", "local_min")
        return [n for n in names if not getattr(self, n)]


def check_trace(trace: SolveTrace, slack: float = 1e-12) -> TraceReport:
    """Structural properties every admissible EL0M run should have."""
    F = trace.F
    monotone = bool(np.all(np.diff(F) <= slack))
    thr = np.sqrt(2.0 * trace.beta)
    changed = trace.column("support_changed")[1:] > 0
    steps = trace.column("step_x")[1:]
    # a changed support moves at least one coordinate across the threshold gap
    jump = bool(np.all(steps[changed] >= thr * (1 - 1e-12)))
    V = trace.stabilization_index
    stabilized = trace.converged and V <= trace.iterations
    y, x = trace.y, trace.x
    scale = max(float(np.linalg.norm(y)), 1.0)
    fixed = trace.converged and trace.fp_residual <= 10 * trace.tol * scale
    prox_ok = bool(np.array_equal(x, prox_l0(y, trace.beta)))
    on = x != 0
    local = bool(np.array_equal(y[on], x[on]) and np.all(np.abs(y[~on]) <= thr))
    return TraceReport(monotone, jump, stabilized, fixed, prox_ok, local, V)


def assert_trace(trace: SolveTrace, slack: float = 1e-12) -> TraceReport:
    rep = check_trace(trace, slack)
    if not rep.ok:
        raise NumericalError(f"EL0M trace violates {', '.join(rep.failures())}")
    return rep


__all__ = [
    "NumericalError", "SolverConfig", "SolveTrace", "L1Trace", "TraceReport",
    "TRACE_CSV_COLUMNS", "el0m_solve", "el0m_inner_step", "l1m_solve",
    "l1_fixed_point_ok", "reconstruct_signal", "check_trace", "assert_trace",
    "l1_objective",
]
