"""l0 proximity operator, its Moreau envelope, soft thresholding and the
objective functions of the two-variable model.

With ``K`` the measurement operator, ``r`` the data and ``c = beta/gamma``::

    Q(y)    = 1/2 |Ky - r|^2 + gamma * env(y)
    G(x, y) = 1/2 |Ky - r|^2 + gamma/(2 beta) |x - y|^2
    F(x, y) = G(x, y) + gamma * |x|_0
    E(y)    = (1 + c)/2 |Ky - r|^2
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .operators import MeasurementOperator, k_apply

GOLDEN_BOUND = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class RegParams:
    beta: float
    gamma: float

    def __post_init__(self):
        if not (self.beta > 0 and self.gamma > 0):
            raise ValueError(f"beta and gamma must be positive, got {self.beta}, {self.gamma}")

    @property
    def threshold(self) -> float:
        return float(np.sqrt(2.0 * self.beta))

    @property
    def ratio(self) -> float:
        return self.beta / self.gamma

    @property
    def smoothness(self) -> float:
        return 1.0 + self.ratio

    @property
    def admissible(self) -> bool:
        """Whether beta/gamma lies below (sqrt(5)-1)/2, where descent is guaranteed."""
        return 0.0 < self.ratio < GOLDEN_BOUND

    @classmethod
    def from_threshold(cls, threshold: float, ratio: float) -> "RegParams":
        beta = threshold ** 2 / 2.0
        return cls(beta, beta / ratio)


def _check_positive(name, value):
    if not value > 0:
        raise ValueError(f"{name} must be positive, got {value}")


def prox_l0_scalar(z: float, beta: float) -> float:
    _check_positive("beta", beta)
    return float(z) if abs(z) > np.sqrt(2.0 * beta) else 0.0


def prox_l0(z, beta: float) -> np.ndarray:
    """Hard thresholding at sqrt(2*beta); ties go to zero."""
    _check_positive("beta", beta)
    z = np.ascontiguousarray(z, dtype=float)
    out = np.empty_like(z)
    kernels.hard_threshold(z.ravel(), float(np.sqrt(2.0 * beta)), out.ravel())
    return out


def l0_count(x) -> int:
    return int(np.count_nonzero(x))


def env_l0(x, beta: float) -> float:
    _check_positive("beta", beta)
    x = np.asarray(x, dtype=float)
    phi = np.where(np.abs(x) >= np.sqrt(2.0 * beta), 1.0, x * x / (2.0 * beta))
    return float(np.sum(phi))


def soft_threshold(z, gamma: float) -> np.ndarray:
    _check_positive("gamma", gamma)
    z = np.ascontiguousarray(z, dtype=float)
    out = np.empty_like(z)
    kernels.soft_threshold(z.ravel(), float(gamma), out.ravel())
    return out


def data_misfit(y, op: MeasurementOperator, r) -> float:
    """1/2 |Ky - r|^2."""
    res = k_apply(op, y) - np.asarray(r, dtype=complex)
    return 0.5 * float(np.vdot(res, res).real)


def _check_pair(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"x and y differ in shape: {x.shape} vs {y.shape}")
    return x, y


def objective_G(x, y, op, r, params: RegParams) -> float:
    x, y = _check_pair(x, y)
    diff = x - y
    return data_misfit(y, op, r) + params.gamma / (2.0 * params.beta) * float(diff @ diff)


def objective_F(x, y, op, r, params: RegParams) -> float:
    x, y = _check_pair(x, y)
    return objective_G(x, y, op, r, params) + params.gamma * l0_count(x)


def objective_Q(y, op, r, params: RegParams) -> float:
    return data_misfit(y, op, r) + params.gamma * env_l0(y, params.beta)


def objective_E(y, op, r, params: RegParams) -> float:
    return params.smoothness * data_misfit(y, op, r)


def l1_objective(y, op, r, gamma: float) -> float:
    return data_misfit(y, op, r) + gamma * float(np.sum(np.abs(y)))
