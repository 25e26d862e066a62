"""Sparse inversion of incomplete Fourier transforms."""

from ._backend import BACKEND
from .operators import (FourierSpec, FrameletSystem, MeasurementOperator, SamplingPlan,
                        build_band_plan, build_random_plan, k_adjoint, k_apply, normal_solve,
                        plan_from_rows)
from .regularization import RegParams, env_l0, prox_l0, soft_threshold
from .solvers import NumericalError, SolverConfig, check_trace, el0m_solve, l1m_solve
from .seismic import (EL0M, IDFT, L1M, HelmholtzProblem, SourceWavelet, TimeGrid, VelocityModel,
                      helmholtz_solve, reconstruct)
from .evaluation import ExperimentReport, aligned_snr, snr

__all__ = [
    "BACKEND", "FourierSpec", "FrameletSystem", "MeasurementOperator", "SamplingPlan",
    "build_band_plan", "build_random_plan", "k_adjoint", "k_apply", "normal_solve",
    "plan_from_rows", "RegParams", "env_l0", "prox_l0", "soft_threshold", "NumericalError",
    "SolverConfig", "check_trace", "el0m_solve", "l1m_solve", "EL0M", "IDFT", "L1M",
    "HelmholtzProblem", "SourceWavelet", "TimeGrid", "VelocityModel", "helmholtz_solve",
    "reconstruct", "ExperimentReport", "aligned_snr", "snr",
]
