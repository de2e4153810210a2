"""Youla parametrisation, closed-loop transfer operators, the noncausal
benchmark controller and the regret operator."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .lifting import LiftedSystem
from .opfactor import FactorizationSet, is_causal

CAUSAL_TOL = 1e-12


class ControllerRecoveryError(np.linalg.LinAlgError):
    """``I + E J`` (or ``I - J K``) is numerically singular."""


@dataclass(frozen=True)
class ControllerOperators:
    E: np.ndarray
    K: np.ndarray
    T_K: np.ndarray
    causal_flag: bool
    tag: str = ""
    info: dict = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class RegretOperator:
    """``C_K = T_K' T_K - T_K0' T_K0`` with its sorted spectrum cached."""

    C_K: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray = field(repr=False)

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[-1]) if self.eigenvalues.size else 0.0

    @property
    def dim(self) -> int:
        return self.C_K.shape[0]


def _check_E(E: np.ndarray, sys: LiftedSystem) -> np.ndarray:
    E = np.asarray(E, dtype=float)
    d = sys.dims
    if E.shape != (d.N * d.m, d.N * d.p):
        raise ValueError(f"Youla parameter must be {(d.N * d.m, d.N * d.p)}, got {E.shape}")
    return E


def transfer_operator(E: np.ndarray, sys: LiftedSystem) -> np.ndarray:
    """``[[F E L + G, F E], [E L, E]]`` mapping ``[w; v]`` to ``[x; u]``."""
    E = _check_E(E, sys)
    FE = sys.F @ E
    return np.block([[FE @ sys.L + sys.G, FE], [E @ sys.L, E]])


def _solve_unitriangular_left(Mat: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    return sla.solve_triangular(Mat, rhs, lower=True, unit_diagonal=True, check_finite=False)


def _general_solve(Mat: np.ndarray, rhs: np.ndarray, what: str) -> np.ndarray:
    cond = np.linalg.cond(Mat)
    if not np.isfinite(cond) or cond > 1e12:
        raise ControllerRecoveryError(f"{what} is singular (condition number {cond:.3e})")
    return np.linalg.solve(Mat, rhs)


def controller_from_youla(E: np.ndarray, sys: LiftedSystem) -> np.ndarray:
    """``K = (I + E J)^-1 E``; forward substitution when ``E`` is causal."""
    E = _check_E(E, sys)
    d = sys.dims
    Mat = np.eye(d.N * d.m) + E @ sys.J
    if is_causal(E, d.m, d.p):
        return _solve_unitriangular_left(Mat, E)
    return _general_solve(Mat, E, "I + E J")


def youla_from_controller(K: np.ndarray, sys: LiftedSystem) -> np.ndarray:
    """``E = K (I - J K)^-1``."""
    K = _check_E(K, sys)
    d = sys.dims
    Mat = np.eye(d.N * d.p) - sys.J @ K
    if is_causal(K, d.m, d.p):
        # E Mat = K  <=>  Mat' E' = K', Mat' upper unitriangular
        return sla.solve_triangular(Mat.T, K.T, lower=False, unit_diagonal=True,
                                    check_finite=False).T
    return _general_solve(Mat.T, K.T, "I - J K").T


def controller_operators(E: np.ndarray, sys: LiftedSystem, tag: str = "",
                         info: dict | None = None) -> ControllerOperators:
    E = _check_E(E, sys).copy()
    d = sys.dims
    K = controller_from_youla(E, sys)
    T_K = transfer_operator(E, sys)
    for a in (E, K, T_K):
        a.setflags(write=False)
    causal = is_causal(E, d.m, d.p, CAUSAL_TOL * max(1.0, np.abs(E).max(initial=0.0)))
    return ControllerOperators(E, K, T_K, causal, tag, dict(info or {}))


def from_controller(K: np.ndarray, sys: LiftedSystem, tag: str = "") -> ControllerOperators:
    return controller_operators(youla_from_controller(K, sys), sys, tag)


def benchmark_youla(fs: FactorizationSet, sys: LiftedSystem) -> np.ndarray:
    """``E0 = -T^-1 F' G L' U^-1`` (unconstrained Frobenius minimiser)."""
    rhs = sys.F.T @ sys.G @ sys.L.T
    return -sla.cho_solve((sla.cholesky(fs.U, lower=True), True),
                          sla.cho_solve((sla.cholesky(fs.T, lower=True), True), rhs).T).T


def noncausal_benchmark(sys: LiftedSystem, fs: FactorizationSet) -> ControllerOperators:
    return controller_operators(benchmark_youla(fs, sys), sys, tag="K0")


def regret_operator(T_K: np.ndarray, T_K0: np.ndarray) -> RegretOperator:
    T_K, T_K0 = np.asarray(T_K, dtype=float), np.asarray(T_K0, dtype=float)
    if T_K.shape != T_K0.shape:
        raise ValueError(f"shape mismatch {T_K.shape} vs {T_K0.shape}")
    C = T_K.T @ T_K - T_K0.T @ T_K0
    C = 0.5 * (C + C.T)
    lam, vec = np.linalg.eigh(C)
    for a in (C, lam, vec):
        a.setflags(write=False)
    return RegretOperator(C, lam, vec)
