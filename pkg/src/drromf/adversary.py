"""Worst-case disturbance distributions in a Wasserstein-2 ball around a
zero-mean nominal, via the scalar dual

    sup_P E_P[d' C d] = inf_{gamma > lambda_max} gamma (r^2 - Tr M0)
                                               + gamma^2 Tr(M0 (gamma I - C)^-1)

whose optimal ``gamma`` solves ``Tr((gamma (gamma I - C)^-1 - I)^2 M0) = r^2``.
The worst case is the push-forward of the nominal by ``D = gamma (gamma I - C)^-1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .benchmark import RegretOperator, regret_operator

ROOT_RTOL = 1e-13


class DegenerateOperatorError(ValueError):
    """The regret operator has ``lambda_max == 0`` (dual is undefined)."""


class RootFindingError(RuntimeError):
    pass


@dataclass(frozen=True)
class AmbiguitySet:
    M0: np.ndarray
    radius: float
    gaussian: bool = True

    def __post_init__(self):
        M0 = np.atleast_2d(np.asarray(self.M0, dtype=float))
        if M0.shape[0] != M0.shape[1]:
            raise ValueError(f"M0 must be square, got {M0.shape}")
        scale = max(1.0, float(np.abs(M0).max(initial=0.0)))
        if not np.allclose(M0, M0.T, atol=1e-10 * scale, rtol=0.0):
            raise ValueError("M0 must be symmetric")
        M0 = 0.5 * (M0 + M0.T)
        if M0.size and np.linalg.eigvalsh(M0)[0] < -1e-10 * scale:
            raise ValueError("M0 must be positive semidefinite")
        r = float(self.radius)
        if not (r >= 0.0 and math.isfinite(r)):
            raise ValueError(f"radius must be finite and nonnegative, got {self.radius}")
        M0.setflags(write=False)
        object.__setattr__(self, "M0", M0)
        object.__setattr__(self, "radius", r)

    @classmethod
    def identity(cls, dim: int, radius: float) -> "AmbiguitySet":
        return cls(np.eye(dim), radius)


@dataclass(frozen=True)
class WorstCaseDistribution:
    gamma_star: float
    D: np.ndarray
    M_star: np.ndarray
    expected_regret: float
    dual_value: float
    gaussian_flag: bool

    @property
    def nominal(self) -> bool:
        return math.isinf(self.gamma_star)


def _as_regret(C) -> RegretOperator:
    if isinstance(C, RegretOperator):
        return C
    C = np.asarray(C, dtype=float)
    return regret_operator_from_matrix(C)


def regret_operator_from_matrix(C: np.ndarray) -> RegretOperator:
    """Wrap a symmetric matrix as a :class:`RegretOperator`."""
    C = np.atleast_2d(np.asarray(C, dtype=float))
    if C.shape[0] != C.shape[1]:
        raise ValueError(f"regret operator must be square, got {C.shape}")
    # C = C'C - 0'0 trick is not needed: build the eigen cache directly
    C = 0.5 * (C + C.T)
    lam, vec = np.linalg.eigh(C)
    for a in (C, lam, vec):
        a.setflags(write=False)
    return RegretOperator(C, lam, vec)


def _weights(Cr: RegretOperator, M0: np.ndarray) -> np.ndarray:
    """Diagonal of ``Q' M0 Q`` in the eigenbasis of ``C``."""
    Q = Cr.eigenvectors
    return np.einsum("ij,ik,kj->j", Q, M0, Q)


def budget(gamma: float, lam: np.ndarray, wts: np.ndarray) -> float:
    """``h(gamma) = sum_i w_i (lambda_i / (gamma - lambda_i))^2``."""
    q = lam / (gamma - lam)
    return float(np.dot(wts, q * q))


def _budget_derivative(gamma: float, lam: np.ndarray, wts: np.ndarray) -> float:
    g = gamma - lam
    return float(-2.0 * np.dot(wts, lam * lam / (g * g * g)))


def _scale(lam: np.ndarray) -> float:
    return max(1.0, float(np.abs(lam).max(initial=0.0)))


def worst_case_gamma(C, amb: AmbiguitySet, tol: float = ROOT_RTOL) -> float:
    """Unique root of ``h(gamma) = r^2`` on ``(max(0, lambda_max), inf)``.

    Returns ``inf`` for ``r = 0`` (the nominal distribution is the worst case),
    and ``0`` when ``C`` is negative definite and the budget is so large that
    the adversary collapses all mass to the origin.
    """
    Cr = _as_regret(C)
    M0 = amb.M0
    if M0.shape != Cr.C_K.shape:
        raise ValueError(f"M0 shape {M0.shape} does not match C_K {Cr.C_K.shape}")
    lam = np.asarray(Cr.eigenvalues)
    lmax = Cr.lambda_max
    if np.abs(lam).max(initial=0.0) <= 1e-300 or lmax == 0.0:
        raise DegenerateOperatorError("lambda_max(C_K) = 0: the dual of the worst-case "
                                      "regret problem is undefined")
    r = amb.radius
    if r == 0.0:
        return math.inf
    wts = np.clip(_weights(Cr, M0), 0.0, None)
    target = r * r
    eps = 1e-10 * max(1.0, lmax)
    base = max(0.0, lmax)
    lo = base + eps
    h_lo = budget(lo, lam, wts)
    if h_lo <= target:
        if lmax < 0.0:
            h0 = float(np.dot(wts, np.ones_like(lam)))  # h(0+) = Tr(M0)
            if h0 <= target:
                return 0.0
            lo = 0.0
        else:
            raise RootFindingError("the budget equation has no root above lambda_max "
                                   "(M0 has no mass along the top eigenvector)")
    rho = float(np.abs(lam).max())
    hi = base + max(lmax * (1.0 / r), 0.0) + rho * math.sqrt(float(wts.sum())) / r + eps
    while budget(hi, lam, wts) > target:
        hi = base + 2.0 * (hi - base)
    # bisection in log(gamma - base) keeps resolution near the pole
    a, b = lo - base, hi - base
    if a <= 0.0:
        a = min(eps, b / 2.0)
    for _ in range(200):
        mid = math.sqrt(a * b)
        if budget(base + mid, lam, wts) > target:
            a = mid
        else:
            b = mid
        if b / a - 1.0 < 1e-6:
            break
    gamma = base + math.sqrt(a * b)
    for _ in range(50):
        f = budget(gamma, lam, wts) - target
        df = _budget_derivative(gamma, lam, wts)
        if df == 0.0:
            break
        new = gamma - f / df
        if not (base + a <= new <= base + b):
            new = base + math.sqrt(a * b)
        if f > 0:
            a = max(a, gamma - base)
        else:
            b = min(b, gamma - base)
        step = abs(new - gamma)
        gamma = new
        if step <= tol * gamma:
            break
    return float(gamma)


def dual_value(gamma: float, C, amb: AmbiguitySet) -> float:
    """Objective of the scalar dual at ``gamma``."""
    Cr = _as_regret(C)
    if math.isinf(gamma):
        return float(np.trace(Cr.C_K @ amb.M0))
    lam = np.asarray(Cr.eigenvalues)
    wts = _weights(Cr, amb.M0)
    r2 = amb.radius ** 2
    if gamma == 0.0:
        return 0.0
    return float(gamma * (r2 - np.trace(amb.M0)) + gamma * gamma * np.dot(wts, 1.0 / (gamma - lam)))


def distortion_map(gamma: float, C) -> np.ndarray:
    Cr = _as_regret(C)
    Q, lam = Cr.eigenvectors, np.asarray(Cr.eigenvalues)
    if math.isinf(gamma):
        return np.eye(Cr.dim)
    if gamma == 0.0:
        return np.zeros((Cr.dim, Cr.dim))
    d = gamma / (gamma - lam)
    D = (Q * d) @ Q.T
    return 0.5 * (D + D.T)


DUAL_MATCH_RTOL = 1e-6


def worst_case_distribution(C, amb: AmbiguitySet, tol: float = ROOT_RTOL) -> WorstCaseDistribution:
    Cr = _as_regret(C)
    gamma = worst_case_gamma(Cr, amb, tol)
    D = distortion_map(gamma, Cr)
    M_star = D @ amb.M0 @ D.T
    M_star = 0.5 * (M_star + M_star.T)
    primal = float(np.sum(Cr.C_K * M_star))
    dual = dual_value(gamma, Cr, amb)
    scale = max(abs(primal), abs(dual), 1e-300)
    if abs(primal - dual) > DUAL_MATCH_RTOL * scale + 1e-12:
        raise RootFindingError(f"primal {primal!r} and dual {dual!r} values disagree")
    for a in (D, M_star):
        a.setflags(write=False)
    return WorstCaseDistribution(gamma, D, M_star, primal, dual, amb.gaussian)


def expected_regret(C, covariance: np.ndarray) -> float:
    Ck = C.C_K if isinstance(C, RegretOperator) else np.asarray(C, dtype=float)
    S = np.asarray(covariance, dtype=float)
    if S.shape != Ck.shape:
        raise ValueError(f"covariance shape {S.shape} does not match {Ck.shape}")
    return float(np.sum(Ck * S))


def expected_cost(T_K: np.ndarray, covariance: np.ndarray) -> float:
    T_K = np.asarray(T_K, dtype=float)
    S = np.asarray(covariance, dtype=float)
    if S.shape != (T_K.shape[1], T_K.shape[1]):
        raise ValueError(f"covariance shape {S.shape} does not match T_K {T_K.shape}")
    return float(np.sum((T_K.T @ T_K) * S))


def sample_disturbances(covariance: np.ndarray, count: int, seed: int | None = 0) -> np.ndarray:
    """``count`` zero-mean Gaussian samples (rows) with the given covariance."""
    S = np.atleast_2d(np.asarray(covariance, dtype=float))
    if count < 1:
        raise ValueError("count must be at least 1")
    scale = max(1.0, float(np.abs(S).max(initial=0.0)))
    if not np.allclose(S, S.T, atol=1e-10 * scale, rtol=0.0):
        raise ValueError("covariance must be symmetric")
    lam, vec = np.linalg.eigh(0.5 * (S + S.T))
    if lam.size and lam[0] < -1e-10 * scale:
        raise ValueError("covariance must be positive semidefinite")
    root = vec * np.sqrt(np.clip(lam, 0.0, None))
    rng = np.random.default_rng(seed)
    return rng.standard_normal((count, S.shape[0])) @ root.T


@dataclass(frozen=True)
class EvaluationRow:
    tag: str
    gamma_star: float
    own_wc_regret: float
    reference_under_own_wc: float
    relative_difference_pct: float
    regret_under_reference_wc: float


def cross_evaluate(controllers: dict[str, RegretOperator], amb: AmbiguitySet,
                   reference: str) -> list[EvaluationRow]:
    """Evaluate each controller's own worst case against the reference.

    ``controllers`` maps tags to regret operators and must contain
    ``reference``.  Per row: the controller's own worst-case expected regret,
    the reference's expected regret under that same distribution, the
    relative difference in percent, and the controller's expected regret
    under the reference's worst-case distribution.
    """
    if reference not in controllers:
        raise KeyError(f"reference {reference!r} not among controllers")
    ref_wc = worst_case_distribution(controllers[reference], amb)
    rows = []
    for tag, Cr in controllers.items():
        wc = ref_wc if tag == reference else worst_case_distribution(Cr, amb)
        own = wc.expected_regret
        ref_val = expected_regret(controllers[reference], wc.M_star)
        pct = 0.0 if tag == reference else (own - ref_val) / own * 100.0
        rows.append(EvaluationRow(tag, wc.gamma_star, own, ref_val, pct,
                                  expected_regret(Cr, ref_wc.M_star)))
    return rows


__all__ = [
    "AmbiguitySet", "WorstCaseDistribution", "DegenerateOperatorError", "RootFindingError",
    "EvaluationRow", "worst_case_gamma", "worst_case_distribution", "dual_value",
    "distortion_map", "budget", "expected_regret", "expected_cost", "sample_disturbances",
    "cross_evaluate", "regret_operator", "regret_operator_from_matrix",
]
