"""Gram operators, oriented triangular square roots and the gamma-dependent
operators that turn the regret constraint into a Nehari problem.

Square-root conventions (all factors lower triangular)::

    S = S_half S_half'      U = U_half U_half'        (forward)
    T = T_half' T_half      V = V_half' V_half        (reverse)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .lifting import Dims, LiftedSystem


class FactorizationError(np.linalg.LinAlgError):
    """Cholesky factorisation failed; ``pivot`` is the failing index."""

    def __init__(self, msg: str, pivot: int | None = None):
        super().__init__(msg)
        self.pivot = pivot


class ConsistencyError(RuntimeError):
    """An internal identity that holds by construction was violated."""


def _prepare(M: np.ndarray) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    scale = max(1.0, float(np.abs(M).max(initial=0.0)))
    if not np.allclose(M, M.T, atol=1e-10 * scale, rtol=0.0):
        raise ValueError("matrix is not symmetric")
    return 0.5 * (M + M.T)


def cholesky_forward(M: np.ndarray) -> np.ndarray:
    """Lower-triangular ``L`` with ``L @ L.T == M``."""
    M = _prepare(M)
    if M.size == 0:
        return M.copy()
    c, info = sla.lapack.dpotrf(M, lower=1, clean=1)
    if info > 0:
        raise FactorizationError(f"matrix not positive definite (pivot {info - 1})", info - 1)
    if info < 0:
        raise FactorizationError(f"dpotrf illegal argument {-info}")
    return c


def cholesky_reverse(M: np.ndarray) -> np.ndarray:
    """Lower-triangular ``L`` with ``L.T @ L == M``.

    With ``E`` the exchange matrix, ``E M E = L0 L0'`` gives ``L = E L0' E``.
    """
    M = _prepare(M)
    if M.size == 0:
        return M.copy()
    flipped = M[::-1, ::-1]
    try:
        L0 = cholesky_forward(flipped)
    except FactorizationError as exc:
        d = M.shape[0]
        pivot = None if exc.pivot is None else d - 1 - exc.pivot
        raise FactorizationError(f"matrix not positive definite (pivot {pivot})", pivot) from None
    return L0.T[::-1, ::-1].copy()


def causal_split(M: np.ndarray, row_block: int, col_block: int) -> tuple[np.ndarray, np.ndarray]:
    """Split ``M`` into its block-lower part (incl. diagonal blocks) and the
    strictly block-upper remainder."""
    M = np.asarray(M, dtype=float)
    mask = causal_mask(M.shape, row_block, col_block)
    causal = np.where(mask, M, 0.0)
    return causal, M - causal


def causal_mask(shape: tuple[int, int], row_block: int, col_block: int) -> np.ndarray:
    rows, cols = shape
    if row_block <= 0 or col_block <= 0 or rows % row_block or cols % col_block:
        raise ValueError(f"shape {shape} not divisible by blocks ({row_block}, {col_block})")
    bi = np.arange(rows) // row_block
    bj = np.arange(cols) // col_block
    return bj[None, :] <= bi[:, None]


def is_causal(M: np.ndarray, row_block: int, col_block: int, tol: float = 0.0) -> bool:
    _, anti = causal_split(M, row_block, col_block)
    return bool(np.abs(anti).max(initial=0.0) <= tol)


def _tri_inv(L: np.ndarray) -> np.ndarray:
    if L.size == 0:
        return L.copy()
    return sla.solve_triangular(L, np.eye(L.shape[0]), lower=True)


@dataclass(frozen=True)
class FactorizationSet:
    T: np.ndarray
    U: np.ndarray
    S: np.ndarray
    V: np.ndarray
    T_half: np.ndarray
    U_half: np.ndarray
    S_half: np.ndarray
    V_half: np.ndarray
    T_half_inv: np.ndarray
    U_half_inv: np.ndarray
    Theta: np.ndarray
    Psi: np.ndarray
    W: np.ndarray
    P: np.ndarray
    dims: Dims

    @property
    def W_plus(self) -> np.ndarray:
        return causal_split(self.W, self.dims.m, self.dims.p)[0]

    @property
    def W_minus(self) -> np.ndarray:
        return causal_split(self.W, self.dims.m, self.dims.p)[1]

    def z_of(self, E: np.ndarray) -> np.ndarray:
        """``Z = T^(1/2) E U^(1/2) - W``."""
        return self.T_half @ E @ self.U_half - self.W

    def e_of(self, Z: np.ndarray) -> np.ndarray:
        """Inverse of :meth:`z_of`."""
        return self.T_half_inv @ (Z + self.W) @ self.U_half_inv

    def cbar(self, Z: np.ndarray) -> np.ndarray:
        """Rotated regret operator ``[[0, P Z], [Z' P', Z' Z]]``."""
        PZ = self.P @ Z
        nn = self.P.shape[0]
        return np.block([[np.zeros((nn, nn)), PZ], [PZ.T, Z.T @ Z]])


UNITARITY_TOL = 1e-8


def build_factorizations(sys: LiftedSystem) -> FactorizationSet:
    F, G, L = sys.F, sys.G, sys.L
    d = sys.dims
    nn, mm, pp = d.N * d.n, d.N * d.m, d.N * d.p
    T = np.eye(mm) + F.T @ F
    U = np.eye(pp) + L @ L.T
    S = np.eye(nn) + F @ F.T
    V = np.eye(nn) + L.T @ L
    S_half = cholesky_forward(S)
    U_half = cholesky_forward(U)
    T_half = cholesky_reverse(T)
    V_half = cholesky_reverse(V)
    S_half_inv, U_half_inv = _tri_inv(S_half), _tri_inv(U_half)
    T_half_inv, V_half_inv = _tri_inv(T_half), _tri_inv(V_half)

    Theta = sla.block_diag(S_half_inv, T_half_inv.T) @ np.block(
        [[np.eye(nn), -F], [F.T, np.eye(mm)]])
    Psi = np.block([[np.eye(nn), L.T], [-L, np.eye(pp)]]) @ sla.block_diag(
        V_half_inv, U_half_inv.T)
    W = -T_half_inv.T @ F.T @ G @ L.T @ U_half_inv.T
    P = V_half_inv.T @ G.T @ F @ T_half_inv

    for name, Q in (("Theta", Theta), ("Psi", Psi)):
        res = np.linalg.norm(Q.T @ Q - np.eye(Q.shape[0]))
        if res > UNITARITY_TOL:
            raise ConsistencyError(f"{name} unitarity residual {res:.3e}")

    arrays = (T, U, S, V, T_half, U_half, S_half, V_half, T_half_inv, U_half_inv,
              Theta, Psi, W, P)
    for a in arrays:
        a.setflags(write=False)
    return FactorizationSet(*arrays, dims=d)


@dataclass(frozen=True)
class GammaOperators:
    gamma: float
    M_gamma: np.ndarray
    M_gamma_inv: np.ndarray
    W_gamma: np.ndarray
    W_plus: np.ndarray
    W_minus: np.ndarray
    H_gamma: np.ndarray


def gamma_operators(fs: FactorizationSet, gamma: float) -> GammaOperators:
    gamma = float(gamma)
    if not gamma > 0.0 or not np.isfinite(gamma):
        raise ValueError(f"gamma must be positive and finite, got {gamma}")
    mm = fs.P.shape[1]
    M_gamma = cholesky_reverse(np.eye(mm) / gamma + (fs.P.T @ fs.P) / gamma ** 2)
    M_inv = _tri_inv(M_gamma)
    W_gamma = M_gamma @ fs.W
    W_plus, W_minus = causal_split(W_gamma, fs.dims.m, fs.dims.p)
    H_gamma = M_inv @ W_plus - fs.W
    arrays = (M_gamma, M_inv, W_gamma, W_plus, W_minus, H_gamma)
    for a in arrays:
        a.setflags(write=False)
    return GammaOperators(gamma, *arrays)
