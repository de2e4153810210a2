"""Finite-horizon block-Toeplitz lifting of an LTI plant.

The plant ``x[t+1] = A x[t] + B u[t] + w[t]``, ``y[t] = C x[t] + v[t]`` with
``x[0] = 0`` is stacked over ``t = 0..N-1`` into

    x = F u + G w,    y = J u + L w + v,

and the cost ``x'Qx + u'Ru`` is absorbed by rescaling ``x`` and ``u`` so that
it becomes ``|x|^2 + |u|^2``.  Disturbances stay in physical coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class WeightingError(ValueError):
    """Q or R is not symmetric positive definite."""


class HorizonError(ValueError):
    """Horizon length is not a positive integer."""


def _spd_cholesky(M: np.ndarray, name: str) -> np.ndarray:
    if not np.allclose(M, M.T, atol=1e-10, rtol=0.0):
        raise WeightingError(f"{name} is not symmetric")
    try:
        return np.linalg.cholesky(0.5 * (M + M.T))
    except np.linalg.LinAlgError as exc:
        raise WeightingError(f"{name} is not positive definite") from exc


@dataclass(frozen=True)
class StateSpace:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    Q: np.ndarray | None = None
    R: np.ndarray | None = None

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.atleast_2d(np.asarray(self.B, dtype=float))
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError(f"A must be square, got {A.shape}")
        if B.shape[0] != n:
            raise ValueError(f"B must have {n} rows, got {B.shape}")
        if C.shape[1] != n:
            raise ValueError(f"C must have {n} columns, got {C.shape}")
        m, p = B.shape[1], C.shape[0]
        Q = np.eye(n) if self.Q is None else np.atleast_2d(np.asarray(self.Q, dtype=float))
        R = np.eye(m) if self.R is None else np.atleast_2d(np.asarray(self.R, dtype=float))
        if Q.shape != (n, n):
            raise ValueError(f"Q must be {n}x{n}, got {Q.shape}")
        if R.shape != (m, m):
            raise ValueError(f"R must be {m}x{m}, got {R.shape}")
        _spd_cholesky(Q, "Q")
        _spd_cholesky(R, "R")
        for k, v in dict(A=A, B=B, C=C, Q=Q, R=R).items():
            v.setflags(write=False)
            object.__setattr__(self, k, v)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]


@dataclass(frozen=True)
class Dims:
    n: int
    m: int
    p: int
    N: int

    @property
    def dist(self) -> int:
        """Length of the stacked disturbance ``[w; v]``."""
        return self.N * (self.n + self.p)


@dataclass(frozen=True)
class LiftedSystem:
    F: np.ndarray
    G: np.ndarray
    J: np.ndarray
    L: np.ndarray
    dims: Dims
    plant: StateSpace | None = field(default=None, compare=False, repr=False)


def toeplitz_blocks(A: np.ndarray, B: np.ndarray, N: int) -> np.ndarray:
    """Strictly block-lower-triangular Toeplitz matrix with block (t, k) = A^(t-1-k) B."""
    n, m = B.shape
    out = np.zeros((N * n, N * m))
    powers = [B]
    for _ in range(N - 2):
        powers.append(A @ powers[-1])
    for t in range(1, N):
        for k in range(t):
            out[t * n:(t + 1) * n, k * m:(k + 1) * m] = powers[t - 1 - k]
    return out


def lift_system(ss: StateSpace, N: int) -> LiftedSystem:
    """Build the weighted operators ``F, G, J, L`` over horizon ``N``.

    Returns ``F = Qb^(1/2) F_raw Rb^(-1/2)``, ``G = Qb^(1/2) G_raw``,
    ``J = J_raw Rb^(-1/2)`` and ``L = L_raw``, where ``Qb``, ``Rb`` are the
    N-fold block diagonals of ``Q``, ``R`` and the square roots are Cholesky
    factors (``Q = Lq Lq'``, so the weighted state is ``Lq' x``).
    """
    if not isinstance(N, (int, np.integer)) or isinstance(N, bool) or N < 1:
        raise HorizonError(f"horizon must be a positive integer, got {N!r}")
    N = int(N)
    n, m, p = ss.n, ss.m, ss.p
    F_raw = toeplitz_blocks(ss.A, ss.B, N)
    G_raw = toeplitz_blocks(ss.A, np.eye(n), N)
    C_blk = np.kron(np.eye(N), ss.C)
    J_raw = C_blk @ F_raw
    L_raw = C_blk @ G_raw
    # x'Qx = |Lq' x|^2 and u'Ru = |Lr' u|^2
    Lq = _spd_cholesky(ss.Q, "Q")
    Lr = _spd_cholesky(ss.R, "R")
    Qh = np.kron(np.eye(N), Lq.T)
    Rh_inv = np.kron(np.eye(N), np.linalg.inv(Lr.T))
    F = Qh @ F_raw @ Rh_inv
    G = Qh @ G_raw
    J = J_raw @ Rh_inv
    L = L_raw
    for M in (F, G, J, L):
        M.setflags(write=False)
    return LiftedSystem(F, G, J, L, Dims(n, m, p, N), ss)


def simulate_open_loop(ss: StateSpace, u: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Run the raw recursion from ``x[0]=0``; ``u`` is (N, m), ``w`` is (N, n).

    Returns the stacked raw states and noise-free outputs, ``x`` (N, n) and ``y`` (N, p).
    """
    N = u.shape[0]
    x = np.zeros((N, ss.n))
    for t in range(N - 1):
        x[t + 1] = ss.A @ x[t] + ss.B @ u[t] + w[t]
    return x, x @ ss.C.T
