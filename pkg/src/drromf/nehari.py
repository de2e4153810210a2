"""Block-matrix Nehari problem: approximate a matrix by a causal one in
operator norm.

For a nest of block-lower-triangular matrices the distance has the closed form

    min_{Y causal} |A - Y| = max_k | A[rows < k, cols >= k] |

(block indices), which enables an SDP-free feasibility oracle.
"""

from __future__ import annotations

import numpy as np

from .opfactor import causal_mask
from .sdpcore import bmat, SemidefiniteProgram, solve


def nehari_distance(A: np.ndarray, row_block: int, col_block: int) -> float:
    """Operator-norm distance from ``A`` to the block-lower-triangular matrices."""
    A = np.asarray(A, dtype=float)
    causal_mask(A.shape, row_block, col_block)  # shape validation
    nb = A.shape[0] // row_block
    best = 0.0
    for k in range(1, nb):
        sub = A[:k * row_block, k * col_block:]
        if sub.size:
            best = max(best, float(np.linalg.norm(sub, 2)))
    return best


def nehari_sdp(A: np.ndarray, row_block: int, col_block: int, tol: float = 1e-8,
               backend: str = "clarabel") -> tuple[float, np.ndarray]:
    """Solve ``min_Y |Y - A|`` over causal ``Y`` as an SDP.

    Returns the distance and a minimiser.
    """
    A = np.asarray(A, dtype=float)
    r, c = A.shape
    sdp = SemidefiniteProgram("nehari")
    t = sdp.scalar("t")
    Y = sdp.matrix("Y", (r, c), "block_lower", (row_block, col_block))
    D = Y - A
    sdp.add_psd(bmat([[t.kron_scalar(np.eye(c)), D.T], [D, t.kron_scalar(np.eye(r))]]), "norm")
    sdp.minimize(t)
    sol = solve(sdp, tol=tol, backend=backend)
    if not sol.optimal:
        raise RuntimeError(f"Nehari SDP failed: {sol.raw_status}")
    return float(sol.values["t"]), sol.values["Y"]


def entropy_objective(y: np.ndarray, A: np.ndarray, mask: np.ndarray) -> tuple[float, np.ndarray]:
    """``-log det(I - D'D)`` and its gradient over the causal entries,
    with ``D = Y - A``; ``+inf``-like value outside the unit ball."""
    Y = np.zeros(A.shape)
    Y[mask] = y
    D = Y - A
    Mat = np.eye(A.shape[1]) - D.T @ D
    try:
        Lc = np.linalg.cholesky(Mat)
    except np.linalg.LinAlgError:
        return 1e30, np.zeros_like(y)
    val = -2.0 * float(np.log(np.diag(Lc)).sum())
    grad = 2.0 * D @ np.linalg.inv(Mat)
    return val, grad[mask]


def central_nehari(A: np.ndarray, row_block: int, col_block: int, Y0: np.ndarray,
                   tol: float = 1e-13, max_iter: int = 200) -> np.ndarray:
    """Maximum-entropy causal ``Y``: maximise ``log det(I - (Y-A)'(Y-A))``.

    ``Y0`` must be causal with ``|Y0 - A| < 1``.  The objective is a
    self-concordant barrier, so damped Newton converges from any strictly
    feasible start.  The maximiser is unique and is characterised by the
    causal part of ``D (I - D'D)^-1`` vanishing, ``D = Y - A``.
    """
    A = np.asarray(A, dtype=float)
    mask = causal_mask(A.shape, row_block, col_block)
    if np.linalg.norm(np.asarray(Y0) - A, 2) >= 1.0:
        raise ValueError("starting point is not a strict contraction")
    y = np.asarray(Y0, dtype=float)[mask].copy()
    f, g = entropy_objective(y, A, mask)
    for _ in range(max_iter):
        Y = np.zeros(A.shape)
        Y[mask] = y
        D = Y - A
        Sinv = np.linalg.inv(np.eye(A.shape[1]) - D.T @ D)
        H = entropy_hessian(D, Sinv, mask)
        step = -np.linalg.solve(H, g)
        dec2 = float(-g @ step)
        if dec2 < tol * tol:
            break
        t = 1.0 / (1.0 + np.sqrt(dec2)) if dec2 > 0.0625 else 1.0
        if dec2 < tol:
            # quadratic regime: take full steps while they help, then stop
            f_new, g_new = entropy_objective(y + step, A, mask)
            if not f_new < f:
                break
            y, f, g = y + step, f_new, g_new
            continue
        while True:
            f_new, g_new = entropy_objective(y + t * step, A, mask)
            if f_new <= f - 0.25 * t * dec2 or t < 1e-12:
                break
            t *= 0.5
        y, f, g = y + t * step, f_new, g_new
    Y = np.zeros(A.shape)
    Y[mask] = y
    return Y


def entropy_hessian(D: np.ndarray, Sinv: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Hessian of ``-log det(I - D'D)`` restricted to the entries in ``mask``.

    With ``S = I - D'D`` the directional derivative of the gradient
    ``2 D S^-1`` along ``Delta`` is
    ``2 Delta S^-1 + 2 D S^-1 (Delta' D + D' Delta) S^-1``.
    """
    rows, cols = np.nonzero(mask)
    DS = D @ Sinv                         # (r, c)
    M = DS @ D.T                          # (r, r): D S^-1 D'
    # term 1: 2 (Delta S^-1)[k,l] = 2 delta_{k i} Sinv[j, l]
    # term 2: 2 (D S^-1 Delta' D S^-1)[k,l] = 2 DS[k, j] DS[i, l]
    # term 3: 2 (D S^-1 D' Delta S^-1)[k,l] = 2 M[k, i] Sinv[j, l]
    rk, cl = rows, cols
    H = 2.0 * ((rk[:, None] == rk[None, :]) * Sinv[cl[None, :], cl[:, None]])
    H += 2.0 * DS[rk[:, None], cl[None, :]] * DS[rk[None, :], cl[:, None]]
    H += 2.0 * M[rk[:, None], rk[None, :]] * Sinv[cl[None, :], cl[:, None]]
    return 0.5 * (H + H.T)


def central_stationarity(Y: np.ndarray, A: np.ndarray, row_block: int, col_block: int) -> float:
    """Max-abs causal entry of ``D (I - D'D)^-1`` (zero at the central solution)."""
    mask = causal_mask(A.shape, row_block, col_block)
    _, g = entropy_objective(np.asarray(Y)[mask], np.asarray(A), mask)
    return float(np.abs(g).max(initial=0.0)) / 2.0
