"""Solve interface: adapters from :class:`StandardForm` to conic IPM solvers."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .program import SemidefiniteProgram, StandardForm

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
NUMERICAL_FAILURE = "numerical-failure"

DEFAULT_TOL = 1e-8


@dataclass
class SdpSolution:
    status: str
    objective: float
    values: dict = field(default_factory=dict)
    x: np.ndarray | None = None
    max_violation: float = np.inf
    iterations: int = 0
    primal_objective: float = np.nan
    dual_objective: float = np.nan
    solver: str = ""
    solve_time: float = 0.0
    raw_status: str = ""

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL

    @property
    def gap(self) -> float:
        return abs(self.primal_objective - self.dual_objective)


def _svec_selector(d: int) -> tuple[sp.csr_matrix, np.ndarray]:
    # Clarabel's PSD triangle: upper triangle by columns, off-diagonals scaled
    # by sqrt(2); for symmetric data that is the lower triangle read by rows.
    rows, cols, vals = [], [], []
    k = 0
    for j in range(d):
        for i in range(j + 1):
            rows.append(k)
            cols.append(j * d + i)
            vals.append(1.0 if i == j else np.sqrt(2.0))
            k += 1
    return sp.csr_matrix((vals, (rows, cols)), shape=(k, d * d)), np.asarray(cols)


def _solve_clarabel(sf: StandardForm, tol: float, max_iter: int) -> dict:
    import clarabel

    n = sf.nvars
    A_parts, b_parts, cones = [], [], []
    if sf.eq_A.shape[0]:
        A_parts.append(sf.eq_A)
        b_parts.append(sf.eq_b)
        cones.append(clarabel.ZeroConeT(sf.eq_A.shape[0]))
    for blk in sf.blocks:
        if blk.size == 0:
            continue
        S, _ = _svec_selector(blk.size)
        A_parts.append(-(S @ blk.coef))
        b_parts.append(S @ blk.const.ravel())
        cones.append(clarabel.PSDTriangleConeT(blk.size))
    A = sp.vstack(A_parts, format="csc") if A_parts else sp.csc_matrix((0, n))
    b = np.concatenate(b_parts) if b_parts else np.zeros(0)
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.tol_gap_abs = tol
    settings.tol_gap_rel = tol
    settings.tol_feas = tol
    settings.tol_infeas_abs = tol
    settings.tol_infeas_rel = tol
    settings.max_iter = max_iter
    P = sp.csc_matrix((n, n))
    solver = clarabel.DefaultSolver(P, sf.c, A, b, cones, settings)
    res = solver.solve()
    raw = str(res.status)
    if raw in ("Solved", "AlmostSolved"):
        status = OPTIMAL
    elif "Infeasible" in raw:
        status = INFEASIBLE
    else:
        status = NUMERICAL_FAILURE
    return dict(status=status, raw=raw, x=np.asarray(res.x), iterations=int(res.iterations),
                primal=float(res.obj_val), dual=float(res.obj_val_dual))


def _solve_cvxopt(sf: StandardForm, tol: float, max_iter: int) -> dict:
    import cvxopt
    from cvxopt import solvers

    def spm(m: sp.spmatrix):
        coo = sp.coo_matrix(m)
        return cvxopt.spmatrix(coo.data.tolist(), coo.row.tolist(), coo.col.tolist(), coo.shape)

    n = sf.nvars
    Gs, hs = [], []
    for blk in sf.blocks:
        if blk.size == 0:
            continue
        # symmetric coefficients: row-major vec == column-major vec
        Gs.append(spm(-blk.coef) if blk.coef.nnz else cvxopt.spmatrix([], [], [], (blk.size ** 2, n)))
        hs.append(cvxopt.matrix(np.ascontiguousarray(blk.const.T)))
    kwargs = {}
    if sf.eq_A.shape[0]:
        kwargs["A"] = spm(sf.eq_A)
        kwargs["b"] = cvxopt.matrix(sf.eq_b.reshape(-1, 1))
    opts = {"show_progress": False, "abstol": tol, "reltol": tol, "feastol": tol,
            "maxiters": max_iter}
    res = solvers.sdp(cvxopt.matrix(sf.c.reshape(-1, 1)), Gs=Gs, hs=hs, options=opts, **kwargs)
    raw = res["status"]
    x = np.zeros(n) if res["x"] is None else np.asarray(res["x"]).ravel()
    if raw == "optimal":
        status = OPTIMAL
    elif "infeasible" in raw:
        status = INFEASIBLE
    else:
        # cvxopt reports 'unknown' when it stalls short of tol; accept near-solutions
        status = OPTIMAL if res.get("relative gap") is not None and \
            max(res["relative gap"] or 1, res["primal infeasibility"] or 1) < 1e-5 \
            else NUMERICAL_FAILURE
    return dict(status=status, raw=raw, x=x, iterations=int(res["iterations"]),
                primal=float(res["primal objective"] or np.nan),
                dual=float(res["dual objective"] or np.nan))


BACKENDS = {"clarabel": _solve_clarabel, "cvxopt": _solve_cvxopt}


def solve_standard_form(sf: StandardForm, tol: float = DEFAULT_TOL, backend: str = "clarabel",
                        max_iter: int = 200) -> SdpSolution:
    """Solve an already-lowered program; ``values`` is left empty."""
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}; choose from {sorted(BACKENDS)}")
    t0 = time.perf_counter()
    if sf.nvars == 0:
        ok = all(e >= -tol for e in sf.min_eigenvalues(np.zeros(0)))
        return SdpSolution(OPTIMAL if ok else INFEASIBLE, sf.c0, {}, np.zeros(0),
                           sf.max_violation(np.zeros(0)), 0, sf.c0, sf.c0, backend, 0.0, "trivial")
    out = BACKENDS[backend](sf, tol, max_iter)
    elapsed = time.perf_counter() - t0
    x = out["x"]
    viol = sf.max_violation(x) if out["status"] == OPTIMAL else np.inf
    sol = SdpSolution(
        status=out["status"], objective=float(sf.c @ x + sf.c0) if out["status"] == OPTIMAL else np.inf,
        x=x, max_violation=viol, iterations=out["iterations"],
        primal_objective=out["primal"] + sf.c0, dual_objective=out["dual"] + sf.c0,
        solver=backend, solve_time=elapsed, raw_status=out["raw"])
    log.debug("sdp %s: %s obj=%.9g viol=%.2e it=%d %.2fs", backend, sol.raw_status,
              sol.objective, viol, sol.iterations, elapsed)
    return sol


def solve(sdp: SemidefiniteProgram, tol: float = DEFAULT_TOL, backend: str = "clarabel",
          max_iter: int = 200) -> SdpSolution:
    """Solve ``sdp`` and map the solution back onto its named variables.

    ``status == "optimal"`` means the backend certified the duality gap to
    ``tol``; the reported ``max_violation`` is recomputed here from the
    minimum eigenvalue of every PSD block.
    """
    sf = sdp.standard_form()
    sol = solve_standard_form(sf, tol, backend, max_iter)
    if sol.x is not None and sol.x.size == sf.nvars:
        sol.values = sdp.assignment(sol.x)
    return sol
