"""Comparison controllers in the Youla/operator framework: LQG, H-infinity
and regret-optimal (RO-MF)."""

from __future__ import annotations

import enum

import numpy as np

from .benchmark import ControllerOperators, controller_operators
from .lifting import LiftedSystem
from .nehari import central_nehari, nehari_distance, nehari_sdp
from .opfactor import FactorizationSet, build_factorizations, causal_split, gamma_operators
from .sdpcore import SemidefiniteProgram, bmat, solve
from .sdpcore.solve import DEFAULT_TOL


class BaselineKind(str, enum.Enum):
    LQG = "LQG"
    HINF = "HINF"
    ROMF = "RO-MF"


class BaselineError(RuntimeError):
    pass


def lqg_controller(fs: FactorizationSet, sys: LiftedSystem) -> ControllerOperators:
    """Minimiser of the nominal cost ``|T_K|_F^2`` over causal controllers.

    ``|T_K|_F^2 = |T_K0|_F^2 + |Z|_F^2`` and ``Z + W`` sweeps all causal
    matrices, so the optimum is ``Z = -W_minus``.
    """
    W_plus = fs.W_plus
    E = fs.T_half_inv @ W_plus @ fs.U_half_inv
    E = causal_split(E, fs.dims.m, fs.dims.p)[0]
    return controller_operators(E, sys, BaselineKind.LQG.value)


def _transfer_expr(E, sys: LiftedSystem):
    FE = sys.F @ E
    return bmat([[FE @ sys.L + sys.G, FE], [E @ sys.L, E]])


def hinf_norm_bound(sys: LiftedSystem, tol: float = DEFAULT_TOL,
                    backend: str = "clarabel") -> tuple[float, np.ndarray]:
    """``min |T_K|`` (spectral norm) over causal ``E``; returns ``(delta, E)``."""
    d = sys.dims
    mm, pp = d.N * d.m, d.N * d.p
    sdp = SemidefiniteProgram("hinf")
    delta = sdp.scalar("delta")
    E = sdp.matrix("E", (mm, pp), "block_lower", (d.m, d.p))
    TK = _transfer_expr(E, sys)
    rows, cols = TK.shape
    sdp.add_psd(bmat([[delta.kron_scalar(np.eye(cols)), TK.T],
                      [TK, delta.kron_scalar(np.eye(rows))]]), "norm")
    sdp.minimize(delta)
    sol = solve(sdp, tol=tol, backend=backend)
    if not sol.optimal:
        raise BaselineError(f"H-infinity SDP failed: {sol.raw_status}")
    return float(sol.values["delta"]), sol.values["E"]


HINF_SLACK = 5e-3


def hinf_controller(sys: LiftedSystem, fs: FactorizationSet | None = None,
                    slack: float = HINF_SLACK, tol: float = DEFAULT_TOL,
                    backend: str = "clarabel") -> ControllerOperators:
    """Operator-norm optimal causal controller.

    The norm-optimal set is not a singleton, so after computing the optimal
    level ``delta*`` a second program picks, among controllers with
    ``|T_K| <= (1 + slack) delta*``, the one with least nominal cost
    ``|T_K|_F^2``.  ``slack = 0`` returns the first-stage solution as is.
    """
    fs = fs or build_factorizations(sys)
    delta_star, E1 = hinf_norm_bound(sys, tol, backend)
    info = {"delta_star": delta_star, "slack": slack}
    if slack <= 0.0:
        return controller_operators(causal_split(E1, sys.dims.m, sys.dims.p)[0], sys,
                                    BaselineKind.HINF.value, info)
    d = sys.dims
    mm, pp = d.N * d.m, d.N * d.p
    level = (1.0 + slack) * delta_star
    sdp = SemidefiniteProgram("hinf-h2")
    E = sdp.matrix("E", (mm, pp), "block_lower", (d.m, d.p))
    X = sdp.matrix("X", (pp, pp), "symmetric")
    TK = _transfer_expr(E, sys)
    rows, cols = TK.shape
    sdp.add_psd(bmat([[level * np.eye(cols), TK.T], [TK, level * np.eye(rows)]]), "norm")
    # causal part of Z; its anticausal part -W_minus is fixed
    Dc = fs.T_half @ E @ fs.U_half - fs.W_plus
    sdp.add_psd(bmat([[X, Dc.T], [Dc, np.eye(mm)]]), "frobenius")
    sdp.minimize(X.trace())
    sol = solve(sdp, tol=tol, backend=backend)
    if not sol.optimal:
        raise BaselineError(f"H-infinity selection SDP failed: {sol.raw_status}")
    E2 = causal_split(sol.values["E"], d.m, d.p)[0]
    return controller_operators(E2, sys, BaselineKind.HINF.value, info)


def ro_mf_sdp(fs: FactorizationSet, tol: float = DEFAULT_TOL,
              backend: str = "clarabel") -> tuple[float, np.ndarray]:
    """Joint program in ``(gamma, Z_c)``: min gamma s.t. ``gamma I >= Cbar``.

    Returns ``(gamma_ro, Z)`` with ``Z = Z_c - W``.
    """
    d = fs.dims
    nn, pp, mm = d.N * d.n, d.N * d.p, d.N * d.m
    sdp = SemidefiniteProgram("ro-mf")
    g = sdp.scalar("gamma")
    Zc = sdp.matrix("Zc", (mm, pp), "block_lower", (d.m, d.p))
    Z = Zc - fs.W
    PZ = fs.P @ Z
    sdp.add_psd(bmat([
        [g.kron_scalar(np.eye(nn)), -PZ, None],
        [-PZ.T, g.kron_scalar(np.eye(pp)), Z.T],
        [None, Z, np.eye(mm)],
    ]), "regret-bound")
    sdp.minimize(g)
    sol = solve(sdp, tol=tol, backend=backend)
    if not sol.optimal:
        raise BaselineError(f"RO-MF SDP failed: {sol.raw_status}")
    Zc_val = causal_split(sol.values["Zc"], d.m, d.p)[0]
    return float(sol.values["gamma"]), Zc_val - fs.W


def ro_mf_bisection(fs: FactorizationSet, rtol: float = 1e-10, method: str = "formula",
                    tol: float = DEFAULT_TOL, backend: str = "clarabel") -> float:
    """Smallest gamma with ``min_Y |Y - W_minus,gamma| < 1`` by bisection.

    ``method`` selects how the Nehari distance is evaluated: the closed-form
    nest-algebra formula or an SDP.
    """
    d = fs.dims
    if method == "formula":
        def dist(g):
            return nehari_distance(gamma_operators(fs, g).W_minus, d.m, d.p)
    elif method == "sdp":
        def dist(g):
            return nehari_sdp(gamma_operators(fs, g).W_minus, d.m, d.p, tol, backend)[0]
    else:
        raise ValueError(f"unknown method {method!r}")
    if not np.any(fs.W_minus):
        return 0.0
    hi = 1.0
    while dist(hi) >= 1.0:
        hi *= 2.0
    lo = hi / 2.0
    while dist(lo) < 1.0:
        hi, lo = lo, lo / 2.0
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if dist(mid) < 1.0:
            hi = mid
        else:
            lo = mid
    return hi


ROMF_LEVEL_SLACK = 1e-4
SELECTIONS = ("central", "sdp")


def ro_mf_controller(fs: FactorizationSet, sys: LiftedSystem, tol: float = DEFAULT_TOL,
                     backend: str = "clarabel", selection: str = "central",
                     level_slack: float = ROMF_LEVEL_SLACK) -> tuple[ControllerOperators, float]:
    """Regret-optimal controller and its optimal level ``gamma_ro``.

    ``gamma_ro`` is the optimum of :func:`ro_mf_sdp`.  The set of optimal
    controllers is generally not a singleton; ``selection='central'``
    returns the maximum-entropy solution of the contraction problem at level
    ``gamma_ro (1 + level_slack)``, which is unique.  ``selection='sdp'``
    returns whatever optimal point the interior-point solver lands on.
    """
    if selection not in SELECTIONS:
        raise ValueError(f"selection must be one of {SELECTIONS}")
    d = fs.dims
    gamma_ro, Z = ro_mf_sdp(fs, tol, backend)
    if not np.any(fs.W_minus):
        # causal benchmark: zero regret is attained by it
        gamma_ro, Z = 0.0, np.zeros_like(Z)
    info = {"gamma_ro": gamma_ro, "selection": selection}
    if selection == "sdp" or gamma_ro == 0.0:
        E = fs.e_of(Z)
    else:
        g = gamma_ro * (1.0 + level_slack)
        gops = gamma_operators(fs, g)
        A = gops.W_minus
        # the norm-minimal approximant is strictly inside the unit ball
        Y0 = causal_split(nehari_sdp(A, d.m, d.p, tol, backend)[1], d.m, d.p)[0]
        Y = central_nehari(A, d.m, d.p, Y0)
        E = fs.T_half_inv @ gops.M_gamma_inv @ (Y + gops.W_plus) @ fs.U_half_inv
        info["level"] = g
    E = causal_split(E, d.m, d.p)[0]
    return controller_operators(E, sys, BaselineKind.ROMF.value, info), gamma_ro


def synthesize_baseline(kind: BaselineKind | str, sys: LiftedSystem,
                        fs: FactorizationSet | None = None, tol: float = DEFAULT_TOL,
                        backend: str = "clarabel") -> ControllerOperators:
    kind = BaselineKind(kind)
    fs = fs or build_factorizations(sys)
    if kind is BaselineKind.LQG:
        return lqg_controller(fs, sys)
    if kind is BaselineKind.HINF:
        return hinf_controller(sys, fs, tol=tol, backend=backend)
    return ro_mf_controller(fs, sys, tol, backend)[0]


__all__ = ["BaselineKind", "BaselineError", "lqg_controller", "hinf_controller",
           "hinf_norm_bound", "ro_mf_controller", "ro_mf_sdp", "ro_mf_bisection",
           "synthesize_baseline", "HINF_SLACK", "ROMF_LEVEL_SLACK"]
