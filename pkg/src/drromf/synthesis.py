"""Distributionally robust regret-optimal synthesis: fixed-gamma SDP and the
outer one-dimensional search over gamma.

Two equivalent fixed-gamma programs are provided.

``assemble_dr_lmi``
    The direct form: symmetric ``X`` of size ``N(n+p)``, causal ``Y``, one
    large LMI coupling ``X`` with ``gamma I - Cbar``, the Nehari contraction
    block and ``X >= 0``.

``assemble_dr_lmi_compact``
    Two further Schur steps eliminate the ``N n`` block of ``X``.  With
    ``Z = M^-1 Y + H`` and ``D = Y - W_minus``,

        gamma^2 Tr((gamma I - Cbar)^-1)
            = gamma N n + gamma^2 Tr(S^-1) + Tr(Pt Z S^-1 Z' Pt'),
        S = gamma (I - D'D),

    where ``Pt`` is the triangular QR factor of ``P``.  Writing the two trace
    terms as ``gamma (Np + Tr Xa)`` and ``Tr Xb`` gives two LMIs of size
    ``2 Np + Nm`` and ``Np + 2 Nm`` whose data no longer scale with gamma.
    The contraction ``|D| <= 1`` is implied, so no Nehari block is needed.
"""

from __future__ import annotations

import logging
import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .benchmark import (ControllerOperators, RegretOperator, controller_operators,
                        noncausal_benchmark, regret_operator)
from .lifting import LiftedSystem
from .nehari import nehari_distance
from .opfactor import FactorizationSet, GammaOperators, causal_split, gamma_operators
from .sdpcore import SemidefiniteProgram, bmat, solve
from .sdpcore.solve import DEFAULT_TOL, INFEASIBLE, OPTIMAL

log = logging.getLogger(__name__)

FORMS = ("compact", "full")


class SynthesisError(RuntimeError):
    """Raised for search failures or inconsistent recovered controllers."""

    def __init__(self, msg: str, gamma: float | None = None):
        super().__init__(msg if gamma is None else f"{msg} (gamma={gamma!r})")
        self.gamma = gamma


class UnimodalityWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class SynthesisConfig:
    radius: float
    gamma_tol: float = 1e-4
    expansion: float = 2.0
    solver_tol: float = DEFAULT_TOL
    backend: str = "clarabel"
    form: str = "compact"
    samples: int = 8
    max_expansions: int = 60
    threshold_tol: float = 1e-12

    def __post_init__(self):
        if not (self.radius >= 0.0 and math.isfinite(self.radius)):
            raise ValueError(f"radius must be finite and nonnegative, got {self.radius}")
        for name in ("gamma_tol", "solver_tol", "threshold_tol"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        if not self.expansion > 1.0:
            raise ValueError("expansion factor must exceed 1")
        if self.form not in FORMS:
            raise ValueError(f"form must be one of {FORMS}")
        if self.samples < 3:
            raise ValueError("need at least 3 samples")


@dataclass
class InnerSolution:
    gamma: float
    objective: float
    Y: np.ndarray | None
    X: np.ndarray | None
    trace_X: float
    status: str
    iterations: int = 0
    solve_time: float = 0.0

    @property
    def feasible(self) -> bool:
        return self.status == OPTIMAL


@dataclass
class SynthesisResult:
    gamma_star: float
    Y_star: np.ndarray | None
    controller: ControllerOperators
    objective: float
    trace_X: float
    C_K: RegretOperator
    radius: float
    gamma_lo: float
    trace: list[InnerSolution] = field(default_factory=list)
    wall_time: float = 0.0
    method: str = "sdp"

    @property
    def E_star(self) -> np.ndarray:
        return self.controller.E

    @property
    def K_star(self) -> np.ndarray:
        return self.controller.K

    @property
    def iterations(self) -> int:
        return sum(s.iterations for s in self.trace)


def _scaled_identity(gamma: float, d: int) -> np.ndarray:
    return gamma * np.eye(d)


def assemble_dr_lmi(gops: GammaOperators, fs: FactorizationSet, r: float) -> SemidefiniteProgram:
    """Fixed-gamma program with the full ``X`` and the Nehari contraction block."""
    d = fs.dims
    nn, pp, mm = d.N * d.n, d.N * d.p, d.N * d.m
    g = gops.gamma
    sdp = SemidefiniteProgram("dr-lmi")
    X11 = sdp.matrix("X11", (nn, nn), "symmetric")
    X12 = sdp.matrix("X12", (nn, pp))
    X22 = sdp.matrix("X22", (pp, pp), "symmetric")
    Y = sdp.matrix("Y", (mm, pp), "block_lower", (d.m, d.p))
    Z = gops.M_gamma_inv @ Y + gops.H_gamma
    PZ = fs.P @ Z
    gI_n, gI_p = _scaled_identity(g, nn), _scaled_identity(g, pp)
    sdp.add_psd(bmat([
        [X11, X12, gI_n, None, None],
        [X12.T, X22, None, gI_p, None],
        [gI_n, None, gI_n, -PZ, None],
        [None, gI_p, -PZ.T, gI_p, Z.T],
        [None, None, None, Z, np.eye(mm)],
    ]), "regret")
    D = Y - gops.W_minus
    sdp.add_psd(bmat([[np.eye(pp), D.T], [D, np.eye(mm)]]), "nehari")
    sdp.add_psd(bmat([[X11, X12], [X12.T, X22]]), "X")
    sdp.minimize(X11.trace() + X22.trace() + g * (r * r - d.dist))
    return sdp


def assemble_dr_lmi_compact(gops: GammaOperators, fs: FactorizationSet, r: float) -> SemidefiniteProgram:
    """Equivalent reduced program in ``(Xa, Xb, Y)``; see the module docstring."""
    d = fs.dims
    pp, mm = d.N * d.p, d.N * d.m
    g = gops.gamma
    Pt = _triangular_factor(fs.P)
    sdp = SemidefiniteProgram("dr-lmi-compact")
    Xa = sdp.matrix("Xa", (pp, pp), "symmetric")
    Xb = sdp.matrix("Xb", (Pt.shape[0], Pt.shape[0]), "symmetric")
    Y = sdp.matrix("Y", (mm, pp), "block_lower", (d.m, d.p))
    Z = gops.M_gamma_inv @ Y + gops.H_gamma
    D = Y - gops.W_minus
    Ip, Im = np.eye(pp), np.eye(mm)
    sdp.add_psd(bmat([[Xa + Ip, Ip, None], [Ip, Ip, D.T], [None, D, Im]]), "trace-inverse")
    PZs = (Pt @ Z) * (1.0 / math.sqrt(g))
    sdp.add_psd(bmat([[Xb, PZs, None], [PZs.T, Ip, D.T], [None, D, Im]]), "cross-term")
    sdp.minimize(Xa.trace() * g + Xb.trace() + g * r * r)
    return sdp


def _triangular_factor(P: np.ndarray) -> np.ndarray:
    """``R`` with ``R'R = P'P``; square when ``P`` is tall."""
    R = np.linalg.qr(P, mode="r")
    return R


def minimal_trace_X(gamma: float, fs: FactorizationSet, Z: np.ndarray) -> np.ndarray:
    """Smallest feasible ``X``, ``gamma^2 (gamma I - Cbar)^-1``."""
    Cb = fs.cbar(Z)
    return gamma * gamma * np.linalg.inv(gamma * np.eye(Cb.shape[0]) - Cb)


def nehari_level(gops: GammaOperators, fs: FactorizationSet) -> float:
    """Distance of ``W_minus`` to the causal matrices (feasible iff < 1)."""
    return nehari_distance(gops.W_minus, fs.dims.m, fs.dims.p)


def inner_value(gamma: float, fs: FactorizationSet, r: float, tol: float = DEFAULT_TOL,
                backend: str = "clarabel", form: str = "compact") -> InnerSolution:
    """Solve the fixed-gamma program; ``objective`` is ``inf`` when infeasible."""
    gops = gamma_operators(fs, gamma)
    if nehari_level(gops, fs) >= 1.0:
        return InnerSolution(gamma, math.inf, None, None, math.inf, INFEASIBLE)
    if form == "compact":
        sdp = assemble_dr_lmi_compact(gops, fs, r)
    elif form == "full":
        sdp = assemble_dr_lmi(gops, fs, r)
    else:
        raise ValueError(f"unknown form {form!r}")
    sol = solve(sdp, tol=tol, backend=backend)
    if sol.status == INFEASIBLE:
        return InnerSolution(gamma, math.inf, None, None, math.inf, INFEASIBLE,
                             sol.iterations, sol.solve_time)
    if not sol.optimal:
        raise SynthesisError(f"inner SDP failed with status {sol.raw_status}", gamma)
    Y = sol.values["Y"]
    d = fs.dims
    if form == "full":
        v = sol.values
        X = np.block([[v["X11"], v["X12"]], [v["X12"].T, v["X22"]]])
        trace_X = float(np.trace(X))
    else:
        Z = gops.M_gamma_inv @ Y + gops.H_gamma
        X = minimal_trace_X(gamma, fs, Z)
        v = sol.values
        trace_X = gamma * d.dist + gamma * float(np.trace(v["Xa"])) + float(np.trace(v["Xb"]))
    return InnerSolution(gamma, sol.objective, Y, X, trace_X, OPTIMAL, sol.iterations,
                         sol.solve_time)


def feasibility_threshold(fs: FactorizationSet, rtol: float = 1e-12) -> float:
    """Smallest gamma for which the contraction constraint is satisfiable.

    Bisection on the closed-form Nehari distance, bracketed by doubling.
    """
    def feasible(g: float) -> bool:
        return nehari_level(gamma_operators(fs, g), fs) < 1.0

    if not np.any(fs.W_minus):
        return 0.0
    hi = max(1.0, float(np.linalg.norm(fs.W, 2)) ** 2)
    while not feasible(hi):
        hi *= 2.0
    lo = hi / 2.0
    while feasible(lo):
        hi, lo = lo, lo / 2.0
        if lo < 1e-300:
            return 0.0
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    return hi


def recover_controller(gops: GammaOperators, fs: FactorizationSet, sys: LiftedSystem,
                       Y: np.ndarray, tag: str = "DR-RO-MF") -> ControllerOperators:
    """``E = T^-1/2 M^-1 (Y + W_plus) U^-1/2`` followed by ``K = (I + E J)^-1 E``."""
    d = fs.dims
    E = fs.T_half_inv @ gops.M_gamma_inv @ (Y + gops.W_plus) @ fs.U_half_inv
    causal, anti = causal_split(E, d.m, d.p)
    residue = float(np.abs(anti).max(initial=0.0))
    if residue > 1e-8 * max(1.0, float(np.abs(E).max())):
        raise SynthesisError(f"recovered Youla parameter is not causal (residue {residue:.3e})",
                             gops.gamma)
    return controller_operators(causal, sys, tag)


class _Objective:
    """Memoised inner value with a record of every solve."""

    def __init__(self, fs: FactorizationSet, cfg: SynthesisConfig):
        self.fs, self.cfg = fs, cfg
        self.cache: dict[float, InnerSolution] = {}
        self.trace: list[InnerSolution] = []

    def __call__(self, gamma: float) -> float:
        gamma = float(gamma)
        if gamma not in self.cache:
            s = inner_value(gamma, self.fs, self.cfg.radius, self.cfg.solver_tol,
                            self.cfg.backend, self.cfg.form)
            log.debug("gamma=%.10g value=%.10g", gamma, s.objective)
            self.cache[gamma] = s
            self.trace.append(s)
        return self.cache[gamma].objective

    def best(self) -> InnerSolution:
        return min((s for s in self.trace if s.feasible), key=lambda s: s.objective)


def _is_unimodal(vals: list[float]) -> bool:
    k = int(np.argmin(vals))
    left = all(vals[i] >= vals[i + 1] for i in range(k))
    right = all(vals[i] <= vals[i + 1] for i in range(k, len(vals) - 1))
    return left and right


def _bracket(obj: _Objective, gamma_lo: float, cfg: SynthesisConfig) -> tuple[float, float]:
    r = cfg.radius
    # for a scalar regret operator the optimum sits near gamma_lo (1 + 1/r)
    base = max(gamma_lo, 1e-12)
    centre = base / r
    offsets = list(centre * np.logspace(-1.5, 1.5, cfg.samples))
    vals = [obj(gamma_lo + s) for s in offsets]
    if not _is_unimodal(vals):
        warnings.warn(f"inner value not unimodal on the sample grid at r={r}; "
                      "refining around the best sample", UnimodalityWarning, stacklevel=3)
    k = int(np.argmin(vals))
    n_exp = 0
    while k == len(offsets) - 1:
        n_exp += 1
        if n_exp > cfg.max_expansions:
            raise SynthesisError("could not bracket the minimum from above")
        offsets.append(offsets[-1] * cfg.expansion)
        vals.append(obj(gamma_lo + offsets[-1]))
        k = int(np.argmin(vals))
    while k == 0:
        n_exp += 1
        if n_exp > cfg.max_expansions or offsets[0] < 1e-14 * base:
            return gamma_lo, gamma_lo + offsets[1]
        offsets.insert(0, offsets[0] / cfg.expansion)
        vals.insert(0, obj(gamma_lo + offsets[0]))
        k = int(np.argmin(vals))
    return gamma_lo + offsets[k - 1], gamma_lo + offsets[k + 1]


def lqg_result(fs: FactorizationSet, sys: LiftedSystem) -> SynthesisResult:
    """Zero-radius limit: the LQG controller and its nominal expected regret."""
    from .baselines import lqg_controller

    t0 = time.perf_counter()
    ctrl = lqg_controller(fs, sys)
    K0 = noncausal_benchmark(sys, fs)
    C = regret_operator(ctrl.T_K, K0.T_K)
    value = float(np.trace(C.C_K))
    ctrl = controller_operators(ctrl.E, sys, "DR-RO-MF", {"route": "lqg-closed-form"})
    return SynthesisResult(math.inf, None, ctrl, value, math.inf, C, 0.0, math.nan, [],
                           time.perf_counter() - t0, "lqg-closed-form")


def minimize_over_gamma(fs: FactorizationSet, sys: LiftedSystem, cfg: SynthesisConfig,
                        gamma_lo: float | None = None) -> SynthesisResult:
    """Minimise ``gamma -> inner_value(gamma)`` and recover the controller.

    The search brackets the minimum using ``cfg.samples`` log-spaced offsets
    above the feasibility threshold, then runs bounded Brent iterations
    (golden section with parabolic steps) to ``cfg.gamma_tol`` relative.
    """
    t0 = time.perf_counter()
    if cfg.radius == 0.0:
        return lqg_result(fs, sys)
    if gamma_lo is None:
        gamma_lo = feasibility_threshold(fs, cfg.threshold_tol)
    obj = _Objective(fs, cfg)
    a, c = _bracket(obj, gamma_lo, cfg)
    res = minimize_scalar(obj, bounds=(a, c), method="bounded",
                          options=dict(xatol=cfg.gamma_tol * a / 3.0, maxiter=200))
    if not res.success:
        raise SynthesisError(f"gamma search did not converge: {res.message}")
    best = obj.best()
    gops = gamma_operators(fs, best.gamma)
    ctrl = recover_controller(gops, fs, sys, best.Y)
    K0 = noncausal_benchmark(sys, fs)
    C = regret_operator(ctrl.T_K, K0.T_K)
    if not C.lambda_max < best.gamma:
        raise SynthesisError(f"lambda_max(C_K)={C.lambda_max!r} not below gamma*", best.gamma)
    return SynthesisResult(best.gamma, best.Y, ctrl, best.objective, best.trace_X, C,
                           cfg.radius, gamma_lo, obj.trace, time.perf_counter() - t0)


def synthesize(sys: LiftedSystem, radius: float, fs: FactorizationSet | None = None,
               **kwargs) -> SynthesisResult:
    from .opfactor import build_factorizations

    fs = fs or build_factorizations(sys)
    return minimize_over_gamma(fs, sys, SynthesisConfig(radius=radius, **kwargs))
