"""Radius sweeps: synthesise controllers, build worst-case distributions and
persist one row per (radius, controller)."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..adversary import AmbiguitySet, expected_regret, worst_case_distribution
from ..baselines import hinf_controller, lqg_controller, ro_mf_controller
from ..benchmark import (ControllerOperators, RegretOperator, controller_operators,
                         noncausal_benchmark, regret_operator)
from ..lifting import LiftedSystem, lift_system
from ..opfactor import FactorizationSet, build_factorizations
from ..synthesis import SynthesisConfig, minimize_over_gamma
from .config import ExperimentConfig

log = logging.getLogger(__name__)

DR = "DR-RO-MF"
CSV_COLUMNS = ["radius", "controller", "regret_under_dr_wc", "own_wc_regret", "gamma_star",
               "wall_ms", "status"]
STATUS_OK = "ok"
STATUS_LQG_LIMIT = "ok-lqg-closed-form"


@dataclass
class ResultRow:
    radius: float
    controller: str
    regret_under_dr_wc: float | None
    own_wc_regret: float | None
    gamma_star: float | None
    iterations: int
    status: str
    dr_under_own_wc: float | None = None
    relative_difference_pct: float | None = None
    wall_ms: float = field(default=0.0, compare=False)

    def json_dict(self) -> dict:
        d = asdict(self)
        d.pop("wall_ms")
        return d


@dataclass
class ExperimentOutput:
    rows: list[ResultRow]
    controllers: dict[tuple[float, str], ControllerOperators]
    regret: dict[tuple[float, str], RegretOperator]
    config: ExperimentConfig


@dataclass
class _Synth:
    ctrl: ControllerOperators | None
    gamma: float | None
    iterations: int
    wall_ms: float
    status: str
    error: str = ""


def _finite(x: float) -> float | None:
    return float(x) if x is not None and math.isfinite(x) else None


def _dr_job(args) -> tuple[float, dict]:
    ss, N, r, tol, gtol, backend = args
    t0 = time.perf_counter()
    sys_ = lift_system(ss, N)
    fs = build_factorizations(sys_)
    try:
        res = minimize_over_gamma(fs, sys_, SynthesisConfig(radius=r, gamma_tol=gtol,
                                                            solver_tol=tol, backend=backend))
        status = STATUS_LQG_LIMIT if res.method == "lqg-closed-form" else STATUS_OK
        return r, dict(E=np.array(res.E_star), gamma=_finite(res.gamma_star),
                       iterations=res.iterations, status=status,
                       wall_ms=(time.perf_counter() - t0) * 1e3)
    except Exception as exc:  # recorded per row, the sweep continues
        return r, dict(E=None, gamma=None, iterations=0, status=f"failed: {exc}",
                       wall_ms=(time.perf_counter() - t0) * 1e3)


def _baselines(cfg: ExperimentConfig, fs: FactorizationSet, sys_: LiftedSystem) -> dict[str, _Synth]:
    out = {}
    makers = {
        "LQG": lambda: (lqg_controller(fs, sys_), 0),
        "HINF": lambda: (hinf_controller(sys_, fs, tol=cfg.solver_tol, backend=cfg.backend), 0),
        "RO-MF": lambda: (ro_mf_controller(fs, sys_, cfg.solver_tol, cfg.backend)[0], 0),
    }
    for tag in cfg.controllers:
        if tag == DR:
            continue
        t0 = time.perf_counter()
        try:
            ctrl, it = makers[tag]()
            out[tag] = _Synth(ctrl, None, it, (time.perf_counter() - t0) * 1e3, STATUS_OK)
        except Exception as exc:
            out[tag] = _Synth(None, None, 0, (time.perf_counter() - t0) * 1e3, "failed", str(exc))
    return out


def run_experiment(cfg: ExperimentConfig, emit: bool = True) -> ExperimentOutput:
    """Run the sweep described by ``cfg``; writes the output file if configured.

    The DR-RO-MF controller is synthesised at every radius (its worst-case
    distribution is the common yardstick), even when it is not listed among
    the controllers to report.
    """
    ss = cfg.state_space()
    sys_ = lift_system(ss, cfg.horizon)
    fs = build_factorizations(sys_)
    dim = sys_.dims.dist
    M0 = cfg.covariance(dim)
    K0 = noncausal_benchmark(sys_, fs)
    base = _baselines(cfg, fs, sys_)

    jobs = [(ss, cfg.horizon, r, cfg.solver_tol, cfg.gamma_tol, cfg.backend) for r in cfg.radii]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            dr_raw = dict(pool.map(_dr_job, jobs))
    else:
        dr_raw = dict(map(_dr_job, jobs))

    rows: list[ResultRow] = []
    controllers: dict[tuple[float, str], ControllerOperators] = {}
    regrets: dict[tuple[float, str], RegretOperator] = {}
    base_regret = {t: regret_operator(s.ctrl.T_K, K0.T_K) for t, s in base.items() if s.ctrl}
    for r in cfg.radii:
        raw = dr_raw[r]
        amb = AmbiguitySet(M0, r)
        dr_ok = raw["E"] is not None
        if dr_ok:
            dr_ctrl = controller_operators(raw["E"], sys_, DR)
            dr_C = regret_operator(dr_ctrl.T_K, K0.T_K)
            dr_wc = worst_case_distribution(dr_C, amb)
            controllers[(r, DR)] = dr_ctrl
            regrets[(r, DR)] = dr_C
        for tag in cfg.controllers:
            if tag == DR:
                if not dr_ok:
                    rows.append(ResultRow(r, DR, None, None, None, 0, raw["status"],
                                          wall_ms=raw["wall_ms"]))
                    continue
                val = dr_wc.expected_regret
                rows.append(ResultRow(r, DR, val, val, raw["gamma"], raw["iterations"],
                                      raw["status"], val, 0.0, raw["wall_ms"]))
                continue
            s = base[tag]
            if s.ctrl is None or not dr_ok:
                msg = s.status + (f": {s.error}" if s.error else "") if s.ctrl is None \
                    else "failed: no DR-RO-MF reference"
                rows.append(ResultRow(r, tag, None, None, None, s.iterations, msg,
                                      wall_ms=s.wall_ms))
                continue
            C = base_regret[tag]
            controllers[(r, tag)] = s.ctrl
            regrets[(r, tag)] = C
            own = worst_case_distribution(C, amb)
            ref = expected_regret(dr_C, own.M_star)
            pct = (own.expected_regret - ref) / own.expected_regret * 100.0
            rows.append(ResultRow(r, tag, expected_regret(C, dr_wc.M_star), own.expected_regret,
                                  _finite(own.gamma_star), s.iterations,
                                  STATUS_OK, ref, pct, s.wall_ms))
    rows.sort(key=lambda row: (row.radius, row.controller))
    out = ExperimentOutput(rows, controllers, regrets, cfg)
    if emit and cfg.output_path:
        path = Path(cfg.output_path)
        if not path.is_absolute():
            path = Path(cfg.base_dir) / path
        emit_results(rows, path, cfg.output_format, cfg)
    return out


def _fmt9(v) -> str:
    return "" if v is None else f"{v:.9g}"


def results_json(rows: list[ResultRow], cfg: ExperimentConfig | None = None) -> str:
    doc = {"config": cfg.to_dict() if cfg else None, "rows": [r.json_dict() for r in rows]}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def results_csv(rows: list[ResultRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([_fmt9(r.radius), r.controller, _fmt9(r.regret_under_dr_wc),
                    _fmt9(r.own_wc_regret), _fmt9(r.gamma_star), f"{r.wall_ms:.3f}", r.status])
    return buf.getvalue()


def emit_results(rows: list[ResultRow], path: str | Path, fmt: str = "json",
                 cfg: ExperimentConfig | None = None) -> Path:
    """Write the result table.

    ``json`` output excludes wall-clock times so that it is reproducible
    byte for byte; those go to a ``<stem>.timing.json`` sidecar.  ``csv``
    carries the fixed column set with 9 significant digits.
    """
    path = Path(path)
    if fmt == "json":
        path.write_text(results_json(rows, cfg))
        timing = [{"radius": r.radius, "controller": r.controller, "wall_ms": r.wall_ms}
                  for r in rows]
        path.with_name(path.stem + ".timing.json").write_text(json.dumps(timing, indent=2) + "\n")
    elif fmt == "csv":
        path.write_text(results_csv(rows))
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return path


def load_results(path: str | Path) -> list[ResultRow]:
    doc = json.loads(Path(path).read_text())
    return [ResultRow(**row) for row in doc["rows"]]
