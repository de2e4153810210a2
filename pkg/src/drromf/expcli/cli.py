"""Command-line entry point.

Subcommands: ``synthesize``, ``sweep``, ``worst-case``, ``export-sdp``.
Run ``drromf <command> --help`` for options.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..adversary import AmbiguitySet, worst_case_distribution
from ..baselines import hinf_controller, lqg_controller, ro_mf_controller
from ..benchmark import from_controller, noncausal_benchmark, regret_operator
from ..lifting import lift_system
from ..opfactor import build_factorizations, gamma_operators
from ..sdpcore import write_standard_form
from ..synthesis import (SynthesisConfig, assemble_dr_lmi, assemble_dr_lmi_compact,
                         minimize_over_gamma)
from .config import CONTROLLER_TAGS, ConfigError, ExperimentConfig, load_config
from .experiment import run_experiment

log = logging.getLogger("drromf")


def _system_config(args) -> ExperimentConfig:
    if getattr(args, "config", None):
        return load_config(args.config)
    return ExperimentConfig(system=args.preset, horizon=args.horizon, radii=[0.0])


def _matrix_json(M: np.ndarray) -> list:
    return np.asarray(M).tolist()


def cmd_synthesize(args) -> int:
    cfg = _system_config(args)
    sys_ = lift_system(cfg.state_space(), cfg.horizon)
    fs = build_factorizations(sys_)
    extra = {}
    if args.controller == "DR-RO-MF":
        res = minimize_over_gamma(fs, sys_, SynthesisConfig(radius=args.radius,
                                                            solver_tol=cfg.solver_tol,
                                                            gamma_tol=cfg.gamma_tol,
                                                            backend=cfg.backend))
        ctrl = res.controller
        extra = {"gamma_star": res.gamma_star if np.isfinite(res.gamma_star) else None,
                 "objective": res.objective, "route": res.method}
    elif args.controller == "LQG":
        ctrl = lqg_controller(fs, sys_)
    elif args.controller == "HINF":
        ctrl = hinf_controller(sys_, fs, tol=cfg.solver_tol, backend=cfg.backend)
    else:
        ctrl, g = ro_mf_controller(fs, sys_, cfg.solver_tol, cfg.backend)
        extra = {"gamma_ro": g}
    doc = {
        "controller": args.controller,
        "radius": args.radius,
        "system": cfg.to_dict()["system"],
        "horizon": cfg.horizon,
        "K": _matrix_json(ctrl.K),
        "E": _matrix_json(ctrl.E),
        "causal": ctrl.causal_flag,
        **extra,
    }
    if args.operators:
        doc["operators"] = {k: _matrix_json(getattr(sys_, k)) for k in ("F", "G", "J", "L")}
        doc["T_K"] = _matrix_json(ctrl.T_K)
    _write_json(doc, args.out)
    return 0


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    if args.out:
        cfg.output_path = str(Path(args.out).resolve())
        cfg.output_format = args.format or ("csv" if args.out.endswith(".csv") else "json")
    elif args.format:
        cfg.output_format = args.format
    if args.workers:
        cfg.workers = args.workers
    out = run_experiment(cfg)
    if not cfg.output_path:
        from .experiment import results_csv, results_json
        sys.stdout.write(results_json(out.rows, cfg) if cfg.output_format == "json"
                         else results_csv(out.rows))
    failed = [r for r in out.rows if r.status.startswith("failed")]
    return 1 if failed else 0


def cmd_worst_case(args) -> int:
    doc = json.loads(Path(args.controller_file).read_text())
    cfg = ExperimentConfig(system=doc["system"], horizon=doc["horizon"], radii=[args.radius])
    sys_ = lift_system(cfg.state_space(), cfg.horizon)
    fs = build_factorizations(sys_)
    ctrl = from_controller(np.array(doc["K"]), sys_)
    C = regret_operator(ctrl.T_K, noncausal_benchmark(sys_, fs).T_K)
    wc = worst_case_distribution(C, AmbiguitySet.identity(sys_.dims.dist, args.radius))
    out = {"radius": args.radius,
           "gamma_star": wc.gamma_star if np.isfinite(wc.gamma_star) else None,
           "expected_regret": wc.expected_regret, "dual_value": wc.dual_value,
           "D": _matrix_json(wc.D), "M_star": _matrix_json(wc.M_star)}
    _write_json(out, args.out)
    return 0


def cmd_export_sdp(args) -> int:
    cfg = _system_config(args)
    sys_ = lift_system(cfg.state_space(), cfg.horizon)
    fs = build_factorizations(sys_)
    gops = gamma_operators(fs, args.gamma)
    make = assemble_dr_lmi if args.form == "full" else assemble_dr_lmi_compact
    sdp = make(gops, fs, args.radius)
    write_standard_form(sdp, args.out, f"DR-RO-MF {args.form} program, gamma={args.gamma!r}, "
                                       f"r={args.radius!r}")
    log.info("wrote %s (%s)", args.out, sdp.dimensions())
    return 0


def _write_json(doc: dict, out: str | None) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _add_system_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="experiment config JSON (system, horizon, tolerances)")
    p.add_argument("--preset", default="boeing747", help="plant preset (default: boeing747)")
    p.add_argument("--horizon", type=int, default=10, help="horizon N (default: 10)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="drromf",
                                 description="Distributionally robust regret-optimal "
                                             "measurement-feedback control synthesis")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synthesize", help="synthesise one controller at one radius")
    _add_system_args(p)
    p.add_argument("--controller", choices=CONTROLLER_TAGS, default="DR-RO-MF")
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--operators", action="store_true", help="also dump F, G, J, L and T_K")
    p.add_argument("--out", help="output JSON file (default: stdout)")
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("sweep", help="run a full experiment from a config file")
    p.add_argument("config")
    p.add_argument("--out", help="override the output path")
    p.add_argument("--format", choices=("json", "csv"))
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("worst-case", help="worst-case distribution for a saved controller")
    p.add_argument("controller_file", help="JSON written by 'synthesize'")
    p.add_argument("--radius", type=float, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_worst_case)

    p = sub.add_parser("export-sdp", help="write the fixed-gamma program in SDPA format")
    _add_system_args(p)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--radius", type=float, required=True)
    p.add_argument("--form", choices=("full", "compact"), default="full")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_sdp)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
