"""Experiment configuration: JSON schema, validation and round-trip.

Schema (all keys except ``radii`` optional)::

    {
      "system": "boeing747" | {"A": [[..]], "B": [[..]], "C": [[..]],
                               "Q": [[..]], "R": [[..]]},
      "horizon": 10,
      "radii": [0, 0.2, ...],
      "controllers": ["DR-RO-MF", "LQG", "HINF", "RO-MF"],
      "nominal_covariance": "identity" | {"file": "m0.json"},
      "seed": 0,
      "output": {"path": "results.json", "format": "json" | "csv"},
      "tolerances": {"solver": 1e-8, "gamma": 1e-4},
      "backend": "clarabel" | "cvxopt",
      "workers": 1
    }

Matrices are nested row-major arrays.  A covariance file is either JSON
(nested arrays) or ``.npy``; relative paths resolve against the config file.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from ..lifting import StateSpace
from .presets import PRESETS, preset_system

CONTROLLER_TAGS = ("DR-RO-MF", "LQG", "HINF", "RO-MF")
FORMATS = ("json", "csv")


class ConfigError(ValueError):
    """Schema violation; ``path`` names the offending field."""

    def __init__(self, path: str, msg: str):
        super().__init__(f"{path}: {msg}")
        self.path = path


def _matrix(value: Any, path: str) -> list[list[float]]:
    if not isinstance(value, list) or not value:
        raise ConfigError(path, "expected a non-empty list of rows")
    rows = []
    width = None
    for i, row in enumerate(value):
        if not isinstance(row, list) or not row:
            raise ConfigError(f"{path}[{i}]", "expected a non-empty list of numbers")
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise ConfigError(f"{path}[{i}]", f"ragged row: length {len(row)}, expected {width}")
        out = []
        for j, v in enumerate(row):
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ConfigError(f"{path}[{i}][{j}]", f"expected a finite number, got {v!r}")
            out.append(float(v))
        rows.append(out)
    return rows


@dataclass
class ExperimentConfig:
    system: str | dict = "boeing747"
    horizon: int = 10
    radii: list[float] = field(default_factory=list)
    controllers: list[str] = field(default_factory=lambda: list(CONTROLLER_TAGS))
    nominal_covariance: str | dict = "identity"
    seed: int = 0
    output_path: str | None = None
    output_format: str = "json"
    solver_tol: float = 1e-8
    gamma_tol: float = 1e-4
    backend: str = "clarabel"
    workers: int = 1
    base_dir: str = field(default=".", compare=False)

    def __post_init__(self):
        validate(self.to_dict(), self)

    def state_space(self) -> StateSpace:
        if isinstance(self.system, str):
            return preset_system(self.system)
        s = self.system
        return StateSpace(np.array(s["A"]), np.array(s["B"]), np.array(s["C"]),
                          None if s.get("Q") is None else np.array(s["Q"]),
                          None if s.get("R") is None else np.array(s["R"]))

    def covariance(self, dim: int) -> np.ndarray:
        if self.nominal_covariance == "identity":
            return np.eye(dim)
        path = Path(self.nominal_covariance["file"])
        if not path.is_absolute():
            path = Path(self.base_dir) / path
        if path.suffix == ".npy":
            M = np.load(path)
        else:
            M = np.array(_matrix(json.loads(path.read_text()), "nominal_covariance.file"))
        if M.shape != (dim, dim):
            raise ConfigError("nominal_covariance.file", f"expected {dim}x{dim}, got {M.shape}")
        return M

    def to_dict(self) -> dict:
        return {
            "system": self.system,
            "horizon": self.horizon,
            "radii": list(self.radii),
            "controllers": list(self.controllers),
            "nominal_covariance": self.nominal_covariance,
            "seed": self.seed,
            "output": {"path": self.output_path, "format": self.output_format},
            "tolerances": {"solver": self.solver_tol, "gamma": self.gamma_tol},
            "backend": self.backend,
            "workers": self.workers,
        }

    @classmethod
    def from_dict(cls, data: Any, base_dir: str | Path = ".") -> "ExperimentConfig":
        kw = parse(data)
        return cls(**kw, base_dir=str(base_dir))


def _number(v: Any, path: str, minimum: float | None = None, positive: bool = False) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(path, f"expected a finite number, got {v!r}")
    if minimum is not None and v < minimum:
        raise ConfigError(path, f"must be >= {minimum}, got {v!r}")
    if positive and v <= 0:
        raise ConfigError(path, f"must be positive, got {v!r}")
    return float(v)


def _integer(v: Any, path: str, minimum: int) -> int:
    if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
        raise ConfigError(path, f"expected an integer >= {minimum}, got {v!r}")
    return v


KNOWN_KEYS = {"system", "horizon", "radii", "controllers", "nominal_covariance", "seed",
              "output", "tolerances", "backend", "workers"}


def parse(data: Any) -> dict:
    """Validate a decoded JSON document and return constructor keywords."""
    if not isinstance(data, dict):
        raise ConfigError("$", "config must be a JSON object")
    unknown = sorted(set(data) - KNOWN_KEYS)
    if unknown:
        raise ConfigError(unknown[0], "unknown field")
    kw: dict[str, Any] = {}
    system = data.get("system", "boeing747")
    if isinstance(system, str):
        if system not in PRESETS:
            raise ConfigError("system", f"unknown preset {system!r}")
        kw["system"] = system
    elif isinstance(system, dict):
        sysd = {}
        for key in ("A", "B", "C"):
            if key not in system:
                raise ConfigError(f"system.{key}", "missing matrix")
        for key in system:
            if key not in ("A", "B", "C", "Q", "R"):
                raise ConfigError(f"system.{key}", "unknown field")
            sysd[key] = _matrix(system[key], f"system.{key}")
        try:
            StateSpace(*(np.array(sysd[k]) for k in ("A", "B", "C")),
                       *(np.array(sysd[k]) if k in sysd else None for k in ("Q", "R")))
        except ValueError as exc:
            raise ConfigError("system", str(exc)) from None
        kw["system"] = sysd
    else:
        raise ConfigError("system", "expected a preset name or an object of matrices")
    kw["horizon"] = _integer(data.get("horizon", 10), "horizon", 1)
    radii = data.get("radii")
    if not isinstance(radii, list) or not radii:
        raise ConfigError("radii", "expected a non-empty list of nonnegative numbers")
    kw["radii"] = sorted(_number(r, f"radii[{i}]", minimum=0.0) for i, r in enumerate(radii))
    ctrls = data.get("controllers", list(CONTROLLER_TAGS))
    if not isinstance(ctrls, list) or not ctrls:
        raise ConfigError("controllers", "expected a non-empty list")
    for i, c in enumerate(ctrls):
        if c not in CONTROLLER_TAGS:
            raise ConfigError(f"controllers[{i}]", f"unknown controller {c!r}")
    kw["controllers"] = [c for c in CONTROLLER_TAGS if c in ctrls]
    cov = data.get("nominal_covariance", "identity")
    if cov != "identity":
        if not isinstance(cov, dict) or set(cov) != {"file"} or not isinstance(cov["file"], str):
            raise ConfigError("nominal_covariance", 'expected "identity" or {"file": path}')
    kw["nominal_covariance"] = cov
    kw["seed"] = _integer(data.get("seed", 0), "seed", 0)
    out = data.get("output", {})
    if not isinstance(out, dict):
        raise ConfigError("output", "expected an object")
    for key in out:
        if key not in ("path", "format"):
            raise ConfigError(f"output.{key}", "unknown field")
    path = out.get("path")
    if path is not None and not isinstance(path, str):
        raise ConfigError("output.path", "expected a string")
    fmt = out.get("format", "json")
    if fmt not in FORMATS:
        raise ConfigError("output.format", f"expected one of {FORMATS}")
    kw["output_path"], kw["output_format"] = path, fmt
    tols = data.get("tolerances", {})
    if not isinstance(tols, dict):
        raise ConfigError("tolerances", "expected an object")
    for key in tols:
        if key not in ("solver", "gamma"):
            raise ConfigError(f"tolerances.{key}", "unknown field")
    kw["solver_tol"] = _number(tols.get("solver", 1e-8), "tolerances.solver", positive=True)
    kw["gamma_tol"] = _number(tols.get("gamma", 1e-4), "tolerances.gamma", positive=True)
    backend = data.get("backend", "clarabel")
    if backend not in ("clarabel", "cvxopt"):
        raise ConfigError("backend", f"unknown backend {backend!r}")
    kw["backend"] = backend
    kw["workers"] = _integer(data.get("workers", 1), "workers", 1)
    return kw


def validate(data: dict, cfg: ExperimentConfig | None = None) -> None:
    kw = parse(data)
    if cfg is not None:
        # normalise (sorted radii, canonical controller order)
        cfg.radii = kw["radii"]
        cfg.controllers = kw["controllers"]


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("$", f"invalid JSON: {exc}") from None
    return ExperimentConfig.from_dict(data, base_dir=path.parent)


def dump_config(cfg: ExperimentConfig, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
    return path


