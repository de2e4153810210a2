from __future__ import annotations

import numpy as np
import pytest

from drromf.expcli.presets import preset_system
from drromf.lifting import StateSpace, lift_system
from drromf.opfactor import build_factorizations
from drromf.benchmark import noncausal_benchmark


@pytest.fixture(scope="session")
def boeing():
    ss = preset_system("boeing747")
    sys_ = lift_system(ss, 10)
    fs = build_factorizations(sys_)
    K0 = noncausal_benchmark(sys_, fs)
    return ss, sys_, fs, K0


@pytest.fixture(scope="session")
def scalar3():
    ss = StateSpace(np.array([[0.5]]), np.array([[1.0]]), np.array([[1.0]]))
    sys_ = lift_system(ss, 3)
    return ss, sys_, build_factorizations(sys_)


def random_plant(rng: np.random.Generator, n: int, m: int, p: int, weighted: bool = False):
    A = rng.normal(size=(n, n))
    A *= 0.9 / max(1e-9, np.abs(np.linalg.eigvals(A)).max())
    B = rng.normal(size=(n, m))
    C = rng.normal(size=(p, n))
    Q = R = None
    if weighted:
        Mq = rng.normal(size=(n, n))
        Mr = rng.normal(size=(m, m))
        Q = Mq @ Mq.T + n * np.eye(n)
        R = Mr @ Mr.T + m * np.eye(m)
    return StateSpace(A, B, C, Q, R)


def random_causal(rng: np.random.Generator, N: int, rb: int, cb: int, scale: float = 1.0):
    E = rng.normal(size=(N * rb, N * cb)) * scale
    mask = np.kron(np.tril(np.ones((N, N))), np.ones((rb, cb))).astype(bool)
    return np.where(mask, E, 0.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def boeing_dr(boeing):
    """Memoised DR synthesis on the Boeing preset, keyed by radius."""
    from drromf.synthesis import SynthesisConfig, minimize_over_gamma

    _, sys_, fs, _ = boeing
    cache = {}

    def get(r: float):
        if r not in cache:
            cache[r] = minimize_over_gamma(fs, sys_, SynthesisConfig(radius=r))
        return cache[r]

    return get
