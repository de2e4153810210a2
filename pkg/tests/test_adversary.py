from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from drromf.adversary import (AmbiguitySet, DegenerateOperatorError, budget, cross_evaluate,
                              dual_value, expected_cost, expected_regret,
                              regret_operator_from_matrix, sample_disturbances,
                              worst_case_distribution, worst_case_gamma)
from drromf.baselines import lqg_controller
from drromf.benchmark import regret_operator, transfer_operator

from conftest import random_causal


def random_symmetric(rng, d):
    M = rng.normal(size=(d, d))
    return 0.5 * (M + M.T)


def random_psd(rng, d):
    M = rng.normal(size=(d, d))
    return M @ M.T / d + 0.05 * np.eye(d)


def test_two_eigenvalue_example():
    C = np.diag([1.0, -1.0])
    g = worst_case_gamma(C, AmbiguitySet.identity(2, 0.5590170))
    assert abs(g - 3.0) < 1e-6
    assert abs(budget(3.0, np.array([1.0, -1.0]), np.ones(2)) - 0.3125) < 1e-15


@pytest.mark.parametrize("c", [0.3, 1.0, 7.5])
@pytest.mark.parametrize("r", [0.01, 0.5, 2.0, 100.0])
def test_scalar_closed_form(c, r):
    g = worst_case_gamma(np.array([[c]]), AmbiguitySet.identity(1, r))
    expected = c * (1.0 + 1.0 / r)
    assert abs(g - expected) <= 1e-10 * expected


def test_radius_zero_and_small():
    C = np.diag([2.0, 0.5, -1.0])
    assert math.isinf(worst_case_gamma(C, AmbiguitySet.identity(3, 0.0)))
    wc = worst_case_distribution(C, AmbiguitySet.identity(3, 0.0))
    np.testing.assert_array_equal(wc.D, np.eye(3))
    assert wc.nominal
    g_small = worst_case_gamma(C, AmbiguitySet.identity(3, 1e-6))
    assert g_small > 1e5
    wc = worst_case_distribution(C, AmbiguitySet.identity(3, 1e-6))
    assert np.abs(wc.D - np.eye(3)).max() < 1e-5


def test_isotropic_closed_form():
    d, c, r = 6, 2.5, 0.7
    wc = worst_case_distribution(c * np.eye(d), AmbiguitySet.identity(d, r))
    np.testing.assert_allclose(wc.D, wc.gamma_star / (wc.gamma_star - c) * np.eye(d), atol=1e-12)
    np.testing.assert_allclose(wc.M_star, (1 + r / math.sqrt(d)) ** 2 * np.eye(d), atol=1e-10)


def test_degenerate_operator(boeing):
    _, _, _, K0 = boeing
    C = regret_operator(K0.T_K, K0.T_K)
    with pytest.raises(DegenerateOperatorError):
        worst_case_gamma(C, AmbiguitySet.identity(60, 1.0))
    with pytest.raises(DegenerateOperatorError):
        worst_case_distribution(np.zeros((3, 3)), AmbiguitySet.identity(3, 1.0))


def test_ambiguity_set_validation():
    with pytest.raises(ValueError):
        AmbiguitySet(np.eye(2), -1.0)
    with pytest.raises(ValueError):
        AmbiguitySet(-np.eye(2), 1.0)
    with pytest.raises(ValueError):
        AmbiguitySet(np.array([[1.0, 1.0], [0.0, 1.0]]), 1.0)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 100_000), d=st.integers(4, 20), r=st.floats(0.01, 50.0))
def test_worst_case_dual_oracle(seed, d, r):
    rng = np.random.default_rng(seed)
    C = random_symmetric(rng, d)
    M0 = random_psd(rng, d)
    amb = AmbiguitySet(M0, r)
    wc = worst_case_distribution(C, amb)
    lam = np.linalg.eigvalsh(C)
    assert wc.gamma_star > max(0.0, lam[-1])
    Dm = wc.D - np.eye(d)
    h = np.trace(Dm @ M0 @ Dm.T)
    assert abs(h - r * r) <= 1e-8 * r * r
    primal = np.trace(C @ wc.M_star)
    assert abs(wc.dual_value - primal) <= 1e-6 * max(1.0, abs(primal))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 100_000), d=st.integers(2, 12))
def test_budget_strictly_decreasing(seed, d):
    rng = np.random.default_rng(seed)
    lam = np.sort(rng.normal(size=d))
    w = rng.uniform(0.1, 2.0, size=d)
    lo = max(0.0, lam[-1])
    gs = lo + np.logspace(-6, 4, 200)
    hv = np.array([budget(g, lam, w) for g in gs])
    assert np.all(np.diff(hv) < 0)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 100_000), d=st.integers(2, 10))
def test_dual_is_minimised_at_root(seed, d):
    rng = np.random.default_rng(seed)
    C = random_symmetric(rng, d)
    amb = AmbiguitySet(random_psd(rng, d), float(rng.uniform(0.1, 3.0)))
    g = worst_case_gamma(C, amb)
    v = dual_value(g, C, amb)
    for f in (1.0 + 1e-3, 1.01, 1.5):
        assert dual_value(g * f, C, amb) >= v - 1e-9 * abs(v)
        lower = max(np.linalg.eigvalsh(C)[-1], 0.0)
        gl = lower + (g - lower) / f
        assert dual_value(gl, C, amb) >= v - 1e-9 * abs(v)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 100_000), d=st.integers(2, 10))
def test_worst_case_value_nondecreasing_in_radius(seed, d):
    rng = np.random.default_rng(seed)
    C = random_symmetric(rng, d)
    vals = [worst_case_distribution(C, AmbiguitySet.identity(d, r)).expected_regret
            for r in (0.0, 0.1, 0.5, 1.0, 4.0, 16.0)]
    assert all(b >= a - 1e-9 * max(1.0, abs(a)) for a, b in zip(vals, vals[1:]))


def test_negative_definite_operator():
    C = -np.diag([1.0, 2.0, 3.0])
    amb = AmbiguitySet.identity(3, 0.5)
    wc = worst_case_distribution(C, amb)
    assert wc.gamma_star > 0
    Dm = wc.D - np.eye(3)
    assert abs(np.trace(Dm @ Dm) - 0.25) < 1e-10
    assert worst_case_gamma(C, AmbiguitySet.identity(3, 10.0)) == 0.0


def test_expected_regret_and_cost(boeing, rng):
    _, sys_, fs, K0 = boeing
    E = random_causal(rng, 10, 2, 2, 0.2)
    T = transfer_operator(E, sys_)
    C = regret_operator(T, K0.T_K)
    assert expected_regret(C, np.zeros((60, 60))) == 0.0
    Z = fs.z_of(E)
    assert abs(expected_regret(C, np.eye(60)) - np.sum(Z ** 2)) < 1e-8 * np.sum(Z ** 2)
    assert abs(expected_cost(T, np.eye(60)) - np.sum(T ** 2)) < 1e-10 * np.sum(T ** 2)


def test_monte_carlo_regret(boeing):
    _, sys_, fs, K0 = boeing
    C = regret_operator(lqg_controller(fs, sys_).T_K, K0.T_K)
    Sigma = worst_case_distribution(C, AmbiguitySet.identity(60, 2.0)).M_star
    X = sample_disturbances(Sigma, 100_000, seed=7)
    q = np.einsum("ij,jk,ik->i", X, C.C_K, X)
    se = q.std(ddof=1) / math.sqrt(q.size)
    assert abs(q.mean() - expected_regret(C, Sigma)) <= 3 * se


def test_sampling():
    assert not sample_disturbances(np.zeros((3, 3)), 5).any()
    X = sample_disturbances(np.eye(4), 100_000, seed=3)
    assert np.abs(np.cov(X.T) - np.eye(4)).max() < 0.05
    np.testing.assert_array_equal(sample_disturbances(np.eye(4), 10, seed=11),
                                  sample_disturbances(np.eye(4), 10, seed=11))
    with pytest.raises(ValueError):
        sample_disturbances(-np.eye(2), 3)
    with pytest.raises(ValueError):
        sample_disturbances(np.eye(2), 0)


def test_cross_evaluate_reference_zero(rng):
    ops = {k: regret_operator_from_matrix(random_symmetric(rng, 6) + 0.5 * np.eye(6))
           for k in ("a", "b", "c")}
    rows = cross_evaluate(ops, AmbiguitySet.identity(6, 1.0), "b")
    by = {r.tag: r for r in rows}
    assert by["b"].relative_difference_pct == 0.0
    assert by["b"].own_wc_regret == by["b"].regret_under_reference_wc
    with pytest.raises(KeyError):
        cross_evaluate(ops, AmbiguitySet.identity(6, 1.0), "zzz")
