import itertools
import math

import numpy as np
import pytest

from lbrank.errors import EnumerationLimit, NoFeasibleMechanism, OneSignedWitness
from lbrank.experiment import FiniteExperiment, revealing, uninformative
from lbrank.lborder import lb_exact
from lbrank.numerics import PiecewiseLinearConvex
from lbrank.screening import (
    AllocationRule,
    ScreeningEnv,
    TransferRule,
    counterexample_from_witness,
    implement_cost,
    implement_transfers,
    interim_utility,
    optimal_mechanism,
)

from conftest import garbled_pair, random_experiment, random_screening_env

IDENTITY_V2 = PiecewiseLinearConvex([-5, 5], [-5, 5])


def single_type_env(u1, m=(0.0, 1.0), v1=None, psi=1.0, S=2):
    u1 = np.array(u1, dtype=float, ndmin=2)
    return ScreeningEnv(
        types=[np.full(S, 1.0 / S)],
        type_probs=[1.0],
        psi=psi,
        v1=np.zeros_like(u1) if v1 is None else v1,
        v2=PiecewiseLinearConvex([m[0], m[1]], [m[0], m[1]]),
        u1=u1,
        m_bounds=m,
    )


def test_env_accepts_short_or_full_beliefs():
    env = ScreeningEnv([[0.5], [0.2, 0.8]], [0.5, 0.5], 1.0, np.zeros((1, 2)), IDENTITY_V2, np.zeros((1, 2)), (0, 1))
    assert env.types == pytest.approx(np.array([[0.5, 0.5], [0.2, 0.8]]))
    assert env.psi.shape == (1,)


def test_allocation_rule_forms():
    r = AllocationRule([1, 0, 1], 3)
    assert r.probs.shape == (3, 3) and r.choice == (1, 0, 1)
    assert AllocationRule([[0.5, 0.5]]).choice is None


# -- interim utility --------------------------------------------------------------


def test_interim_utility_without_observation():
    env = ScreeningEnv([[0.3, 0.7]], [1.0], 0.0, [[0.2, 0.6]], IDENTITY_V2, [[0.2, 0.6]], (-1, 1))
    t = TransferRule(np.array([[[0.9, -0.9, 0.25]]]))
    for F in (revealing(2), uninformative(2, 2)):
        assert interim_utility(env, F, [0], t, 0, 0) == pytest.approx(0.3 * 0.2 + 0.7 * 0.6 + 0.25)


def test_interim_utility_degenerate_belief():
    # a type sure of theta_0 takes no expectation over states
    env = ScreeningEnv([[0.0]], [1.0], 0.5, [[1.5, 9.0]], IDENTITY_V2, [[1.5, 9.0]], (-1, 1))
    F = FiniteExperiment([[0.4, 0.6], [0.9, 0.1]])
    t = TransferRule(np.array([[[1.0, 0.0, -1.0]]]))
    assert interim_utility(env, F, [0], t, 0, 0) == pytest.approx(1.5 + 0.5 * 0.4 - 0.5)


def test_interim_utility_rewarding_the_matching_signal():
    env = ScreeningEnv([[1.0, 0.0], [0.0, 1.0]], [0.5, 0.5], 1.0, np.zeros((2, 2)), IDENTITY_V2, [[0.1, 0.2], [0.3, 0.4]], (0, 1))
    t = np.zeros((2, 2, 3))
    t[0, 0, 0] = 0.7  # type 0 is sure of state 0 and gets paid on signal 0
    t[1, 1, 1] = 0.5
    rule = AllocationRule([0, 1], 2)
    F = revealing(2)
    assert interim_utility(env, F, rule, TransferRule(t), 0, 0) == pytest.approx(0.1 + 0.7)
    assert interim_utility(env, F, rule, TransferRule(t), 1, 1) == pytest.approx(0.4 + 0.5)
    assert interim_utility(env, F, rule, TransferRule(t), 0, 1) == pytest.approx(0.3)


# -- implement_cost ------------------------------------------------------------------


def test_cost_zero_when_ir_is_slack(rng):
    env = single_type_env([[0.2, 0.1], [0.0, 0.5]], m=(-1.0, 1.0))
    env = ScreeningEnv(env.types, [1.0], 1.0, env.v1, PiecewiseLinearConvex([-1, 0, 1], [1, 0, 1]), env.u1, (-1, 1))
    for choice in ([0], [1]):
        assert implement_cost(env, random_experiment(rng, 2, 3), choice) == pytest.approx(0.0, abs=1e-12)


def test_cost_when_ir_binds(rng):
    env = single_type_env([[-1.0, -1.0]])
    assert implement_cost(env, random_experiment(rng, 2, 3), [0]) == pytest.approx(1.0)


def test_cost_infinite_when_ir_unsatisfiable(rng):
    env = single_type_env([[-2.0, -2.0]])
    cost, t = implement_transfers(env, random_experiment(rng, 2, 2), [0])
    assert cost == math.inf and t is None


def test_transfers_respect_bounds_and_constraints(rng):
    for _ in range(20):
        F = random_experiment(rng, 3, 3)
        env = random_screening_env(rng, 3, n_types=3, n_alt=2)
        choice = tuple(int(a) for a in rng.integers(0, 2, 3))
        cost, t = implement_transfers(env, F, choice)
        if t is None:
            continue
        lo, hi = env.m_bounds
        assert np.all(t.t >= lo - 1e-12) and np.all(t.t <= hi + 1e-12)
        for p in range(3):
            own = interim_utility(env, F, choice, t, p, p)
            assert own >= -1e-8
            for q in range(3):
                assert interim_utility(env, F, choice, t, p, q) <= own + 1e-8


def test_cost_matches_highs(rng):
    from scipy.optimize import linprog

    for _ in range(20):
        F = random_experiment(rng, 2, 2)
        env = random_screening_env(rng, 2, n_types=2, n_alt=2)
        choice = (0, 1)
        # variables t[p, x] for the chosen alternatives plus epigraph e[p, x]
        K = F.n_signals + 1
        E = [np.hstack([env.psi[a] * F.matrix, np.full((2, 1), 1 - env.psi[a])]) for a in range(2)]
        n = 2 * K
        A, b = [], []
        for p in range(2):
            a = choice[p]
            own = np.zeros(2 * n)
            own[p * K:(p + 1) * K] = env.types[p] @ E[a]
            A.append(-own)
            b.append(env.types[p] @ env.u1[a])
            q = 1 - p
            dev = np.zeros(2 * n)
            dev[q * K:(q + 1) * K] = env.types[p] @ E[choice[q]]
            A.append(dev - own)
            b.append(env.types[p] @ (env.u1[a] - env.u1[choice[q]]))
        s, c0 = env.v2.pieces()
        for i in range(n):
            for sj, bj in zip(s, c0):
                row = np.zeros(2 * n)
                row[i], row[n + i] = sj, -1
                A.append(row)
                b.append(-bj)
        w = np.concatenate([env.type_probs[p] * (env.types[p] @ E[choice[p]]) for p in range(2)])
        res = linprog(np.concatenate([np.zeros(n), w]), A_ub=A, b_ub=b,
                      bounds=[env.m_bounds] * n + [(None, None)] * n, method="highs")
        ref = res.fun if res.status == 0 else math.inf
        assert implement_cost(env, F, choice) == pytest.approx(ref, abs=1e-7)


def test_randomized_rule_accepted(rng):
    env = random_screening_env(rng, 2)
    F = random_experiment(rng, 2, 3)
    pure = implement_cost(env, F, AllocationRule([[1.0, 0.0], [1.0, 0.0]]))
    assert pure == pytest.approx(implement_cost(env, F, [0, 0]))
    assert np.isfinite(implement_cost(env, F, AllocationRule([[0.5, 0.5], [0.5, 0.5]])))


def test_unobserved_signal_makes_experiments_irrelevant(rng):
    for _ in range(10):
        env = random_screening_env(rng, 3, psi=np.zeros(2))
        F, G = random_experiment(rng, 3, 2), random_experiment(rng, 3, 4)
        for choice in itertools.product(range(2), repeat=2):
            a, b = implement_cost(env, F, choice), implement_cost(env, G, choice)
            assert a == b or a == pytest.approx(b, abs=1e-9)


# -- optimal mechanism -------------------------------------------------------------------


def test_optimal_mechanism_picks_valuable_alternative(rng):
    env = ScreeningEnv([[0.5, 0.5]], [1.0], 1.0, [[0, 0], [1, 1]], PiecewiseLinearConvex([-1, 0, 1], [1, 0, 1]),
                       [[0.1, 0.1], [0.2, 0.2]], (-1, 1))
    mech = optimal_mechanism(env, random_experiment(rng, 2, 3))
    assert mech.value == pytest.approx(1.0)
    assert mech.rule.choice == (1,)
    assert mech.transfers.t == pytest.approx(0.0, abs=1e-12)


def test_no_feasible_mechanism(rng):
    env = single_type_env([[-2.0, -2.0], [-3.0, -3.0]])
    with pytest.raises(NoFeasibleMechanism):
        optimal_mechanism(env, random_experiment(rng, 2, 2))


def test_enumeration_limit(rng):
    env = random_screening_env(rng, 2, n_types=5, n_alt=3)
    with pytest.raises(EnumerationLimit):
        optimal_mechanism(env, random_experiment(rng, 2, 2), limit=200)


def test_value_reduces_to_cost_without_gross_value(rng):
    for _ in range(10):
        env = random_screening_env(rng, 2, n_types=2, n_alt=2)
        env = ScreeningEnv(env.types, env.type_probs, env.psi, np.zeros((2, 2)), env.v2, env.u1, env.m_bounds)
        F = random_experiment(rng, 2, 3)
        costs = [implement_cost(env, F, c) for c in itertools.product(range(2), repeat=2)]
        assert optimal_mechanism(env, F).value == pytest.approx(-min(costs))


def test_ties_keep_the_first_rule(rng):
    env = single_type_env([[0.5, 0.5], [0.5, 0.5]])
    assert optimal_mechanism(env, random_experiment(rng, 2, 2)).rule.choice == (0,)


# -- comparisons -------------------------------------------------------------------------


def test_garbling_lowers_cost_and_raises_value(rng):
    for _ in range(25):
        S = int(rng.integers(2, 4))
        F, G = garbled_pair(rng, S, 3, 3)
        env = random_screening_env(rng, S, n_types=2, n_alt=2)
        for choice in itertools.product(range(2), repeat=2):
            assert implement_cost(env, F, choice) <= implement_cost(env, G, choice) + 1e-8
        try:
            wG = optimal_mechanism(env, G).value
        except NoFeasibleMechanism:
            continue
        assert optimal_mechanism(env, F).value >= wG - 1e-8


def test_witness_counterexample(rng):
    found = 0
    while found < 25:
        S = int(rng.integers(2, 5))
        F, G = random_experiment(rng, S, 3), random_experiment(rng, S, 3)
        v = lb_exact(F, G)
        if v.holds:
            continue
        found += 1
        env, rule = counterexample_from_witness(G, v.witness)
        assert implement_cost(env, G, rule) < math.inf
        assert implement_cost(env, F, rule) == math.inf


def test_counterexample_needs_both_signs():
    with pytest.raises(OneSignedWitness):
        counterexample_from_witness(revealing(2), np.array([1.0, 0.5]))
