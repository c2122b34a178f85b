import numpy as np
import pytest

from lbrank.experiment import FiniteExperiment, Garbling, apply_garbling
from lbrank.numerics import PiecewiseLinearConvex

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def random_experiment(rng, n_states, n_signals, concentration=0.7):
    return FiniteExperiment(rng.dirichlet(np.full(n_signals, concentration), size=n_states))


def random_kernel(rng, k_in, k_out, concentration=0.7):
    return Garbling(rng.dirichlet(np.full(k_out, concentration), size=k_in))


def garbled_pair(rng, n_states, k_in, k_out):
    F = random_experiment(rng, n_states, k_in)
    return F, apply_garbling(F, random_kernel(rng, k_in, k_out))


def random_convex_pl(rng, lo=0.0, hi=1.0, n_points=None):
    """Random convex piecewise-linear function on [lo, hi]."""
    n_points = n_points or int(rng.integers(2, 7))
    bp = np.sort(rng.uniform(lo, hi, n_points))
    bp[0], bp[-1] = lo, hi
    bp = np.unique(bp)
    slopes = np.sort(rng.normal(size=bp.size - 1))
    values = np.concatenate([[rng.normal()], np.cumsum(slopes * np.diff(bp))])
    values[1:] += values[0]
    return PiecewiseLinearConvex(bp, values)


def random_qcc_payoff(rng, n_actions, n_states):
    """Payoffs whose increments change sign at most once, from + to -, at
    every belief: each increment is a positive multiple of the previous one
    minus a nonnegative vector."""
    u = np.empty((n_actions, n_states))
    u[0] = rng.normal(size=n_states)
    d = rng.normal(size=n_states)
    for i in range(1, n_actions):
        u[i] = u[i - 1] + d
        d = rng.uniform(0.2, 1.5) * d - rng.exponential(0.3, size=n_states)
    return u


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")


def random_mh_instance(rng, G, interior=True):
    """Environment in which a random scheme implements a random target under ``G``."""
    from lbrank.moral_hazard import MoralHazardEnv, TargetAction

    n = G.n_states - 1
    full = rng.dirichlet(np.ones(n + 1)) if interior else np.eye(n + 1)[0]
    delta = TargetAction(full[1:])
    A = rng.normal(size=(n, n)) * 0.3
    Q = A @ A.T
    w_hat = rng.uniform(0, 1, G.n_signals)
    grad = (G.matrix[1:] - G.matrix[0]) @ w_hat
    if not interior:
        grad = grad + rng.uniform(0, 0.3, n)  # deviations are strictly unattractive
    l = grad - Q @ delta.delta
    f = full @ G.matrix
    c_at = f @ w_hat - rng.uniform(0, 0.2)
    c0 = c_at - 0.5 * delta.delta @ Q @ delta.delta - l @ delta.delta
    gamma = random_convex_pl(rng, 0.0, 1.0)
    return MoralHazardEnv((0.0, 1.0), Q, l, gamma, c0), delta


def random_screening_env(rng, S, n_types=2, n_alt=2, psi=None):
    """Random environment whose transfers can absorb moderate utility gaps."""
    from lbrank.screening import ScreeningEnv

    types = rng.dirichlet(np.ones(S), size=n_types)
    return ScreeningEnv(
        types=types,
        type_probs=rng.dirichlet(np.ones(n_types)),
        psi=rng.uniform(0.3, 1.0, n_alt) if psi is None else psi,
        v1=rng.uniform(0, 1, (n_alt, S)),
        v2=random_convex_pl(rng, -1.0, 2.0),
        u1=rng.uniform(-0.5, 0.5, (n_alt, S)),
        m_bounds=(-1.0, 2.0),
    )
