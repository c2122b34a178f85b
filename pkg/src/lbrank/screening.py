"""Screening an informed agent with transfers that condition on an ex post signal.

The agent's type is a belief over states.  A direct mechanism assigns an
alternative to each reported type and a transfer depending on the report, the
alternative and the signal.  Under alternative ``a`` the signal is observed
with probability ``psi(a)``; otherwise the outcome is the extra signal ``⊥``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import (
    BadWeight,
    DimensionMismatch,
    EnumerationLimit,
    LBError,
    NoFeasibleMechanism,
    OneSignedWitness,
)
from .experiment import FiniteExperiment, _frozen, dichotomy_reduce, full_belief
from .lborder import dichotomy_from_witness
from .numerics import LinearProgram, LPStatus, PiecewiseLinearConvex, solve_lp

__all__ = [
    "ScreeningEnv",
    "AllocationRule",
    "TransferRule",
    "Mechanism",
    "interim_utility",
    "implement_cost",
    "implement_transfers",
    "optimal_mechanism",
    "counterexample_from_witness",
]

IC_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class ScreeningEnv:
    """Types, prior over types, observation probabilities and payoffs.

    ``v1`` and ``u1`` are alternative x state matrices (principal's gross value
    and agent's utility); ``v2`` is the principal's cost of a transfer.  Types
    may be given as ``(p_1..p_n)`` or as full belief vectors.
    """

    types: NDArray[np.float64]
    type_probs: NDArray[np.float64]
    psi: NDArray[np.float64]
    v1: NDArray[np.float64]
    v2: PiecewiseLinearConvex
    u1: NDArray[np.float64]
    m_bounds: tuple[float, float]
    alternatives: tuple[str, ...]

    def __init__(
        self,
        types: Sequence[ArrayLike],
        type_probs: ArrayLike,
        psi: ArrayLike,
        v1: ArrayLike,
        v2: PiecewiseLinearConvex,
        u1: ArrayLike,
        m_bounds: tuple[float, float],
        alternatives: Sequence[str] | None = None,
    ):
        v1 = np.array(v1, dtype=float, ndmin=2)
        u1 = np.array(u1, dtype=float, ndmin=2)
        if v1.shape != u1.shape:
            raise DimensionMismatch(f"v1 is {v1.shape} but u1 is {u1.shape}")
        n_alt, n_states = v1.shape
        P = np.array([full_belief(p, n_states) for p in types])
        pi = np.atleast_1d(np.asarray(type_probs, dtype=float))
        if pi.shape != (len(P),) or np.any(pi < 0) or abs(pi.sum() - 1) > 1e-9:
            raise BadWeight("type probabilities must form a distribution over the types")
        psi = np.atleast_1d(np.asarray(psi, dtype=float))
        if psi.size == 1:
            psi = np.full(n_alt, float(psi[0]))
        if psi.shape != (n_alt,) or np.any(psi < 0) or np.any(psi > 1):
            raise BadWeight("psi needs one probability per alternative")
        lo, hi = (float(x) for x in m_bounds)
        if not lo < hi:
            raise LBError(f"transfer bounds ({lo}, {hi}) must satisfy lo < hi")
        if alternatives is None:
            alternatives = [f"a{i}" for i in range(n_alt)]
        if len(alternatives) != n_alt:
            raise DimensionMismatch("one name per alternative")
        object.__setattr__(self, "types", _frozen(P))
        object.__setattr__(self, "type_probs", _frozen(pi))
        object.__setattr__(self, "psi", _frozen(psi))
        object.__setattr__(self, "v1", _frozen(v1))
        object.__setattr__(self, "v2", v2)
        object.__setattr__(self, "u1", _frozen(u1))
        object.__setattr__(self, "m_bounds", (lo, hi))
        object.__setattr__(self, "alternatives", tuple(str(a) for a in alternatives))

    @property
    def n_types(self) -> int:
        return self.types.shape[0]

    @property
    def n_alternatives(self) -> int:
        return self.v1.shape[0]

    @property
    def n_states(self) -> int:
        return self.v1.shape[1]


@dataclass(frozen=True, eq=False)
class AllocationRule:
    """Type x alternative probabilities; deterministic rules have 0/1 rows."""

    probs: NDArray[np.float64]

    def __init__(self, choice: Sequence[int] | ArrayLike, n_alternatives: int | None = None):
        arr = np.asarray(choice)
        if arr.ndim == 1:
            if n_alternatives is None:
                n_alternatives = int(arr.max()) + 1
            P = np.zeros((arr.size, n_alternatives))
            P[np.arange(arr.size), arr.astype(int)] = 1.0
        else:
            P = np.asarray(arr, dtype=float)
            if np.any(P < 0) or np.any(np.abs(P.sum(axis=1) - 1) > 1e-9):
                raise BadWeight("allocation rows must be probability vectors")
        object.__setattr__(self, "probs", _frozen(P))

    @property
    def choice(self) -> tuple[int, ...] | None:
        """Chosen alternative per type, or None for a randomized rule."""
        if not np.all((self.probs == 0) | (self.probs == 1)):
            return None
        return tuple(int(a) for a in np.argmax(self.probs, axis=1))


@dataclass(frozen=True, eq=False)
class TransferRule:
    """Transfers indexed by (type, alternative, extended signal); the last
    signal index is ``⊥``."""

    t: NDArray[np.float64]


def _rule(env: ScreeningEnv, rule) -> AllocationRule:
    r = rule if isinstance(rule, AllocationRule) else AllocationRule(rule, env.n_alternatives)
    if r.probs.shape != (env.n_types, env.n_alternatives):
        raise DimensionMismatch(f"rule is {r.probs.shape}, expected {(env.n_types, env.n_alternatives)}")
    return r


def _extended(env: ScreeningEnv, F: FiniteExperiment) -> NDArray[np.float64]:
    """Per alternative, the state x extended-signal distribution."""
    if F.n_states != env.n_states:
        raise DimensionMismatch(f"experiment has {F.n_states} states, environment {env.n_states}")
    S = F.n_states
    return np.stack(
        [np.hstack([psi * F.matrix, np.full((S, 1), 1.0 - psi)]) for psi in env.psi]
    )


def interim_utility(env: ScreeningEnv, F: FiniteExperiment, rule, t: TransferRule, true_type: int, reported_type: int) -> float:
    """Expected utility of ``true_type`` when reporting ``reported_type``."""
    r = _rule(env, rule)
    E = _extended(env, F)
    p = env.types[true_type]
    total = 0.0
    for a in np.nonzero(r.probs[reported_type] > 0)[0]:
        gain = env.u1[a] + E[a] @ t.t[reported_type, a]
        total += r.probs[reported_type, a] * float(p @ gain)
    return total


def implement_transfers(env: ScreeningEnv, F: FiniteExperiment, rule) -> tuple[float, TransferRule | None]:
    """Cheapest transfers making truthful reporting optimal and acceptable.

    Returns ``(expected cost, transfers)``, or ``(inf, None)`` if the rule
    cannot be implemented within the transfer bounds.
    """
    r = _rule(env, rule)
    E = _extended(env, F)
    nP, nA, K = env.n_types, env.n_alternatives, F.n_signals + 1
    used = [(p, a) for p in range(nP) for a in range(nA) if r.probs[p, a] > 0]
    index = {pa: i for i, pa in enumerate(used)}
    nt = len(used) * K
    nvar = 2 * nt  # transfers, then epigraph variables for v2

    def utility_row(p_true: int, p_rep: int) -> tuple[np.ndarray, float]:
        row = np.zeros(nvar)
        const = 0.0
        belief = env.types[p_true]
        for a in range(nA):
            w = r.probs[p_rep, a]
            if w == 0:
                continue
            base = index[(p_rep, a)] * K
            row[base:base + K] += w * (belief @ E[a])
            const += w * float(belief @ env.u1[a])
        return row, const

    A_ub, b_ub = [], []
    for p in range(nP):
        own, c_own = utility_row(p, p)
        A_ub.append(-own)
        b_ub.append(c_own)
        for q in range(nP):
            if q == p:
                continue
            dev, c_dev = utility_row(p, q)
            A_ub.append(dev - own)
            b_ub.append(c_own - c_dev)

    slopes, intercepts = env.v2.pieces()
    for i in range(nt):
        for s, b in zip(slopes, intercepts):
            row = np.zeros(nvar)
            row[i], row[nt + i] = s, -1.0
            A_ub.append(row)
            b_ub.append(-b)

    weights = np.zeros(nt)
    for (p, a), i in index.items():
        weights[i * K:(i + 1) * K] = env.type_probs[p] * r.probs[p, a] * (env.types[p] @ E[a])
    c = np.concatenate([np.zeros(nt), weights])
    bounds = [env.m_bounds] * nt + [(None, None)] * nt
    res = solve_lp(LinearProgram.from_arrays(c, np.array(A_ub), np.array(b_ub), bounds=bounds))
    if res.status is not LPStatus.OPTIMAL:
        return math.inf, None

    lo, hi = env.m_bounds
    t = np.full((nP, nA, K), min(max(0.0, lo), hi))
    x = np.clip(res.point[:nt], lo, hi)
    for (p, a), i in index.items():
        t[p, a] = x[i * K:(i + 1) * K]
    # outcomes that never occur (``⊥`` when psi = 1) keep the default transfer
    impossible = ~np.any(E > 0, axis=1)
    for a in range(nA):
        t[:, a, impossible[a]] = min(max(0.0, lo), hi)
    value = float(weights @ env.v2(x)) if nt else 0.0
    return value, TransferRule(t)


def implement_cost(env: ScreeningEnv, F: FiniteExperiment, rule) -> float:
    """Minimal expected transfer cost of implementing ``rule`` (``inf`` if impossible)."""
    return implement_transfers(env, F, rule)[0]


@dataclass(frozen=True)
class Mechanism:
    value: float
    rule: AllocationRule
    transfers: TransferRule


def optimal_mechanism(env: ScreeningEnv, F: FiniteExperiment, *, limit: int = 4096) -> Mechanism:
    """Best deterministic direct mechanism, found by enumerating allocation rules.

    Rules are visited in lexicographic order and only a strict improvement
    replaces the incumbent.  Randomized rules are not searched, so the value
    is a lower bound on the supremum over all mechanisms.
    """
    count = env.n_alternatives ** env.n_types
    if count > limit:
        raise EnumerationLimit(f"{count} allocation rules exceed the limit of {limit}")
    gross = env.types @ env.v1.T  # type x alternative
    best: Mechanism | None = None
    for choice in itertools.product(range(env.n_alternatives), repeat=env.n_types):
        rule = AllocationRule(choice, env.n_alternatives)
        cost, t = implement_transfers(env, F, rule)
        if t is None:
            continue
        W = float(env.type_probs @ gross[np.arange(env.n_types), list(choice)]) - cost
        if best is None or W > best.value + 1e-12:
            best = Mechanism(W, rule, t)
    if best is None:
        raise NoFeasibleMechanism("no allocation rule can be implemented")
    return best


def counterexample_from_witness(
    G: FiniteExperiment, b: ArrayLike
) -> tuple[ScreeningEnv, AllocationRule]:
    """Two-type environment and rule implementable under ``G`` but not under
    any ``F`` with ``xi(b; F, G) < 0``.

    The sign pattern of ``b`` splits the states into two weighted blocks; each
    type believes in one block.  Payoffs are constant within a block and are
    set so that the transfers ``h`` and ``1 - h`` built from the reduced
    witness make both types exactly indifferent between reports under ``G``.
    Summing the two incentive constraints under ``F`` contradicts the
    support-function gap in the reduced direction.
    """
    b = np.asarray(b, dtype=float)
    if b.shape != (G.n_states,):
        raise DimensionMismatch(f"witness must have {G.n_states} entries")
    d = dichotomy_from_witness(b)
    B0, B1 = b[list(d.omega0)].sum(), b[list(d.omega1)].sum()
    if not (B0 < 0 < B1):
        raise OneSignedWitness("witness must have entries of both signs")
    G_red = dichotomy_reduce(G, d)
    direction = np.array([-B0, -B1])
    h = (direction @ G_red.matrix > 0).astype(float)
    z = G_red.matrix @ h
    zc = 1.0 - z

    S = G.n_states
    p0 = np.zeros(S)
    p0[list(d.omega0)] = d.w0
    p1 = np.zeros(S)
    p1[list(d.omega1)] = d.w1
    block1 = np.zeros(S, dtype=bool)
    block1[list(d.omega1)] = True
    u1 = np.empty((2, S))
    u1[0] = np.where(block1, -z[1], -z[0])
    u1[1] = np.where(block1, -zc[1], -zc[0])
    env = ScreeningEnv(
        types=[p0, p1],
        type_probs=[0.5, 0.5],
        psi=[1.0, 1.0],
        v1=np.zeros((2, S)),
        v2=PiecewiseLinearConvex([0.0, 1.0], [0.0, 0.0]),
        u1=u1,
        m_bounds=(0.0, 1.0),
    )
    return env, AllocationRule([0, 1], 2)
