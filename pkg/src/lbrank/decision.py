"""Finite decision problems and the value of information."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import (
    BadBelief,
    DimensionMismatch,
    LBError,
    NoMatch,
    NotBinary,
    NotQCC,
    StateMismatch,
)
from .experiment import FiniteExperiment, _frozen, full_belief
from .lborder import is_quasi_monotone
from .numerics import TOL, LinearProgram, solve_lp

__all__ = [
    "DecisionProblem",
    "Strategy",
    "QCCResult",
    "expected_payoff",
    "value",
    "ex_ante_value",
    "is_qcc",
    "is_lsc",
    "binary_decompose",
    "statewise_payoffs",
    "match_strategy",
]

QCC_TOL = 1e-9
TIE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class DecisionProblem:
    """Actions ``a_0..a_k`` with payoff ``u(a, theta)`` stored action x state."""

    payoff: NDArray[np.float64]
    actions: tuple[str, ...]

    def __init__(self, payoff: ArrayLike, actions: Sequence[str] | None = None):
        u = np.array(payoff, dtype=float, ndmin=2)
        if u.ndim != 2 or u.shape[1] < 1:
            raise DimensionMismatch("payoff must be an action x state matrix")
        if not np.all(np.isfinite(u)):
            raise LBError("payoffs must be finite")
        if actions is None:
            actions = [f"a{i}" for i in range(u.shape[0])]
        actions = tuple(str(a) for a in actions)
        if len(actions) != u.shape[0] or len(set(actions)) != len(actions):
            raise DimensionMismatch("action names must be distinct, one per payoff row")
        object.__setattr__(self, "payoff", _frozen(u))
        object.__setattr__(self, "actions", actions)

    @property
    def n_actions(self) -> int:
        return self.payoff.shape[0]

    @property
    def n_states(self) -> int:
        return self.payoff.shape[1]


@dataclass(frozen=True, eq=False)
class Strategy:
    """Signal x action matrix of mixed actions."""

    rule: NDArray[np.float64]

    def __init__(self, rule: ArrayLike):
        r = np.array(rule, dtype=float, ndmin=2)
        if np.any(r < -1e-12) or np.any(np.abs(r.sum(axis=1) - 1.0) > 1e-9):
            raise LBError("strategy rows must be probability vectors")
        object.__setattr__(self, "rule", _frozen(np.clip(r, 0.0, None)))

    @classmethod
    def pure(cls, choices: Sequence[int], n_actions: int) -> "Strategy":
        """One action per signal."""
        r = np.zeros((len(choices), n_actions))
        r[np.arange(len(choices)), list(choices)] = 1.0
        return cls(r)


def _belief(dp: DecisionProblem, p) -> np.ndarray:
    return full_belief(p, dp.n_states, error=BadBelief)


def expected_payoff(dp: DecisionProblem, a: int, p) -> float:
    return float(dp.payoff[a] @ _belief(dp, p))


def value(dp: DecisionProblem, p) -> tuple[float, frozenset[int]]:
    """Best expected payoff at belief ``p`` and every action attaining it."""
    scores = dp.payoff @ _belief(dp, p)
    best = float(scores.max())
    return best, frozenset(int(i) for i in np.nonzero(scores >= best - TIE_TOL)[0])


def ex_ante_value(dp: DecisionProblem, F: FiniteExperiment, q) -> float:
    """Expected value of acting optimally after observing ``F``'s signal."""
    if dp.n_states != F.n_states:
        raise StateMismatch(f"decision problem has {dp.n_states} states, experiment {F.n_states}")
    joint = full_belief(q, F.n_states)[:, None] * F.matrix
    # marginal * V(posterior) = max_a u(a) . joint column
    return float(np.max(dp.payoff @ joint, axis=0).sum())


@dataclass(frozen=True)
class QCCResult:
    holds: bool
    triple: tuple[int, int, int] | None = None
    belief: NDArray[np.float64] | None = None
    margin: float = 0.0

    def __bool__(self) -> bool:
        return self.holds


def _triple_margin(u: np.ndarray, i: int, j: int, l: int) -> tuple[float, np.ndarray]:
    """max m s.t. (u_i - u_j).p >= m, (u_l - u_j).p >= m, p in the simplex."""
    S = u.shape[1]
    c = np.zeros(S + 1)
    c[-1] = -1.0
    A_ub = np.zeros((2, S + 1))
    A_ub[0, :S] = -(u[i] - u[j])
    A_ub[1, :S] = -(u[l] - u[j])
    A_ub[:, -1] = 1.0
    A_eq = np.concatenate([np.ones(S), [0.0]])[None, :]
    bounds = [(0.0, None)] * S + [(None, None)]
    res = solve_lp(LinearProgram.from_arrays(c, A_ub, np.zeros(2), A_eq, [1.0], bounds))
    return -res.value, res.point[:S]


def is_qcc(dp: DecisionProblem) -> QCCResult:
    """Quasi-concavity of expected payoff in the ordered action, at every belief.

    A triple ``i < j < l`` violates it when some belief makes ``a_j`` strictly
    worse than both ``a_i`` and ``a_l``; the certificate is the first such
    triple together with the maximizing belief (full vector).
    """
    u = dp.payoff
    for i, j, l in itertools.combinations(range(dp.n_actions), 3):
        m, p = _triple_margin(u, i, j, l)
        if m > QCC_TOL:
            return QCCResult(False, (i, j, l), p, m)
    return QCCResult(True)


def is_lsc(dp: DecisionProblem) -> bool:
    """Every incremental payoff vector ``u(a_i) - u(a_{i-1})`` is quasi-monotone."""
    return all(is_quasi_monotone(d) for d in np.diff(dp.payoff, axis=0))


def binary_decompose(dp: DecisionProblem) -> list[DecisionProblem]:
    """Split a QCC problem into two-action problems whose values add up.

    Subproblem 0 is ``{a_0, a_1}`` with the original payoffs; subproblem ``i``
    compares a zero payoff for ``a_i`` with ``u(a_{i+1}) - u(a_i)``.
    """
    if dp.n_actions <= 2:
        return [dp]
    cert = is_qcc(dp)
    if not cert:
        raise NotQCC(f"actions {cert.triple} violate quasi-concavity")
    u, names = dp.payoff, dp.actions
    parts = [DecisionProblem(u[:2], names[:2])]
    for i in range(1, dp.n_actions - 1):
        parts.append(
            DecisionProblem(np.vstack([np.zeros(dp.n_states), u[i + 1] - u[i]]), names[i:i + 2])
        )
    return parts


def statewise_payoffs(dp: DecisionProblem, F: FiniteExperiment, s: Strategy) -> NDArray[np.float64]:
    """Expected payoff of strategy ``s`` in each state."""
    if s.rule.shape != (F.n_signals, dp.n_actions):
        raise DimensionMismatch(
            f"strategy is {s.rule.shape}, expected {(F.n_signals, dp.n_actions)}"
        )
    if dp.n_states != F.n_states:
        raise DimensionMismatch("decision problem and experiment disagree on the states")
    return np.einsum("tx,xa,at->t", F.matrix, s.rule, dp.payoff)


def match_strategy(
    F: FiniteExperiment, G: FiniteExperiment, dp: DecisionProblem, sG: Strategy
) -> Strategy:
    """Strategy under ``F`` reproducing the statewise action probabilities of
    ``sG`` under ``G`` in a binary problem.

    Solves for ``h: signals -> [0, 1]`` with ``M_F h = M_G h_G`` where ``h_G``
    is the probability ``sG`` assigns to ``a_0``.
    """
    if dp.n_actions != 2:
        raise NotBinary(f"expected two actions, got {dp.n_actions}")
    if F == G:
        return sG
    target = G.matrix @ sG.rule[:, 0]
    S, k = F.n_states, F.n_signals
    # variables: h (k), s_plus (S), s_minus (S); minimize the L1 residual
    c = np.concatenate([np.zeros(k), np.ones(2 * S)])
    A_eq = np.hstack([F.matrix, -np.eye(S), np.eye(S)])
    bounds = [(0.0, 1.0)] * k + [(0.0, None)] * (2 * S)
    res = solve_lp(LinearProgram.from_arrays(c, A_eq=A_eq, b_eq=target, bounds=bounds))
    h = np.clip(res.point[:k], 0.0, 1.0)
    if np.max(np.abs(F.matrix @ h - target)) > TOL.feasibility:
        raise NoMatch("no strategy under F reproduces these statewise action probabilities")
    return Strategy(np.column_stack([h, 1.0 - h]))
