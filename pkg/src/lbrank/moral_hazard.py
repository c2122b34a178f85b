"""Implementing a target action of an agent who privately picks a mixture of
states, by paying a utility scheme contingent on the realized signal.

The agent chooses ``delta`` in the simplex ``{delta_i >= 0, sum delta_i <= 1}``
(``delta_0 = 1 - sum delta_i``), bears cost ``c(delta)`` and receives utility
``w(x)``; the principal pays ``gamma(w)``.  The primal problem is an LP in
``w`` once ``gamma`` is piecewise linear, and its Lagrangian dual is written
with the convex conjugate ``rho`` of ``gamma``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DegenerateInput, DimensionMismatch, LBError, ZeroBaseDensity
from .experiment import FiniteExperiment, _frozen
from .numerics import (
    TOL,
    LinearProgram,
    LPStatus,
    PiecewiseLinearConvex,
    convex_conjugate,
    solve_lp,
)

__all__ = [
    "MoralHazardEnv",
    "TargetAction",
    "ICRow",
    "Constraints",
    "SchemeSolution",
    "DualSolution",
    "cost",
    "cost_gradient",
    "build_constraints",
    "implementable",
    "min_disutility",
    "dual_value",
    "dual_solve",
    "build_gamma",
    "counterexample_from_witness",
]

BOUNDARY_TOL = 1e-12
BINDING_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class MoralHazardEnv:
    """Utility bounds, quadratic cost ``0.5 d'Qd + l'd + c0`` and disutility ``gamma``."""

    u_bounds: tuple[float, float]
    cost_Q: NDArray[np.float64]
    cost_l: NDArray[np.float64]
    gamma: PiecewiseLinearConvex
    cost_c0: float = 0.0

    def __init__(self, u_bounds, cost_Q: ArrayLike, cost_l: ArrayLike, gamma, cost_c0: float = 0.0):
        lo, hi = (float(x) for x in u_bounds)
        if lo > hi:
            raise DegenerateInput(f"utility bounds ({lo}, {hi}) are reversed")
        Q = np.array(cost_Q, dtype=float, ndmin=2)
        l = np.atleast_1d(np.asarray(cost_l, dtype=float))
        if Q.shape != (l.size, l.size):
            raise DimensionMismatch(f"Q is {Q.shape} but l has {l.size} entries")
        if not np.allclose(Q, Q.T, atol=1e-12):
            raise DegenerateInput("cost matrix Q must be symmetric")
        if l.size and np.linalg.eigvalsh(Q).min() < -1e-9:
            raise DegenerateInput("cost matrix Q must be positive semidefinite")
        if abs(gamma.lo - lo) > 1e-12 or abs(gamma.hi - hi) > 1e-12:
            raise DegenerateInput("the domain of gamma must equal the utility bounds")
        object.__setattr__(self, "u_bounds", (lo, hi))
        object.__setattr__(self, "cost_Q", _frozen(Q))
        object.__setattr__(self, "cost_l", _frozen(l))
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "cost_c0", float(cost_c0))

    @property
    def n(self) -> int:
        return self.cost_l.size


@dataclass(frozen=True, eq=False)
class TargetAction:
    """A point ``(delta_1..delta_n)`` of the simplex; ``delta_0`` is implied."""

    delta: NDArray[np.float64]

    def __init__(self, delta: ArrayLike):
        d = np.atleast_1d(np.asarray(delta, dtype=float))
        if np.any(d < -BOUNDARY_TOL) or d.sum() > 1 + BOUNDARY_TOL:
            raise LBError(f"target {d.tolist()} is outside the simplex")
        object.__setattr__(self, "delta", _frozen(np.clip(d, 0.0, 1.0)))

    @property
    def full(self) -> NDArray[np.float64]:
        return np.concatenate([[max(0.0, 1.0 - self.delta.sum())], self.delta])

    @property
    def interior_flag(self) -> bool:
        return bool(np.all(self.delta > BOUNDARY_TOL) and self.delta.sum() < 1 - BOUNDARY_TOL)


def _target(delta, n: int) -> TargetAction:
    t = delta if isinstance(delta, TargetAction) else TargetAction(np.zeros(n) if delta is None else delta)
    if t.delta.size != n:
        raise DimensionMismatch(f"target has {t.delta.size} coordinates, expected {n}")
    return t


def cost(env: MoralHazardEnv, delta) -> float:
    d = _target(delta, env.n).delta
    return float(0.5 * d @ env.cost_Q @ d + env.cost_l @ d + env.cost_c0)


def cost_gradient(env: MoralHazardEnv, delta) -> NDArray[np.float64]:
    d = _target(delta, env.n).delta
    return env.cost_Q @ d + env.cost_l


@dataclass(frozen=True)
class ICRow:
    """``coeffs . w  (sense)  rhs`` with sense ``"=="`` or ``"<="``."""

    tag: str
    coeffs: NDArray[np.float64]
    sense: str
    rhs: float


@dataclass(frozen=True)
class Constraints:
    """IR is ``ir_coeffs . w >= ir_rhs``; ``ir_coeffs`` is the signal
    distribution at the target."""

    ir_coeffs: NDArray[np.float64]
    ir_rhs: float
    ic: tuple[ICRow, ...]


def build_constraints(env: MoralHazardEnv, F: FiniteExperiment, delta) -> Constraints:
    """Participation and first-order incentive constraints at ``delta``.

    Local deviations are moves of probability mass between states.  The
    reference state is ``theta_0`` while it carries mass; otherwise (the top
    face) it is the first state in the support.  A deviation towards a state
    inside the support is two-sided and gives an equality; one towards a state
    outside it only needs a weak inequality.
    """
    if F.n_states != env.n + 1:
        raise DimensionMismatch(f"experiment has {F.n_states} states, environment {env.n + 1}")
    t = _target(delta, env.n)
    full = t.full
    M = F.matrix
    g = np.concatenate([[0.0], cost_gradient(env, t)])
    support = full > BOUNDARY_TOL
    r = 0 if support[0] else int(np.argmax(support))
    rows = []
    for i in range(F.n_states):
        if i == r:
            continue
        sense = "==" if support[i] else "<="
        rows.append(ICRow(f"IC{i}", M[i] - M[r], sense, float(g[i] - g[r])))
    return Constraints(full @ M, cost(env, t), tuple(rows))


def _constraint_arrays(con: Constraints, k: int, n_extra: int = 0):
    """LP rows over ``[w, extra...]``."""
    pad = np.zeros(n_extra)
    A_ub = [np.concatenate([-con.ir_coeffs, pad])]
    b_ub = [-con.ir_rhs]
    A_eq, b_eq = [], []
    for row in con.ic:
        vec = np.concatenate([row.coeffs, pad])
        if row.sense == "==":
            A_eq.append(vec)
            b_eq.append(row.rhs)
        else:
            A_ub.append(vec)
            b_ub.append(row.rhs)
    width = k + n_extra
    return (
        np.array(A_ub).reshape(-1, width), np.array(b_ub),
        np.array(A_eq).reshape(-1, width), np.array(b_eq),
    )


def implementable(env: MoralHazardEnv, F: FiniteExperiment, delta) -> bool:
    """Whether some scheme with values in the utility bounds satisfies IR and IC."""
    con = build_constraints(env, F, delta)
    k = F.n_signals
    A_ub, b_ub, A_eq, b_eq = _constraint_arrays(con, k)
    lp = LinearProgram.from_arrays(np.zeros(k), A_ub, b_ub, A_eq, b_eq, [env.u_bounds] * k)
    return solve_lp(lp).status is LPStatus.OPTIMAL


@dataclass(frozen=True)
class SchemeSolution:
    w: NDArray[np.float64]
    disutility: float
    binding: frozenset[str]


def _binding(con: Constraints, w: np.ndarray, bounds: tuple[float, float]) -> frozenset[str]:
    tags = set()
    if con.ir_coeffs @ w - con.ir_rhs <= BINDING_TOL:
        tags.add("IR")
    for row in con.ic:
        if row.sense == "==" or row.rhs - row.coeffs @ w <= BINDING_TOL:
            tags.add(row.tag)
    for j, x in enumerate(w):
        if x - bounds[0] <= BINDING_TOL:
            tags.add(f"lower{j}")
        if bounds[1] - x <= BINDING_TOL:
            tags.add(f"upper{j}")
    return frozenset(tags)


def min_disutility(env: MoralHazardEnv, F: FiniteExperiment, delta) -> SchemeSolution | float:
    """Cheapest scheme implementing ``delta``, or ``inf`` if none exists.

    ``gamma`` enters through epigraph variables ``z_j >= gamma(w_j)``, one per
    signal, so the problem stays linear.
    """
    con = build_constraints(env, F, delta)
    k = F.n_signals
    slopes, intercepts = env.gamma.pieces()
    A_ub, b_ub, A_eq, b_eq = _constraint_arrays(con, k, n_extra=k)
    epi = []
    for j in range(k):
        for s, b in zip(slopes, intercepts):
            row = np.zeros(2 * k)
            row[j], row[k + j] = s, -1.0
            epi.append((row, -b))
    A_ub = np.vstack([A_ub, [r for r, _ in epi]])
    b_ub = np.concatenate([b_ub, [b for _, b in epi]])
    c = np.concatenate([np.zeros(k), con.ir_coeffs])
    bounds = [env.u_bounds] * k + [(None, None)] * k
    res = solve_lp(LinearProgram.from_arrays(c, A_ub, b_ub, A_eq, b_eq, bounds))
    if res.status is not LPStatus.OPTIMAL:
        return math.inf
    w = np.clip(res.point[:k], *env.u_bounds)
    return SchemeSolution(w, float(con.ir_coeffs @ env.gamma(w)), _binding(con, w, env.u_bounds))


def _dual_parts(env: MoralHazardEnv, F: FiniteExperiment, delta):
    con = build_constraints(env, F, delta)
    f = con.ir_coeffs
    zero = np.nonzero(f <= 0)[0]
    if zero.size:
        j = int(zero[0])
        raise ZeroBaseDensity(f"signal {j} has zero probability at the target", index=j)
    A = np.array([row.coeffs for row in con.ic]).reshape(-1, F.n_signals)
    r = np.array([row.rhs for row in con.ic])
    free = np.array([row.sense == "==" for row in con.ic], dtype=bool)
    return con, f, A, r, free


def dual_value(env: MoralHazardEnv, F: FiniteExperiment, delta=None, lam: float = 0.0, mu: ArrayLike = ()) -> float:
    """Lagrangian dual function at multipliers ``(lam, mu)``.

    ``K = lam c - mu . r - sum_j f_j rho((lam f_j - sum_k mu_k a_kj) / f_j)``
    where ``f`` is the signal distribution at the target and ``a_k . w <= r_k``
    (or ``==``) are the incentive rows.  At ``delta = 0`` the argument of
    ``rho`` is ``lam + sum_i mu_i (1 - l_i)`` with likelihood ratios ``l_i``.
    """
    con, f, A, r, free = _dual_parts(env, F, delta)
    mu = np.atleast_1d(np.asarray(mu, dtype=float)) if np.size(mu) else np.zeros(len(r))
    if mu.size != len(r):
        raise DimensionMismatch(f"{mu.size} multipliers for {len(r)} incentive rows")
    if lam < 0 or np.any(mu[~free] < 0):
        raise LBError("multipliers of inequality rows must be nonnegative")
    t = lam - (mu @ A) / f
    return float(lam * con.ir_rhs - mu @ r - f @ convex_conjugate(env.gamma, t))


@dataclass(frozen=True)
class DualSolution:
    value: float
    lam: float
    mu: NDArray[np.float64]


def dual_solve(env: MoralHazardEnv, F: FiniteExperiment, delta=None) -> DualSolution:
    """Maximize the dual function.

    Since ``rho`` is a maximum of finitely many affine functions, the dual is
    itself an LP in ``(lam, mu, tau)`` with ``tau_j >= t_j w_b - gamma(w_b)``
    at every breakpoint ``w_b``.  An unbounded dual (infeasible primal) gives
    ``value = inf``.
    """
    con, f, A, r, free = _dual_parts(env, F, delta)
    k, m = F.n_signals, len(r)
    bp, gv = env.gamma.breakpoints, env.gamma.values
    # variables: lam, mu (m), tau (k); minimize -(lam c - mu.r - f.tau)
    c = np.concatenate([[-con.ir_rhs], r, f])
    rows, rhs = [], []
    for j in range(k):
        for wb, gb in zip(bp, gv):
            row = np.zeros(1 + m + k)
            row[0] = wb
            row[1:1 + m] = -A[:, j] * wb / f[j]
            row[1 + m + j] = -1.0
            rows.append(row)
            rhs.append(gb)
    bounds = [(0.0, None)] + [(None, None) if fr else (0.0, None) for fr in free] + [(None, None)] * k
    res = solve_lp(LinearProgram.from_arrays(c, np.array(rows), np.array(rhs), bounds=bounds))
    if res.status is LPStatus.UNBOUNDED:
        return DualSolution(math.inf, math.nan, np.full(m, np.nan))
    lam = max(0.0, float(res.point[0]))
    mu = res.point[1:1 + m].copy()
    mu[~free] = np.clip(mu[~free], 0.0, None)
    return DualSolution(dual_value(env, F, delta, lam, mu), lam, mu)


def build_gamma(payments: ArrayLike, u_of_s: ArrayLike, v_of_s: ArrayLike):
    """Lower convex envelope of the attainable (utility, cost) pairs.

    Returns ``(gamma, (u_lo, u_hi))`` with ``gamma`` defined on the range of
    utilities.
    """
    s = np.atleast_1d(np.asarray(payments, dtype=float))
    u = np.atleast_1d(np.asarray(u_of_s, dtype=float))
    v = np.atleast_1d(np.asarray(v_of_s, dtype=float))
    if s.size == 0 or not (s.shape == u.shape == v.shape):
        raise DegenerateInput("payment, utility and cost grids must be nonempty and aligned")
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
        raise DegenerateInput("utility and cost values must be finite")
    order = np.lexsort((v, u))
    u, v = u[order], v[order]
    keep = np.concatenate([[True], np.diff(u) > 0])  # lowest v per distinct u
    u, v = u[keep], v[keep]
    hull: list[int] = []
    for i in range(u.size):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            cross = (u[b] - u[a]) * (v[i] - v[a]) - (v[b] - v[a]) * (u[i] - u[a])
            if cross <= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    gamma = PiecewiseLinearConvex(u[hull], v[hull])
    return gamma, (gamma.lo, gamma.hi)


def counterexample_from_witness(
    G: FiniteExperiment, b: ArrayLike
) -> tuple[MoralHazardEnv, TargetAction]:
    """Environment and interior target implementable under ``G`` but under no
    experiment ``F`` with ``xi(b; F, G) < 0``.

    ``b`` is oriented so that ``sum b >= 0``; ``h`` is the indicator of
    ``b . g_x > 0`` and ``z = M_G h``.  The cost is linear with
    ``c_i(delta) = z_i - z_0`` and ``c(delta*) = sum_i delta*_i z_i``, so
    ``w = h`` implements the barycenter under ``G`` with IR binding.  Under
    ``F`` any implementing scheme would have ``M_F w = z + kappa`` with
    ``kappa >= 0``, contradicting ``b . M_F w <= h_F(b) < b . z``.
    """
    b = np.asarray(b, dtype=float)
    if b.shape != (G.n_states,):
        raise DimensionMismatch(f"witness must have {G.n_states} entries")
    if b.sum() < 0:
        b = -b
    h = (b @ G.matrix > 0).astype(float)
    z = G.matrix @ h
    n = G.n_states - 1
    target = TargetAction(np.full(n, 1.0 / (n + 1)))
    slope = z[1:] - z[0]
    c0 = float(target.full @ z - slope @ target.delta)
    gamma = PiecewiseLinearConvex([0.0, 1.0], [0.0, 1.0])
    env = MoralHazardEnv((0.0, 1.0), np.zeros((n, n)), slope, gamma, c0)
    return env, target
