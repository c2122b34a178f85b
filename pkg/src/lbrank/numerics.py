"""Numeric substrate: a dense two-phase simplex solver, piecewise-linear convex
functions, their convex conjugates and hinge decompositions.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import LBError, MalformedProgram, NotConvex

__all__ = [
    "Tolerances",
    "TOL",
    "LinearProgram",
    "LPStatus",
    "LPResult",
    "solve_lp",
    "PiecewiseLinearConvex",
    "HingeDecomposition",
    "convex_conjugate",
    "conjugate_function",
    "hinge_decompose",
]


@dataclass
class Tolerances:
    """Process-wide numeric tolerances.

    ``feasibility`` is the one overridden by the CLI ``--tol`` flag; every
    order check and contract LP reads it at call time.
    """

    feasibility: float = 1e-8
    reduced_cost: float = 1e-9
    pivot: float = 1e-11
    max_iterations: int = 50_000


TOL = Tolerances()


# ---------------------------------------------------------------------------
# Linear programming
# ---------------------------------------------------------------------------


class LPStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


@dataclass(frozen=True)
class LPResult:
    status: LPStatus
    value: float | None = None
    point: NDArray[np.float64] | None = None

    @property
    def optimal(self) -> bool:
        return self.status is LPStatus.OPTIMAL


def _as_rows(A: ArrayLike | None, b: ArrayLike | None, n: int) -> tuple[np.ndarray, np.ndarray]:
    if A is None or (np.size(A) == 0 and (b is None or np.size(b) == 0)):
        return np.zeros((0, n)), np.zeros(0)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if A.shape[1] != n:
        raise MalformedProgram(f"constraint rows have length {A.shape[1]}, expected {n}")
    if A.shape[0] != b.shape[0]:
        raise MalformedProgram(f"{A.shape[0]} constraint rows but {b.shape[0]} right-hand sides")
    return A, b


@dataclass(frozen=True)
class LinearProgram:
    """``minimize c @ x`` subject to ``A_eq @ x == b_eq``, ``A_ub @ x <= b_ub``
    and ``lower <= x <= upper``.

    Infinite bounds are given as ``-np.inf`` / ``np.inf``.  Use
    :meth:`from_rows` to build from the row-list form.
    """

    objective: NDArray[np.float64]
    A_eq: NDArray[np.float64]
    b_eq: NDArray[np.float64]
    A_ub: NDArray[np.float64]
    b_ub: NDArray[np.float64]
    lower: NDArray[np.float64]
    upper: NDArray[np.float64]

    @classmethod
    def from_arrays(
        cls,
        objective: ArrayLike,
        A_ub: ArrayLike | None = None,
        b_ub: ArrayLike | None = None,
        A_eq: ArrayLike | None = None,
        b_eq: ArrayLike | None = None,
        bounds: Sequence[tuple[float | None, float | None]] | tuple[float | None, float | None] = (0.0, None),
    ) -> "LinearProgram":
        c = np.atleast_1d(np.asarray(objective, dtype=float))
        n = c.shape[0]
        A_eq, b_eq = _as_rows(A_eq, b_eq, n)
        A_ub, b_ub = _as_rows(A_ub, b_ub, n)
        if isinstance(bounds, tuple) and len(bounds) == 2 and not isinstance(bounds[0], (tuple, list)):
            bounds = [bounds] * n
        if len(bounds) != n:
            raise MalformedProgram(f"{len(bounds)} variable bounds for {n} variables")
        lower = np.array([-np.inf if lo is None else lo for lo, _ in bounds], dtype=float)
        upper = np.array([np.inf if hi is None else hi for _, hi in bounds], dtype=float)
        if np.any(lower > upper):
            j = int(np.argmax(lower > upper))
            raise MalformedProgram(f"variable {j} has lower bound above upper bound")
        return cls(c, A_eq, b_eq, A_ub, b_ub, lower, upper)

    @classmethod
    def from_rows(
        cls,
        variable_count: int,
        objective: ArrayLike,
        equality_rows: Sequence[tuple[ArrayLike, float]] = (),
        inequality_rows: Sequence[tuple[ArrayLike, float]] = (),
        variable_bounds: Sequence[tuple[float | None, float | None]] | None = None,
    ) -> "LinearProgram":
        def stack(rows):
            for vec, _ in rows:
                if len(vec) != variable_count:
                    raise MalformedProgram(
                        f"row of length {len(vec)} in a program with {variable_count} variables"
                    )
            if not rows:
                return None, None
            return np.array([r for r, _ in rows], dtype=float), np.array([b for _, b in rows], dtype=float)

        if len(objective) != variable_count:
            raise MalformedProgram("objective length does not match variable_count")
        A_eq, b_eq = stack(list(equality_rows))
        A_ub, b_ub = stack(list(inequality_rows))
        if variable_bounds is None:
            variable_bounds = [(None, None)] * variable_count
        return cls.from_arrays(objective, A_ub, b_ub, A_eq, b_eq, list(variable_bounds))

    @property
    def variable_count(self) -> int:
        return self.objective.shape[0]

    @property
    def equality_rows(self) -> list[tuple[np.ndarray, float]]:
        return [(r, float(b)) for r, b in zip(self.A_eq, self.b_eq)]

    @property
    def inequality_rows(self) -> list[tuple[np.ndarray, float]]:
        return [(r, float(b)) for r, b in zip(self.A_ub, self.b_ub)]

    @property
    def variable_bounds(self) -> list[tuple[float, float]]:
        return list(zip(self.lower.tolist(), self.upper.tolist()))

    def max_violation(self, x: ArrayLike) -> float:
        """Largest constraint violation of ``x`` (0 when feasible)."""
        x = np.asarray(x, dtype=float)
        viol = [0.0]
        if self.A_eq.size:
            viol.append(np.max(np.abs(self.A_eq @ x - self.b_eq)))
        if self.A_ub.size:
            viol.append(np.max(self.A_ub @ x - self.b_ub))
        viol.append(np.max(self.lower - x))
        viol.append(np.max(x - self.upper))
        return float(max(viol))


class _Unbounded(Exception):
    pass


def _pivot(T: np.ndarray, r: int, j: int) -> None:
    T[r] /= T[r, j]
    col = T[:, j].copy()
    col[r] = 0.0
    nz = np.nonzero(col)[0]
    if nz.size:
        T[nz] -= np.outer(col[nz], T[r])


def _run_simplex(T: np.ndarray, basis: list[int], ncols: int) -> None:
    """Bland's-rule simplex on tableau ``T`` (last row = reduced costs, last
    column = rhs).  Only the first ``ncols`` columns may enter."""
    rc_tol = TOL.reduced_cost
    piv_tol = TOL.pivot
    for _ in range(TOL.max_iterations):
        rc = T[-1, :ncols]
        entering = np.nonzero(rc < -rc_tol)[0]
        if entering.size == 0:
            return
        j = int(entering[0])
        col = T[:-1, j]
        rows = np.nonzero(col > piv_tol)[0]
        if rows.size == 0:
            raise _Unbounded
        ratios = T[rows, -1] / col[rows]
        best = ratios.min()
        tied = rows[ratios <= best + 1e-12 * max(1.0, abs(best))]
        r = int(min(tied, key=lambda i: basis[i]))
        _pivot(T, r, j)
        basis[r] = j
    raise LBError("simplex iteration limit reached")


def solve_lp(lp: LinearProgram) -> LPResult:
    """Solve ``lp`` with a dense two-phase simplex method (Bland's rule).

    Returns an :class:`LPResult` whose status is Optimal, Infeasible or
    Unbounded.  Optimal points are re-solved from the final basis against the
    original data to limit accumulated round-off.
    """
    n = lp.variable_count
    # Substitute x = offset + M @ y with y >= 0.
    cols: list[np.ndarray] = []
    offset = np.zeros(n)
    extra_ub: list[tuple[int, float]] = []  # (y index, bound) rows y <= bound
    for j in range(n):
        lo, hi = lp.lower[j], lp.upper[j]
        e = np.zeros(n)
        if np.isfinite(lo):
            offset[j] = lo
            e[j] = 1.0
            cols.append(e)
            if np.isfinite(hi):
                extra_ub.append((len(cols) - 1, hi - lo))
        elif np.isfinite(hi):
            offset[j] = hi
            e[j] = -1.0
            cols.append(e)
        else:
            e[j] = 1.0
            cols.append(e)
            cols.append(-e)
    M = np.array(cols).T if cols else np.zeros((n, 0))
    ny = M.shape[1]

    A_ub = lp.A_ub @ M
    b_ub = lp.b_ub - lp.A_ub @ offset
    if extra_ub:
        rows = np.zeros((len(extra_ub), ny))
        for k, (idx, _) in enumerate(extra_ub):
            rows[k, idx] = 1.0
        A_ub = np.vstack([A_ub, rows])
        b_ub = np.concatenate([b_ub, [b for _, b in extra_ub]])
    A_eq = lp.A_eq @ M
    b_eq = lp.b_eq - lp.A_eq @ offset
    c = M.T @ lp.objective

    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    m = m_ub + m_eq
    nvar = ny + m_ub  # structural + slack columns
    A = np.zeros((m, nvar))
    A[:m_ub, :ny] = A_ub
    A[:m_ub, ny:] = np.eye(m_ub)
    A[m_ub:, :ny] = A_eq
    b = np.concatenate([b_ub, b_eq])
    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0

    if m == 0:
        if np.any(c < -TOL.reduced_cost):
            return LPResult(LPStatus.UNBOUNDED)
        x = offset.copy()
        return LPResult(LPStatus.OPTIMAL, float(lp.objective @ x), x)

    # Phase 1: artificial basis on every row.
    T = np.zeros((m + 1, nvar + m + 1))
    T[:m, :nvar] = A
    T[:m, nvar:nvar + m] = np.eye(m)
    T[:m, -1] = b
    T[-1, :nvar] = -A.sum(axis=0)
    T[-1, -1] = -b.sum()
    basis = list(range(nvar, nvar + m))
    _run_simplex(T, basis, nvar)
    scale = max(1.0, float(np.max(np.abs(b))))
    if -T[-1, -1] > TOL.feasibility * scale:
        return LPResult(LPStatus.INFEASIBLE)

    # Drive remaining artificials out of the basis; drop redundant rows.
    keep = []
    for r in range(m):
        if basis[r] >= nvar:
            cand = np.nonzero(np.abs(T[r, :nvar]) > 1e-9)[0]
            if cand.size:
                j = int(cand[np.argmax(np.abs(T[r, cand]))])
                _pivot(T, r, j)
                basis[r] = j
                keep.append(r)
        else:
            keep.append(r)
    T = np.vstack([T[keep][:, list(range(nvar)) + [-1]], np.zeros((1, nvar + 1))])
    basis = [basis[r] for r in keep]
    A_kept, b_kept = A[keep], b[keep]

    # Phase 2.
    cfull = np.concatenate([c, np.zeros(m_ub)])
    T[-1, :nvar] = cfull
    for r, j in enumerate(basis):
        T[-1] -= cfull[j] * T[r]
    try:
        _run_simplex(T, basis, nvar)
    except _Unbounded:
        return LPResult(LPStatus.UNBOUNDED)

    z = np.zeros(nvar)
    if basis:
        B = A_kept[:, basis]
        try:
            zb = np.linalg.solve(B, b_kept)
            if np.any(zb < -TOL.feasibility * scale):
                zb = T[:-1, -1]
        except np.linalg.LinAlgError:
            zb = T[:-1, -1]
        z[basis] = np.maximum(zb, 0.0)
    x = offset + M @ z[:ny]
    return LPResult(LPStatus.OPTIMAL, float(lp.objective @ x), x)


# ---------------------------------------------------------------------------
# Piecewise-linear convex functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PiecewiseLinearConvex:
    """Convex function given by its values at strictly increasing breakpoints.

    The function is linear between consecutive breakpoints.  ``__call__``
    extends it linearly beyond the outer breakpoints; :meth:`in_domain`
    reports whether a point lies in ``[lo, hi]``.
    """

    breakpoints: NDArray[np.float64]
    values: NDArray[np.float64]

    def __init__(self, breakpoints: ArrayLike, values: ArrayLike, *, convexity_tol: float = 1e-9):
        bp = np.atleast_1d(np.asarray(breakpoints, dtype=float)).copy()
        vals = np.atleast_1d(np.asarray(values, dtype=float)).copy()
        if bp.ndim != 1 or bp.size == 0:
            raise LBError("a piecewise-linear function needs at least one breakpoint")
        if bp.shape != vals.shape:
            raise LBError("breakpoints and values differ in length")
        if not (np.all(np.isfinite(bp)) and np.all(np.isfinite(vals))):
            raise LBError("breakpoints and values must be finite")
        if np.any(np.diff(bp) <= 0):
            raise LBError("breakpoints must be strictly increasing")
        s = np.diff(vals) / np.diff(bp)
        if s.size > 1:
            drop = np.diff(s)
            scale = max(1.0, float(np.max(np.abs(s))))
            if np.any(drop < -convexity_tol * scale):
                k = int(np.argmax(drop < -convexity_tol * scale)) + 1
                raise NotConvex(f"slope decreases at breakpoint {k} ({bp[k]!r})")
        bp.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, func, grid: ArrayLike) -> "PiecewiseLinearConvex":
        grid = np.asarray(grid, dtype=float)
        return cls(grid, [func(w) for w in grid])

    @property
    def lo(self) -> float:
        return float(self.breakpoints[0])

    @property
    def hi(self) -> float:
        return float(self.breakpoints[-1])

    @property
    def slopes(self) -> NDArray[np.float64]:
        return np.diff(self.values) / np.diff(self.breakpoints)

    def in_domain(self, w: float, tol: float = 1e-12) -> bool:
        return self.lo - tol <= w <= self.hi + tol

    def pieces(self) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        """Slopes and intercepts of the affine pieces; the function is their
        pointwise maximum.  A single-breakpoint function is one constant piece."""
        if self.breakpoints.size == 1:
            return np.zeros(1), self.values.copy()
        s = self.slopes
        return s, self.values[:-1] - s * self.breakpoints[:-1]

    def __call__(self, w):
        w_arr = np.asarray(w, dtype=float)
        s, c = self.pieces()
        out = np.max(np.multiply.outer(w_arr, s) + c, axis=-1)
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class HingeDecomposition:
    """``rho(t) = constant + base_slope * t + sum(mass * max(t - location, 0))``."""

    constant: float
    base_slope: float
    atoms: tuple[tuple[float, float], ...] = field(default_factory=tuple)

    @property
    def total_mass(self) -> float:
        return float(sum(m for _, m in self.atoms))

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        out = self.constant + self.base_slope * t_arr
        for s, m in self.atoms:
            out = out + m * np.maximum(t_arr - s, 0.0)
        return float(out) if np.ndim(out) == 0 else out


def convex_conjugate(gamma: PiecewiseLinearConvex, t):
    """``sup_{w in [lo, hi]} t*w - gamma(w)``, attained at a breakpoint."""
    t_arr = np.asarray(t, dtype=float)
    out = np.max(np.multiply.outer(t_arr, gamma.breakpoints) - gamma.values, axis=-1)
    return float(out) if out.ndim == 0 else out


def conjugate_function(gamma: PiecewiseLinearConvex) -> PiecewiseLinearConvex:
    """The conjugate of ``gamma`` as a piecewise-linear function of ``t``.

    Its kinks sit at the slopes of ``gamma``; outside them it is linear with
    slope ``lo`` (left) or ``hi`` (right), which ``__call__``'s linear
    extension reproduces exactly.
    """
    kinks = np.unique(np.round(gamma.slopes, 14)) if gamma.breakpoints.size > 1 else np.zeros(1)
    # one extra point beyond each outer kink so the end segments carry slopes lo and hi
    kinks = np.concatenate([[kinks[0] - 1.0], kinks, [kinks[-1] + 1.0]])
    return PiecewiseLinearConvex(kinks, convex_conjugate(gamma, kinks))


def hinge_decompose(rho: PiecewiseLinearConvex, *, tol: float = 1e-12) -> HingeDecomposition:
    """Write ``rho`` (extended linearly) as constant + linear + hinge atoms.

    Atoms are the slope jumps at interior breakpoints; jumps below ``tol``
    (relative to the largest slope) are dropped.
    """
    bp, vals = rho.breakpoints, rho.values
    if bp.size == 1:
        return HingeDecomposition(float(vals[0]), 0.0, ())
    s = rho.slopes
    jumps = np.diff(s)
    scale = max(1.0, float(np.max(np.abs(s))))
    if np.any(jumps < -1e-9 * scale):
        raise NotConvex("slopes decrease")
    alpha = float(s[0])
    atoms = tuple(
        (float(loc), float(mass))
        for loc, mass in zip(bp[1:-1], jumps)
        if mass > tol * scale
    )
    return HingeDecomposition(float(vals[0] - alpha * bp[0]), alpha, atoms)
