"""Finite experiments over a finite state space and their transforms."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import (
    BadDichotomy,
    BadWeight,
    DegenerateGrid,
    DimensionMismatch,
    EmptySignalSet,
    LBError,
    NegativeEntry,
    NotAPermutation,
    RowSumError,
    StateMismatch,
    ZeroBaseDensity,
    ZeroMarginal,
)

__all__ = [
    "StateSpace",
    "FiniteExperiment",
    "GridExperiment",
    "Prior",
    "WeightedDichotomy",
    "Garbling",
    "validate",
    "posterior",
    "likelihood_ratios",
    "posterior_mean_distribution",
    "product",
    "mixture",
    "dichotomy_reduce",
    "relabel",
    "apply_garbling",
    "is_irredundant",
    "discretize",
    "trapezoid_weights",
    "full_belief",
    "uninformative",
    "revealing",
    "noisy_revealing_pair",
]

ROW_TOL = 1e-9


@dataclass(frozen=True)
class StateSpace:
    """Ordered state labels; index 0 is the baseline state."""

    labels: tuple[str, ...]

    def __init__(self, labels: Sequence[str]):
        labels = tuple(str(s) for s in labels)
        if len(labels) < 2:
            raise LBError("a state space needs at least two states")
        if len(set(labels)) != len(labels):
            raise LBError("state labels must be distinct")
        object.__setattr__(self, "labels", labels)

    @classmethod
    def default(cls, size: int) -> "StateSpace":
        return cls([f"theta{i}" for i in range(size)])

    @property
    def n(self) -> int:
        """Number of non-baseline states."""
        return len(self.labels) - 1

    def __len__(self) -> int:
        return len(self.labels)


def _frozen(a: ArrayLike) -> NDArray[np.float64]:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


def _check_stochastic(matrix: np.ndarray, tol: float, what: str = "row") -> None:
    if matrix.ndim != 2 or matrix.shape[1] == 0:
        raise EmptySignalSet("an experiment needs at least one signal")
    neg = np.argwhere(matrix < 0)
    if neg.size:
        i, j = map(int, neg[0])
        raise NegativeEntry(f"negative entry {matrix[i, j]!r} at ({i}, {j})", index=i)
    sums = matrix.sum(axis=1)
    bad = np.nonzero(np.abs(sums - 1.0) > tol)[0]
    if bad.size:
        i = int(bad[0])
        raise RowSumError(f"{what} {i} sums to {sums[i]!r}", index=i)


@dataclass(frozen=True, eq=False)
class FiniteExperiment:
    """Row-stochastic likelihood matrix: ``matrix[i, j] = P(signal j | state i)``.

    The columns are the likelihood vectors of the signals.  Construction
    validates the invariants unless ``check=False``.
    """

    states: StateSpace
    signals: tuple[str, ...]
    matrix: NDArray[np.float64]

    def __init__(
        self,
        matrix: ArrayLike,
        states: StateSpace | Sequence[str] | None = None,
        signals: Sequence[str] | None = None,
        *,
        check: bool = True,
    ):
        mat = np.atleast_2d(np.array(matrix, dtype=float))
        if states is None:
            states = StateSpace.default(mat.shape[0])
        elif not isinstance(states, StateSpace):
            states = StateSpace(states)
        if signals is None:
            signals = [f"x{j}" for j in range(mat.shape[1])]
        signals = tuple(str(s) for s in signals)
        if len(states) != mat.shape[0]:
            raise DimensionMismatch(f"{len(states)} states but {mat.shape[0]} matrix rows")
        if len(signals) != mat.shape[1]:
            raise DimensionMismatch(f"{len(signals)} signals but {mat.shape[1]} matrix columns")
        if len(set(signals)) != len(signals):
            raise LBError("signal names must be distinct")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "signals", signals)
        object.__setattr__(self, "matrix", _frozen(mat))
        if check:
            validate(self)

    @property
    def n_states(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_signals(self) -> int:
        return self.matrix.shape[1]

    @property
    def columns(self) -> NDArray[np.float64]:
        """Likelihood vectors, one row per signal."""
        return self.matrix.T

    def mixed_row(self, weights: ArrayLike) -> NDArray[np.float64]:
        """Signal distribution under a mixture of states (full weight vector)."""
        return np.asarray(weights, dtype=float) @ self.matrix

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FiniteExperiment):
            return NotImplemented
        return (
            self.states == other.states
            and self.signals == other.signals
            and self.matrix.shape == other.matrix.shape
            and bool(np.array_equal(self.matrix, other.matrix))
        )

    def __hash__(self) -> int:
        return hash((self.states, self.signals, self.matrix.tobytes()))

    def __repr__(self) -> str:
        return f"FiniteExperiment({self.n_states} states x {self.n_signals} signals)"


def validate(F: FiniteExperiment) -> None:
    """Raise if ``F`` is not row-stochastic with at least one signal."""
    _check_stochastic(np.asarray(F.matrix), ROW_TOL)


@dataclass(frozen=True)
class Prior:
    """Prior over states given by ``q = (q_1, ..., q_n)``; ``q_0`` is implied."""

    q: NDArray[np.float64]

    def __init__(self, q: ArrayLike):
        arr = np.atleast_1d(np.array(q, dtype=float))
        if np.any(arr < -1e-12) or arr.sum() > 1 + 1e-12:
            raise LBError(f"prior {arr.tolist()} is outside the simplex")
        object.__setattr__(self, "q", _frozen(np.clip(arr, 0.0, None)))

    @classmethod
    def uniform(cls, n_states: int) -> "Prior":
        return cls(np.full(n_states - 1, 1.0 / n_states))

    @property
    def q0(self) -> float:
        return max(0.0, 1.0 - float(self.q.sum()))

    def full(self) -> NDArray[np.float64]:
        return np.concatenate([[self.q0], self.q])


def full_belief(p, n_states: int, error=LBError) -> NDArray[np.float64]:
    """Normalize a belief given as ``(p_1..p_n)`` or a full ``(p_0..p_n)``."""
    if isinstance(p, Prior):
        arr = p.full()
    else:
        arr = np.atleast_1d(np.asarray(p, dtype=float))
        if arr.shape[0] == n_states - 1:
            arr = np.concatenate([[1.0 - arr.sum()], arr])
        elif arr.shape[0] != n_states:
            raise error(f"belief of length {arr.shape[0]} for {n_states} states")
    if arr.shape[0] != n_states:
        raise error(f"belief of length {arr.shape[0]} for {n_states} states")
    if np.any(arr < -1e-12) or abs(arr.sum() - 1.0) > 1e-9:
        raise error(f"belief {arr.tolist()} is outside the simplex")
    return np.clip(arr, 0.0, None)


def posterior(F: FiniteExperiment, q, signal_index: int) -> NDArray[np.float64]:
    """Posterior probabilities of ``theta_1..theta_n`` after ``signal_index``."""
    qf = full_belief(q, F.n_states)
    joint = qf * F.matrix[:, signal_index]
    marginal = joint.sum()
    if marginal <= 0:
        raise ZeroMarginal(f"signal {signal_index} has zero probability under the prior", index=signal_index)
    return joint[1:] / marginal


def likelihood_ratios(F: FiniteExperiment, base: int = 0) -> list[NDArray[np.float64]]:
    """Per signal, the vector ``f(x|theta_i) / f(x|theta_base)`` for ``i != base``."""
    row = F.matrix[base]
    zero = np.nonzero(row <= 0)[0]
    if zero.size:
        j = int(zero[0])
        raise ZeroBaseDensity(f"signal {j} has zero probability in the base state", index=j)
    others = [i for i in range(F.n_states) if i != base]
    ratios = F.matrix[others] / row
    return [ratios[:, j].copy() for j in range(F.n_signals)]


def posterior_mean_distribution(F: FiniteExperiment, q, phi: ArrayLike) -> list[tuple[float, float]]:
    """Distribution of the posterior expectation of ``phi`` (one entry per state).

    Returns ``(value, probability)`` atoms sorted by value, merging values
    closer than 1e-12.
    """
    qf = full_belief(q, F.n_states)
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (F.n_states,):
        raise DimensionMismatch(f"phi must have one entry per state ({F.n_states})")
    joint = qf[:, None] * F.matrix
    marginals = joint.sum(axis=0)
    atoms = []
    for j in np.nonzero(marginals > 0)[0]:
        atoms.append((float(phi @ joint[:, j] / marginals[j]), float(marginals[j])))
    atoms.sort()
    merged: list[list[float]] = []
    for v, pr in atoms:
        if merged and abs(v - merged[-1][0]) < 1e-12:
            merged[-1][1] += pr
        else:
            merged.append([v, pr])
    return [(v, pr) for v, pr in merged]


def _same_states(F1: FiniteExperiment, F2: FiniteExperiment) -> None:
    if F1.states != F2.states:
        raise StateMismatch("experiments are defined on different state spaces")


def product(F1: FiniteExperiment, F2: FiniteExperiment) -> FiniteExperiment:
    """Two conditionally independent signals; pairs ordered row-major."""
    _same_states(F1, F2)
    mat = np.einsum("ij,ik->ijk", F1.matrix, F2.matrix).reshape(F1.n_states, -1)
    names = [f"{a}&{b}" for a, b in itertools.product(F1.signals, F2.signals)]
    return FiniteExperiment(mat, F1.states, names)


def mixture(F1: FiniteExperiment, F2: FiniteExperiment, t: float) -> FiniteExperiment:
    """Observe ``F1`` with probability ``t`` and ``F2`` otherwise (disjoint signals)."""
    _same_states(F1, F2)
    if not 0.0 <= t <= 1.0:
        raise BadWeight(f"mixture weight {t!r} is outside [0, 1]")
    mat = np.hstack([t * F1.matrix, (1.0 - t) * F2.matrix])
    names = [f"1:{s}" for s in F1.signals] + [f"2:{s}" for s in F2.signals]
    return FiniteExperiment(mat, F1.states, names)


@dataclass(frozen=True)
class WeightedDichotomy:
    """Partition of the states into two blocks with a weight vector on each."""

    omega0: tuple[int, ...]
    omega1: tuple[int, ...]
    w0: NDArray[np.float64]
    w1: NDArray[np.float64]

    def __init__(self, omega0: Sequence[int], omega1: Sequence[int], w0: ArrayLike, w1: ArrayLike):
        object.__setattr__(self, "omega0", tuple(int(i) for i in omega0))
        object.__setattr__(self, "omega1", tuple(int(i) for i in omega1))
        object.__setattr__(self, "w0", _frozen(np.atleast_1d(w0)))
        object.__setattr__(self, "w1", _frozen(np.atleast_1d(w1)))
        for block, w in ((self.omega0, self.w0), (self.omega1, self.w1)):
            if not block:
                raise BadDichotomy("both blocks must be nonempty")
            if len(block) != w.shape[0]:
                raise BadDichotomy("weight vector length differs from block size")
            if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
                raise BadDichotomy("block weights must be nonnegative and sum to 1")

    def check(self, n_states: int) -> None:
        idx = sorted(self.omega0 + self.omega1)
        if idx != list(range(n_states)):
            raise BadDichotomy(f"blocks do not partition the {n_states} states")

    def weights(self, n_states: int) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        """Full-length weight vectors of the two blocks."""
        self.check(n_states)
        a, b = np.zeros(n_states), np.zeros(n_states)
        a[list(self.omega0)] = self.w0
        b[list(self.omega1)] = self.w1
        return a, b


def dichotomy_reduce(F: FiniteExperiment, d: WeightedDichotomy) -> FiniteExperiment:
    a, b = d.weights(F.n_states)
    return FiniteExperiment(np.vstack([a @ F.matrix, b @ F.matrix]), ["omega0", "omega1"], F.signals)


def relabel(F: FiniteExperiment, beta: Sequence[int]) -> FiniteExperiment:
    """Relabel states: the state at position ``i`` moves to position ``beta[i]``.

    State labels stay in place (they name ordinal positions).
    """
    beta = [int(b) for b in beta]
    if sorted(beta) != list(range(F.n_states)):
        raise NotAPermutation(f"{beta} is not a permutation of {F.n_states} states")
    mat = np.empty_like(F.matrix)
    mat[beta] = F.matrix
    return FiniteExperiment(mat, F.states, F.signals)


@dataclass(frozen=True)
class Garbling:
    """Row-stochastic kernel from source signals to target signals."""

    kernel: NDArray[np.float64]

    def __init__(self, kernel: ArrayLike):
        k = np.atleast_2d(np.array(kernel, dtype=float))
        _check_stochastic(k, ROW_TOL)
        object.__setattr__(self, "kernel", _frozen(k))

    def then(self, other: "Garbling") -> "Garbling":
        return Garbling(self.kernel @ other.kernel)


def apply_garbling(F: FiniteExperiment, k: Garbling, signals: Sequence[str] | None = None) -> FiniteExperiment:
    kern = k.kernel if isinstance(k, Garbling) else Garbling(k).kernel
    if kern.shape[0] != F.n_signals:
        raise DimensionMismatch(f"kernel has {kern.shape[0]} source signals, experiment has {F.n_signals}")
    if signals is None:
        signals = [f"y{j}" for j in range(kern.shape[1])]
    mat = F.matrix @ kern
    mat = mat / mat.sum(axis=1, keepdims=True)
    return FiniteExperiment(mat, F.states, signals)


def is_irredundant(F: FiniteExperiment, tol: float = 1e-10) -> bool:
    """True iff the likelihood vectors are affinely independent."""
    cols = F.columns
    if cols.shape[0] == 1:
        return True
    centred = (cols[1:] - cols[0]).T
    return int(np.linalg.matrix_rank(centred, tol=tol)) == cols.shape[0] - 1


def trapezoid_weights(grid: ArrayLike) -> NDArray[np.float64]:
    grid = np.asarray(grid, dtype=float)
    if grid.size < 2:
        raise DegenerateGrid("the trapezoid rule needs at least two grid points")
    h = np.diff(grid)
    w = np.zeros_like(grid)
    w[:-1] += h / 2
    w[1:] += h / 2
    return w


@dataclass(frozen=True, eq=False)
class GridExperiment:
    """Densities sampled on a signal grid with quadrature weights.

    When ``weights`` is omitted the trapezoid rule on ``grid`` is used.
    """

    states: StateSpace
    grid: NDArray[np.float64]
    densities: NDArray[np.float64]
    weights: NDArray[np.float64]

    def __init__(
        self,
        grid: ArrayLike,
        densities: ArrayLike,
        weights: ArrayLike | None = None,
        states: StateSpace | Sequence[str] | None = None,
        *,
        tol: float = 1e-6,
    ):
        g = np.atleast_1d(np.array(grid, dtype=float))
        dens = np.atleast_2d(np.array(densities, dtype=float))
        if g.ndim != 1 or g.size == 0 or np.any(np.diff(g) <= 0):
            raise DegenerateGrid("grid must be a nonempty strictly increasing vector")
        if dens.shape[1] != g.size:
            raise DegenerateGrid(f"densities have {dens.shape[1]} columns for {g.size} grid points")
        w = trapezoid_weights(g) if weights is None else np.atleast_1d(np.array(weights, dtype=float))
        if w.shape != g.shape or np.any(w <= 0):
            raise DegenerateGrid("weights must be positive, one per grid point")
        if np.any(dens < 0):
            i = int(np.argwhere(dens < 0)[0][0])
            raise NegativeEntry("negative density", index=i)
        if states is None:
            states = StateSpace.default(dens.shape[0])
        elif not isinstance(states, StateSpace):
            states = StateSpace(states)
        if len(states) != dens.shape[0]:
            raise DimensionMismatch(f"{len(states)} states but {dens.shape[0]} density rows")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "grid", _frozen(g))
        object.__setattr__(self, "densities", _frozen(dens))
        object.__setattr__(self, "weights", _frozen(w))
        resid = self.residual()
        if resid > tol:
            raise RowSumError(f"quadrature mass deviates from 1 by {resid:.3g}")

    def masses(self) -> NDArray[np.float64]:
        return self.densities @ self.weights

    def residual(self) -> float:
        """Largest per-state deviation of the quadrature mass from 1."""
        return float(np.max(np.abs(self.masses() - 1.0)))


def discretize(G: GridExperiment) -> FiniteExperiment:
    """Cell probabilities ``density * weight``, renormalized per state."""
    probs = G.densities * G.weights
    mass = probs.sum(axis=1, keepdims=True)
    if np.any(mass <= 0):
        raise DegenerateGrid("a state has zero quadrature mass")
    return FiniteExperiment(probs / mass, G.states, [f"x{j}" for j in range(G.grid.size)])


# -- standard experiments ---------------------------------------------------


def uninformative(n_states: int, n_signals: int = 1) -> FiniteExperiment:
    return FiniteExperiment(np.full((n_states, n_signals), 1.0 / n_signals))


def revealing(n_states: int) -> FiniteExperiment:
    return FiniteExperiment(np.eye(n_states))


def noisy_revealing_pair(n: int, eps: float) -> tuple[FiniteExperiment, FiniteExperiment]:
    """The state-revealing-with-noise experiment ``F(eps)`` and the
    state-excluding experiment ``G_hat`` on ``n + 1`` states."""
    size = n + 1
    F = np.hstack([(1.0 - eps) * np.eye(size), np.full((size, 1), eps)])
    G = (np.ones((size, size)) - np.eye(size)) / n
    return FiniteExperiment(F), FiniteExperiment(G, signals=[f"y{j}" for j in range(size)])
