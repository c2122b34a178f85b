"""Deciding the linear-Blackwell, MPE and Blackwell orders.

All three LB-type checks rest on the support-function gap

    xi(b) = sum_j (b . f_j)_+  -  sum_k (b . g_k)_+

between the Lorenz zonoids of ``F`` and ``G``; ``F`` dominates ``G`` iff
``xi(b) >= 0`` for every direction ``b``.  ``xi`` is positively homogeneous,
even, and linear on every cone of the hyperplane arrangement cut out by the
likelihood columns, so checking the extreme rays of that arrangement is exact.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import (
    DimensionLimitExceeded,
    OneSignedWitness,
    StateMismatch,
    TooManyStates,
)
from .experiment import (
    FiniteExperiment,
    GridExperiment,
    WeightedDichotomy,
    discretize,
    relabel,
)
from .numerics import TOL, LinearProgram, solve_lp

__all__ = [
    "Method",
    "OrderVerdict",
    "zonoid_support",
    "support_diff",
    "extreme_rays",
    "lb_exact",
    "lb_sampled",
    "hemisphere_sample",
    "is_quasi_monotone",
    "mpe_check",
    "lb_via_relabelings",
    "blackwell_check",
    "lb_equivalent",
    "dichotomy_from_witness",
]

RAY_TOL = 1e-9
ZERO_TOL = 1e-12
CHUNK = 20_000


class Method(str, enum.Enum):
    EXACT_RAYS = "ExactRays"
    SAMPLED_HEMISPHERE = "SampledHemisphere"
    GARBLING_LP = "GarblingLP"


@dataclass(frozen=True, eq=False)
class OrderVerdict:
    """Outcome of an order check.

    ``witness`` is a direction ``b`` (one weight per state) for the ray and
    sampled methods; for :attr:`Method.GARBLING_LP` failures it is a
    state-by-action payoff matrix under which ``G`` is worth more than every
    garbling of ``F``.  ``margin`` is the minimum of the tested functional,
    in absolute units.
    """

    holds: bool
    witness: NDArray[np.float64] | None
    margin: float
    method: Method
    kernel: NDArray[np.float64] | None = None
    permutation: tuple[int, ...] | None = field(default=None)

    def __bool__(self) -> bool:
        return self.holds

    def to_dict(self) -> dict:
        out = {
            "holds": bool(self.holds),
            "witness": None if self.witness is None else np.asarray(self.witness).tolist(),
            "margin": float(self.margin),
            "method": self.method.value,
        }
        if self.kernel is not None:
            out["kernel"] = self.kernel.tolist()
        if self.permutation is not None:
            out["permutation"] = list(self.permutation)
        return out


def _as_finite(E) -> FiniteExperiment:
    return discretize(E) if isinstance(E, GridExperiment) else E


def _check_pair(F: FiniteExperiment, G: FiniteExperiment) -> None:
    if F.n_states != G.n_states or F.states != G.states:
        raise StateMismatch("experiments are defined on different state spaces")


def zonoid_support(F: FiniteExperiment, b: ArrayLike):
    """Support function of the Lorenz zonoid of ``F`` in direction(s) ``b``."""
    b = np.asarray(b, dtype=float)
    out = np.maximum(b @ F.matrix, 0.0).sum(axis=-1)
    return float(out) if out.ndim == 0 else out


def support_diff(F: FiniteExperiment, G: FiniteExperiment, b: ArrayLike):
    """``xi(b; F, G)``; accepts a single direction or a stack of them."""
    _check_pair(F, G)
    b = np.asarray(b, dtype=float)
    if b.shape[-1] != F.n_states:
        raise StateMismatch(f"direction has {b.shape[-1]} entries for {F.n_states} states")
    out = np.maximum(b @ F.matrix, 0.0).sum(axis=-1) - np.maximum(b @ G.matrix, 0.0).sum(axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def _canonical_sign(v: np.ndarray) -> np.ndarray:
    """Flip rows so the first entry above noise level is positive."""
    nz = np.abs(v) > 1e-9
    first = np.argmax(nz, axis=1)
    sign = np.sign(v[np.arange(len(v)), first])
    sign[sign == 0] = 1.0
    return v * sign[:, None]


def _unique_rows(v: np.ndarray, decimals: int = 9) -> np.ndarray:
    if len(v) == 0:
        return v
    _, idx = np.unique(np.round(v, decimals), axis=0, return_index=True)
    return v[np.sort(idx)]


def _null_vectors(M: np.ndarray) -> np.ndarray:
    """Generalized cross products: for each stacked ``(r-1) x r`` block, the
    vector of signed maximal minors (zero when the block is rank deficient)."""
    c, k, r = M.shape
    out = np.empty((c, r))
    for j in range(r):
        sub = np.delete(M, j, axis=2)
        out[:, j] = (-1) ** j * np.linalg.det(sub) if k else 1.0
    return out


def extreme_rays(normals: ArrayLike) -> NDArray[np.float64]:
    """Unit extreme rays (one sign per pair) of the central arrangement whose
    hyperplanes are ``{b : b . a = 0}`` for the given normals.

    Directions in the common null space of all normals do not change which
    side of any hyperplane ``b`` lies on, so enumeration happens inside the row
    space of the normals, where the arrangement is pointed.
    """
    N = np.atleast_2d(np.asarray(normals, dtype=float))
    norms = np.linalg.norm(N, axis=1)
    N = N[norms > 1e-14] / norms[norms > 1e-14, None]
    N = _unique_rows(_canonical_sign(N), decimals=12)
    _, s, vt = np.linalg.svd(N, full_matrices=False)
    r = int(np.sum(s > 1e-10 * s[0]))
    U = vt[:r].T  # d x r orthonormal basis of the row space
    P = N @ U
    if r == 1:
        return _canonical_sign(U.T.copy())
    rays = []
    combos = itertools.combinations(range(len(P)), r - 1)
    while True:
        chunk = list(itertools.islice(combos, CHUNK))
        if not chunk:
            break
        v = _null_vectors(P[np.array(chunk)])
        vn = np.linalg.norm(v, axis=1)
        keep = vn > 1e-10
        if np.any(keep):
            b = (v[keep] / vn[keep, None]) @ U.T
            b /= np.linalg.norm(b, axis=1, keepdims=True)
            b[np.abs(b) < 1e-11] = 0.0
            rays.append(_unique_rows(_canonical_sign(b)))
    if not rays:
        return np.zeros((0, N.shape[1]))
    return _unique_rows(np.vstack(rays))


def _hemisphere_sign(b: np.ndarray) -> np.ndarray:
    """Representative of ``+-b`` with ``b_0 > 0`` (or first nonzero entry positive)."""
    return _canonical_sign(np.atleast_2d(b))[0]


def _argmin(values: np.ndarray, rays: np.ndarray) -> int:
    """Smallest value; ties within 1e-12 broken by the lexicographically
    smallest direction."""
    best = values.min()
    tied = np.nonzero(values <= best + 1e-12)[0]
    if tied.size == 1:
        return int(tied[0])
    keys = np.round(rays[tied], 9)
    order = np.lexsort(keys.T[::-1])
    return int(tied[order[0]])


def _ray_verdict(F, G, rays: np.ndarray, sign_fix=_hemisphere_sign) -> OrderVerdict:
    if len(rays) == 0:
        return OrderVerdict(True, None, 0.0, Method.EXACT_RAYS)
    vals = np.concatenate(
        [support_diff(F, G, rays[i:i + CHUNK]) for i in range(0, len(rays), CHUNK)]
    )
    k = _argmin(vals, rays)
    margin = float(vals[k])
    if margin >= -RAY_TOL:
        return OrderVerdict(True, None, margin, Method.EXACT_RAYS)
    witness = sign_fix(rays[k])
    return OrderVerdict(False, witness, float(support_diff(F, G, witness)), Method.EXACT_RAYS)


def lb_exact(
    F: FiniteExperiment,
    G: FiniteExperiment,
    *,
    max_signals: int = 64,
    max_dim: int = 6,
) -> OrderVerdict:
    """Exact LB check by extreme-ray enumeration.

    ``margin`` is the smallest value of ``xi`` over unit-norm extreme rays and
    a failing verdict carries that ray as witness (sign chosen with
    ``b_0 >= 0``).  The verdict is exact because ``xi`` is linear on every
    cone; the margin is not the minimum over the whole sphere, which can sit
    inside a cone.
    """
    _check_pair(F, G)
    if F.n_signals + G.n_signals > max_signals:
        raise DimensionLimitExceeded(
            f"{F.n_signals + G.n_signals} signals exceed the limit of {max_signals}"
        )
    if F.n_states > max_dim:
        raise DimensionLimitExceeded(f"{F.n_states} states exceed the limit of {max_dim}")
    rays = extreme_rays(np.vstack([F.columns, G.columns]))
    return _ray_verdict(F, G, rays)


def hemisphere_sample(dim: int, resolution: int, seed: int = 0) -> NDArray[np.float64]:
    """Deterministic quasi-uniform points on ``{|b| = 1, b_0 >= 0}``."""
    from scipy.stats import norm, qmc

    pts = qmc.Halton(d=dim, scramble=True, seed=seed).random(resolution)
    z = norm.ppf(np.clip(pts, 1e-12, 1 - 1e-12))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    z[z[:, 0] < 0] *= -1.0
    return z


def _refine(F, G, B: np.ndarray, values: np.ndarray, steps: int = 200):
    """Coordinate descent on the unit sphere, run for all starting rows at once.

    Each round tries ``+-h`` along every coordinate, keeps the best move per
    row and halves ``h`` for rows that did not improve.
    """
    B, values = B.copy(), values.copy()
    d = B.shape[1]
    moves = np.vstack([np.eye(d), -np.eye(d)])
    h = np.full(len(B), 0.1)
    for _ in range(steps):
        active = h > 1e-7
        if not np.any(active):
            break
        cand = B[active, None, :] + h[active, None, None] * moves[None]
        cand /= np.linalg.norm(cand, axis=2, keepdims=True)
        vals = support_diff(F, G, cand)
        k = np.argmin(vals, axis=1)
        best = vals[np.arange(len(k)), k]
        idx = np.nonzero(active)[0]
        better = best < values[idx] - 1e-15
        B[idx[better]] = cand[better, k[better]]
        values[idx[better]] = best[better]
        h[idx[~better]] /= 2
    return B, values


def lb_sampled(F, G, resolution: int = 2000, *, seed: int = 0, refine: int = 16) -> OrderVerdict:
    """Resolution-limited LB check on a hemisphere sample.

    A failing verdict is a certificate (the witness is re-evaluated exactly);
    a holding verdict only says no violation was found.
    """
    F, G = _as_finite(F), _as_finite(G)
    _check_pair(F, G)
    pts = hemisphere_sample(F.n_states, resolution, seed)
    vals = support_diff(F, G, pts)
    order = np.argsort(vals, kind="stable")[:refine]
    B, v = _refine(F, G, pts[order], vals[order])
    best_b = B[int(np.argmin(v))]
    best_b = _hemisphere_sign(best_b)
    margin = float(support_diff(F, G, best_b))
    tol = TOL.feasibility
    if margin >= -tol:
        return OrderVerdict(True, None, margin, Method.SAMPLED_HEMISPHERE)
    return OrderVerdict(False, best_b, margin, Method.SAMPLED_HEMISPHERE)


def is_quasi_monotone(b: ArrayLike, tol: float = ZERO_TOL) -> bool:
    """True iff no strictly positive entry precedes a strictly negative one."""
    b = np.asarray(b, dtype=float)
    seen_positive = False
    for x in b:
        if x > tol:
            seen_positive = True
        elif x < -tol and seen_positive:
            return False
    return True


def _quasi_monotone_representative(b: np.ndarray) -> np.ndarray | None:
    clean = np.where(np.abs(b) < ZERO_TOL, 0.0, b)
    if is_quasi_monotone(clean):
        return clean
    if is_quasi_monotone(-clean):
        return -clean
    return None


def mpe_check(F: FiniteExperiment, G: FiniteExperiment) -> OrderVerdict:
    """Exact MPE check: ``xi >= 0`` over quasi-monotone directions.

    Coordinate hyperplanes join the arrangement so that each quasi-monotone
    sign cone is a union of arrangement cells and its extreme rays are
    enumerated.
    """
    _check_pair(F, G)
    d = F.n_states
    rays = extreme_rays(np.vstack([F.columns, G.columns, np.eye(d)]))
    reps = [_quasi_monotone_representative(r) for r in rays]
    qm = np.array([r for r in reps if r is not None]).reshape(-1, d)
    return _ray_verdict(F, G, qm, sign_fix=lambda b: b)


def lb_via_relabelings(F: FiniteExperiment, G: FiniteExperiment) -> OrderVerdict:
    """LB check as MPE under every relabeling of the states."""
    _check_pair(F, G)
    if F.n_states > 7:
        raise TooManyStates(f"{F.n_states} states; relabeling enumeration is limited to 7")
    margin = np.inf
    for beta in itertools.permutations(range(F.n_states)):
        v = mpe_check(relabel(F, beta), relabel(G, beta))
        if not v.holds:
            return OrderVerdict(False, v.witness, v.margin, Method.EXACT_RAYS, permutation=tuple(beta))
        margin = min(margin, v.margin)
    return OrderVerdict(True, None, float(margin), Method.EXACT_RAYS)


def blackwell_check(F: FiniteExperiment, G: FiniteExperiment) -> OrderVerdict:
    """Is ``G`` a garbling of ``F``?

    Minimizes the entrywise L1 residual of ``M_F K - M_G`` over stochastic
    kernels ``K``.  On success the kernel is attached.  On failure the dual
    program supplies the witness: a payoff matrix ``Y`` (state x action, one
    action per signal of ``G``, entries in [-1, 1]) with
    ``sum_j max_k f_j . Y_k < sum_k g_k . Y_k``; ``margin`` is minus the
    optimal residual, which equals the gap between the two sides.
    """
    _check_pair(F, G)
    S, kf, kg = F.n_states, F.n_signals, G.n_signals
    nk, ns = kf * kg, S * kg
    # variables: K (kf x kg, row-major), s_plus (S x kg), s_minus (S x kg)
    c = np.concatenate([np.zeros(nk), np.ones(2 * ns)])
    A_rows = np.zeros((kf, nk + 2 * ns))
    for j in range(kf):
        A_rows[j, j * kg:(j + 1) * kg] = 1.0
    A_match = np.zeros((ns, nk + 2 * ns))
    for i in range(S):
        for k in range(kg):
            r = i * kg + k
            A_match[r, k:nk:kg] = F.matrix[i]
            A_match[r, nk + r] = -1.0
            A_match[r, nk + ns + r] = 1.0
    lp = LinearProgram.from_arrays(
        c,
        A_eq=np.vstack([A_rows, A_match]),
        b_eq=np.concatenate([np.ones(kf), G.matrix.ravel()]),
        bounds=(0.0, None),
    )
    res = solve_lp(lp)
    K = np.clip(res.point[:nk].reshape(kf, kg), 0.0, None)
    K /= K.sum(axis=1, keepdims=True)
    resid = float(np.max(np.abs(F.matrix @ K - G.matrix)))
    if resid <= TOL.feasibility:
        return OrderVerdict(True, None, 0.0, Method.GARBLING_LP, kernel=K)
    Y, value = _garbling_dual(F, G)
    return OrderVerdict(False, Y, -value, Method.GARBLING_LP)


def _garbling_dual(F: FiniteExperiment, G: FiniteExperiment) -> tuple[np.ndarray, float]:
    """max sum(G * Y) - sum(z)  s.t.  f_j . Y_k <= z_j,  -1 <= Y <= 1."""
    S, kf, kg = F.n_states, F.n_signals, G.n_signals
    ny = S * kg
    c = np.concatenate([-G.matrix.ravel(), np.ones(kf)])
    A = np.zeros((kf * kg, ny + kf))
    for j in range(kf):
        for k in range(kg):
            row = j * kg + k
            A[row, k:ny:kg] = F.matrix[:, j]
            A[row, ny + j] = -1.0
    bounds = [(-1.0, 1.0)] * ny + [(None, None)] * kf
    res = solve_lp(LinearProgram.from_arrays(c, A_ub=A, b_ub=np.zeros(kf * kg), bounds=bounds))
    Y = res.point[:ny].reshape(S, kg)
    z = np.max(F.matrix.T @ Y, axis=1)
    return Y, float(np.sum(G.matrix * Y) - z.sum())


def lb_equivalent(F: FiniteExperiment, G: FiniteExperiment) -> bool:
    return lb_exact(F, G).holds and lb_exact(G, F).holds


def dichotomy_from_witness(b: ArrayLike) -> WeightedDichotomy:
    """Group states by the sign of ``b`` and weight each block by ``|b_i|``.

    Non-positive entries form block 0 and positive entries block 1.
    """
    b = np.asarray(b, dtype=float)
    b = np.where(np.abs(b) < ZERO_TOL, 0.0, b)
    if not (np.any(b > 0) and np.any(b < 0)):
        raise OneSignedWitness("a witness with entries of a single sign carries no dichotomy")
    omega0 = [i for i in range(b.size) if b[i] <= 0]
    omega1 = [i for i in range(b.size) if b[i] > 0]
    B0, B1 = b[omega0].sum(), b[omega1].sum()
    return WeightedDichotomy(omega0, omega1, b[omega0] / B0, b[omega1] / B1)
