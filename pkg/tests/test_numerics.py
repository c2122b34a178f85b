import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from lbrank.errors import MalformedProgram, NotConvex
from lbrank.numerics import (
    TOL,
    HingeDecomposition,
    LinearProgram,
    LPStatus,
    PiecewiseLinearConvex,
    conjugate_function,
    convex_conjugate,
    hinge_decompose,
    solve_lp,
)

from conftest import random_convex_pl
from oracles import vertex_enumeration


# -- solve_lp ---------------------------------------------------------------


def test_one_variable_box():
    lp = LinearProgram.from_rows(1, [-1.0], inequality_rows=[([1.0], 1.0)], variable_bounds=[(0, None)])
    res = solve_lp(lp)
    assert res.status is LPStatus.OPTIMAL
    assert res.value == pytest.approx(-1.0)
    assert res.point == pytest.approx([1.0])


def test_empty_feasible_set():
    lp = LinearProgram.from_rows(
        1, [0.0], inequality_rows=[([1.0], 0.0), ([-1.0], -1.0)], variable_bounds=[(None, None)]
    )
    assert solve_lp(lp).status is LPStatus.INFEASIBLE


def test_two_vertex_instance():
    lp = LinearProgram.from_arrays([1, 1], A_ub=[[-1, -2]], b_ub=[-2])
    res = solve_lp(lp)
    assert res.value == pytest.approx(1.0)
    assert res.point == pytest.approx([0.0, 1.0])


def test_unbounded():
    lp = LinearProgram.from_arrays([-1.0, 0.0], A_ub=[[1.0, -1.0]], b_ub=[1.0])
    assert solve_lp(lp).status is LPStatus.UNBOUNDED


def test_row_length_mismatch():
    with pytest.raises(MalformedProgram):
        LinearProgram.from_rows(2, [1.0, 1.0], equality_rows=[([1.0], 1.0)])


def test_reversed_bounds():
    with pytest.raises(MalformedProgram):
        LinearProgram.from_rows(1, [1.0], variable_bounds=[(1.0, 0.0)])


def test_equality_and_free_variables():
    # min x - y  s.t. x + y = 1, x - y >= -3, x, y free in [-5, 5]
    lp = LinearProgram.from_arrays(
        [1, -1], A_ub=[[-1, 1]], b_ub=[3], A_eq=[[1, 1]], b_eq=[1], bounds=(-5, 5)
    )
    res = solve_lp(lp)
    assert res.value == pytest.approx(-3.0)
    assert lp.max_violation(res.point) <= 1e-8


def test_redundant_equalities():
    lp = LinearProgram.from_arrays([1, 2], A_eq=[[1, 1], [2, 2]], b_eq=[1, 2])
    res = solve_lp(lp)
    assert res.value == pytest.approx(1.0)


def _random_box_lp(rng):
    n = int(rng.integers(1, 4))
    m = int(rng.integers(0, 7 - n))
    c = rng.normal(size=n)
    A = rng.normal(size=(m, n))
    b = rng.normal(size=m)
    lo = rng.uniform(-3, 0, size=n)
    hi = lo + rng.uniform(0.1, 4, size=n)
    return c, A, b, lo, hi


def test_matches_vertex_enumeration(rng):
    for _ in range(300):
        c, A, b, lo, hi = _random_box_lp(rng)
        lp = LinearProgram.from_arrays(c, A_ub=A, b_ub=b, bounds=list(zip(lo, hi)))
        res = solve_lp(lp)
        ref = vertex_enumeration(c, A, b, lo, hi)
        if ref is None:
            assert res.status is LPStatus.INFEASIBLE
        else:
            assert res.status is LPStatus.OPTIMAL
            assert res.value == pytest.approx(ref, abs=1e-8)
            assert lp.max_violation(res.point) <= 1e-8


def test_agrees_with_highs_on_equality_programs(rng):
    for _ in range(200):
        n, me, mi = int(rng.integers(2, 6)), int(rng.integers(1, 3)), int(rng.integers(0, 4))
        c = rng.normal(size=n)
        A_eq, A_ub = rng.normal(size=(me, n)), rng.normal(size=(mi, n))
        x0 = rng.uniform(0, 1, size=n)
        b_eq = A_eq @ x0
        b_ub = A_ub @ x0 + rng.uniform(0, 1, size=mi)
        bounds = [(0, 2)] * n
        lp = LinearProgram.from_arrays(c, A_ub, b_ub, A_eq, b_eq, bounds)
        ours = solve_lp(lp)
        ref = linprog(c, A_ub=A_ub if mi else None, b_ub=b_ub if mi else None,
                      A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs")
        assert ours.status is LPStatus.OPTIMAL and ref.status == 0
        assert ours.value == pytest.approx(ref.fun, abs=1e-7)


# -- conjugates ---------------------------------------------------------------


def test_conjugate_of_zero():
    gamma = PiecewiseLinearConvex([0, 1], [0, 0])
    assert convex_conjugate(gamma, -3.0) == 0.0


def test_conjugate_of_identity():
    gamma = PiecewiseLinearConvex([0, 1], [0, 1])
    assert convex_conjugate(gamma, 2.0) == pytest.approx(1.0)


def test_conjugate_with_redundant_breakpoint():
    gamma = PiecewiseLinearConvex([0, 0.5, 1], [0, 0.5, 1])
    assert convex_conjugate(gamma, 0.5) == pytest.approx(0.0)


def test_not_convex_rejected():
    with pytest.raises(NotConvex):
        PiecewiseLinearConvex([0, 1, 2], [0, 1, 1])


def test_degenerate_domain():
    gamma = PiecewiseLinearConvex([0.3], [2.0])
    t = np.linspace(-4, 4, 9)
    assert convex_conjugate(gamma, t) == pytest.approx(0.3 * t - 2.0)
    h = hinge_decompose(conjugate_function(gamma))
    assert h.atoms == ()
    assert h(t) == pytest.approx(0.3 * t - 2.0)


def test_conjugate_is_convex_and_fenchel_young(rng):
    for _ in range(50):
        gamma = random_convex_pl(rng)
        t = np.linspace(-5, 5, 201)
        rho = convex_conjugate(gamma, t)
        assert np.all(np.diff(rho, 2) >= -1e-9)
        w = rng.uniform(gamma.lo, gamma.hi, 50)
        tt = rng.uniform(-5, 5, 50)
        assert np.all(tt * w <= convex_conjugate(gamma, tt) + gamma(w) + 1e-12)


def test_conjugate_matches_dense_supremum(rng):
    for _ in range(20):
        gamma = random_convex_pl(rng)
        w = np.linspace(gamma.lo, gamma.hi, 20001)
        gw = gamma(w)
        for t in rng.uniform(-4, 4, 5):
            assert convex_conjugate(gamma, t) == pytest.approx(np.max(t * w - gw), abs=1e-3)


# -- hinge decomposition ----------------------------------------------------


def test_hinge_of_positive_part():
    h = hinge_decompose(PiecewiseLinearConvex([0, 1, 2], [0, 0, 1]))
    assert (h.constant, h.base_slope, h.atoms) == (0.0, 0.0, ((1.0, 1.0),))


def test_hinge_of_linear():
    h = hinge_decompose(PiecewiseLinearConvex([-1, 0, 2], [-2.5, 0, 5]))
    assert h.constant == pytest.approx(0.0)
    assert h.base_slope == pytest.approx(2.5)
    assert h.atoms == ()


def test_hinge_of_absolute_value():
    h = hinge_decompose(PiecewiseLinearConvex([-1, 0, 1], [1, 0, 1]))
    assert h.constant == pytest.approx(0.0)
    assert h.base_slope == pytest.approx(-1.0)
    assert h.atoms == ((0.0, 2.0),)
    assert h.total_mass == pytest.approx(2.0)


def test_hinge_mass_is_slope_range(rng):
    for _ in range(30):
        rho = random_convex_pl(rng, -2, 2)
        h = hinge_decompose(rho)
        assert h.total_mass == pytest.approx(rho.slopes[-1] - rho.slopes[0], abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_hinge_reconstruction(seed):
    rng = np.random.default_rng(seed)
    rho = conjugate_function(random_convex_pl(rng))
    h = hinge_decompose(rho)
    t = rng.uniform(-10, 10, 100)
    assert np.max(np.abs(h(t) - rho(t))) <= 1e-9 * max(1.0, np.max(np.abs(rho(t))))
    assert h(rho.breakpoints) == pytest.approx(rho.values, abs=1e-9)


def test_conjugate_function_matches_pointwise(rng):
    for _ in range(30):
        gamma = random_convex_pl(rng)
        rho = conjugate_function(gamma)
        t = rng.uniform(-8, 8, 200)
        assert rho(t) == pytest.approx(convex_conjugate(gamma, t), abs=1e-9)


def test_tolerance_defaults():
    assert TOL.feasibility == 1e-8
    assert TOL.reduced_cost == 1e-9
    assert isinstance(HingeDecomposition(0.0, 1.0)(2.0), float)
    assert math.isclose(HingeDecomposition(1.0, 0.0, ((0.0, 1.0),))(3.0), 4.0)
