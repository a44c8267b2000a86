import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import closed_forms, transport_lp
from roughdisk.errors import EmptyIntersection, InfeasibleLevel, NumericalFailure
from roughdisk.measures import canonical_measure
from roughdisk.resistance import resistance_coeffs
from roughdisk.transport import (ConvexPolygon, CostGrid, TransportInstance,
                                 constrained_support, discretize_gamma, halfplane_intersection,
                                 level_set, polygon_area_split, reachable_set, solve_transport,
                                 support_sweep, support_value, torque_range, unit_directions)


def _check_plan(inst, plan):
    np.testing.assert_allclose(plan.plan.sum(axis=1), inst.marginal, atol=1e-10)
    np.testing.assert_allclose(plan.plan.sum(axis=0), inst.marginal, atol=1e-10)
    assert (plan.plan >= 0).all()
    assert plan.objective == pytest.approx(float(np.sum(inst.cost * plan.plan)), abs=1e-12)
    assert plan.duality_gap(inst) < 1e-9
    assert plan.min_reduced_cost(inst) >= -1e-9


def test_discretize_gamma():
    np.testing.assert_allclose(discretize_gamma(2), [1.0, 1.0])
    h = math.sqrt(2) / 2
    np.testing.assert_allclose(discretize_gamma(4), [1 - h, h, h, 1 - h], atol=1e-15)
    for n in (3, 17, 200):
        assert discretize_gamma(n).sum() == pytest.approx(2.0, abs=1e-14)
    with pytest.raises(ValueError):
        discretize_gamma(1)


def test_constant_cost():
    m = discretize_gamma(7)
    p = solve_transport(TransportInstance(m, np.full((7, 7), 3.0)))
    assert p.objective == pytest.approx(6.0)


def test_anti_diagonal_matching():
    n = 4
    cost = np.ones((n, n))
    cost[np.arange(n), n - 1 - np.arange(n)] = 0.0
    inst = TransportInstance(discretize_gamma(n), cost)
    p = solve_transport(inst)
    assert p.objective == pytest.approx(0.0, abs=1e-15)
    np.testing.assert_allclose(p.plan, np.diag(inst.marginal)[::-1], atol=1e-15)


def test_invalid_instances():
    with pytest.raises(ValueError):
        TransportInstance(discretize_gamma(3), np.zeros((3, 4)))
    with pytest.raises(ValueError):
        TransportInstance(np.array([1.0, 0.0, 1.0]), np.zeros((3, 3)))
    with pytest.raises(ValueError):
        TransportInstance(discretize_gamma(2), np.array([[0.0, np.inf], [0.0, 0.0]]))


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 14), st.integers(0, 2 ** 31), st.booleans())
def test_simplex_matches_highs(n, seed, integer_costs):
    rng = np.random.default_rng(seed)
    cost = rng.normal(size=(n, n))
    if integer_costs:  # many ties, heavy degeneracy
        cost = np.round(2 * cost)
    inst = TransportInstance(discretize_gamma(n), cost)
    p = solve_transport(inst)
    _check_plan(inst, p)
    assert p.objective == pytest.approx(transport_lp(inst.marginal, cost).fun, abs=1e-9)


def test_bland_fallback_from_the_start():
    rng = np.random.default_rng(3)
    cost = np.round(rng.normal(size=(12, 12)))
    inst = TransportInstance(discretize_gamma(12), cost)
    a = solve_transport(inst)
    b = solve_transport(inst, stall=0)
    _check_plan(inst, b)
    assert b.objective == pytest.approx(a.objective, abs=1e-12)


def test_warm_start_agrees_with_cold():
    grid = CostGrid.build(1.0, 40)
    first = solve_transport(TransportInstance(grid.marginal, grid.directional((1.0, 0.0))))
    inst = TransportInstance(grid.marginal, grid.directional((0.6, 0.8)))
    warm = solve_transport(inst, warm_start=first)
    cold = solve_transport(inst)
    _check_plan(inst, warm)
    assert warm.objective == pytest.approx(cold.objective, abs=1e-12)


def test_iteration_budget():
    rng = np.random.default_rng(0)
    inst = TransportInstance(discretize_gamma(30), rng.normal(size=(30, 30)))
    with pytest.raises(NumericalFailure):
        solve_transport(inst, max_iter=1)


def test_large_instance_certificate():
    grid = CostGrid.build(0.0, 200)
    inst = TransportInstance(grid.marginal, grid.directional((0.0, -1.0)))
    _check_plan(inst, solve_transport(inst))


def test_support_values_at_rest():
    assert support_value(0.0, (0.0, 1.0)) == pytest.approx(-1.5, abs=1e-9)
    assert support_value(0.0, (0.0, -1.0)) == pytest.approx(0.9878, abs=5e-3)
    assert support_value(0.0, (1.0, 0.0)) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        support_value(0.0, (1.0, 1.0))


def test_support_value_converges_with_bins():
    e = (math.cos(1.0), math.sin(1.0))
    s = [support_value(0.5, e, n) for n in (50, 100, 200, 400)]
    d = np.abs(np.diff(s))
    assert d[-1] < 1e-5
    assert (d[1:] < 0.5 * d[:-1]).all()


def test_reachable_set_at_rest_is_a_segment():
    seg = reachable_set(0.0)
    assert seg.vertices.shape == (2, 2)
    np.testing.assert_allclose(seg.vertices[:, 0], 0.0, atol=1e-12)
    assert seg.vertices[0, 1] == pytest.approx(-1.5, abs=1e-9)
    assert seg.vertices[1, 1] == pytest.approx(-0.9878, abs=5e-3)
    assert seg.area == 0.0


@pytest.mark.parametrize("lam", [0.1, 0.3, 1.0])
def test_canonical_points_are_inside(lam):
    poly = reachable_set(lam, 60, 160)
    tol = 1e-3 * max(poly.diameter, 1e-9)
    for kind in ("circle", "retro", "rect", "triangle", "product"):
        pt = resistance_coeffs(canonical_measure(kind), lam).as_tuple()[:2]
        assert poly.distance(pt) <= tol, kind


def test_sweep_points_lie_on_the_polygon():
    sw = support_sweep(CostGrid.build(0.7, 60), 24)
    for e, val, pt in zip(sw.directions, sw.values, sw.points):
        assert float(np.dot(e, pt)) == pytest.approx(val, abs=1e-12)
        assert sw.polygon.distance(pt) < 1e-9


def test_polygon_area_split():
    sq = ConvexPolygon(np.array([[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, 0.5]]))
    assert polygon_area_split(sq) == pytest.approx((0.5, 0.5))
    shifted = ConvexPolygon(sq.vertices + [0.5, 0.0])
    assert polygon_area_split(shifted) == pytest.approx((0.0, 1.0))
    tri = ConvexPolygon(np.array([[-1.0, 0.0], [2.0, 0.0], [0.0, 1.0]]))
    left, right = polygon_area_split(tri)
    assert left + right == pytest.approx(tri.area, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_area_split_sums_to_area(seed):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(12, 2))
    dirs = unit_directions(16)
    vals = (pts @ dirs.T).min(axis=0)
    poly = halfplane_intersection(dirs, vals)
    left, right = polygon_area_split(poly)
    assert left + right == pytest.approx(poly.area, abs=1e-12)
    assert poly.area > 0


def test_halfplane_inconsistency_is_reported():
    dirs = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    with pytest.raises(EmptyIntersection):
        halfplane_intersection(dirs, np.array([1.0, 0.0, 0.0, 0.0]))


def test_polygon_distance():
    sq = ConvexPolygon(np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]))
    assert sq.distance((0.5, 0.5)) == 0.0
    assert sq.distance((2.0, 0.5)) == pytest.approx(1.0)
    seg = ConvexPolygon(np.array([[0.0, 0.0], [0.0, 1.0]]))
    assert seg.distance((1.0, 0.5)) == pytest.approx(1.0)


@pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
def test_constrained_support_matches_highs(lam):
    grid = CostGrid.build(lam, 12)
    lo, hi = torque_range(grid)
    rng = np.random.default_rng(7)
    for level in np.linspace(lo, hi, 6):
        for th in rng.uniform(0, 2 * math.pi, 3):
            cost = grid.directional((math.cos(th), math.sin(th)))
            val, _ = constrained_support(grid, cost, level)
            ref = transport_lp(grid.marginal, cost, grid.c_i, level)
            assert ref.status == 0
            assert val == pytest.approx(ref.fun, abs=1e-8)


def test_level_set_range_and_errors():
    grid = CostGrid.build(1.0, 80)
    lo, hi = torque_range(grid)
    assert lo == pytest.approx(-1.5, abs=1e-3)
    assert hi == pytest.approx(0.0, abs=1e-3)
    with pytest.raises(InfeasibleLevel):
        level_set(1.0, -2.0, 8, 40)


def test_level_set_nests_in_reachable_set():
    full = reachable_set(1.0, 24, 60)
    part = level_set(1.0, -0.75, 24, 60)
    assert part.area < full.area
    for v in part.vertices:
        assert full.distance(v) < 1e-6


def test_retro_point_on_extreme_level():
    poly = level_set(1.0, -1.5, 24, 80)
    assert poly.distance(closed_forms("retro", 1.0)[:2]) < 1e-3
