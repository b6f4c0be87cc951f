import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hapsnoma.geometry import (Circle, InfeasibleAssociationError, all_covered, associate,
                               brute_force_mec, enclosing_radius, gdc_center_indices, gdc_cover,
                               heuristic_mec, hpbw_from_radius, make_users, radius_from_hpbw,
                               welzl_mec)

coord = st.floats(-60, 60, allow_nan=False)
point_sets = st.lists(st.tuples(coord, coord), min_size=1, max_size=12)


def test_gdc_triangle_single_disk():
    M, centers = gdc_cover(make_users([(0, 0), (1, 0), (0, 1)]), 2.0)
    assert M == 1
    assert tuple(centers[0]) == (0.0, 0.0)


def test_gdc_isolated_points_are_own_centers():
    M, centers = gdc_cover(make_users([(0, 0), (10, 0)]), 1.0)
    assert M == 2
    assert {tuple(c) for c in centers} == {(0.0, 0.0), (10.0, 0.0)}


def test_gdc_picks_best_neighbour_not_the_scanned_row():
    # row 0 only reaches user 1; user 1 reaches everyone, so it must be the center
    pts = [(0, 0), (1.5, 0), (3, 0)]
    assert gdc_center_indices(pts, 1.6) == [1]


def test_gdc_empty_and_bad_radius():
    with pytest.raises(ValueError):
        gdc_cover([], 1.0)
    with pytest.raises(ValueError):
        gdc_cover(make_users([(0, 0)]), 0.0)


def test_gdc_ppp_hundred_users_order_of_magnitude(default_scenario):
    M, _ = gdc_cover(default_scenario.users, 20.0)
    assert 5 <= M <= 20


@given(point_sets, st.floats(0.5, 80))
def test_gdc_cover_feasibility(pts, r):
    M, centers = gdc_cover(pts, r)
    assert 1 <= M <= len(pts)
    assert all_covered(pts, centers, r)
    # centers are user positions
    pset = {tuple(map(float, p)) for p in pts}
    assert all(tuple(c) in pset for c in centers)


def test_associate_nearest_and_tie():
    beams = [Circle((0, 0), 3), Circle((5, 0), 3)]
    a = associate(make_users([(1, 0), (2.5, 0)]), beams)
    assert a.assignment == {1: 0, 2: 0}


def test_associate_boundary_is_feasible():
    a = associate(make_users([(4, 0)]), [Circle((0, 0), 1), Circle((5, 0), 1)])
    assert a.assignment == {1: 1}


def test_associate_infeasible_names_user():
    with pytest.raises(InfeasibleAssociationError) as exc:
        associate(make_users([(0, 0), (3, 0)]), [Circle((0, 0), 1)])
    assert exc.value.user_id == 2


@given(point_sets, st.floats(1, 80))
def test_association_is_argmin(pts, r):
    users = make_users(pts)
    _, centers = gdc_cover(users, r)
    circles = [Circle(tuple(c), r) for c in centers]
    a = associate(users, circles)
    x = a.matrix()
    assert np.all(x.sum(axis=1) == 1)
    for u in users:
        d = [math.dist(u.position, c.center) for c in circles]
        m = a.assignment[u.id]
        assert d[m] <= min(d)
        assert m == d.index(min(d))
        assert d[m] <= r * (1 + 1e-12)


@pytest.mark.parametrize("pts, center, radius", [
    ([(0, 0)], (0, 0), 0.0),
    ([(0, 0), (2, 0)], (1, 0), 1.0),
    ([(0, 0), (2, 0), (1, 1)], (1, 0), 1.0),
])
def test_mec_examples(pts, center, radius):
    for fn in (welzl_mec, brute_force_mec):
        c = fn(pts)
        assert c.radius == pytest.approx(radius, abs=1e-12)
        assert c.center == pytest.approx(center, abs=1e-12)


def test_heuristic_examples():
    assert heuristic_mec([(0, 0)]).radius == 0.0
    c = heuristic_mec([(0, 0), (2, 0)])
    assert c.center == pytest.approx((1, 0)) and c.radius == pytest.approx(1.0)
    c = heuristic_mec([(0, 0), (2, 0), (1, 1)])
    assert c.center == pytest.approx((1, 1 / 3))
    assert c.radius == pytest.approx(math.sqrt(1 + 1 / 9), rel=1e-12)


def test_mec_empty_raises():
    for fn in (welzl_mec, heuristic_mec, brute_force_mec):
        with pytest.raises(ValueError):
            fn([])


def test_mec_duplicates_and_collinear():
    assert welzl_mec([(1, 1)] * 4).radius == 0.0
    c = welzl_mec([(0, 0), (1, 0), (2, 0), (3, 0)])
    assert c.center == pytest.approx((1.5, 0)) and c.radius == pytest.approx(1.5)
    assert brute_force_mec([(0, 0), (1, 0), (3, 0)]).radius == pytest.approx(1.5)


@given(point_sets, st.integers(0, 2**16))
def test_welzl_minimal_encloses_and_dominated_by_heuristic(pts, seed):
    w = welzl_mec(pts, seed=seed)
    assert enclosing_radius(w.center, pts) <= w.radius + 1e-9
    assert w.radius == pytest.approx(brute_force_mec(pts).radius, abs=1e-9)
    assert heuristic_mec(pts).radius >= w.radius - 1e-9


@given(point_sets)
def test_welzl_order_invariant(pts):
    assert welzl_mec(pts, seed=1).radius == pytest.approx(welzl_mec(pts, seed=2).radius, abs=1e-9)


def test_hpbw_examples():
    assert hpbw_from_radius(21, 21) == pytest.approx(90.0, rel=1e-12)
    assert hpbw_from_radius(5.464, 21) == pytest.approx(29.169, abs=1e-3)
    assert hpbw_from_radius(1e-9, 21) < 1e-8
    with pytest.raises(ValueError):
        hpbw_from_radius(0, 21)
    with pytest.raises(ValueError):
        hpbw_from_radius(1, -1)


@given(st.floats(1e-3, 500), st.floats(1, 50))
def test_hpbw_round_trip(r, H):
    assert radius_from_hpbw(hpbw_from_radius(r, H), H) == pytest.approx(r, rel=1e-12)
