import math
from itertools import permutations

import pytest
from hypothesis import given, strategies as st

from markoff_bm.errors import BudgetExceeded
from markoff_bm.padic import is_square
from markoff_bm.points import (
    SearchConfig,
    box_search,
    certify_empty,
    descend,
    is_reduced,
    orbit_sample,
    reduced_sweep,
    third_coordinates,
)
from markoff_bm.surface import markoff_poly
from markoff_bm.obstruction import solvability


def test_box_search_examples():
    found = box_search(45, SearchConfig(height=10))
    for s in permutations((0, 3, 6)):
        assert s in found
    assert (0, -3, -6) in found
    assert (-1, 1, 4) in box_search(22, SearchConfig(height=5))
    assert (5, 5, 9) in box_search(-94, SearchConfig(height=10))
    assert all(markoff_poly(*u) == 45 for u in found)


def test_search_config():
    with pytest.raises(ValueError):
        SearchConfig(height=1)
    with pytest.raises(BudgetExceeded):
        box_search(45, SearchConfig(height=1000, budget=100))


@pytest.mark.parametrize("m", [45, -46, 22, 54, 2, 5])
def test_box_search_symmetric(m):
    found = set(box_search(m, SearchConfig(height=12)))
    for a, b, c in found:
        for s in permutations((a, b, c)):
            assert s in found
        assert (-a, -b, c) in found


def test_third_coordinates():
    assert third_coordinates(45, 0, 3) == [-6, 6]
    assert third_coordinates(45, 0, 4) == []


def test_descend_examples():
    assert descend((18, 3, 6)).coordinates == (0, 3, 6)
    assert descend((0, 3, 6)).coordinates == (0, 3, 6)
    r = descend((-3, 3, 3))
    assert is_reduced(r.coordinates) and r.norm <= 27
    assert markoff_poly(*r.coordinates) == 54


@given(st.integers(-50, 50), st.integers(-50, 50), st.integers(-50, 50))
def test_descend_reduced_and_idempotent(a, b, c):
    r = descend((a, b, c))
    assert markoff_poly(*r.coordinates) == markoff_poly(a, b, c)
    assert is_reduced(r.coordinates)
    assert descend(r.coordinates) == r
    assert r.norm <= a * a + b * b + c * c


def test_certify_examples():
    c = certify_empty(342)
    assert c.status == "empty_certified" and c.shell_checked
    c = certify_empty(45)
    assert c.status == "nonempty" and sorted(map(abs, c.witness)) == [0, 3, 6]
    assert sum(x * x for x in c.witness) <= 45
    # 12 = 3 mod 9 has no 3-adic points
    assert not solvability(12).adelically_soluble
    assert certify_empty(12).status == "empty_certified"
    assert certify_empty(9).status == "not_applicable"
    assert certify_empty(3).status == "not_applicable"


@pytest.mark.parametrize("m", [342, 12, 45, 101, 7, 130])
def test_certificate_agrees_with_box(m):
    c = certify_empty(m)
    found = box_search(m, SearchConfig(height=math.isqrt(3 * m) + 1))
    if c.status == "empty_certified":
        assert found == []
    else:
        assert markoff_poly(*c.witness) == m and found


def test_orbit_sample_examples():
    pts = orbit_sample((0, 3, 6), 100, seed=1)
    assert len(set(pts)) == 100
    assert all(markoff_poly(*u) == 45 for u in pts)
    assert orbit_sample((0, 3, 6), 0) == []
    reduced = {tuple(sorted(map(abs, descend(u).coordinates))) for u in pts}
    assert reduced == {(0, 3, 6)}


def test_descent_lands_in_ball():
    ms = [m for m in range(5, 10**4) if not is_square(m) and m in POINTS][:20]
    assert len(ms) == 20
    for m in ms:
        for u in orbit_sample(POINTS[m], 1000, seed=m):
            assert descend(u).norm <= 3 * m


POINTS = reduced_sweep(10**4)


def test_sweep_matches_box_search():
    for m in range(-1000, 1001):
        if m in (0, 4):
            continue
        found = box_search(m, SearchConfig(height=60))
        assert (m in POINTS) == bool(found), m
        if m in POINTS:
            assert markoff_poly(*POINTS[m]) == m


def test_sweep_matches_certificates():
    for m in range(5, 1500):
        if is_square(m):
            continue
        c = certify_empty(m)
        assert (c.status == "empty_certified") == (m not in POINTS), m
