"""Real rotation numbers, locking intervals, hyperbolicity."""
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crotnum.cf import cf_of, convergents
from crotnum.circle import rotation, standard_family, standard_map
from crotnum.errors import EmptyLocking, NoConvergence
from crotnum.rotation import is_hyperbolic, locking_interval, periodic_points, rot, rot_enclosure

PHI = (math.sqrt(5) - 1) / 2


@given(st.floats(-3, 3), st.integers(1, 40))
def test_rotation_enclosure_is_exact(alpha, q):
    enc = rot_enclosure(rotation(alpha), q)
    assert enc.lo == pytest.approx(alpha, abs=1e-12) and enc.hi == pytest.approx(alpha, abs=1e-12)


def test_standard_map_enclosure_extrema():
    eps = 0.6
    enc = rot_enclosure(standard_map(eps, 0.0), 1)
    assert 0.0 in enc
    assert enc.hi == pytest.approx(eps / (2 * math.pi), abs=1e-6)
    assert enc.hi >= eps / (2 * math.pi)


@pytest.mark.parametrize("t", [0.123, 0.3, 0.61, 0.77])
def test_enclosures_nest_along_convergents(t):
    F = standard_map(0.6, t)
    r = rot(F, tol=1e-12)
    qs = sorted({q for _, q in convergents(cf_of(r, 8)) if q <= 200})
    prev = None
    for q in qs:
        e = rot_enclosure(F, q)
        assert e.lo <= r <= e.hi
        if prev is not None:
            assert prev.lo <= e.lo and e.hi <= prev.hi
        prev = e


def test_rot_of_golden_rotation():
    assert rot(rotation(PHI), tol=1e-12) == pytest.approx(PHI, abs=1e-12)


def test_rot_monotone_in_t():
    fam = standard_family(0.6, (0.0, 1.0))
    vals = [rot(fam.at(t), tol=1e-8) for t in np.linspace(0, 1, 100)]
    assert all(b >= a - 1e-8 for a, b in zip(vals, vals[1:]))


def test_rot_collapses_inside_locking_interval():
    fam = standard_family(0.6, (0.0, 1.0))
    li = locking_interval(fam, Fraction(2, 5))
    enc = rot(fam.at(0.5 * (li.t_minus + li.t_plus)), return_enclosure=True)
    assert enc.exact == Fraction(2, 5)


def test_zero_locking_interval_closed_form():
    eps = 0.6
    li = locking_interval(standard_family(eps, (-0.5, 0.5)), Fraction(0))
    assert li.t_minus == pytest.approx(-eps / (2 * math.pi), abs=1e-12)
    assert li.t_plus == pytest.approx(eps / (2 * math.pi), abs=1e-12)


@pytest.mark.parametrize("pq", [Fraction(1, 3), Fraction(2, 5), Fraction(3, 7)])
def test_rigid_family_intervals_degenerate(pq):
    li = locking_interval(standard_family(0.0, (0.0, 1.0)), pq)
    assert li.t_minus == pytest.approx(float(pq), abs=1e-12)
    assert li.length == pytest.approx(0.0, abs=1e-12)


def test_empty_locking_raises():
    with pytest.raises(EmptyLocking):
        locking_interval(standard_family(0.3, (0.0, 0.2)), Fraction(1, 2))


def test_endpoints_bracket_and_are_parabolic():
    fam = standard_family(0.6, (0.0, 1.0))
    li = locking_interval(fam, Fraction(1, 2))
    d = 1e-5
    assert rot(fam.at(li.t_minus - d), tol=1e-9, return_enclosure=True).hi < 0.5
    assert rot(fam.at(li.t_plus + d), tol=1e-9, return_enclosure=True).lo > 0.5
    pts, touching = periodic_points(fam.at(li.t_plus), Fraction(1, 2))
    ms = [p.multiplier for p in pts + touching]
    assert ms and min(abs(m - 1) for m in ms) < 1e-4
    assert not is_hyperbolic(fam.at(li.t_plus), Fraction(1, 2))[0]


def test_standard_map_fixed_points():
    ok, pts = is_hyperbolic(standard_map(0.6, 0.0), 0)
    assert ok
    assert [p.x for p in pts] == pytest.approx([0.0, 0.5], abs=1e-14)
    assert [p.multiplier for p in pts] == pytest.approx([1.6, 0.4], abs=1e-13)


def test_identity_is_not_hyperbolic():
    assert not is_hyperbolic(rotation(0.0), 0)[0]


def test_wrong_rational_raises():
    with pytest.raises(NoConvergence):
        is_hyperbolic(standard_map(0.6, 0.0), Fraction(1, 2))


@settings(max_examples=10, deadline=None)
@given(st.floats(0.02, 0.98))
def test_interior_points_are_hyperbolic(s):
    fam = standard_family(0.6, (0.0, 1.0))
    li = locking_interval(fam, Fraction(1, 3))
    t = li.t_minus + s * li.length
    assert is_hyperbolic(fam.at(t), Fraction(1, 3))[0]
