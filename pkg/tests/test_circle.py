"""Fourier lifts: evaluation, iteration, inversion, distortion, refitting."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from crotnum.circle import (
    FourierLift, MonotoneFamily, distortion, fit_from_samples, fit_residual, invert_complex, invert_real, iterate,
    iterate_with_derivative, rotation, sample, standard_family, standard_map,
)
from crotnum.errors import NotADiffeomorphism, OrbitLeftStrip, StripExceeded, TailNotDecaying

coef = st.floats(-0.005, 0.005)


@st.composite
def lifts(draw, K=3):
    k = draw(st.integers(1, K))
    a = [draw(coef) for _ in range(k)]
    b = [draw(coef) for _ in range(k)]
    return FourierLift(draw(st.floats(-1, 1)), a, b, 0.3)


points = st.complex_numbers(max_magnitude=2).map(lambda z: complex(z.real, 0.25 * math.tanh(z.imag)))


def test_rotation_eval_is_translation():
    F = rotation(0.3)
    assert F.eval(0.2 + 0.1j) == pytest.approx(0.5 + 0.1j)


def test_standard_map_derivative_at_zero():
    eps = 0.6
    F = standard_map(eps, 0.2)
    assert float(F.eval(0.0, 1)) == pytest.approx(1 + eps, abs=1e-15)
    h = 1e-5
    fd = (F.eval(h) - F.eval(-h)) / (2 * h)
    assert float(fd) == pytest.approx(1 + eps, abs=1e-9)


@given(lifts(), points)
def test_lift_periodicity_and_real_symmetry(F, z):
    assert abs(F.eval(z + 1) - F.eval(z) - 1) < 1e-12
    assert abs(F.eval(np.conj(z)) - np.conj(F.eval(z))) < 1e-14


@settings(max_examples=30)
@given(lifts(), st.lists(st.floats(-3, 3), min_size=100, max_size=100))
def test_derivatives_match_central_differences(F, xs):
    x = np.array(xs)
    h = 1e-6
    d1 = F.eval(x, 1)
    fd1 = (F.eval(x + h) - F.eval(x - h)) / (2 * h)
    assert np.all(np.abs(d1 - fd1) <= 1e-6 * (1 + np.abs(d1)))
    fd2 = (F.eval(x + h, 1) - F.eval(x - h, 1)) / (2 * h)
    assert np.all(np.abs(F.eval(x, 2) - fd2) <= 1e-5 * (1 + np.abs(fd2)))


def test_strip_is_enforced():
    F = standard_map(0.5)
    with pytest.raises(StripExceeded):
        F.eval(0.1 + 0.6j)


def test_non_diffeomorphism_is_rejected():
    with pytest.raises(NotADiffeomorphism):
        FourierLift(0.0, [0.0], [0.2])  # F' = 1 + 0.4 pi cos < 0 somewhere


def test_iterate_trivial_cases():
    assert iterate(rotation(0.1), 0.0, 10) == pytest.approx(1.0)
    assert iterate(standard_map(0.5), 0.3, 0) == 0.3


def test_iterate_matches_direct_loop():
    F = standard_map(0.7, 0.37)
    x = np.linspace(0, 1, 17)
    direct = x.copy()
    for _ in range(8):
        direct = direct + 0.37 + 0.7 / (2 * math.pi) * np.sin(2 * math.pi * direct)
    assert np.max(np.abs(iterate(F, x, 8) - direct)) < 1e-13
    y, d = iterate_with_derivative(F, x, 8)
    h = 1e-6
    fd = (iterate(F, x + h, 8) - iterate(F, x - h, 8)) / (2 * h)
    assert np.max(np.abs(d - fd) / np.abs(d)) < 1e-7


def test_iterate_reports_escape_index():
    F = standard_map(0.6, 0.0, h=0.5)
    with pytest.raises(OrbitLeftStrip) as info:
        iterate(F, 0.0 + 0.45j, 20)
    assert info.value.index >= 1


def test_invert_real_round_trip():
    F = standard_map(0.9, 0.123)
    y = np.random.default_rng(1).uniform(-2, 2, 1000)
    assert np.max(np.abs(F.eval(invert_real(F, y)) - y)) < 1e-12
    assert invert_real(rotation(0.4), 1.0) == pytest.approx(0.6)


def test_invert_real_matches_grid_lookup():
    F = standard_map(0.6, 0.1)
    xs = np.linspace(-1, 2, 300001)
    ys = F.eval(xs)
    for y in (0.0, 0.31, 0.77):
        i = int(np.searchsorted(ys, y))
        assert abs(invert_real(F, y) - xs[i]) < 2e-5


def test_invert_complex_round_trip():
    F = standard_map(0.6, 0.1)
    w = np.array([0.2 + 0.1j, 0.7 - 0.2j])
    assert np.max(np.abs(F.eval(invert_complex(F, w)) - w)) < 1e-13


def test_distortion_of_rotation_is_zero():
    assert distortion(rotation(0.3)) == 0.0


def test_distortion_of_standard_map_against_trapezoid_oracle():
    eps = 0.6
    x = np.arange(2**16) / 2**16
    k = 2 * math.pi
    oracle = np.mean(np.abs(-eps * k * np.sin(k * x) / (1 + eps * np.cos(k * x))))
    for t in (0.0, 0.4):
        assert distortion(standard_map(eps, t)) == pytest.approx(oracle, rel=1e-8)


def test_distortion_invariant_under_rotation_conjugacy():
    F = FourierLift(0.1, [0.03, 0.01], [0.02, -0.01])
    assert distortion(F.conjugated_by_shift(0.37)) == pytest.approx(distortion(F), rel=1e-9)


def test_fit_recovers_rotation_and_trig_polynomial():
    G = fit_from_samples(*sample(rotation(0.25), 16))
    assert G.c0 == pytest.approx(0.25) and G.K == 0
    F = FourierLift(0.2, [0.02, -0.01, 0.005], [0.01, 0.0, -0.004])
    G = fit_from_samples(*sample(F, 32, x0=0.1))
    assert G.K == 3
    assert np.max(np.abs(G.a - F.a)) < 1e-12 and np.max(np.abs(G.b - F.b)) < 1e-12
    assert fit_residual(G) < 1e-12


@settings(max_examples=25)
@given(lifts(K=4))
def test_fit_of_samples_is_identity(F):
    G = fit_from_samples(*sample(F, 16))
    x = np.linspace(0, 1, 33)
    assert np.max(np.abs(G.eval(x) - F.eval(x))) < 1e-12


def test_fit_rejects_noise():
    x, y = sample(standard_map(0.3), 64)
    y = y + 1e-3 * np.random.default_rng(3).standard_normal(64)
    with pytest.raises(TailNotDecaying):
        fit_from_samples(x, y, threshold=1e-8)


def test_fit_shrinks_the_strip():
    G = fit_from_samples(*sample(standard_map(0.3, h=0.5), 16), F_h=0.5)
    assert G.h == pytest.approx(0.4)


def test_record_round_trip():
    F = FourierLift(0.1, [0.03, 0.01], [0.02, -0.01], 0.4)
    G = FourierLift.from_record(F.to_record())
    assert G.c0 == F.c0 and np.array_equal(G.a, F.a) and np.array_equal(G.b, F.b) and G.h == F.h


def test_family_is_base_plus_t():
    fam = standard_family(0.5, (0.0, 1.0))
    assert isinstance(fam, MonotoneFamily)
    assert fam.at(0.3).eval(0.2) == pytest.approx(standard_map(0.5, 0.3).eval(0.2))
