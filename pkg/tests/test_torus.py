"""Glued tori: interpolation, Beltrami data, the spectral solver, tau pipelines."""
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crotnum.circle import rotation, standard_map
from crotnum.errors import NonInjectiveInterpolation
from crotnum.hyperbolic import build_suitable, crot_bands
from crotnum.torus import (
    BeltramiGrid, GluedTorusProblem, LiftGlue, RealAxis, beltrami_of, crot, crot_hyperbolic, crot_omega,
    interpolation_map, richardson, smooth_step, solve_torus,
)


def test_smooth_step_is_flat_at_both_ends():
    s, d = smooth_step(np.array([-1.0, 0.0, 1e-3, 0.5, 1 - 1e-3, 1.0, 2.0]))
    assert s.tolist()[:2] == [0.0, 0.0] and s.tolist()[-2:] == [1.0, 1.0]
    assert s[3] == pytest.approx(0.5)
    assert abs(d[2]) < 1e-100 and abs(d[4]) < 1e-100


def test_rigid_gluing_is_linear():
    c = 0.3 + 0.2j
    prob = GluedTorusProblem(RealAxis(), LiftGlue(rotation(c.real), 1j * c.imag))
    it = interpolation_map(prob, 16)
    x = np.arange(16) / 16
    assert np.max(np.abs(it.psi - (x[:, None] + x[None, :] * c))) < 1e-14
    assert np.allclose(it.jacobian, c.imag)
    mu = beltrami_of(it).mu
    assert np.max(np.abs(mu)) < 1e-14  # lattice coordinate z = x + y c makes psi the identity


def test_translation_by_i_is_flat():
    grid = beltrami_of(interpolation_map(GluedTorusProblem(RealAxis(), LiftGlue(rotation(0.0), 1j)), 16))
    assert grid.sup_mu < 1e-15
    res = solve_torus(grid)
    assert res.tau == pytest.approx(1j, abs=1e-15)


def test_small_perturbation_jacobian_is_close_to_im_omega():
    it = interpolation_map(GluedTorusProblem(RealAxis(), LiftGlue(standard_map(0.01, 0.2), 0.3j)), 32)
    assert np.max(np.abs(it.jacobian - 0.3)) < 0.05
    assert it.jacobian.min() > 0


def test_fold_is_reported():
    with pytest.raises(NonInjectiveInterpolation):
        interpolation_map(GluedTorusProblem(RealAxis(), LiftGlue(standard_map(0.9, 0.0), 0.5 + 1e-3j)), 64)


def test_zero_dilatation_gives_square_torus():
    res = solve_torus(BeltramiGrid(np.zeros((16, 16), complex)))
    assert res.tau == 1j and res.residual == 0.0


@given(st.complex_numbers(max_magnitude=0.9).filter(lambda c: abs(c) < 0.9))
@settings(max_examples=30)
def test_constant_dilatation_closed_form(c):
    res = solve_torus(BeltramiGrid(np.full((16, 16), c, complex)))
    assert abs(res.tau - 1j * (1 - c) / (1 + c)) < 1e-12


def test_solver_iterations_track_contraction():
    for c in (0.3, 0.6, 0.9j):
        mu = np.full((16, 16), c, complex) + 0.05 * abs(c) * np.sin(2 * np.pi * np.arange(16) / 16)[:, None]
        res = solve_torus(BeltramiGrid(mu), tol=1e-12)
        bound = math.log(1e-12) / math.log(float(np.max(np.abs(mu))))
        assert res.iterations <= 2 * bound + 5


def test_krylov_matches_fixed_point():
    x = np.arange(32) / 32
    mu = 0.4 * np.exp(2j * np.pi * (x[:, None] + 2 * x[None, :])) + 0.1
    a = solve_torus(BeltramiGrid(mu), method="fixed-point")
    b = solve_torus(BeltramiGrid(mu), method="krylov")
    assert abs(a.tau - b.tau) < 1e-11


def test_potential_has_the_marked_periods():
    x = np.arange(32) / 32
    mu = 0.3 * np.exp(2j * np.pi * (x[:, None] - x[None, :]))
    res = solve_torus(BeltramiGrid(mu))
    xs, ys = np.array([0.1, 0.7]), np.array([0.2, 0.55])
    assert np.max(np.abs(res.potential(xs + 1, ys) - res.potential(xs, ys) - 1)) < 1e-12
    assert np.max(np.abs(res.potential(xs, ys + 1) - res.potential(xs, ys) - res.tau)) < 1e-12


@settings(max_examples=20, deadline=None)
@given(st.floats(-1, 1), st.floats(-0.5, 0.5), st.floats(0.05, 1))
def test_rotation_modulus_is_alpha_plus_omega(alpha, re, im):
    omega = complex(re, im)
    tau = crot_omega(rotation(alpha), omega).tau
    assert abs(tau - (alpha + omega)) < 1e-8


def test_shifting_omega_by_one_shifts_tau():
    F = standard_map(0.2, 0.1)
    a = crot_omega(F, 0.1 + 0.2j).tau
    b = crot_omega(F, 1.1 + 0.2j).tau
    assert abs(b - a - 1) < 1e-9


def test_omega_sequence_is_cauchy():
    F = standard_map(0.6, 0.0)
    vals = [crot_omega(F, 1j * 2.0**-k).tau for k in range(2, 6)]
    diffs = [abs(b - a) for a, b in zip(vals, vals[1:])]
    assert all(b < a for a, b in zip(diffs, diffs[1:]))
    assert abs(vals[-1] - 0.0988847171971581j) < 0.05


def test_richardson_removes_polynomial_terms():
    hs = [0.4, 0.2, 0.1, 0.05]
    vals = [1 + 2j + 3 * h - 5 * h * h for h in hs]
    assert abs(richardson(hs, vals, 2) - (1 + 2j)) < 1e-13


def test_curve_independence_and_conjugation():
    F = standard_map(0.6, 0.0)
    a = crot_hyperbolic(F, build_suitable(F, 0, 0.05))
    b = crot_hyperbolic(F, build_suitable(F, 0, 0.1))
    c = crot_hyperbolic(F, build_suitable(F, 0, 0.05, polarity="anti-suitable"))
    assert abs(a - b) < 1e-8 and abs(a - c) < 1e-8
    assert abs(a - crot_bands(F, 0)[0]) < 1e-8


def test_grid_self_consistency():
    F = standard_map(0.6, 0.0)
    curve = build_suitable(F, 0, 0.05)
    a = crot_hyperbolic(F, curve, N=128)
    b = crot_hyperbolic(F, curve, N=256)
    assert abs(a - b) < 1e-5


def test_crot_of_rational_rotation_is_real():
    res = crot(rotation(0.4), Fraction(2, 5))
    assert res.pipeline == "rational" and res.tau == 0.4


def test_crot_dispatch_and_phase_invariance():
    F = standard_map(0.6, 0.05)
    res = crot(F, 0)
    assert res.engine == "bands" and res.tau.imag > 0
    # conjugating by a rigid rotation moves the periodic points off the grid nodes
    G = F.conjugated_by_shift(0.1234)
    assert abs(crot(G, 0).tau - res.tau) < 1e-11
    alt = crot(F, 0, engines=("interpolation",))
    assert alt.engine == "interpolation" and abs(alt.tau - res.tau) < 1e-8


def test_omega_limit_fallback():
    F = standard_map(0.6, 0.0)
    res = crot(F, 0, engines=(), heights=(0.05,))
    assert res.pipeline == "omega-limit" and res.engine == "richardson"
    assert abs(res.tau - 0.0988847171971581j) < 1e-3
