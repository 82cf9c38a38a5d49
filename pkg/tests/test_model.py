import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from _oracles import jacobian_fd
from planktonmap.model import (Matrix2, Params, State, char_poly, curve_v, h_poly, jacobian_general,
                               jacobian_on_curve, map_step, pq, psi, psi_at_one, psi_prime, quadratic_roots)

pos = st.floats(0.05, 5.0, allow_nan=False)
unit = st.floats(0.01, 0.99)


@st.composite
def params(draw):
    return Params(r=draw(st.floats(0.05, 1.5)), beta=draw(st.floats(0.1, 20.0)),
                  theta=draw(st.floats(0.01, 20.0)), gamma=draw(st.floats(0.02, 5.0)))


def test_params_reject_nonpositive():
    for bad in (0.0, -1.0, math.inf, math.nan):
        with pytest.raises(ValueError):
            Params(r=bad, beta=1, theta=1, gamma=1)


def test_state_rejects_negative():
    with pytest.raises(ValueError):
        State(-0.1, 0.2)


def test_map_fixes_origin_and_boundary():
    p = Params(r=0.5, beta=2, theta=0.3, gamma=1)
    assert map_step((0.0, 0.0), p) == (0.0, 0.0)
    assert map_step((1.0, 0.0), p) == (1.0, 0.0)


def test_map_on_arrays_matches_scalars():
    p = Params(r=0.5, beta=3, theta=2, gamma=0.1)
    u = np.array([0.1, 0.5, 0.9])
    v = np.array([0.2, 0.3, 0.05])
    un, vn = map_step((u, v), p)
    for i in range(3):
        assert (un[i], vn[i]) == pytest.approx(map_step((u[i], v[i]), p), rel=1e-15)


@given(params(), unit)
def test_curve_points_with_psi_theta_are_fixed(p, u):
    th = float(psi(u, p))
    if th <= 0:
        return
    q = p.with_theta(th)
    v = float(curve_v(u, q))
    un, vn = map_step((u, v), q)
    assert un == pytest.approx(u, abs=1e-12)
    assert vn == pytest.approx(v, abs=1e-10 * max(1.0, th))


def test_psi_undefined_at_zero():
    with pytest.raises(ValueError):
        psi(0.0, Params(r=1, beta=2, theta=1, gamma=1))


def test_psi_at_one_matches_psi():
    p = Params(r=0.5, beta=4, theta=1, gamma=1)
    assert psi_at_one(p) == 3.0
    assert psi_at_one(p) == pytest.approx(float(psi(1.0, p)), rel=1e-15)


@given(params(), unit)
def test_h_sign_is_psi_prime_sign(p, u):
    hp = float(h_poly(u, p))
    # finite-difference slope of psi
    d = 1e-6 * u
    slope = (float(psi(u + d, p)) - float(psi(u - d, p))) / (2 * d)
    assert float(psi_prime(u, p)) == pytest.approx(slope, rel=1e-5, abs=1e-6 * abs(float(psi(u, p))) + 1e-9)
    if abs(hp) > 1e-6:
        assert np.sign(hp) == np.sign(float(psi_prime(u, p)))


@given(params(), unit)
def test_reduced_jacobian_matches_general(p, u):
    th = float(psi(u, p))
    if th <= 0:
        return
    q = p.with_theta(th)
    Jr = jacobian_on_curve(u, q).as_array()
    Jg = jacobian_general((u, float(curve_v(u, q))), q).as_array()
    assert np.allclose(Jr, Jg, rtol=1e-10, atol=1e-10 * max(1.0, th))


@given(params(), st.floats(0.0, 2.0), st.floats(0.0, 3.0))
def test_general_jacobian_matches_finite_differences(p, u, v):
    J = jacobian_general((u, v), p).as_array()
    F = jacobian_fd(u, v, p)
    scale = max(1.0, np.abs(J).max())
    assert np.allclose(J, F, atol=1e-6 * scale)


@given(params(), unit)
def test_trace_det_match_matrix(p, u):
    th = float(psi(u, p))
    if th <= 0:
        return
    q = p.with_theta(th)
    tr, det = pq(u, q)
    J = jacobian_on_curve(u, q)
    assert tr == pytest.approx(J.trace, rel=1e-12)
    assert det == pytest.approx(J.det, rel=1e-12, abs=1e-12)
    for lam in J.eigenvalues():
        assert abs(char_poly(lam, u, q)) <= 1e-9 * max(1.0, abs(det))


@given(st.floats(-5, 5), st.floats(-5, 5))
def test_quadratic_roots_match_numpy(tr, det):
    mine = sorted(quadratic_roots(tr, det), key=lambda z: (z.real, z.imag))
    ref = sorted(np.roots([1.0, -tr, det]).astype(complex), key=lambda z: (z.real, z.imag))
    for a, b in zip(mine, ref):
        assert abs(a - b) <= 1e-7 * max(1.0, abs(b))


def test_eigenvalue_ordering_conventions():
    lam1, lam2 = Matrix2(0.5, -1.0, 1.0, 0.5).eigenvalues()
    assert lam1.imag < 0 < lam2.imag
    hi, lo = Matrix2(2.0, 0.0, 0.0, 0.5).eigenvalues()
    assert hi.real > lo.real


def test_jacobian_at_trivial_points():
    p = Params(r=0.5, beta=2, theta=0.3, gamma=1)
    J0 = jacobian_general((0.0, 0.0), p)
    assert (J0.a, J0.b, J0.c, J0.d) == (2.0, 0.0, 0.0, 0.5)
    J1 = jacobian_general((1.0, 0.0), p)
    assert J1.c == 0.0
    mu = sorted(z.real for z in J1.eigenvalues())
    assert mu == pytest.approx(sorted([0.0, 2 / 2 - 0.3 / 2 + 0.5]), abs=1e-15)


def test_worked_point_is_fixed():
    p = Params(r=0.5, beta=2, theta=0.347233, gamma=1)
    un, vn = map_step((0.371926, 0.861671), p)
    assert un == pytest.approx(0.371926, abs=1e-4)
    assert vn == pytest.approx(0.861671, abs=1e-4)


def test_psi_zero_and_tabulated_values():
    p = Params(r=0.5, beta=3, theta=2, gamma=0.1)
    assert float(psi(p.r * p.gamma / (p.beta - p.r), p)) == pytest.approx(0.0, abs=1e-15)
    assert psi_at_one(p) == pytest.approx(2.2495, abs=2e-3)
    assert float(h_poly(0.0, p)) == 2 * p.r * p.gamma**3


def test_trace_tends_to_one_at_u_one():
    p = Params(r=0.5, beta=2, theta=1, gamma=1)
    assert pq(1.0 - 1e-12, p)[0] == pytest.approx(1.0, abs=1e-10)
