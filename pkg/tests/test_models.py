import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from molt.grid import Grid1D, Grid2D
from molt.models import (
    SQRT3, Z, Z3, CHModel, SixthOrderModel, VCHModel, W, ch_energy, ch_f, ch_f_prime,
    ch_f_tilde, gradW, sixth_order_rhs_terms, vch_energy, vch_gradW,
)

TWO_PI = 2 * math.pi
reals = st.floats(-3, 3, allow_nan=False)


def test_ch_f_examples():
    assert ch_f(0.0) == 0.0
    assert ch_f(2.0) == 0.0
    assert ch_f(1.0) == 0.0
    assert ch_f_tilde(1.0) == -2.0


@given(reals)
def test_ch_f_exact_polynomial(v):
    mp.mp.dps = 40
    u = mp.mpf(v) - 1
    ref = float(u**3 - u)
    assert ch_f(v) == pytest.approx(ref, abs=4e-15 * (1 + abs(v) ** 3))
    assert ch_f_tilde(v) == pytest.approx(float(mp.mpf(v) ** 3 - 3 * mp.mpf(v) ** 2), abs=4e-15 * (1 + abs(v) ** 3))
    assert ch_f_prime(v) == pytest.approx(float(3 * u * u - 1), abs=4e-15 * (1 + v * v))


def test_ch_energy_examples():
    g = Grid1D(0, TWO_PI, 64)
    assert ch_energy(np.zeros(64), g, 0.18) == 0.0
    assert ch_energy(np.ones(64), g, 0.18) == pytest.approx(math.pi / 2, rel=1e-14)
    assert ch_energy(np.full(64, 2.0), g, 0.18) == 0.0


@given(st.integers(0, 2**32 - 1))
def test_ch_energy_nonnegative(seed):
    g = Grid2D.square(0, TWO_PI, 16)
    v = 3 * np.random.default_rng(seed).standard_normal(g.shape)
    assert ch_energy(v, g, 0.1) >= 0.0


@pytest.mark.parametrize("z", list(Z))
def test_wells(z):
    assert W(*z) == pytest.approx(0.0, abs=1e-14)
    g1, g2 = gradW(*z)
    assert abs(g1) < 1e-14 and abs(g2) < 1e-14


def test_vch_gradW_origin_is_z3():
    assert np.allclose(vch_gradW(0.0, 0.0), 0.0, atol=1e-14)


@pytest.mark.parametrize("z", list(Z))
def test_gradW_jacobian_is_18I(z):
    h = 1e-6
    J = np.empty((2, 2))
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        J[:, j] = (np.array(gradW(*(z + e))) - np.array(gradW(*(z - e)))) / (2 * h)
    np.testing.assert_allclose(J, 18 * np.eye(2), atol=1e-5)


@given(reals, reals)
def test_gradW_matches_high_precision(u1, u2):
    mp.mp.dps = 40
    a, b = mp.mpf(u1), mp.mpf(u2)
    w = lambda x, y: abs(mp.mpc(x, y) ** 3 - 1) ** 2
    ref = (mp.diff(lambda x: w(x, b), a), mp.diff(lambda y: w(a, y), b))
    got = gradW(u1, u2)
    scale = 1 + (u1 * u1 + u2 * u2) ** 2.5
    assert got[0] == pytest.approx(float(ref[0]), abs=1e-13 * scale)
    assert got[1] == pytest.approx(float(ref[1]), abs=1e-13 * scale)
    assert W(u1, u2) == pytest.approx(float(w(a, b)), abs=1e-13 * scale)


@given(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5))
def test_gradW_cross_partials_symmetric(u1, u2):
    h = 1e-6
    d12 = (gradW(u1, u2 + h)[0] - gradW(u1, u2 - h)[0]) / (2 * h)
    d21 = (gradW(u1 + h, u2)[1] - gradW(u1 - h, u2)[1]) / (2 * h)
    assert d12 == pytest.approx(d21, abs=1e-5 * (1 + abs(d12)))


def test_vch_energy_examples():
    g = Grid2D.square(0, TWO_PI, 16)
    for z in Z:
        u = np.broadcast_to(z.reshape(2, 1, 1), (2, 16, 16))
        assert vch_energy(VCHModel.from_physical(u), g, 0.3) == pytest.approx(0.0, abs=1e-12)
    v = VCHModel.from_physical(np.zeros((2, 16, 16)))
    assert vch_energy(v, g, 0.3) == pytest.approx(TWO_PI**2, rel=1e-13)
    r = np.random.default_rng(1).standard_normal((2, 16, 16))
    assert vch_energy(r, g, 0.3) >= 0.0


def test_vch_variable_roundtrip():
    u = np.random.default_rng(2).standard_normal((2, 4, 4))
    np.testing.assert_allclose(VCHModel.from_physical(VCHModel.to_physical(u)), u, atol=1e-15)
    assert Z3[1] == pytest.approx(-0.5 * SQRT3)


def test_model_validation():
    with pytest.raises(ValueError):
        CHModel(0.0)
    with pytest.raises(ValueError):
        VCHModel(-1.0)
    with pytest.raises(ValueError):
        SixthOrderModel(0.18, 0.0)


@pytest.mark.parametrize("c", [0.0, 2.0])
def test_sixth_order_rhs_equilibria(c):
    m = SixthOrderModel(0.18, 1.0)
    v = np.full((8, 8), c)
    a = (0.1 * m.eps**4) ** (1 / 3)
    g, h = sixth_order_rhs_terms(v, m, 0.1, a, np.zeros_like(v))
    # only the exact linear lag terms survive, and they cancel the cube completion of a constant
    np.testing.assert_allclose(g, -3 * a * v, atol=1e-15)
    np.testing.assert_allclose(h, 3 * a * a * v + 0.1 * m.eta * m.eps**4 * v, atol=1e-15)
    # nonlinear part alone vanishes
    gn, hn = sixth_order_rhs_terms(v, m, 0.1, 0.0, np.zeros_like(v))
    np.testing.assert_allclose(gn, 0.0, atol=1e-15)
    np.testing.assert_allclose(hn, 0.1 * m.eta * m.eps**4 * v, atol=1e-15)


def test_sixth_order_rhs_small_amplitude():
    m = SixthOrderModel(0.18, 1.0)
    e2 = m.eps**2
    g2 = Grid2D.square(0, TWO_PI, 16)
    X, Y = g2.mesh()
    d = 1e-6
    v = d * np.sin(X) * np.sin(Y)
    lap = -2 * v
    dt = 0.1
    g, h = sixth_order_rhs_terms(v, m, dt, 0.0, lap)
    # f ~ 2v, f' ~ 2, f f' ~ 4v; what is left is O(delta^2)
    g_lin = dt * (-e2 * 2 * lap + 4 * v - m.eta * e2 * 2 * v)
    h_lin = dt * (-e2 * 2 * v + m.eta * e2 * e2 * v)
    np.testing.assert_allclose(g, g_lin, atol=10 * d * d)
    np.testing.assert_allclose(h, h_lin, atol=10 * d * d)
