import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from molt.grid import Grid1D, Grid2D
from molt.helmholtz import (
    apply_D, apply_Linv_dxx, apply_Linv_periodic, exponential_moments, fast_convolve,
    interpolant_dxx, lagrange_weights, make_plan, second_order_weights,
)
from oracles import dense_convolution, dense_periodic_inverse, exponential_moments_mp

TWO_PI = 2 * math.pi


def test_second_order_weights_closed_form():
    P, Q, R = second_order_weights(1.0)
    assert (P, Q, R) == pytest.approx((0.3678794, 0.2642411, -0.0518191), abs=1e-7)
    assert second_order_weights(800.0) == pytest.approx((1.0, 0.0, 0.0), abs=2e-3)


def test_m2_plan_matches_lagrange_weights():
    # the closed-form P, Q, R rule is the same quadratic interpolant
    for nu in (1e-3, 0.1, 0.6, 1.0, 7.0):
        g = Grid1D(0, nu * 16, 16)
        p = make_plan(1.0, g, 2)
        np.testing.assert_allclose(p.weights_left, lagrange_weights(nu, 2), rtol=1e-13, atol=1e-17)
    P, Q, R = second_order_weights(0.6)
    np.testing.assert_allclose([Q + R, P - 2 * R, R], lagrange_weights(0.6, 2), rtol=1e-13)


@given(st.floats(1e-4, 60.0))
def test_exponential_moments_against_high_precision(nu):
    np.testing.assert_allclose(exponential_moments(nu, 6), exponential_moments_mp(nu, 6), rtol=1e-13)


@pytest.mark.parametrize("M", [2, 4, 6])
@given(nu=st.floats(1e-3, 20.0))
def test_weights_exact_for_polynomials(M, nu):
    # alpha int_0^h exp(-alpha s) p(x_j - s) ds for p(x) = x^k, k <= M, nodes at x_{j+m} = -m h (h=1)
    w = lagrange_weights(nu, M)
    offs = np.arange(-(M // 2), M // 2 + 1)
    mom = exponential_moments_mp(nu, M)
    for k in range(M + 1):
        exact = nu * (-1) ** k * mom[k]  # p(-s) = (-s)^k; scaled to nu via alpha h = nu
        approx = np.dot(w, (offs.astype(float)) ** k)
        assert approx == pytest.approx(exact, rel=1e-10, abs=1e-13)


def test_make_plan_rejects_bad_input():
    g = Grid1D(0, 1, 8)
    for alpha in (0.0, -1.0, math.inf):
        with pytest.raises(ValueError):
            make_plan(alpha, g)
    with pytest.raises(ValueError):
        make_plan(1.0, g, 3)


@pytest.mark.parametrize("M", [2, 4, 6])
def test_fast_convolve_constant(M):
    g = Grid1D(0, TWO_PI, 128)
    alpha = 2.0
    res = fast_convolve(np.ones(128), make_plan(alpha, g, M))
    x = np.append(g.x, TWO_PI)
    exact = 1 - 0.5 * (np.exp(-alpha * x) + np.exp(-alpha * (TWO_PI - x)))
    np.testing.assert_allclose(res.I, exact, atol=1e-13)
    np.testing.assert_array_equal(res.I, res.IL + res.IR)
    assert np.all(fast_convolve(np.zeros(128), make_plan(alpha, g, M)).I == 0.0)


@pytest.mark.parametrize("M", [2, 4, 6])
def test_fast_convolve_dense_oracle(M):
    rng = np.random.default_rng(1)
    g = Grid1D(0, TWO_PI, 24)
    v = rng.standard_normal(24)
    got = fast_convolve(v, make_plan(1.7, g, M)).I
    ref = dense_convolution(v, 1.7, 0, TWO_PI, M)
    assert np.max(np.abs(got - ref)) <= 1e-13 * np.max(np.abs(ref))


def test_periodic_inverse_impulse_dense_oracle():
    g = Grid1D(0, TWO_PI, 20)
    e = np.zeros(20)
    e[7] = 1.0
    got = apply_Linv_periodic(e, make_plan(2.5, g, 4))
    ref = dense_periodic_inverse(e, 2.5, 0, TWO_PI, 4)
    np.testing.assert_allclose(got, ref, atol=1e-14)


@pytest.mark.parametrize("M", [2, 4, 6])
@pytest.mark.parametrize("alpha", [0.3, 2.0, 40.0])
def test_periodic_inverse_preserves_constants(M, alpha):
    g = Grid1D(0, TWO_PI, 96)
    c = -1.25
    w = apply_Linv_periodic(np.full(96, c), make_plan(alpha, g, M))
    assert np.max(np.abs(w - c)) <= 1e-12


@given(st.integers(0, 2**32 - 1), st.floats(0.2, 30.0), st.sampled_from([2, 4, 6]))
def test_mean_preserved(seed, alpha, M):
    n = 64
    f = np.random.default_rng(seed).standard_normal(n)
    w = apply_Linv_periodic(f, make_plan(alpha, Grid1D(0, TWO_PI, n), M))
    assert abs(w.mean() - f.mean()) <= 10 * np.finfo(float).eps * n * np.max(np.abs(f))


@given(st.integers(0, 2**32 - 1), st.floats(-3, 3), st.floats(-3, 3))
def test_linearity(seed, a, b):
    rng = np.random.default_rng(seed)
    f, h = rng.standard_normal((2, 48))
    p = make_plan(3.0, Grid1D(0, TWO_PI, 48), 4)
    lhs = apply_Linv_periodic(a * f + b * h, p)
    rhs = a * apply_Linv_periodic(f, p) + b * apply_Linv_periodic(h, p)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


@pytest.mark.parametrize("M", [2, 4, 6])
def test_sin_eigenfunction_order(M):
    alpha = 2.0
    lam = 1.0 / (1.0 + 1.0 / alpha**2)
    errs = []
    ns = [64, 128, 256, 512]
    for n in ns:
        g = Grid1D(0, TWO_PI, n)
        errs.append(np.max(np.abs(apply_Linv_periodic(np.sin(g.x), make_plan(alpha, g, M)) - lam * np.sin(g.x))))
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(3) if errs[i + 1] > 1e-14]
    assert min(orders) >= M - 0.3


def test_D_and_Linv_dxx_identities():
    alpha = 3.0
    g = Grid1D(0, TWO_PI, 256)
    p = make_plan(alpha, g, 6)
    s = np.sin(g.x)
    lam = 1.0 / (1.0 + 1.0 / alpha**2)
    np.testing.assert_allclose(apply_D(s, p), s * (1 / alpha**2) * lam, atol=1e-12)
    np.testing.assert_allclose(apply_Linv_dxx(s, p), -s * lam, atol=1e-10)
    assert np.max(np.abs(apply_D(np.full(256, 4.0), p))) < 1e-12
    assert np.max(np.abs(apply_Linv_dxx(np.full(256, 4.0), p))) < 1e-10
    f = np.random.default_rng(0).standard_normal(256)
    np.testing.assert_array_equal(apply_Linv_dxx(f, p), alpha**2 * (apply_Linv_periodic(f, p) - f))


def test_D_dense_oracle():
    f = np.random.default_rng(5).standard_normal(16)
    g = Grid1D(0, TWO_PI, 16)
    ref = f - dense_periodic_inverse(f, 4.0, 0, TWO_PI, 4)
    np.testing.assert_allclose(apply_D(f, make_plan(4.0, g, 4)), ref, atol=1e-13)


def test_axis_application_matches_lines():
    g = Grid2D.square(0, TWO_PI, 16)
    f = np.random.default_rng(3).standard_normal(g.shape)
    p = make_plan(2.0, g.gx, 4)
    by_axis0 = apply_Linv_periodic(f, p, axis=0)
    for j in range(16):
        np.testing.assert_allclose(by_axis0[:, j], apply_Linv_periodic(f[:, j], p), atol=1e-15)


@pytest.mark.parametrize("M", [2, 4, 6])
def test_interpolant_dxx_is_limit(M):
    g = Grid1D(0, TWO_PI, 128)
    f = np.sin(3 * g.x) + np.cos(g.x)
    big = 2e3
    lim = big**2 * (apply_Linv_periodic(f, make_plan(big, g, M)) - f)
    np.testing.assert_allclose(interpolant_dxx(f, g, M), lim, rtol=0, atol=1e-4 * np.max(np.abs(lim)))
    exact = -9 * np.sin(3 * g.x) - np.cos(g.x)
    assert np.max(np.abs(interpolant_dxx(f, g, M) - exact)) < 10 * (3 * g.h) ** M
