"""O(N) inversion of the 1D modified Helmholtz operator ``L = I - d_xx / alpha^2``.

``L^{-1}`` is applied by convolving with the Green's function
``(alpha/2) exp(-alpha |x|)``. The convolution is split into a left-going and
a right-going sweep, each an exponential recursion over local cell integrals
``J^L_j`` / ``J^R_j``. The local integrals are computed by integrating a
Lagrange interpolant of the data on a centered ``M + 1`` point stencil
exactly against the exponential kernel. The homogeneous part
``B_a exp(-alpha (x - a)) + B_b exp(-alpha (b - x))`` closes the line
periodically.

Everything here works along one axis of an n-dimensional array, so 2D line
solves are the same kernel run over every row (or column).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numba
import numpy as np
from scipy.special import gammainc

from .grid import Grid1D

SUPPORTED_ORDERS = (2, 4, 6)
# below this nu the closed-form R loses ~eps/nu^2 to cancellation; the moment
# route gives the same weights stably
_PQR_MIN_NU = 0.5


@lru_cache(maxsize=None)
def _lagrange_monomials(M: int) -> np.ndarray:
    """Monomial coefficients of the Lagrange basis on nodes ``s = -m``.

    Row ``i`` belongs to offset ``m = i - M/2`` (node ``s_i = -m``); column
    ``k`` multiplies ``s**k``. Built with exact rationals.
    """
    half = M // 2
    nodes = [Fraction(-m) for m in range(-half, half + 1)]
    rows = []
    for i, si in enumerate(nodes):
        poly = [Fraction(1)]
        denom = Fraction(1)
        for j, sj in enumerate(nodes):
            if j == i:
                continue
            # poly *= (s - sj)
            new = [Fraction(0)] * (len(poly) + 1)
            for k, c in enumerate(poly):
                new[k] -= c * sj
                new[k + 1] += c
            poly = new
            denom *= si - sj
        rows.append([float(c / denom) for c in poly])
    return np.array(rows)


def exponential_moments(nu: float, kmax: int) -> np.ndarray:
    """``int_0^1 s^k exp(-nu s) ds`` for ``k = 0..kmax``.

    Uses the regularized incomplete gamma function, which stays accurate for
    small ``nu`` where the upward recursion cancels catastrophically.
    """
    k = np.arange(kmax + 1)
    fact = np.array([math.factorial(i) for i in k], dtype=float)
    return gammainc(k + 1, nu) * fact / nu ** (k + 1)


def lagrange_weights(nu: float, M: int) -> np.ndarray:
    """Left-cell weights ``w_m``, ``m = -M/2..M/2``, with
    ``alpha * int_{x_{j-1}}^{x_j} exp(-alpha (x_j - x')) p(x') dx' = sum_m w_m v_{j+m}``.
    """
    C = _lagrange_monomials(M)
    return nu * (C @ exponential_moments(nu, M))


def second_order_weights(nu: float) -> tuple[float, float, float]:
    """Closed-form ``(P, Q, R)`` of the three point rule."""
    d = math.exp(-nu)
    P = 1.0 - (1.0 - d) / nu
    Q = -d + (1.0 - d) / nu
    R = (1.0 - d) / nu**2 - (1.0 + d) / (2.0 * nu)
    return P, Q, R


@dataclass(frozen=True, eq=False)
class HelmholtzPlan:
    """Precomputed weights and closure constants for one ``(alpha, grid, M)``."""

    alpha: float
    grid: Grid1D
    M: int
    nu: float
    d: float
    mu: float
    # local-integral weights for offsets -M/2..M/2, without the 1/2 kernel factor
    weights_left: np.ndarray
    weights_right: np.ndarray
    PQR: tuple[float, float, float] | None = None

    @property
    def n(self) -> int:
        return self.grid.n


def make_plan(alpha: float, grid: Grid1D, M: int = 4) -> HelmholtzPlan:
    if not (alpha > 0 and np.isfinite(alpha)):
        raise ValueError(f"alpha must be positive and finite, got {alpha}")
    if M not in SUPPORTED_ORDERS:
        raise ValueError(f"quadrature order M must be one of {SUPPORTED_ORDERS}, got {M}")
    nu = alpha * grid.h
    d = math.exp(-nu)
    mu = math.exp(-alpha * grid.length)
    PQR = None
    if M == 2 and nu >= _PQR_MIN_NU:
        PQR = second_order_weights(nu)
        P, Q, R = PQR
        wl = np.array([Q + R, P - 2.0 * R, R])
    else:
        wl = lagrange_weights(nu, M)
    wl.setflags(write=False)
    wr = wl[::-1].copy()
    wr.setflags(write=False)
    return HelmholtzPlan(alpha, grid, M, nu, d, mu, wl, wr, PQR)


@dataclass
class ConvolutionResult:
    """Particular solution at ``x_0 .. x_N`` and its two one-sided sweeps."""

    I: np.ndarray
    IL: np.ndarray
    IR: np.ndarray


@numba.njit(cache=True)
def _sweep_line(v, wl, wr, d, IL, IR):
    n = v.shape[0]
    half = (wl.shape[0] - 1) // 2
    ext = np.empty(n + 2 * half + 1)
    for i in range(n + 2 * half + 1):
        ext[i] = v[(i - half) % n]
    # ext[j + half] == v[j mod n]
    acc = 0.0
    IL[0] = 0.0
    for j in range(1, n + 1):
        s = 0.0
        for m in range(wl.shape[0]):
            s += wl[m] * ext[j + m]
        acc = d * acc + 0.5 * s
        IL[j] = acc
    acc = 0.0
    IR[n] = 0.0
    for j in range(n - 1, -1, -1):
        s = 0.0
        for m in range(wr.shape[0]):
            s += wr[m] * ext[j + m]
        acc = d * acc + 0.5 * s
        IR[j] = acc


@numba.njit(cache=True)
def _stencil(v, w, j, half, n):
    # sum_m w[m] v[(j + m - half) mod n]; the modulo is only needed near the ends
    s = 0.0
    lo = j - half
    if lo >= 0 and lo + w.shape[0] <= n:
        for m in range(w.shape[0]):
            s += w[m] * v[lo + m]
    else:
        for m in range(w.shape[0]):
            s += w[m] * v[(lo + m) % n]
    return s


@numba.njit(cache=True)
def _linv_lines(v2, wl, wr, d, mu, out):
    # both sweeps accumulate straight into ``out``; only the end totals
    # IL[n] and IR[0] are kept for the periodic closure
    nlines, n = v2.shape
    half = (wl.shape[0] - 1) // 2
    scale = 1.0 / (1.0 - mu)
    for r in range(nlines):
        v = v2[r]
        o = out[r]
        acc = 0.0
        o[0] = 0.0
        for j in range(1, n):
            acc = d * acc + 0.5 * _stencil(v, wl, j, half, n)
            o[j] = acc
        il_end = d * acc + 0.5 * _stencil(v, wl, n, half, n)
        acc = 0.0
        for j in range(n - 1, -1, -1):
            acc = d * acc + 0.5 * _stencil(v, wr, j, half, n)
            o[j] += acc
        Ba = il_end * scale
        Bb = acc * scale
        p = 1.0
        for j in range(n):
            if p == 0.0:
                break
            o[j] += Ba * p
            p *= d
        p = d
        for j in range(n - 1, -1, -1):
            if p == 0.0:
                break
            o[j] += Bb * p
            p *= d


def fast_convolve(v: np.ndarray, plan: HelmholtzPlan) -> ConvolutionResult:
    """Sweep a single periodic line; returns values at ``x_0 .. x_N``."""
    v = np.ascontiguousarray(v, dtype=float)
    if v.shape != (plan.n,):
        raise ValueError(f"expected a line of length {plan.n}, got shape {v.shape}")
    IL = np.empty(plan.n + 1)
    IR = np.empty(plan.n + 1)
    _sweep_line(v, plan.weights_left, plan.weights_right, plan.d, IL, IR)
    return ConvolutionResult(IL + IR, IL, IR)


def apply_Linv_periodic(v: np.ndarray, plan: HelmholtzPlan, axis: int = -1) -> np.ndarray:
    """``L^{-1} v`` with periodic closure along ``axis`` (every line independently)."""
    # mu underflows to 0 for very large alpha * (b - a); the closure is then inert
    assert 0.0 <= plan.mu < 1.0, "periodic closure needs mu < 1"
    v = np.asarray(v, dtype=float)
    if v.shape[axis] != plan.n:
        raise ValueError(f"axis {axis} has length {v.shape[axis]}, plan expects {plan.n}")
    last = axis in (-1, v.ndim - 1)
    moved = v if last else np.moveaxis(v, axis, -1)
    lines = np.ascontiguousarray(moved).reshape(-1, plan.n)
    out = np.empty_like(lines)
    _linv_lines(lines, plan.weights_left, plan.weights_right, plan.d, plan.mu, out)
    out = out.reshape(moved.shape)
    return out if last else np.moveaxis(out, -1, axis)


def apply_D(v: np.ndarray, plan: HelmholtzPlan, axis: int = -1) -> np.ndarray:
    """``D = I - L^{-1}``, i.e. ``(-d_xx / alpha^2) L^{-1}``."""
    return v - apply_Linv_periodic(v, plan, axis)


def apply_Linv_dxx(v: np.ndarray, plan: HelmholtzPlan, axis: int = -1) -> np.ndarray:
    """``L^{-1} d_xx v = alpha^2 (L^{-1} - I) v``; ``d_xx v`` is never formed."""
    return plan.alpha**2 * (apply_Linv_periodic(v, plan, axis) - v)


@lru_cache(maxsize=None)
def _limit_stencil(M: int) -> np.ndarray:
    # second derivative at s = 0 of the Lagrange basis, per unit h^2
    C = _lagrange_monomials(M)
    return 2.0 * C[:, 2]


def interpolant_dxx(v: np.ndarray, grid: Grid1D, M: int, axis: int = -1) -> np.ndarray:
    """Second derivative at the nodes of the centered degree-``M`` interpolant.

    This is the ``alpha -> infinity`` limit of ``alpha^2 (L^{-1} - I)`` for the
    same local quadrature. Only used where a bare (not pre-inverted) second
    derivative of a pointwise product is unavoidable.
    """
    w = _limit_stencil(M)
    half = M // 2
    out = np.zeros_like(np.asarray(v, dtype=float))
    for i, m in enumerate(range(-half, half + 1)):
        # node s = -m sits at x_{j+m}; in s the derivative sign is even
        if w[i] != 0.0:
            out += w[i] * np.roll(v, -m, axis=axis)
    return out / grid.h**2
