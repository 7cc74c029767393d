"""Slow, independent reference implementations used only by the tests."""
from __future__ import annotations

import math

import mpmath
import numpy as np

_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)


def _lagrange_eval(nodes: np.ndarray, values: np.ndarray, y: np.ndarray) -> np.ndarray:
    out = np.zeros_like(y)
    for i, (xi, vi) in enumerate(zip(nodes, values)):
        basis = np.ones_like(y)
        for j, xj in enumerate(nodes):
            if j != i:
                basis *= (y - xj) / (xi - xj)
        out += vi * basis
    return out


def _cell_integral(v, h, a, center, lo, kernel_at):
    """Gauss-Legendre integral over ``[lo, lo + h]`` of ``kernel_at(y) * p(y)``.

    ``p`` interpolates ``v`` (periodically indexed) on the ``M + 1`` nodes
    centered at grid index ``center``.
    """
    n = v.size
    M = _cell_integral.M
    offs = np.arange(-(M // 2), M // 2 + 1)
    nodes = a + (center + offs) * h
    vals = v[(center + offs) % n]
    y = lo + 0.5 * h * (_GL_X + 1.0)
    return 0.5 * h * np.sum(_GL_W * kernel_at(y) * _lagrange_eval(nodes, vals, y))


def dense_convolution(v: np.ndarray, alpha: float, a: float, b: float, M: int) -> np.ndarray:
    """O(N^2) evaluation of ``(alpha/2) int_a^b exp(-alpha|x_i - y|) p(y) dy`` at ``x_0..x_N``.

    Cells left of ``x_i`` use the stencil centered on their right end, cells
    to the right the stencil centered on their left end (the same one-sided
    interpolants the fast sweeps use).
    """
    n = v.size
    h = (b - a) / n
    _cell_integral.M = M
    out = np.zeros(n + 1)
    for i in range(n + 1):
        xi = a + i * h
        s = 0.0
        for j in range(1, n + 1):  # cell [x_{j-1}, x_j]
            lo = a + (j - 1) * h
            if j <= i:
                s += _cell_integral(v, h, a, j, lo, lambda y: np.exp(-alpha * (xi - y)))
            else:
                s += _cell_integral(v, h, a, j - 1, lo, lambda y: np.exp(-alpha * (y - xi)))
        out[i] = 0.5 * alpha * s
    return out


def dense_periodic_inverse(v: np.ndarray, alpha: float, a: float, b: float, M: int) -> np.ndarray:
    """Periodic ``L^{-1} v`` at ``x_0..x_{N-1}`` by O(N^2) direct quadrature.

    Summing the free-space convolution over all periodic images of the data
    collapses to closed-form geometric factors: a cell left of ``x_i``
    contributes ``exp(-alpha (x_i - y)) / (1 - mu)`` through its own and all
    earlier images (stencil centered on the right end), and
    ``mu exp(-alpha (y - x_i)) / (1 - mu)`` through all later images (stencil
    centered on the left end); symmetrically for cells to the right.
    """
    n = v.size
    h = (b - a) / n
    mu = math.exp(-alpha * (b - a))
    _cell_integral.M = M
    out = np.zeros(n)
    for i in range(n):
        xi = a + i * h

        def left(y):
            return np.exp(-alpha * (xi - y))

        def right(y):
            return np.exp(-alpha * (y - xi))

        s = 0.0
        for j in range(1, n + 1):
            lo = a + (j - 1) * h
            on_left = _cell_integral(v, h, a, j, lo, left)
            on_right = _cell_integral(v, h, a, j - 1, lo, right)
            if j <= i:
                s += on_left + mu * _cell_integral(v, h, a, j - 1, lo, lambda y: np.exp(-alpha * (y - xi)))
            else:
                s += on_right + mu * _cell_integral(v, h, a, j, lo, lambda y: np.exp(-alpha * (xi - y)))
        out[i] = 0.5 * alpha * s / (1.0 - mu)
    return out


def helmholtz_fd_solve(f: np.ndarray, alpha: float, h: float) -> np.ndarray:
    """Dense solve of the periodic second-order FD Helmholtz system (convergence oracle only)."""
    n = f.size
    D2 = (np.roll(np.eye(n), 1, axis=1) - 2 * np.eye(n) + np.roll(np.eye(n), -1, axis=1)) / h**2
    return np.linalg.solve(np.eye(n) - D2 / alpha**2, f)


def exponential_moments_mp(nu: float, kmax: int) -> list[float]:
    """``int_0^1 s^k exp(-nu s) ds`` by 50-digit quadrature."""
    with mpmath.workdps(50):
        return [float(mpmath.quad(lambda s: s**k * mpmath.exp(-nu * s), [0, 1])) for k in range(kmax + 1)]


def fourier_symbol_solve(b: np.ndarray, symbol) -> np.ndarray:
    """Solve ``A u = b`` for an operator diagonal in Fourier space with symbol ``symbol(q)``.

    ``b`` is 1D or 2D on ``[0, 2 pi)``; ``q = |k|^2``.
    """
    bh = np.fft.fftn(b)
    ks = np.meshgrid(*[np.fft.fftfreq(n, 1.0 / n) for n in b.shape], indexing="ij")
    q = sum(k**2 for k in ks)
    return np.real(np.fft.ifftn(bh / symbol(q)))
