"""Phase-field models in the shifted variables the solvers work with.

Scalar CH is written for ``v = u + 1`` so the wells sit at ``v = 0`` and
``v = 2``. Vector CH is written for ``v = u - z3`` with ``z3`` one of the three
cube roots of unity. Both share the form

    v_t = Lap(-eps^2 Lap v + N(v)),

with ``N = f`` for CH and ``N = grad W(v + z3)`` for VCH. The implicit
operators subtract the linear part ``kappa * v`` of ``N`` (``kappa = 2`` for
CH, ``18`` for VCH, the curvature of the potential at a minimum).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import Grid, Grid1D, Grid2D, centered_gradient_sq

SQRT3 = math.sqrt(3.0)
# cube roots of unity as (x, y) points
Z = np.array([[1.0, 0.0], [-0.5, 0.5 * SQRT3], [-0.5, -0.5 * SQRT3]])
Z3 = Z[2]


def ch_f(v):
    """``f(v - 1) = v^3 - 3 v^2 + 2 v``."""
    return v * (v * (v - 3.0) + 2.0)


def ch_f_tilde(v):
    """``f(v) - 2 v = v^3 - 3 v^2``."""
    return v * v * (v - 3.0)


def ch_f_prime(v):
    return 3.0 * v * v - 6.0 * v + 2.0


def ch_potential(v):
    """``F(v - 1) = v^4/4 - v^3 + v^2 = (v (v - 2))^2 / 4``."""
    w = v * (v - 2.0)
    return 0.25 * w * w


def _integrate(density: np.ndarray, grid: Grid) -> float:
    return float(np.sum(density) * grid.cell_volume)


def ch_energy(v: np.ndarray, grid: Grid, eps: float) -> float:
    """Rectangle-rule energy ``sum h^d [eps^2/2 |grad v|^2 + F(v - 1)]``."""
    return _integrate(0.5 * eps**2 * centered_gradient_sq(v, grid) + ch_potential(v), grid)


def W(u1, u2):
    """Triple-well potential ``prod_i |u - z_i|^2 = |u^3 - 1|^2`` in complex notation."""
    r2 = u1 * u1 + u2 * u2
    return r2 * r2 * r2 - 2.0 * (u1**3 - 3.0 * u1 * u2 * u2) + 1.0


def gradW(u1, u2):
    r2 = u1 * u1 + u2 * u2
    r4 = r2 * r2
    g1 = 6.0 * u1 * r4 - 6.0 * u1 * u1 + 6.0 * u2 * u2
    g2 = 6.0 * u2 * r4 + 12.0 * u1 * u2
    return g1, g2


def vch_gradW(v1, v2):
    """``grad W`` evaluated at ``v + z3``."""
    return gradW(v1 + Z3[0], v2 + Z3[1])


def vch_gradW_tilde(v1, v2):
    """``grad W(v + z3) - 18 v``, the part lagged by the VCH iteration."""
    g1, g2 = vch_gradW(v1, v2)
    return g1 - 18.0 * v1, g2 - 18.0 * v2


def vch_energy(v: np.ndarray, grid: Grid, eps: float) -> float:
    """Energy of a stacked field ``v`` of shape ``(2, *grid.shape)``."""
    return _integrate(
        0.5 * eps**2 * centered_gradient_sq(v, grid) + W(v[0] + Z3[0], v[1] + Z3[1]), grid
    )


@dataclass(frozen=True)
class CHModel:
    eps: float
    kappa: float = 2.0

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")

    def nonlinearity(self, v: np.ndarray) -> np.ndarray:
        return ch_f(v)

    def energy(self, v: np.ndarray, grid: Grid) -> float:
        return ch_energy(v, grid, self.eps)

    @staticmethod
    def to_physical(v: np.ndarray) -> np.ndarray:
        return v - 1.0

    @staticmethod
    def from_physical(u: np.ndarray) -> np.ndarray:
        return u + 1.0


@dataclass(frozen=True)
class VCHModel:
    """Fields are stacked ``(2, nx, ny)`` arrays of ``v = u - z3``."""

    eps: float
    kappa: float = 18.0

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")

    def nonlinearity(self, v: np.ndarray) -> np.ndarray:
        return np.stack(vch_gradW(v[0], v[1]))

    def energy(self, v: np.ndarray, grid: Grid) -> float:
        return vch_energy(v, grid, self.eps)

    @staticmethod
    def to_physical(v: np.ndarray) -> np.ndarray:
        return v + Z3.reshape((2,) + (1,) * (v.ndim - 1))

    @staticmethod
    def from_physical(u: np.ndarray) -> np.ndarray:
        return u - Z3.reshape((2,) + (1,) * (u.ndim - 1))


@dataclass(frozen=True)
class SixthOrderModel:
    """``u_t = Lap[(eps^2 Lap - f'(u) + eps^2 eta)(eps^2 Lap u - f(u))]`` in ``v = u + 1``.

    Expanding the product gives ``v_t = eps^4 Lap^3 v + Lap N(v)`` with

        N = -eps^2 Lap f - eps^2 f' Lap v + f f' + eta eps^4 Lap v - eta eps^2 f.
    """

    eps: float
    eta: float

    def __post_init__(self):
        if not (self.eps > 0 and self.eta > 0):
            raise ValueError(f"eps and eta must be positive, got {self.eps}, {self.eta}")

    def energy(self, v: np.ndarray, grid: Grid) -> float:
        # the CH energy is reported as a diagnostic only
        return ch_energy(v, grid, self.eps)


def sixth_order_rhs_terms(v: np.ndarray, model: SixthOrderModel, dt: float, a: float,
                          lap_v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Lagged right-hand side of the cube-completed BE step, split by Laplacian power.

    ``(I - a Lap)^3 v_new = v_old + Lap g + Lap^2 h`` with ``a^3 = dt eps^4``
    and, at the lagged iterate ``v``::

        g = dt (-eps^2 f' Lap v + f f' - eta eps^2 f) - 3 a v
        h = dt (-eps^2 f + eta eps^4 v) + 3 a^2 v

    ``lap_v`` is the bare Laplacian of ``v``; it only enters through the
    pointwise product with ``f'``.
    """
    e2 = model.eps**2
    f = ch_f(v)
    fp = ch_f_prime(v)
    g = dt * (-e2 * fp * lap_v + f * fp - model.eta * e2 * f) - 3.0 * a * v
    h = dt * (-e2 * f + model.eta * e2 * e2 * v) + 3.0 * a * a * v
    return g, h


def ch1d_initial(grid: Grid1D) -> np.ndarray:
    """``u0 = cos 2x + exp(cos(x + 0.1)) / 100`` (physical variable)."""
    x = grid.x
    return np.cos(2.0 * x) + 0.01 * np.exp(np.cos(x + 0.1))


def ch2d_initial(grid: Grid2D) -> np.ndarray:
    X, Y = grid.mesh()
    s = np.sin(X) + np.sin(Y)
    return 2.0 * np.exp(s - 2.0) + 2.2 * np.exp(-s - 2.0) - 1.0


def vch_initial(grid: Grid2D) -> np.ndarray:
    """``u1`` from the 2D CH data, ``u2 = sin y``; returned stacked in the physical variable."""
    _, Y = grid.mesh()
    return np.stack([ch2d_initial(grid), np.sin(Y)])
