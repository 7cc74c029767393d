"""Uniform periodic grids and the small set of field diagnostics shared by the solvers.

Fields are plain numpy arrays. A 1D field has shape ``(n,)`` and a 2D field
``(nx, ny)`` with the first index running along x. Vector fields stack their
components along a leading axis, e.g. ``(2, nx, ny)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class Grid1D:
    """Uniform partition ``a = x_0 < ... < x_n = b`` of a periodic interval.

    Only the ``n`` distinct nodes ``x_0 .. x_{n-1}`` are stored; ``x_n`` is
    the periodic image of ``x_0``.
    """

    a: float
    b: float
    n: int

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b)) or self.b <= self.a:
            raise ValueError(f"need a < b, got a={self.a}, b={self.b}")
        if int(self.n) != self.n or self.n < 4:
            raise ValueError(f"need an integer n >= 4, got {self.n}")

    @property
    def length(self) -> float:
        return self.b - self.a

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.n

    @cached_property
    def x(self) -> np.ndarray:
        return self.a + self.h * np.arange(self.n)

    @property
    def shape(self) -> tuple[int]:
        return (self.n,)

    @property
    def cell_volume(self) -> float:
        return self.h

    @property
    def ndim(self) -> int:
        return 1

    @property
    def axes(self) -> tuple["Grid1D"]:
        return (self,)

    def nearest_index(self, x: float) -> int:
        return int(round((x - self.a) / self.h)) % self.n


@dataclass(frozen=True)
class Grid2D:
    """Tensor product of two periodic 1D grids."""

    gx: Grid1D
    gy: Grid1D

    @classmethod
    def square(cls, a: float, b: float, n: int) -> "Grid2D":
        g = Grid1D(a, b, n)
        return cls(g, g)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.gx.n, self.gy.n)

    @property
    def cell_volume(self) -> float:
        return self.gx.h * self.gy.h

    @property
    def ndim(self) -> int:
        return 2

    @property
    def axes(self) -> tuple[Grid1D, Grid1D]:
        return (self.gx, self.gy)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.gx.x, self.gy.x, indexing="ij")

    def nearest_index(self, x: float, y: float) -> tuple[int, int]:
        return self.gx.nearest_index(x), self.gy.nearest_index(y)


Grid = Grid1D | Grid2D


def max_norm(f: np.ndarray) -> float:
    return float(np.max(np.abs(f)))


def mean(f: np.ndarray) -> float:
    """Arithmetic mean over the periodic unknowns (mass diagnostic)."""
    return float(np.mean(f))


def centered_gradient_sq(f: np.ndarray, grid: Grid) -> np.ndarray:
    """Squared gradient magnitude from second-order centered differences.

    Periodic wrap is used at the ends of every line. For a vector field the
    component axis must come first and the result is summed over components.
    """
    f = np.asarray(f, dtype=float)
    nd = grid.ndim
    if f.shape[-nd:] != grid.shape:
        raise ValueError(f"field shape {f.shape} does not match grid {grid.shape}")
    out = np.zeros(f.shape[-nd:])
    for k, g in enumerate(grid.axes):
        ax = f.ndim - nd + k
        df = (np.roll(f, -1, axis=ax) - np.roll(f, 1, axis=ax)) / (2.0 * g.h)
        sq = df * df
        out += sq.reshape((-1,) + grid.shape).sum(axis=0)
    return out
