"""Factored inverses of the implicit quartic and sextic operators.

The quartic operator ``A = I - c dt Lap + d dt Lap^2`` is written as a product
of two modified Helmholtz operators ``(I - Lap/alpha1^2)(I - Lap/alpha2^2)``
whenever both ``1/alpha_i^2`` are real; otherwise the square is completed,
``(I - Lap/alpha^2)^2`` with ``1/alpha^2 = sqrt(d dt)``, and the leftover
``S Lap`` term (``S = c dt - 2 sqrt(d dt) < 0``) is lagged into the right-hand
side of the fixed-point iteration.

Every scheme in the package maps onto one ``(c, d)`` pair. For the CH family a
step of effective size ``tau`` (``dt`` for BE, ``2 dt/3`` for BDF2, ``6 dt/11``
for BDF3, ``eta dt`` for SDIRK stages) uses ``c = 2, d = eps^2`` with ``dt``
replaced by ``tau``; the vector model uses ``c = 18``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .grid import Grid1D
from .helmholtz import apply_Linv_periodic, make_plan


class Mode(enum.Enum):
    FACTORED = "factored"
    COMPLETED_SQUARE = "completed_square"


@dataclass(frozen=True)
class QuarticPlan:
    mode: Mode
    inv_alpha_sq: tuple[float, float]
    lag_coefficient: float
    c: float
    d: float
    dt: float

    @property
    def alphas(self) -> tuple[float, float]:
        return tuple(1.0 / math.sqrt(s) for s in self.inv_alpha_sq)

    def symbol(self, q):
        """Continuous symbol of ``A`` at ``|k|^2 = q``."""
        return 1.0 + self.c * self.dt * q + self.d * self.dt * q * q


def is_factorable(dt: float, c: float, d: float) -> bool:
    """Bifurcation predicate: both ``1/alpha_i^2`` real (tie counts as factored)."""
    half = 0.5 * c * dt
    return half * half >= d * dt


def plan_quartic(dt: float, c: float, d: float, mode: Mode | None = None) -> QuarticPlan:
    """Pick the factored form when it is real, else complete the square.

    ``mode`` overrides the choice. Forcing ``COMPLETED_SQUARE`` is always
    legal (the lag coefficient is then nonnegative above the switch); forcing
    ``FACTORED`` below the switch is rejected because the alphas turn complex.
    """
    if not (dt > 0 and c > 0 and d > 0):
        raise ValueError(f"dt, c, d must be positive, got dt={dt}, c={c}, d={d}")
    half = 0.5 * c * dt
    disc = half * half - d * dt
    if mode is Mode.FACTORED and disc < 0.0:
        raise ValueError(f"no real factorization for dt={dt} (switch at dt={4 * d / c**2})")
    if disc >= 0.0 and mode is not Mode.COMPLETED_SQUARE:
        root = math.sqrt(disc)
        big = half + root
        # product is d*dt; dividing avoids cancellation in half - root
        small = d * dt / big
        return QuarticPlan(Mode.FACTORED, (big, small), 0.0, c, d, dt)
    s = math.sqrt(d * dt)
    return QuarticPlan(Mode.COMPLETED_SQUARE, (s, s), c * dt - 2.0 * s, c, d, dt)


@dataclass(frozen=True)
class SexticPlan:
    """``(I - a Lap)^3`` with ``a = (dt eps^4)^{1/3}`` standing in for ``I - dt eps^4 Lap^3``.

    The remainder ``(3 a Lap - 3 a^2 Lap^2)`` is lagged. ``lag_coefficients``
    holds ``(3 a, 3 a^2)``.
    """

    inv_alpha_sq: float
    dt: float
    eps: float

    @property
    def alpha(self) -> float:
        return 1.0 / math.sqrt(self.inv_alpha_sq)

    @property
    def lag_coefficients(self) -> tuple[float, float]:
        a = self.inv_alpha_sq
        return 3.0 * a, 3.0 * a * a


def plan_sextic(dt: float, eps: float) -> SexticPlan:
    if not (dt > 0 and eps > 0):
        raise ValueError(f"dt and eps must be positive, got dt={dt}, eps={eps}")
    return SexticPlan((dt * eps**4) ** (1.0 / 3.0), dt, eps)


def apply_quartic_inverse(rhs: np.ndarray, plan: QuarticPlan, grid: Grid1D, M: int = 4) -> np.ndarray:
    """``L1^{-1} L2^{-1} rhs`` on a periodic line (two sequential Helmholtz solves)."""
    a1, a2 = plan.alphas
    w = apply_Linv_periodic(rhs, make_plan(a2, grid, M))
    return apply_Linv_periodic(w, make_plan(a1, grid, M))


def apply_sextic_inverse(rhs: np.ndarray, plan: SexticPlan, grid: Grid1D, M: int = 4) -> np.ndarray:
    hp = make_plan(plan.alpha, grid, M)
    w = rhs
    for _ in range(3):
        w = apply_Linv_periodic(w, hp)
    return w
