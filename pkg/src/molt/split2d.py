"""Line-by-line inversion on tensor grids with the splitting error kept in the iteration.

In 2D ``L = I - Lap/alpha^2 = Lx Ly - E`` with ``E = d_xx d_yy / alpha^4 =
(Lx - I)(Ly - I)``. Only ``(Lx Ly)^{-1}`` is applied directly (one sweep per
line, x then y). Everything else is assembled from the 1D operators
``D_g = I - L_g^{-1}``:

    G  = (Lx Ly)^{-1} E      = Dx Dy
    C1 = (Lx Ly)^{-1} - I + G             so (Lx Ly)^{-1} Lap = alpha^2 C1
    C2 = 1 - (1 - G)^2 = 2 G - G^2        so (Lx Ly)^{-2} L^2 = 1 - C2

For a product of Helmholtz factors with different alphas the correction is
``1 - prod_i (1 - G_i)``. On a 1D grid ``E`` vanishes, ``G = 0`` and the same
formulas reduce to the plain 1D identities.

Spatial axes are always the trailing ``grid.ndim`` axes of a field, so vector
fields with a leading component axis go through unchanged.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .factorization import QuarticPlan, SexticPlan
from .grid import Grid, Grid1D
from .helmholtz import HelmholtzPlan, apply_Linv_periodic, interpolant_dxx, make_plan


class AxisInverse:
    """``L^{-1}`` for a single alpha along each axis of a grid."""

    def __init__(self, alpha: float, grid: Grid, M: int = 4):
        self.alpha = alpha
        self.grid = grid
        self.M = M
        plans: dict[Grid1D, HelmholtzPlan] = {}
        self.plans = tuple(plans.setdefault(g, make_plan(alpha, g, M)) for g in grid.axes)

    def _axis(self, f: np.ndarray, k: int) -> int:
        return f.ndim - self.grid.ndim + k

    def along(self, f: np.ndarray, k: int) -> np.ndarray:
        return apply_Linv_periodic(f, self.plans[k], self._axis(f, k))

    def inv(self, f: np.ndarray) -> np.ndarray:
        """``(Lx Ly)^{-1} f``: x-lines first, then y-lines."""
        for k in range(self.grid.ndim):
            f = self.along(f, k)
        return f

    def D(self, f: np.ndarray, k: int) -> np.ndarray:
        return f - self.along(f, k)

    def G(self, f: np.ndarray) -> np.ndarray:
        """``Dx Dy f`` (zero on a 1D grid)."""
        if self.grid.ndim == 1:
            return np.zeros_like(f)
        return self.D(self.D(f, 0), 1)

    def one_minus_G(self, f: np.ndarray) -> np.ndarray:
        if self.grid.ndim == 1:
            return f
        a = self.along(f, 0)
        return a + self.along(f, 1) - self.along(a, 1)

    def C1(self, f: np.ndarray) -> np.ndarray:
        """``(Lx Ly)^{-1} - I + Dx Dy``."""
        if self.grid.ndim == 1:
            return self.along(f, 0) - f
        a = self.along(f, 0)
        return 2.0 * self.along(a, 1) - a - self.along(f, 1)

    def inv_lap(self, f: np.ndarray) -> np.ndarray:
        """``(Lx Ly)^{-1} Lap f = alpha^2 C1 f``."""
        return self.alpha**2 * self.C1(f)


def _correction(ops: list[AxisInverse], v: np.ndarray):
    """``1 - prod_i (1 - G_i)`` applied to ``v``; exactly zero on 1D grids."""
    if ops[0].grid.ndim == 1:
        return 0.0
    w = v
    for op in ops:
        w = op.one_minus_G(w)
    return v - w


@dataclass
class SplitPlan2D:
    """Axis operators for every alpha of a factored operator, plus the plan they came from."""

    grid: Grid
    M: int
    source: QuarticPlan | SexticPlan | None
    factors: list[AxisInverse] = field(default_factory=list)

    @classmethod
    def from_alphas(cls, alphas, grid: Grid, M: int = 4, source=None) -> "SplitPlan2D":
        cache: dict[float, AxisInverse] = {}
        factors = [cache.setdefault(a, AxisInverse(a, grid, M)) for a in alphas]
        return cls(grid, M, source, factors)


def apply_LxLy_inv(f: np.ndarray, plan: SplitPlan2D, which: int = 0) -> np.ndarray:
    return plan.factors[which].inv(f)


def apply_C1(f: np.ndarray, plan: SplitPlan2D, which: int = 0) -> np.ndarray:
    return plan.factors[which].C1(f)


def apply_C2(f: np.ndarray, plan: SplitPlan2D) -> np.ndarray:
    """Splitting correction of a two-factor operator, ``2 G - G^2`` for equal alphas."""
    out = _correction(plan.factors[:2], f)
    return np.zeros_like(f) if np.isscalar(out) else out


def laplacian_via_L(f: np.ndarray, plan: SplitPlan2D) -> np.ndarray:
    """Bare Laplacian of ``f``, the large-alpha limit of ``alpha^2 C1`` per axis.

    A bare Laplacian of an arbitrary field is not a bounded combination of
    resolvents, so this evaluates the limit stencil of the same Lagrange
    interpolant the quadrature integrates. Everything that sits under an outer
    inverse should use ``inv_lap`` instead.
    """
    g = plan.grid
    out = np.zeros_like(f, dtype=float)
    for k, ax in enumerate(g.axes):
        out += interpolant_dxx(f, ax, plan.M, axis=f.ndim - g.ndim + k)
    return out


class QuarticOperator:
    """Pieces of one fixed-point sweep for ``A v = b + Lap g + Lap^2 h``.

    With ``P_i = (Lx Ly)_i`` for the two factors of ``A``::

        v <- inv(b) + inv_lap(g) + inv_bilap(h) + correction(v)

    reproduces the unsplit ``A`` at convergence.
    """

    def __init__(self, plan: QuarticPlan, grid: Grid, M: int = 4):
        self.plan = plan
        self.grid = grid
        self.M = M
        self.split = SplitPlan2D.from_alphas(plan.alphas, grid, M, plan)
        self.L1, self.L2 = self.split.factors

    @property
    def lag_coefficient(self) -> float:
        return self.plan.lag_coefficient

    def inv(self, b: np.ndarray) -> np.ndarray:
        return self.L1.inv(self.L2.inv(b))

    def inv_lap(self, g: np.ndarray) -> np.ndarray:
        return self.L2.alpha**2 * self.L1.inv(self.L2.C1(g))

    def inv_bilap(self, h: np.ndarray) -> np.ndarray:
        return (self.L1.alpha * self.L2.alpha) ** 2 * self.L1.C1(self.L2.C1(h))

    def correction(self, v: np.ndarray):
        return _correction([self.L1, self.L2], v)


def invert_2d_quartic(rhs: np.ndarray, v_k: np.ndarray, op: QuarticOperator,
                      lap_arg: np.ndarray | None = None) -> np.ndarray:
    """One sweep ``P^{-1} rhs + P^{-1} Lap lap_arg + C2 v_k`` of the split iteration."""
    out = op.inv(rhs) + op.correction(v_k)
    if lap_arg is not None:
        out = out + op.inv_lap(lap_arg)
    return out


class SexticOperator:
    """Split pieces for ``(I - a Lap)^3`` with ``a = 1/alpha^2``; ``P = Lx Ly``.

    ``P^{-3} Lap^j = alpha^{2j} P^{-(3-j)} C1^j`` and the correction is
    ``1 - (1 - G)^3``.
    """

    def __init__(self, plan: SexticPlan, grid: Grid, M: int = 4):
        self.plan = plan
        self.grid = grid
        self.M = M
        self.split = SplitPlan2D.from_alphas([plan.alpha] * 3, grid, M, plan)
        self.L = self.split.factors[0]

    def inv_lap_pow(self, f: np.ndarray, j: int) -> np.ndarray:
        """``P^{-3} Lap^j f`` for ``j = 0..3``."""
        L = self.L
        for _ in range(j):
            f = L.C1(f)
        for _ in range(3 - j):
            f = L.inv(f)
        return L.alpha ** (2 * j) * f

    def correction(self, v: np.ndarray):
        return _correction([self.L] * 3, v)
