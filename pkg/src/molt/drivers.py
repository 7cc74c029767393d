"""Model-specific assemblies: vector CH (BE, fixed or adaptive) and the sixth-order model (BE)."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .adaptive import AdaptiveReport, Estimator, StepController, run_adaptive
from .factorization import plan_sextic
from .grid import Grid, Grid2D, max_norm
from .models import SixthOrderModel, VCHModel, sixth_order_rhs_terms
from .split2d import SexticOperator, laplacian_via_L
from .steppers import ImplicitSolver, NonConvergence, SolverState, anderson_solve, be_solve

log = logging.getLogger(__name__)


def vch_be_step(state: SolverState, dt: float, solver: ImplicitSolver) -> int:
    """One BE step of the stacked ``(2, nx, ny)`` field ``state.v``.

    Both components share the factored operator; they couple only through
    the lagged ``grad W`` term, and convergence is measured over both.
    """
    if not isinstance(solver.model, VCHModel):
        raise TypeError("vch_be_step needs a solver built on a VCHModel")
    v, k = be_solve(solver, state.v, dt)
    state.push(v, dt, k)
    return k


def vch_adaptive_run(model: VCHModel, grid: Grid2D, u0: np.ndarray, t_final: float,
                     lte_tol: float = 1e-4, n_tol: float = 1e-6, n_max_it: int = 400,
                     M: int = 4, dt0: float = 1e-3, on_accept=None,
                     landing: int = 1000) -> AdaptiveReport:
    """BE steps with a BDF2 predictor on both components; ``u0`` is in the physical variable."""
    solver = ImplicitSolver(model, grid, M, n_tol, n_max_it)
    ctrl = StepController(dt0, lte_tol, n_max_it, Estimator.BDF2)
    return run_adaptive(model, grid, model.from_physical(u0), ctrl, solver, t_final=t_final,
                        stop_on_ripening=False, on_accept=on_accept, landing=landing)


@dataclass
class FCHStepper:
    """BE for the sixth-order model with the cube-completed operator ``(I - a Lap)^3``.

    Every nonlinear product and the completion remainder are lagged; the
    sweep also carries the splitting correction ``1 - (1 - G)^3``.

    The plain lagged sweep contracts slowly across interfaces (the linearized
    implicit problem is close to singular there), so by default the sweep is
    wrapped in Anderson mixing. With ``accel="picard"`` the plain iteration is
    used and switches to averaging new and old iterates (weight 1/2) once the
    update has grown for ``patience`` consecutive sweeps. A step that still
    fails is retried as two half steps, at most ``max_halvings`` deep.
    """

    model: SixthOrderModel
    grid: Grid
    M: int = 4
    n_tol: float = 1e-6
    n_max_it: int = 200
    accel: str = "anderson"
    depth: int = 5
    patience: int = 3
    max_halvings: int = 4

    def __post_init__(self):
        if self.accel not in ("anderson", "picard"):
            raise ValueError(f"accel must be 'anderson' or 'picard', got {self.accel!r}")
        self._ops: dict[float, SexticOperator] = {}
        self.damped_steps = 0
        self.halvings = 0

    def operator(self, dt: float) -> SexticOperator:
        op = self._ops.get(dt)
        if op is None:
            op = self._ops[dt] = SexticOperator(plan_sextic(dt, self.model.eps), self.grid, self.M)
        return op

    def _sweep(self, v_old: np.ndarray, dt: float):
        op = self.operator(dt)
        a = op.plan.inv_alpha_sq
        L = op.L
        K0 = op.inv_lap_pow(v_old, 0)

        def sweep(w):
            g, h = sixth_order_rhs_terms(w, self.model, dt, a, laplacian_via_L(w, op.split))
            # P^-3 (Lap g + Lap^2 h) = P^-1 alpha^2 C1 (P^-1 g + alpha^2 C1 h)
            inner = L.inv(g) + L.alpha**2 * L.C1(h)
            return K0 + L.inv(L.alpha**2 * L.C1(inner)) + op.correction(w)

        return sweep

    def _picard(self, sweep, guess):
        w = guess
        damped = False
        growth = 0
        last = math.inf
        diff = math.inf
        for k in range(1, self.n_max_it + 1):
            with np.errstate(over="ignore", invalid="ignore"):
                new = sweep(w)
            if damped:
                new = 0.5 * (new + w)
            diff = max_norm(new - w)
            w = new
            if diff < self.n_tol:
                return w, k
            if not math.isfinite(diff):
                break
            growth = growth + 1 if diff > last else 0
            last = diff
            if growth >= self.patience and not damped:
                damped = True
                self.damped_steps += 1
                log.warning("sixth-order iteration diverging at sweep %d; damping with weight 1/2", k)
        raise NonConvergence(self.n_max_it, diff)

    def solve_once(self, v_old: np.ndarray, dt: float) -> tuple[np.ndarray, int]:
        sweep = self._sweep(v_old, dt)
        if self.accel == "anderson":
            return anderson_solve(v_old, sweep, self.n_tol, self.n_max_it, self.depth)
        return self._picard(sweep, v_old)

    def solve(self, v_old: np.ndarray, dt: float, _level: int = 0) -> tuple[np.ndarray, int]:
        try:
            return self.solve_once(v_old, dt)
        except NonConvergence:
            if _level >= self.max_halvings:
                raise
        self.halvings += 1
        log.info("sixth-order step dt=%g did not converge; retrying as two half steps", dt)
        v, k1 = self.solve(v_old, 0.5 * dt, _level + 1)
        v, k2 = self.solve(v, 0.5 * dt, _level + 1)
        return v, k1 + k2


def fch_be_step(state: SolverState, dt: float, stepper: FCHStepper) -> int:
    v, k = stepper.solve(state.v, dt)
    state.push(v, dt, k)
    return k


def pattern_peak_count(u: np.ndarray, rel: float = 0.1) -> int:
    """Number of Fourier modes (excluding the mean) with amplitude above ``rel`` times the largest."""
    spec = np.abs(np.fft.fft2(u - u.mean()))
    top = spec.max()
    if top == 0.0:
        return 0
    return int(np.count_nonzero(spec > rel * top))
