"""Adaptive step-size control driven by a local truncation error estimate.

The committed solution is always BE. The error estimate ``eta`` compares it
with either two half-size BE steps (Richardson, ``eta = |u_dt - u_dt/2|/2``)
or with one second-order step from the same data (BDF2 or SDC2 predictor,
``eta = |u_BE - u_HO|``).
"""
from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .grid import Grid, max_norm
from .steppers import ImplicitSolver, NonConvergence, bdf2_solve, be_solve, sdc2_predict


class Estimator(str, enum.Enum):
    RICHARDSON = "richardson"
    BDF2 = "bdf2"
    SDC2 = "sdc2"


@dataclass
class StepController:
    dt: float
    sigma_tol: float
    n_max_it: int
    estimator: Estimator = Estimator.BDF2
    theta: float = 0.8
    gamma: float = 1.3
    dt_min: float = 1e-12
    dt_max: float = math.inf
    accepts: int = 0
    rejects: int = 0

    def __post_init__(self):
        self.estimator = Estimator(self.estimator)
        if not (0.0 < self.theta < 1.0 < self.gamma):
            raise ValueError(f"need 0 < theta < 1 < gamma, got theta={self.theta}, gamma={self.gamma}")
        if not (self.dt > 0 and self.sigma_tol > 0):
            raise ValueError("dt and sigma_tol must be positive")
        if self.n_max_it < 1:
            raise ValueError("n_max_it must be at least 1")


@dataclass(frozen=True)
class Decision:
    accept: bool
    dt: float


def control_step(ctrl: StepController, eta: float, n_it: int) -> Decision:
    """Accept/reject and the next step size; does not mutate ``ctrl``."""
    dt, tol, theta, gamma = ctrl.dt, ctrl.sigma_tol, ctrl.theta, ctrl.gamma
    if eta <= tol:
        ratio = n_it / ctrl.n_max_it
        if ratio >= 1.0:
            return Decision(False, dt / gamma)
        grow = theta * math.sqrt(tol / eta) if eta > 0.0 else math.inf
        cap = gamma if ratio < 0.7 else 1.0
        return Decision(True, min(dt * min(grow, cap), ctrl.dt_max))
    if eta / tol > 2.0:
        return Decision(False, dt / gamma)
    return Decision(False, dt * theta * math.sqrt(tol / eta))


@dataclass
class LTEEstimate:
    eta: float
    v_new: np.ndarray | None  # committed BE value (None if the BE solve failed)
    n_it: int


def estimate_lte(solver: ImplicitSolver, v: np.ndarray, dt: float, estimator: Estimator,
                 v_prev: np.ndarray | None = None, dt_prev: float | None = None) -> LTEEstimate:
    """BE step from ``v`` plus its error estimate; inputs are never modified.

    A non-converged solve is reported as ``n_it = n_max_it`` so the controller rejects.
    """
    cap = solver.n_max_it
    try:
        v_be, k = be_solve(solver, v, dt)
    except NonConvergence:
        return LTEEstimate(math.inf, None, cap)
    try:
        if estimator is Estimator.BDF2 and v_prev is not None:
            v_ho, _ = bdf2_solve(solver, v, v_prev, dt, dt / dt_prev)
            eta = max_norm(v_be - v_ho)
        elif estimator is Estimator.SDC2:
            v_ho, _ = sdc2_predict(solver, v, v_be, dt)
            eta = max_norm(v_be - v_ho)
        else:
            # Richardson, also the BDF2 fallback on the very first step
            half, _ = be_solve(solver, v, 0.5 * dt)
            half, _ = be_solve(solver, half, 0.5 * dt)
            eta = 0.5 * max_norm(v_be - half)
    except NonConvergence:
        return LTEEstimate(math.inf, v_be, cap)
    return LTEEstimate(eta, v_be, k)


@dataclass
class RipeningMonitor:
    """Sign flip (positive to negative) of the physical field at one grid node."""

    index: tuple[int, ...]
    last_sign: float | None = None
    time: float | None = None

    @classmethod
    def at(cls, grid: Grid, *point: float) -> "RipeningMonitor":
        idx = grid.nearest_index(*point)
        return cls(idx if isinstance(idx, tuple) else (idx,))

    @classmethod
    def default(cls, grid: Grid) -> "RipeningMonitor":
        if grid.ndim == 1:
            return cls.at(grid, math.pi)
        return cls.at(grid, 0.5 * math.pi, 0.5 * math.pi)

    def probe(self, u: np.ndarray) -> float:
        return float(u[self.index])


def detect_ripening(monitor: RipeningMonitor, u: np.ndarray, t: float) -> float | None:
    """Record ``u`` at time ``t``; returns ``t`` the first time the probe goes negative."""
    if monitor.time is not None:
        return monitor.time
    p = monitor.probe(u)
    if monitor.last_sign is None:
        monitor.last_sign = math.copysign(1.0, p)
        return None
    if p < 0.0 and monitor.last_sign > 0.0:
        monitor.time = t
        return t
    monitor.last_sign = math.copysign(1.0, p)
    return None


@dataclass
class Trajectory:
    t: list[float] = field(default_factory=list)
    dt: list[float] = field(default_factory=list)
    n_it: list[int] = field(default_factory=list)
    energy: list[float] = field(default_factory=list)
    probe: list[float] = field(default_factory=list)
    eta: list[float] = field(default_factory=list)

    def append(self, t, dt, n_it, energy, probe, eta):
        self.t.append(t)
        self.dt.append(dt)
        self.n_it.append(n_it)
        self.energy.append(energy)
        self.probe.append(probe)
        self.eta.append(eta)


@dataclass
class AdaptiveReport:
    trajectory: Trajectory
    v: np.ndarray
    t: float
    ripening_time: float | None
    accepts: int
    rejects: int
    wall_time: float


class StepSizeUnderflow(RuntimeError):
    pass


def run_adaptive(model, grid: Grid, v0: np.ndarray, ctrl: StepController, solver: ImplicitSolver,
                 t_final: float | None = None, stop_on_ripening: bool = True,
                 monitor: RipeningMonitor | None = None,
                 on_accept: Callable[[float, np.ndarray], None] | None = None,
                 landing: int = 1000) -> AdaptiveReport:
    """Algorithm-1 loop committing BE steps until ``t_final`` or ripening.

    ``monitor`` only applies to scalar models; pass ``stop_on_ripening=False``
    with a ``t_final`` otherwise.

    Once ``t_final`` is within ``landing`` steps the step is set to
    ``remaining / ceil(remaining / dt)``, so the run lands on ``t_final`` with
    step ratios of at least ``1 - 1/landing`` instead of one sharply shortened
    step. Each ``dt`` carries its own discrete operator, and on coarse grids a
    sudden cut raises the energy. ``landing=0`` clips only the last step.
    """
    if t_final is None and not (stop_on_ripening and monitor is not None):
        raise ValueError("need t_final or a ripening monitor to stop on")
    start = time.perf_counter()
    traj = Trajectory()
    v = np.array(v0, dtype=float)
    t = 0.0
    v_prev, dt_prev = None, None
    ripening = None
    probe = math.nan
    if monitor is not None:
        u = model.to_physical(v)
        detect_ripening(monitor, u, t)
        probe = monitor.probe(u)
    traj.append(t, 0.0, 0, model.energy(v, grid), probe, 0.0)
    while t_final is None or t < t_final * (1.0 - 1e-14):
        dt = ctrl.dt
        if t_final is not None:
            rem = t_final - t
            n = math.ceil(rem / dt * (1.0 - 1e-12))
            dt = rem / n if n <= max(landing, 1) else dt
        est = estimate_lte(solver, v, dt, ctrl.estimator, v_prev, dt_prev)
        # decide with the attempted step so a shortened final step is judged on its own size
        saved = ctrl.dt
        ctrl.dt = dt
        dec = control_step(ctrl, est.eta, est.n_it)
        ctrl.dt = saved
        if not dec.accept:
            ctrl.rejects += 1
            ctrl.dt = dec.dt
            if ctrl.dt < ctrl.dt_min:
                raise StepSizeUnderflow(f"dt fell below {ctrl.dt_min} at t={t}")
            continue
        ctrl.accepts += 1
        v_prev, dt_prev = v, dt
        v = est.v_new
        t += dt
        if dt == saved or dec.dt > saved:
            ctrl.dt = dec.dt
        if monitor is not None:
            u = model.to_physical(v)
            ripening = detect_ripening(monitor, u, t)
            probe = monitor.probe(u)
        traj.append(t, dt, est.n_it, model.energy(v, grid), probe, est.eta)
        if on_accept is not None:
            on_accept(t, v)
        if ripening is not None and stop_on_ripening:
            break
    return AdaptiveReport(traj, v, t, ripening, ctrl.accepts, ctrl.rejects,
                          time.perf_counter() - start)
