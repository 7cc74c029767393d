"""Implicit time integrators built on one generic lagged fixed-point solve.

Every implicit stage in the package reduces to

    v - tau F(v) = base + Lap g + Lap^2 h,      F(v) = -eps^2 Lap^2 v + Lap N(v),

for some effective step ``tau`` and known data ``(base, g, h)``. Moving the
linear part to the left gives the quartic operator
``A = I - kappa tau Lap + eps^2 tau Lap^2`` which is inverted by a
:class:`~molt.split2d.QuarticOperator`; the remainder
``tau (N(v) - kappa v)`` (plus the completed-square lag ``S v``) is evaluated
at the previous iterate. Known ``F`` values never need a bare fourth
derivative: ``g`` and ``h`` carry them and are applied under ``A^{-1}``
through the resolvent identities.
"""
from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .factorization import Mode, plan_quartic
from .grid import Grid, max_norm
from .split2d import QuarticOperator


# diverging trial iterates overflow; divergence is caught by the finiteness check
def _quiet():
    return np.errstate(over="ignore", invalid="ignore")


class NonConvergence(RuntimeError):
    def __init__(self, k: int, residual: float):
        super().__init__(f"fixed-point iteration did not converge in {k} sweeps "
                         f"(last update {residual:.3e})")
        self.k = k
        self.residual = residual


class MissingHistory(RuntimeError):
    pass


def fixed_point_solve(guess: np.ndarray, sweep: Callable[[np.ndarray], np.ndarray],
                      n_tol: float, n_max_it: int) -> tuple[np.ndarray, int]:
    """Iterate ``v <- sweep(v)`` until the max-norm update drops below ``n_tol``."""
    v = guess
    diff = math.inf
    for k in range(1, n_max_it + 1):
        with _quiet():
            new = sweep(v)
        diff = max_norm(new - v)
        v = new
        if diff < n_tol:
            return v, k
        if not math.isfinite(diff):
            break
    raise NonConvergence(n_max_it, diff)


def anderson_solve(guess: np.ndarray, sweep: Callable[[np.ndarray], np.ndarray],
                   n_tol: float, n_max_it: int, depth: int = 5,
                   restart_growth: float = 10.0) -> tuple[np.ndarray, int]:
    """Fixed-point iteration with Anderson mixing over the last ``depth`` updates.

    Stops on the same criterion as :func:`fixed_point_solve` (max-norm of the
    plain update ``sweep(v) - v``), so counts are comparable. The mixing
    history is dropped whenever the update grows by ``restart_growth`` over
    the best seen so far.
    """
    shape = guess.shape
    x = guess
    X: list[np.ndarray] = []
    R: list[np.ndarray] = []
    best = math.inf
    diff = math.inf
    for k in range(1, n_max_it + 1):
        with _quiet():
            fx = sweep(x)
        r = (fx - x).ravel()
        diff = float(np.max(np.abs(r)))
        if diff < n_tol:
            return fx, k
        if not math.isfinite(diff):
            break
        if diff > restart_growth * best:
            X.clear()
            R.clear()
        best = min(best, diff)
        X.append(x.ravel())
        R.append(r)
        if len(R) > depth + 1:
            X.pop(0)
            R.pop(0)
        if len(R) == 1:
            x = fx
            continue
        dR = np.diff(np.array(R), axis=0).T
        dX = np.diff(np.array(X), axis=0).T
        gamma = np.linalg.lstsq(dR, r, rcond=None)[0]
        x = (x.ravel() + r - (dX + dR) @ gamma).reshape(shape)
    raise NonConvergence(n_max_it, diff)


class ImplicitSolver:
    """Solves ``v - tau F(v) = base + Lap g + Lap^2 h`` for one model on one grid.

    Operators are cached per ``tau``; fixed-step runs build each one once.
    """

    def __init__(self, model, grid: Grid, M: int = 4, n_tol: float = 1e-12,
                 n_max_it: int = 1000, mode: Mode | None = None, cache_size: int = 16):
        self.model = model
        self.grid = grid
        self.M = M
        self.n_tol = n_tol
        self.n_max_it = n_max_it
        self.mode = mode
        self.cache_size = cache_size
        self._ops: dict[float, QuarticOperator] = {}

    def operator(self, tau: float) -> QuarticOperator:
        op = self._ops.get(tau)
        if op is None:
            plan = plan_quartic(tau, self.model.kappa, self.model.eps**2, self.mode)
            op = QuarticOperator(plan, self.grid, self.M)
            if len(self._ops) >= self.cache_size:
                self._ops.pop(next(iter(self._ops)))
            self._ops[tau] = op
        return op

    def rhs_terms(self, w_list, coeffs):
        """``(g, h)`` with ``Lap g + Lap^2 h = sum_i c_i F(w_i)``."""
        g = 0.0
        h = 0.0
        for c, (w, Nw) in zip(coeffs, w_list):
            if c == 0.0:
                continue
            g = g + c * Nw
            h = h + c * w
        return g, -self.model.eps**2 * h

    def solve(self, base: np.ndarray, tau: float, guess: np.ndarray,
              lap_extra=None, bilap_extra=None) -> tuple[np.ndarray, int]:
        sweep = self.make_sweep(base, tau, lap_extra, bilap_extra)
        return fixed_point_solve(guess, sweep, self.n_tol, self.n_max_it)

    def make_sweep(self, base: np.ndarray, tau: float, lap_extra=None,
                   bilap_extra=None) -> Callable[[np.ndarray], np.ndarray]:
        """One lagged fixed-point update for the stage with the given data."""
        op = self.operator(tau)
        K0 = op.inv(base)
        if lap_extra is not None and not np.isscalar(lap_extra):
            K0 = K0 + op.inv_lap(lap_extra)
        if bilap_extra is not None and not np.isscalar(bilap_extra):
            K0 = K0 + op.inv_bilap(bilap_extra)
        kappa = self.model.kappa
        S = op.lag_coefficient
        N = self.model.nonlinearity

        def sweep(w):
            g = tau * (N(w) - kappa * w)
            if S != 0.0:
                g = g + S * w
            return K0 + op.inv_lap(g) + op.correction(w)

        return sweep

    def pair(self, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return w, self.model.nonlinearity(w)


class Method(str, enum.Enum):
    BE = "be"
    BDF2 = "bdf2"
    BDF3 = "bdf3"
    SDIRK2 = "sdirk2"
    SDIRK3 = "sdirk3"
    SDC2 = "sdc2"
    SDC3 = "sdc3"


ORDER = {Method.BE: 1, Method.BDF2: 2, Method.BDF3: 3, Method.SDIRK2: 2,
         Method.SDIRK3: 3, Method.SDC2: 2, Method.SDC3: 3}


@dataclass
class StepperConfig:
    method: Method = Method.BE
    n_tol: float = 1e-12
    n_max_it: int = 1000
    sdc_P: int = 2
    M: int = 4
    # one-step method used until a BDF scheme has enough history
    bdf2_startup: Method = Method.BE
    bdf3_startup: Method = Method.SDIRK2

    def __post_init__(self):
        self.method = Method(self.method)
        self.bdf2_startup = Method(self.bdf2_startup)
        self.bdf3_startup = Method(self.bdf3_startup)
        for s in (self.bdf2_startup, self.bdf3_startup):
            if s not in (Method.BE, Method.SDIRK2, Method.SDIRK3):
                raise ValueError(f"BDF startup must be a one-step method, got {s.value}")
        if not self.n_tol > 0:
            raise ValueError("n_tol must be positive")
        if self.n_max_it < 1:
            raise ValueError("n_max_it must be at least 1")
        if self.method is Method.SDC3 and self.sdc_P not in (2, 3):
            raise ValueError("SDC3 needs sdc_P in {2, 3}")


@dataclass
class SolverState:
    v: np.ndarray
    t: float = 0.0
    history: deque = field(default_factory=lambda: deque(maxlen=3))  # previous levels, newest last
    steps: int = 0
    iterations: list[int] = field(default_factory=list)
    energies: list[float] = field(default_factory=list)
    sdc: "SDCPipeline | None" = None
    _t_comp: float = 0.0  # compensation term so t = n*dt lands on the grid after many steps

    def push(self, v_new: np.ndarray, dt: float, k: int):
        self.history.append(self.v)
        self.v = v_new
        self.t, self._t_comp = compensated_add(self.t, self._t_comp, dt)
        self.steps += 1
        self.iterations.append(k)


def compensated_add(total: float, comp: float, x: float) -> tuple[float, float]:
    """Neumaier summation step; returns the rounded sum and the new compensation."""
    s = total + x
    if abs(total) >= abs(x):
        comp += (total - s) + x
    else:
        comp += (x - s) + total
    return s, comp


# --- single-step kernels (pure: return new value and iteration count) ------

def be_solve(solver: ImplicitSolver, v: np.ndarray, dt: float) -> tuple[np.ndarray, int]:
    return solver.solve(v, dt, v)


def bdf2_solve(solver, v, v_prev, dt, omega: float = 1.0):
    """Variable-step BDF2 with ``omega = dt_n / dt_{n-1}`` (``omega = 1``: the uniform scheme)."""
    a = (1.0 + omega) ** 2 / (1.0 + 2.0 * omega)
    b = omega**2 / (1.0 + 2.0 * omega)
    tau = dt * (1.0 + omega) / (1.0 + 2.0 * omega)
    return solver.solve(a * v - b * v_prev, tau, v)


def bdf3_solve(solver, v, v1, v2, dt):
    base = (18.0 * v - 9.0 * v1 + 2.0 * v2) / 11.0
    return solver.solve(base, 6.0 * dt / 11.0, v)


SDIRK2_ETA = 1.0 - math.sqrt(2.0) / 2.0


def _sdirk3_eta() -> float:
    # root of eta^3 - 3 eta^2 + 3/2 eta - 1/6 near 0.4359 (L-stable Alexander tableau)
    r = np.roots([1.0, -3.0, 1.5, -1.0 / 6.0])
    r = r[np.isreal(r)].real
    return float(r[np.argmin(abs(r - 0.4359))])


SDIRK3_ETA = _sdirk3_eta()


def _sdirk3_tableau(eta: float) -> np.ndarray:
    b1 = -(6.0 * eta**2 - 16.0 * eta + 1.0) / 4.0
    b2 = (6.0 * eta**2 - 20.0 * eta + 5.0) / 4.0
    return np.array([
        [eta, 0.0, 0.0],
        [(1.0 - eta) / 2.0, eta, 0.0],
        [b1, b2, eta],
    ])


SDIRK_TABLEAUX = {
    2: np.array([[SDIRK2_ETA, 0.0], [1.0 - SDIRK2_ETA, SDIRK2_ETA]]),
    3: _sdirk3_tableau(SDIRK3_ETA),
}


def sdirk_solve(solver, v, dt, tableau: np.ndarray):
    """Stiffly accurate SDIRK in stage-value form.

    Stage ``l`` solves ``w_l - eta dt F(w_l) = v + dt sum_{m<l} a_lm K_m`` and
    recovers ``K_l = (w_l - b_l) / (eta dt)``; the last stage is the new level.
    """
    eta = tableau[0, 0]
    tau = eta * dt
    K = []
    total = 0
    for l in range(tableau.shape[0]):
        b = v
        for m in range(l):
            b = b + dt * tableau[l, m] * K[m]
        # zero-K initial guess: the stage starts from its own right-hand side
        w, k = solver.solve(b, tau, b)
        total += k
        K.append((w - b) / tau)
    return w, total


# --- SDC ---------------------------------------------------------------------

def sdc_weights(nodes, n: int) -> np.ndarray:
    """Weights ``q_i`` with ``int_n^{n+1} p = sum_i q_i p(nodes_i)`` (unit step) for the interpolant on ``nodes``."""
    # shift to local coordinates: in absolute indices the antiderivative is
    # O(n^(P+1)) and the difference below cancels catastrophically for large n
    nodes = np.asarray(nodes, dtype=float) - n
    q = np.empty(len(nodes))
    for i, ni in enumerate(nodes):
        others = np.delete(nodes, i)
        poly = np.poly(others) / np.prod(ni - others)
        anti = np.polyint(poly)
        q[i] = np.polyval(anti, 1.0) - np.polyval(anti, 0.0)
    return q


def sdc_nodes(n: int, P: int) -> list[int]:
    """Interpolation nodes for the step ``[t_n, t_{n+1}]``: the last ``P + 1`` levels, or ``0..P`` at startup."""
    if n >= P - 1:
        return list(range(n + 1 - P, n + 2))
    return list(range(P + 1))


SDC_LEVELS = {
    ("sdc2", 2): (1,),
    ("sdc3", 2): (1, 2),
    ("sdc3", 3): (1, 3),
}


class SDCPipeline:
    """Deferred-correction levels, each with its own trajectory on the uniform time grid.

    Level 0 is BE. Level ``j`` (interpolation order ``P_j``) solves

        v_{n+1} - dt F(v_{n+1}) = v_n + dt (sum_i q_i F^{[j-1]}_i - F^{[j-1]}_{n+1})

    Startup steps interpolate on ``t_0 .. t_P``, so lower levels are computed
    ahead of the levels that use them.
    """

    def __init__(self, solver: ImplicitSolver, v0: np.ndarray, dt: float, orders: tuple[int, ...]):
        self.solver = solver
        self.dt = dt
        self.orders = (0,) + tuple(orders)
        self.levels: list[dict[int, tuple[np.ndarray, np.ndarray]]] = [
            {0: solver.pair(v0)} for _ in self.orders
        ]
        self.n = 0  # index of the newest top-level value
        self.iterations = 0
        self._keep = max(self.orders) + 2

    def _value(self, j: int, m: int) -> tuple[np.ndarray, np.ndarray]:
        lev = self.levels[j]
        while m not in lev:
            self._advance(j, max(lev) )
        return lev[m]

    def _advance(self, j: int, n: int):
        solver, dt = self.solver, self.dt
        lev = self.levels[j]
        v_n = lev[n][0]
        if j == 0:
            v, k = solver.solve(v_n, dt, v_n)
        else:
            P = self.orders[j]
            nodes = sdc_nodes(n, P)
            q = sdc_weights(nodes, n)
            below = [self._value(j - 1, m) for m in nodes]
            coeffs = dt * q
            coeffs[nodes.index(n + 1)] -= dt
            g, h = solver.rhs_terms(below, coeffs)
            guess = self._value(j - 1, n + 1)[0]
            v, k = solver.solve(v_n, dt, guess, g, h)
        self.iterations += k
        lev[n + 1] = solver.pair(v)

    def step(self) -> tuple[np.ndarray, int]:
        before = self.iterations
        top = len(self.orders) - 1
        v = self._value(top, self.n + 1)[0]
        self.n += 1
        for lev in self.levels:
            for m in [m for m in lev if m < self.n - self._keep]:
                del lev[m]
        return v, self.iterations - before


def sdc2_predict(solver: ImplicitSolver, v: np.ndarray, v_be: np.ndarray, dt: float) -> tuple[np.ndarray, int]:
    """One trapezoidal correction of a BE step restarted from ``v`` (single-step SDC2)."""
    below = [solver.pair(v), solver.pair(v_be)]
    g, h = solver.rhs_terms(below, [0.5 * dt, -0.5 * dt])
    return solver.solve(v, dt, v_be, g, h)


# --- state-level steppers -----------------------------------------------------

def _need(state: SolverState, depth: int):
    if len(state.history) < depth:
        raise MissingHistory(f"need {depth} previous levels, have {len(state.history)}")


def be_step(state: SolverState, dt: float, solver: ImplicitSolver) -> int:
    v, k = be_solve(solver, state.v, dt)
    state.push(v, dt, k)
    return k


def bdf2_step(state: SolverState, dt: float, solver: ImplicitSolver) -> int:
    _need(state, 1)
    v, k = bdf2_solve(solver, state.v, state.history[-1], dt)
    state.push(v, dt, k)
    return k


def bdf3_step(state: SolverState, dt: float, solver: ImplicitSolver) -> int:
    _need(state, 2)
    v, k = bdf3_solve(solver, state.v, state.history[-1], state.history[-2], dt)
    state.push(v, dt, k)
    return k


def sdirk2_step(state: SolverState, dt: float, solver: ImplicitSolver) -> int:
    v, k = sdirk_solve(solver, state.v, dt, SDIRK_TABLEAUX[2])
    state.push(v, dt, k)
    return k


def sdirk3_step(state: SolverState, dt: float, solver: ImplicitSolver) -> int:
    v, k = sdirk_solve(solver, state.v, dt, SDIRK_TABLEAUX[3])
    state.push(v, dt, k)
    return k


def sdc_step(state: SolverState, dt: float, solver: ImplicitSolver, orders: tuple[int, ...]) -> int:
    if state.sdc is None:
        if state.steps:
            raise MissingHistory("SDC trajectories must start from the initial level")
        state.sdc = SDCPipeline(solver, state.v, dt, orders)
    elif not math.isclose(state.sdc.dt, dt, rel_tol=0, abs_tol=1e-15 * dt):
        raise ValueError("SDC runs on a uniform time grid; dt cannot change")
    v, k = state.sdc.step()
    state.push(v, dt, k)
    return k


class TimeStepper:
    """Fixed-step driver: picks the method kernel; BDF schemes start with a one-step method."""

    def __init__(self, model, grid: Grid, config: StepperConfig, mode: Mode | None = None):
        self.model = model
        self.grid = grid
        self.config = config
        self.solver = ImplicitSolver(model, grid, config.M, config.n_tol, config.n_max_it, mode)

    def initial_state(self, v0: np.ndarray, record_energy: bool = False) -> SolverState:
        s = SolverState(np.array(v0, dtype=float))
        if record_energy:
            s.energies.append(self.model.energy(s.v, self.grid))
        return s

    def step(self, state: SolverState, dt: float, record_energy: bool = False) -> int:
        m = self.config.method
        sv = self.solver
        if m is Method.BDF2 and not state.history:
            m = self.config.bdf2_startup
        elif m is Method.BDF3 and len(state.history) < 2:
            m = self.config.bdf3_startup
        if m is Method.BE:
            k = be_step(state, dt, sv)
        elif m is Method.BDF2:
            k = bdf2_step(state, dt, sv)
        elif m is Method.BDF3:
            k = bdf3_step(state, dt, sv)
        elif m is Method.SDIRK2:
            k = sdirk2_step(state, dt, sv)
        elif m is Method.SDIRK3:
            k = sdirk3_step(state, dt, sv)
        else:
            k = sdc_step(state, dt, sv, SDC_LEVELS[(m.value, self.config.sdc_P if m is Method.SDC3 else 2)])
        if record_energy:
            state.energies.append(self.model.energy(state.v, self.grid))
        return k

    def run(self, v0: np.ndarray, dt: float, t_final: float, record_energy: bool = False) -> SolverState:
        nsteps = int(round(t_final / dt))
        if not math.isclose(nsteps * dt, t_final, rel_tol=1e-9):
            raise ValueError(f"t_final={t_final} is not a multiple of dt={dt}")
        state = self.initial_state(v0, record_energy)
        for _ in range(nsteps):
            self.step(state, dt, record_energy)
        return state
