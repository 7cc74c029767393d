import math

import numpy as np
import pytest

from molt.drivers import FCHStepper, fch_be_step, pattern_peak_count, vch_adaptive_run, vch_be_step
from molt.grid import Grid1D, Grid2D, max_norm
from molt.models import Z, CHModel, SixthOrderModel, VCHModel, vch_initial
from molt.steppers import ImplicitSolver, NonConvergence, SolverState

TWO_PI = 2 * math.pi


@pytest.mark.parametrize("i", [0, 1, 2])
def test_vch_wells_are_fixed_points(i):
    g = Grid2D.square(0, TWO_PI, 16)
    m = VCHModel(0.32)
    sv = ImplicitSolver(m, g, 4, 1e-10, 50)
    u = np.broadcast_to(Z[i].reshape(2, 1, 1), (2, 16, 16)).copy()
    s = SolverState(m.from_physical(u))
    for _ in range(3):
        vch_be_step(s, 0.01, sv)
    assert max_norm(m.to_physical(s.v) - u) <= sv.n_tol


def test_vch_step_rejects_scalar_solver():
    g = Grid1D(0, TWO_PI, 16)
    with pytest.raises(TypeError):
        vch_be_step(SolverState(np.zeros(16)), 0.1, ImplicitSolver(CHModel(0.2), g))


def test_vch_adaptive_equilibrium_grows():
    g = Grid2D.square(0, TWO_PI, 16)
    u = np.broadcast_to(Z[1].reshape(2, 1, 1), (2, 16, 16)).copy()
    r = vch_adaptive_run(VCHModel(0.32), g, u, t_final=0.02, dt0=1e-3, landing=0)
    dts = np.array(r.trajectory.dt[1:-1])
    np.testing.assert_allclose(dts[1:] / dts[:-1], 1.3, rtol=1e-12)


def test_vch_short_run_energy_and_volume():
    g = Grid2D.square(0, TWO_PI, 32)
    m = VCHModel(0.32)
    u0 = vch_initial(g)
    r = vch_adaptive_run(m, g, u0, t_final=0.02, lte_tol=1e-4, n_tol=1e-8, M=4)
    assert r.t == pytest.approx(0.02)
    assert np.all(np.diff(r.trajectory.energy) <= 1e-8)
    drift = np.abs(r.v.mean(axis=(1, 2)) - m.from_physical(u0).mean(axis=(1, 2)))
    assert np.all(drift <= 1e3 * 1e-8 * r.accepts)


@pytest.mark.parametrize("c", [0.0, 2.0])
def test_fch_equilibria(c):
    g = Grid2D.square(0, TWO_PI, 16)
    st = FCHStepper(SixthOrderModel(0.18, 1.0), g)
    s = SolverState(np.full(g.shape, c))
    k = fch_be_step(s, 0.1, st)
    assert k == 1
    assert max_norm(s.v - c) < 1e-14


def test_fch_small_amplitude_mode_matches_linear_symbol():
    eps, eta, dt = 0.18, 1.0, 0.1
    g = Grid2D.square(0, TWO_PI, 64)
    X, Y = g.mesh()
    d = 1e-6
    v0 = d * np.sin(X) * np.sin(2 * Y)
    q = 5.0
    lam = -(eps**4) * q**3 - q * (4 * eps**2 * q + 4 - eta * eps**4 * q - 2 * eta * eps**2)
    st = FCHStepper(SixthOrderModel(eps, eta), g, M=6, n_tol=1e-16, n_max_it=200)
    v, _ = st.solve(v0, dt)
    np.testing.assert_allclose(v, v0 / (1 - dt * lam), atol=1e-4 * d)


def test_fch_config_validation():
    g = Grid2D.square(0, TWO_PI, 8)
    with pytest.raises(ValueError):
        FCHStepper(SixthOrderModel(0.18, 1.0), g, accel="newton")


def test_fch_picard_damping_flagged(caplog):
    g = Grid2D.square(0, TWO_PI, 8)
    st = FCHStepper(SixthOrderModel(0.18, 1.0), g, accel="picard", n_max_it=20, max_halvings=0)
    grow = iter(range(100))
    with pytest.raises(NonConvergence):
        st._picard(lambda w: w + 2.0 ** next(grow), np.zeros(4))
    assert st.damped_steps == 1
    assert "damping" in caplog.text


def test_pattern_peak_count():
    g = Grid2D.square(0, TWO_PI, 32)
    X, Y = g.mesh()
    assert pattern_peak_count(np.ones(g.shape)) == 0
    assert pattern_peak_count(np.sin(X) * np.sin(Y)) == 4
    assert pattern_peak_count(np.cos(3 * X) + 0.01 * np.cos(Y)) == 2
