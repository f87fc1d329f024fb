import numpy as np
import pytest

from cgsbp import _kernels
from cgsbp.solvers import exact_burgers, initial_pulse_step
from cgsbp.weno import (
    BURGERS_FLUX,
    CflWarning,
    exact_ghosts,
    extrapolation_ghosts,
    inflow_outflow_ghosts,
    linear_flux,
    total_variation,
    weno3_advance,
    weno3_solve,
)


def _sine(x, t):
    return np.sin(2 * np.pi * (x - t))


def _errors(n, T=0.5):
    x = np.linspace(0, 1, n + 1)
    u = weno3_solve(_sine(x, 0), x, T, linear_flux(1.0), inflow_outflow_ghosts(x, _sine))
    e = u - _sine(x, T)
    return np.sqrt(np.mean(e * e)), np.max(np.abs(e))


def test_smooth_order():
    # WENO3 with eps = 1e-6 loses accuracy at smooth extrema on coarse grids;
    # third order shows from about 160 cells on
    l2, mx = zip(*[_errors(n) for n in (160, 320, 640)])
    assert np.log2(l2[0] / l2[1]) >= 2.5
    assert np.log2(l2[1] / l2[2]) >= 2.5
    assert np.log2(mx[1] / mx[2]) >= 2.5


def test_constant_state_unchanged():
    x = np.linspace(0, 1, 41)

    def const(xx, t):
        return np.full_like(np.asarray(xx, dtype=float), 0.3)

    u = weno3_solve(const(x, 0), x, 0.3, linear_flux(1.0), inflow_outflow_ghosts(x, const))
    assert np.max(np.abs(u - 0.3)) < 1e-15
    u = weno3_solve(const(x, 0), x, 0.3, BURGERS_FLUX, exact_ghosts(x, const))
    assert np.max(np.abs(u - 0.3)) < 1e-15


def test_pulse_step_no_new_extrema():
    x = np.linspace(0, 1, 80)

    def exact(xx, t):
        return initial_pulse_step(np.asarray(xx) - t)

    u0 = exact(x, 0)
    u = weno3_solve(u0, x, 0.2, linear_flux(1.0), inflow_outflow_ghosts(x, exact))
    assert u.max() <= 1 + 1e-3 and u.min() >= -1e-3
    assert total_variation(u) <= total_variation(u0) + 1e-3


def test_burgers_shock_is_captured():
    x = np.linspace(0, 1, 81)
    u = weno3_solve(np.sin(2 * np.pi * x), x, 0.5, BURGERS_FLUX, exact_ghosts(x, exact_burgers))
    err = np.abs(u - exact_burgers(x, 0.5))
    away = np.abs(x - 0.5) > 0.05
    assert err[away].max() < 1e-3
    assert np.abs(u).max() <= 1 + 1e-3


def test_extrapolation_is_exact_for_quadratics():
    x = np.arange(6.0)
    g = extrapolation_ghosts(x**2)
    assert np.allclose(g, [36.0, 49.0])


def test_cfl_violation_warns():
    x = np.linspace(0, 1, 11)
    with pytest.warns(CflWarning):
        weno3_advance(_sine(x, 0), 0.0, 0.1, 0.1, linear_flux(1.0), inflow_outflow_ghosts(x, _sine))


def test_numba_and_numpy_fluxes_agree(rng):
    v = rng.standard_normal(50)
    f, df = 0.5 * v * v, np.abs(v)
    ref = _kernels.weno3_fluxes_numpy(v, f, df)
    assert np.allclose(_kernels._weno3_fluxes_py(v, f, df), ref, rtol=1e-13, atol=1e-15)
    assert np.allclose(_kernels.weno3_fluxes(v, f, df), ref, rtol=1e-13, atol=1e-15)
