"""Third-order WENO finite-difference baseline on a uniform node grid.

Jiang-Shu WENO3 reconstruction of split fluxes (local Lax-Friedrichs, the
splitting speed is the largest ``|f'|`` over each face's 4-point stencil),
SSP-RK3 in time. Two ghost nodes per side: inflow ghosts come from exact
data, outflow ghosts from quadratic extrapolation.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from cgsbp import _kernels

CFL = 0.4


class CflWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Flux:
    name: str
    f: Callable[[np.ndarray], np.ndarray]
    df: Callable[[np.ndarray], np.ndarray]


def linear_flux(a: float) -> Flux:
    return Flux("linear", lambda u: a * u, lambda u: np.full_like(u, abs(a)))


BURGERS_FLUX = Flux("burgers", lambda u: 0.5 * u * u, np.abs)


def extrapolation_ghosts(u: np.ndarray) -> np.ndarray:
    """Two right ghosts continuing the quadratic through the last three nodes."""
    g1 = 3 * u[-1] - 3 * u[-2] + u[-3]
    g2 = 3 * g1 - 3 * u[-1] + u[-2]
    return np.array([g1, g2])


def weno3_rhs(u: np.ndarray, dx: float, flux: Flux, left: np.ndarray, right: np.ndarray, eps=_kernels.WENO_EPS) -> np.ndarray:
    v = np.concatenate([left, u, right])
    F = _kernels.weno3_fluxes(v, flux.f(v), flux.df(v), eps)
    return -(F[1:] - F[:-1]) / dx


GhostFn = Callable[[np.ndarray, float], tuple[np.ndarray, np.ndarray]]


def weno3_advance(u: np.ndarray, t: float, dt: float, dx: float, flux: Flux, ghosts: GhostFn, cfl: float = CFL) -> np.ndarray:
    """One SSP-RK3 step. ``ghosts(u, t)`` returns the (left, right) ghost pairs."""
    speed = float(np.max(flux.df(u))) if u.size else 0.0
    if speed * dt > cfl * dx * (1 + 1e-12):
        warnings.warn(f"CFL number {speed * dt / dx:.3f} exceeds {cfl}", CflWarning, stacklevel=2)

    def L(w, s):
        return weno3_rhs(w, dx, flux, *ghosts(w, s))

    u1 = u + dt * L(u, t)
    u2 = 0.75 * u + 0.25 * (u1 + dt * L(u1, t + dt))
    return u / 3 + 2 / 3 * (u2 + dt * L(u2, t + 0.5 * dt))


def weno3_solve(u0: np.ndarray, x: np.ndarray, t_end: float, flux: Flux, ghosts: GhostFn, cfl: float = CFL) -> np.ndarray:
    """March to ``t_end`` with ``dt = cfl dx / max|f'(u)|``, shortening the last step."""
    dx = float(x[1] - x[0])
    if not np.allclose(np.diff(x), dx, rtol=1e-10, atol=0):
        raise ValueError("WENO baseline needs a uniform grid")
    u = np.array(u0, dtype=np.float64)
    t = 0.0
    while t < t_end - 1e-14:
        speed = max(float(np.max(flux.df(u))), 1e-12)
        dt = min(cfl * dx / speed, t_end - t)
        u = weno3_advance(u, t, dt, dx, flux, ghosts, cfl)
        t += dt
        if not np.all(np.isfinite(u)):
            raise FloatingPointError(f"WENO solution blew up at t={t:.6g}")
    return u


def inflow_outflow_ghosts(x: np.ndarray, exact: Callable[[np.ndarray, float], np.ndarray]) -> GhostFn:
    """Exact data left of the domain, quadratic extrapolation on the right."""
    dx = x[1] - x[0]
    xl = x[0] - np.array([2 * dx, dx])

    def ghosts(u, t):
        return exact(xl, t), extrapolation_ghosts(u)

    return ghosts


def exact_ghosts(x: np.ndarray, exact: Callable[[np.ndarray, float], np.ndarray]) -> GhostFn:
    dx = x[1] - x[0]
    xl = x[0] - np.array([2 * dx, dx])
    xr = x[-1] + np.array([dx, 2 * dx])

    def ghosts(u, t):
        return exact(xl, t), exact(xr, t)

    return ghosts


def total_variation(u: np.ndarray) -> float:
    return float(np.sum(np.abs(np.diff(u))))
