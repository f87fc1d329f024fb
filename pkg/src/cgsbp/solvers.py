"""Steady and transient drivers, exact solutions and the discrete energy.

Three problems are covered:

* steady advection-diffusion ``a u_x = eps u_xx`` with Robin/Neumann SATs,
  assembled in extended precision and solved by a float64 banded LU with
  iterative refinement;
* linear advection ``u_t + a u_x = 0`` with windowed artificial
  dissipation, backward Euler or classical RK4;
* split-form Burgers with solution-scaled dissipation, backward Euler with
  Newton iterations (step halving on failure) or RK4.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from cgsbp.banded import BandedMatrix, SingularMatrixError
from cgsbp.dissipation import (
    CONSTANT_SIGNED,
    CoefficientRegionError,
    Window,
    active_elements,
    element_blocks,
    pad_coefficients,
    validate_coefficients,
)
from cgsbp.mesh import Mesh1D, assemble, assemble_diffusion, global_mass
from cgsbp.sat import BoundarySpec, burgers_sat, sat_matrix_and_rhs, steady_boundary_data

log = logging.getLogger(__name__)

SCHEMES = ("backward-euler", "rk4-explicit")
AD_SCALINGS = ("element-max", "frozen-constant")


class NumericalFailure(RuntimeError):
    pass


class ConfigurationError(ValueError):
    pass


@dataclass
class StateVector:
    U: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.U = np.asarray(self.U)
        self.check()

    def check(self) -> None:
        if not np.all(np.isfinite(self.U)):
            raise NumericalFailure(f"non-finite solution values at t={self.t:.6g}")


@dataclass(frozen=True)
class TimeIntegrator:
    scheme: str = "backward-euler"
    dt: float = 1.0e-4
    newton_tol: float = 1.0e-12
    newton_maxiter: int = 30
    max_halvings: int = 5

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigurationError(f"unknown time scheme {self.scheme!r}; expected one of {SCHEMES}")
        if not self.dt > 0:
            raise ConfigurationError(f"time step must be positive, got {self.dt}")

    def n_steps(self, t_start: float, t_end: float) -> int:
        return max(0, int(round((t_end - t_start) / self.dt)))


# {{{ exact solutions and initial data


def exact_steady(x, a: float, eps: float):
    """``1 - (e^(xa/eps) - 1)/(e^(a/eps) - 1)`` in the overflow-free form.

    Rewritten as ``(1 - e^((x-1) r)) / (1 - e^(-r))`` with ``r = a/eps``.
    Preserves the dtype of ``x`` (e.g. ``np.longdouble``).
    """
    x = np.asarray(x)
    dtype = x.dtype if np.issubdtype(x.dtype, np.floating) else np.float64
    r = np.asarray(a, dtype=dtype) / np.asarray(eps, dtype=dtype)
    return np.expm1((x - 1) * r) / np.expm1(-r)


def initial_pulse_step(x):
    x = np.asarray(x, dtype=np.float64)
    return np.where(x <= 0.6, np.exp(-100.0 * (x - 0.2) ** 2), 0.5)


def exact_burgers(x, t, tol: float = 1.0e-13):
    """Entropy solution of ``u_t + (u^2/2)_x = 0`` with ``u(x, 0) = sin(2 pi x)``.

    Points are mapped into the left half ``[0, 0.5]`` via ``u(x) = -u(1 - x)``
    (and periodic wrap, so ghost points outside ``[0, 1]`` are valid). There
    the characteristic foot ``xi`` solving ``xi + t sin(2 pi xi) = x`` is
    unique in ``[0, 0.5]``; it is bracketed by bisection, after which
    Newton on ``-u + sin(2 pi (x - u t))`` polishes ``u = sin(2 pi xi)``.
    The stationary shock sits at ``x = 0.5`` where ``u = 0``.
    """
    x, t = np.broadcast_arrays(np.asarray(x, dtype=np.float64), np.asarray(t, dtype=np.float64))
    scalar = x.ndim == 0
    x, t = np.atleast_1d(x), np.atleast_1d(t)
    if np.any(t < 0):
        raise ValueError("time must be non-negative")
    xm = np.mod(x, 1.0)
    left = xm <= 0.5
    xr = np.where(left, xm, 1.0 - xm)

    lo = np.zeros_like(xr)
    hi = np.full_like(xr, 0.5)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        below = mid + t * np.sin(2 * np.pi * mid) < xr
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    u = np.where(t == 0, np.sin(2 * np.pi * xr), np.sin(np.pi * (lo + hi)))
    for _ in range(8):
        arg = 2 * np.pi * (xr - u * t)
        g = -u + np.sin(arg)
        dg = -1 - 2 * np.pi * t * np.cos(arg)
        step = g / dg
        # keep the bracketed value if Newton wanders off
        u = np.where(np.abs(step) < 1e-3, u - step, u)
        if np.max(np.abs(step)) < tol * 1e-3:
            break

    u = np.where(xr == 0.5, 0.0, u)
    u = np.where(left, u, -u)
    return u[0] if scalar else u


def burgers_residual(x, t: float, u) -> np.ndarray:
    return -np.asarray(u) + np.sin(2 * np.pi * (np.asarray(x) - np.asarray(u) * t))


def discrete_energy(U: np.ndarray, P) -> float:
    """``U^T P U`` for a diagonal (vector) or banded mass matrix."""
    U = np.asarray(U)
    if isinstance(P, BandedMatrix):
        return float(U @ (P @ U))
    return float(U @ (np.asarray(P) * U))


def semi_discrete_energy_rate(U: np.ndarray, operator: BandedMatrix) -> float:
    """``U^T (P U_t) = -U^T L U`` for ``P U_t = -L U`` (zero data)."""
    U = np.asarray(U, dtype=np.float64)
    return float(-(U @ (operator @ U)))


# }}}


# {{{ steady advection-diffusion


@dataclass
class SteadyResult:
    state: StateVector
    mesh: Mesh1D
    P: np.ndarray
    residual: float
    refinements: int

    @property
    def U(self) -> np.ndarray:
        return self.state.U


def steady_operator(mesh: Mesh1D, a: float, eps: float, boundary: BoundarySpec) -> tuple[BandedMatrix, np.ndarray]:
    """``(a Qx - Qxx - S, rhs)`` in the mesh dtype."""
    Qx = assemble(mesh, mesh.ops.Qx, scaling="advection")
    flux, neg_stiff = assemble_diffusion(mesh, eps)
    S, rhs = sat_matrix_and_rhs(mesh, boundary)
    A = Qx * np.asarray(a, dtype=mesh.dtype) - (flux + neg_stiff) - S
    return A, rhs


def solve_steady(
    mesh: Mesh1D,
    a: float,
    eps: float,
    boundary: BoundarySpec | None = None,
    source: Callable | None = None,
    max_refinements: int = 10,
    rtol: float = 1.0e-11,
) -> SteadyResult:
    """Solve the steady advection-diffusion problem.

    Defaults to the data of ``exact_steady``. The operator is assembled in
    the mesh dtype; with ``np.longdouble`` meshes the float64 LU solution is
    refined against the extended-precision residual, which removes the
    round-off floor of the finest meshes.
    """
    if eps <= 0:
        raise ConfigurationError(f"diffusion coefficient must be positive, got {eps}")
    dtype = mesh.dtype
    a_, eps_ = np.asarray(a, dtype=dtype), np.asarray(eps, dtype=dtype)
    if boundary is None:
        g0, g1 = steady_boundary_data(a_, eps_)
        boundary = BoundarySpec(a=a_, eps0=eps_, epsN=eps_, g0=g0, g1=g1)
    A, rhs = steady_operator(mesh, a_, eps_, boundary)
    P = global_mass(mesh)
    if source is not None:
        rhs = rhs + P * np.asarray(source(mesh.nodes), dtype=dtype)

    try:
        lu = A.astype(np.float64).lu()
    except SingularMatrixError as exc:
        raise ConfigurationError(f"steady operator is singular: {exc}") from exc

    U = lu.solve(rhs.astype(np.float64)).astype(dtype)
    r = rhs - A @ U
    n_ref = 0
    if dtype != np.float64:
        for n_ref in range(1, max_refinements + 1):
            U = U + lu.solve(r.astype(np.float64)).astype(dtype)
            r_new = rhs - A @ U
            stalled = np.max(np.abs(r_new)) >= 0.5 * np.max(np.abs(r))
            r = r_new
            if stalled:
                break

    scale = float(np.max(np.abs(rhs))) or 1.0
    res = float(np.max(np.abs(r)))
    if res > rtol * scale:
        raise NumericalFailure(f"steady residual {res:.3e} exceeds {rtol:g} * |rhs|")
    return SteadyResult(StateVector(U, 0.0), mesh, P, res, n_ref)


# }}}


# {{{ linear advection


class LinearAdvectionSolver:
    """``P U_t + a Qx U + a D_AD(t) U = SAT`` with inflow data at ``x = x0``.

    ``ad_coeffs`` are the physical-frame coefficients; with a ``window``
    they act only on elements touching it, otherwise everywhere. LU
    factorizations are cached per active set.
    """

    def __init__(
        self,
        mesh: Mesh1D,
        a: float,
        integrator: TimeIntegrator,
        ad_coeffs=None,
        window: Window | None = None,
        inflow: Callable[[float], float] | None = None,
        mode: str = CONSTANT_SIGNED,
    ):
        if a < 0:
            raise ConfigurationError("advection speed must be non-negative")
        self.mesh = mesh
        self.a = float(a)
        self.integrator = integrator
        self.window = window
        self.inflow = inflow or (lambda t: 0.0)
        self.coeffs = None
        if ad_coeffs is not None:
            self.coeffs = pad_coefficients(ad_coeffs, mesh.p)
            report = validate_coefficients(mesh.p, self.coeffs, mode)
            if not report:
                raise CoefficientRegionError(report.violation, self.coeffs.tolist())
            if not np.any(self.coeffs):
                self.coeffs = None

        self.P = global_mass(mesh)
        Qx = assemble(mesh, mesh.ops.Qx, scaling="advection")
        S, _ = sat_matrix_and_rhs(mesh, BoundarySpec(a=self.a))
        self._base = Qx * self.a - S
        self._unit_blocks = element_blocks(mesh, np.broadcast_to(self.coeffs, (mesh.n_elements, mesh.p))) if self.coeffs is not None else None
        self._ops: dict = {}
        self._lus: dict = {}

    def active(self, t: float) -> np.ndarray:
        if self.coeffs is None:
            return np.zeros(self.mesh.n_elements, dtype=bool)
        if self.window is None:
            return np.ones(self.mesh.n_elements, dtype=bool)
        if not self.window.is_on(t):
            return np.zeros(self.mesh.n_elements, dtype=bool)
        return active_elements(self.mesh, self.window, t)

    def operator(self, t: float) -> BandedMatrix:
        """Spatial operator ``L(t)`` with ``P U_t = -L U + rhs``."""
        mask = self.active(t)
        key = mask.tobytes()
        if key not in self._ops:
            L = self._base
            if mask.any():
                blocks = self._unit_blocks * mask[:, None, None]
                L = L + assemble(self.mesh, blocks, scaling="dissipation") * self.a
            self._ops[key] = L
        return self._ops[key]

    def rhs(self, t: float) -> np.ndarray:
        b = np.zeros(self.mesh.n_nodes)
        b[0] = self.a * self.inflow(t)
        return b

    def _be_step(self, U: np.ndarray, t1: float, dt: float) -> np.ndarray:
        L = self.operator(t1)
        key = (self.active(t1).tobytes(), dt)
        lu = self._lus.get(key)
        if lu is None:
            lu = L.add_diagonal(self.P / dt).lu()
            self._lus[key] = lu
        return lu.solve(self.P / dt * U + self.rhs(t1))

    def _rk4_step(self, U: np.ndarray, t: float, dt: float) -> np.ndarray:
        def F(V, s):
            return (self.rhs(s) - self.operator(s) @ V) / self.P

        k1 = F(U, t)
        k2 = F(U + 0.5 * dt * k1, t + 0.5 * dt)
        k3 = F(U + 0.5 * dt * k2, t + 0.5 * dt)
        k4 = F(U + dt * k3, t + dt)
        return U + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)

    def step(self, state: StateVector, dt: float | None = None) -> StateVector:
        dt = dt or self.integrator.dt
        t1 = state.t + dt
        if self.integrator.scheme == "backward-euler":
            U = self._be_step(state.U, t1, dt)
        else:
            U = self._rk4_step(state.U, state.t, dt)
        return StateVector(U, t1)

    def run(self, U0, t_end: float, t0: float = 0.0, callback=None) -> StateVector:
        state = StateVector(np.array(U0, dtype=np.float64), t0)
        n = self.integrator.n_steps(t0, t_end)
        for k in range(n):
            state = self.step(state)
            state.t = t0 + (k + 1) * self.integrator.dt
            if callback is not None:
                callback(state)
        return state


def advance_linear(solver: LinearAdvectionSolver, state: StateVector, n_steps: int = 1) -> StateVector:
    for _ in range(n_steps):
        state = solver.step(state)
    return state


# }}}


# {{{ split-form Burgers


class BurgersSolver:
    """Split-form Burgers with solution-scaled artificial dissipation.

    Residual of one backward Euler step:

        P (U - U^n)/dt + 1/3 [U o Q U + Q (U o U)] + sum_e S_e D_e U + SAT.

    With ``element-max`` scaling ``S_e = max |U|`` over element ``e``; with
    ``frozen-constant`` it is the fixed ``frozen_speed``.
    """

    def __init__(
        self,
        mesh: Mesh1D,
        integrator: TimeIntegrator,
        ad_coeffs=None,
        window: Window | None = None,
        scaling: str = "element-max",
        frozen_speed: float = 1.0,
        boundary_data: Callable[[float], tuple[float, float]] | None = None,
        mode: str = CONSTANT_SIGNED,
    ):
        if scaling not in AD_SCALINGS:
            raise ConfigurationError(f"unknown AD speed scaling {scaling!r}; expected one of {AD_SCALINGS}")
        self.mesh = mesh
        self.integrator = integrator
        self.window = window
        self.scaling = scaling
        self.frozen_speed = float(frozen_speed)
        x0, x1 = mesh.domain
        self.boundary_data = boundary_data or (lambda t: (float(exact_burgers(x0, t)), float(exact_burgers(x1, t))))

        self.blocks = None
        if ad_coeffs is not None:
            c = pad_coefficients(ad_coeffs, mesh.p)
            report = validate_coefficients(mesh.p, c, mode)
            if not report:
                raise CoefficientRegionError(report.violation, c.tolist())
            if np.any(c):
                self.blocks = element_blocks(mesh, np.broadcast_to(c, (mesh.n_elements, mesh.p)))

        self.P = global_mass(mesh)
        self.Q = assemble(mesh, mesh.ops.Qx, scaling="advection")
        self.idx = mesh.element_index()
        self.newton_iterations = 0

    def active(self, t: float) -> np.ndarray:
        if self.blocks is None:
            return np.zeros(self.mesh.n_elements, dtype=bool)
        if self.window is None:
            return np.ones(self.mesh.n_elements, dtype=bool)
        if not self.window.is_on(t):
            return np.zeros(self.mesh.n_elements, dtype=bool)
        return active_elements(self.mesh, self.window, t)

    def _ad_terms(self, V: np.ndarray, t: float, jacobian: bool):
        """AD residual and (optionally) element Jacobian blocks."""
        mask = self.active(t)
        r = np.zeros_like(V)
        if not mask.any():
            return r, None
        ue = V[self.idx]
        du = np.einsum("eij,ej->ei", self.blocks, ue)
        if self.scaling == "element-max":
            k = np.argmax(np.abs(ue), axis=1)
            rows = np.arange(len(k))
            S = np.abs(ue[rows, k])
        else:
            S = np.full(self.mesh.n_elements, self.frozen_speed)
        S = S * mask
        np.add.at(r, self.idx, S[:, None] * du)
        if not jacobian:
            return r, None
        jb = S[:, None, None] * self.blocks
        if self.scaling == "element-max":
            # d S_e / d u_k = sign(u_k) at the maximising node
            sgn = np.sign(ue[rows, k]) * mask
            jb[rows, :, k] += sgn[:, None] * du
        return r, jb

    def spatial_residual(self, V: np.ndarray, t: float) -> np.ndarray:
        QU = self.Q @ V
        R = (V * QU + self.Q @ (V * V)) / 3
        g0, gN = self.boundary_data(t)
        sat, _ = burgers_sat(V, g0, gN)
        R[0] += sat[0]
        R[-1] += sat[1]
        R += self._ad_terms(V, t, jacobian=False)[0]
        return R

    def _newton(self, Un: np.ndarray, t1: float, dt: float) -> np.ndarray:
        V = Un.copy()
        Pdt = self.P / dt
        g0, gN = self.boundary_data(t1)
        for _ in range(self.integrator.newton_maxiter):
            self.newton_iterations += 1
            QU = self.Q @ V
            R = Pdt * (V - Un) + (V * QU + self.Q @ (V * V)) / 3
            sat, dsat = burgers_sat(V, g0, gN)
            R[0] += sat[0]
            R[-1] += sat[1]
            ad_r, ad_j = self._ad_terms(V, t1, jacobian=True)
            R += ad_r

            Jm = self.Q.scale_rows(V / 3) + self.Q.scale_cols(V) * (2 / 3)
            diag = Pdt + QU / 3
            diag[0] += dsat[0]
            diag[-1] += dsat[1]
            Jm = Jm.add_diagonal(diag)
            if ad_j is not None:
                Jm = Jm + assemble(self.mesh, ad_j)
            try:
                d = Jm.lu().solve(-R)
            except SingularMatrixError as exc:
                raise NumericalFailure(f"singular Newton Jacobian at t={t1:.6g}") from exc
            if not np.all(np.isfinite(d)):
                raise NumericalFailure(f"non-finite Newton update at t={t1:.6g}")
            V = V + d
            if np.max(np.abs(d)) <= self.integrator.newton_tol:
                return V
        raise NumericalFailure(f"Newton did not converge in {self.integrator.newton_maxiter} iterations at t={t1:.6g}")

    def _be_step(self, U: np.ndarray, t: float, dt: float, depth: int = 0) -> np.ndarray:
        try:
            return self._newton(U, t + dt, dt)
        except NumericalFailure:
            if depth >= self.integrator.max_halvings:
                raise
            log.warning("Newton failed at t=%.6g with dt=%.3g; halving", t + dt, dt)
            half = 0.5 * dt
            U = self._be_step(U, t, half, depth + 1)
            return self._be_step(U, t + half, half, depth + 1)

    def _rk4_step(self, U: np.ndarray, t: float, dt: float) -> np.ndarray:
        def F(V, s):
            return -self.spatial_residual(V, s) / self.P

        k1 = F(U, t)
        k2 = F(U + 0.5 * dt * k1, t + 0.5 * dt)
        k3 = F(U + 0.5 * dt * k2, t + 0.5 * dt)
        k4 = F(U + dt * k3, t + dt)
        return U + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)

    def step(self, state: StateVector, dt: float | None = None) -> StateVector:
        dt = dt or self.integrator.dt
        if self.integrator.scheme == "backward-euler":
            U = self._be_step(state.U, state.t, dt)
        else:
            U = self._rk4_step(state.U, state.t, dt)
        return StateVector(U, state.t + dt)

    def run(self, U0, t_end: float, t0: float = 0.0, callback=None) -> StateVector:
        state = StateVector(np.array(U0, dtype=np.float64), t0)
        n = self.integrator.n_steps(t0, t_end)
        for k in range(n):
            state = self.step(state)
            state.t = t0 + (k + 1) * self.integrator.dt
            if callback is not None:
                callback(state)
        return state


def advance_burgers(solver: BurgersSolver, state: StateVector, n_steps: int = 1) -> StateVector:
    for _ in range(n_steps):
        state = solver.step(state)
    return state


# }}}
