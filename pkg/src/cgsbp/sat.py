"""Weak boundary conditions (SAT) for advection-diffusion and split-form Burgers.

Sign convention: the semi-discrete system is

    P U_t + a Qx U - Qxx U = S U - sigma0 g0 e0 - sigmaN g1 eN

with ``S = sigma0 e0 (a e0^T - eps0 Dx0) + sigmaN eN (-epsN DxN)``. The
penalties enforce the Robin inflow flux ``a u - eps u_x = g0`` at the left
end and the Neumann datum ``-eps u_x = g1`` at the right end.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from cgsbp.banded import BandedMatrix
from cgsbp.mesh import Mesh1D, boundary_derivative_rows

Datum = Callable[[float], float]


def _constant(value: float) -> Datum:
    return lambda t: value


@dataclass(frozen=True)
class BoundarySpec:
    a: float = 1.0
    eps0: float = 0.0
    epsN: float = 0.0
    g0: Datum | float = 0.0
    g1: Datum | float = 0.0
    sigma0: float = -1.0
    sigmaN: float = 1.0

    def __post_init__(self):
        if self.a < 0:
            raise ValueError(f"advection speed must be non-negative, got {self.a}")
        if self.eps0 < 0 or self.epsN < 0:
            raise ValueError("boundary diffusion coefficients must be non-negative")

    def left_datum(self, t: float = 0.0) -> float:
        return self.g0(t) if callable(self.g0) else self.g0

    def right_datum(self, t: float = 0.0) -> float:
        return self.g1(t) if callable(self.g1) else self.g1


def steady_boundary_data(a: float, eps: float) -> tuple[float, float]:
    """Robin/Neumann data of ``u = 1 - (e^(xa/eps) - 1)/(e^(a/eps) - 1)``.

    The flux ``a u - eps u_x`` is constant, ``a e^r/(e^r - 1)`` with ``r = a/eps``.
    """
    r = a / eps
    g = a / -np.expm1(-r)
    return g, g


def sat_matrix_and_rhs(mesh: Mesh1D, spec: BoundarySpec, t: float = 0.0) -> tuple[BandedMatrix, np.ndarray]:
    """Return ``(S, rhs)``: ``S`` enters the operator as ``-S``, ``rhs`` the right-hand side."""
    N, p = mesh.n_nodes, mesh.p
    dtype = mesh.dtype
    S = BandedMatrix.zeros(N, p, dtype=dtype)
    left, right = boundary_derivative_rows(mesh)

    S.add_entry(0, 0, spec.sigma0 * spec.a)
    if spec.eps0:
        for j in range(p + 1):
            S.add_entry(0, j, -spec.sigma0 * spec.eps0 * left[j])
    if spec.epsN:
        for j in range(p + 1):
            S.add_entry(N - 1, N - 1 - p + j, -spec.sigmaN * spec.epsN * right[j])

    rhs = np.zeros(N, dtype=dtype)
    rhs[0] -= spec.sigma0 * np.asarray(spec.left_datum(t), dtype=dtype)
    # without diffusion the outflow end needs no condition
    if spec.epsN:
        rhs[-1] -= spec.sigmaN * np.asarray(spec.right_datum(t), dtype=dtype)
    return S, rhs


def burgers_sat(U: np.ndarray, g0: float = 0.0, gN: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Residual contributions and their diagonal Jacobian at both end nodes.

    Only characteristics entering the domain are penalised: the left term
    is active for ``u0 > 0``, the right one for ``uN < 0``. Returns
    ``(r, d)`` with ``r = [r_left, r_right]`` to be added to the residual at
    nodes 0 and N and ``d`` the derivatives with respect to ``u0`` and ``uN``.
    """
    u0, uN = float(U[0]), float(U[-1])
    s0 = (u0 + abs(u0)) / 3
    sN = (uN - abs(uN)) / 3
    r = np.array([s0 * (u0 - g0), -sN * (uN - gN)])
    ds0 = (1 + np.sign(u0)) / 3
    dsN = (1 - np.sign(uN)) / 3
    d = np.array([ds0 * (u0 - g0) + s0, -(dsN * (uN - gN) + sN)])
    return r, d
