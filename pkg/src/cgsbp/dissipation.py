"""Galerkin-weighted artificial dissipation built from higher-derivative Gram matrices.

For element-constant coefficients ``c_i`` the element operator is

    D_AD = sum_i c_i D_i^T P D_i,        D_i = i-th nodal derivative,

and for nodal coefficients ``c_i(x) >= 0`` the Gram factors become
``(sqrt(E_i) D_i)^T P (sqrt(E_i) D_i)``. Coefficients are given in the
physical frame and are invariant with respect to element size: internally
the physical-derivative integral carries ``c_i J^(2i-1)`` so that the
Jacobian powers cancel exactly.

Constant coefficients may be negative for some orders as long as the
element operator stays positive semi-definite:

* ``p = 2``: ``c1 > 0`` and ``c2 >= -c1/3``;
* ``p = 3``: additionally ``c3 >= -c1/45 - c2/3``;
* other orders: negative coefficients are rejected.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from cgsbp.banded import BandedMatrix
from cgsbp.mesh import Mesh1D, assemble
from cgsbp.sbp import SbpOperators, build_sbp, gram_matrix

NONNEGATIVE_VARIABLE = "nonnegative-variable"
CONSTANT_SIGNED = "constant-signed"
MODES = (NONNEGATIVE_VARIABLE, CONSTANT_SIGNED)

PSD_RTOL = 1.0e-10
SYMMETRY_TOL = 1.0e-12


class CoefficientRegionError(ValueError):
    def __init__(self, inequality: str, coeffs=None):
        self.inequality = inequality
        self.coeffs = coeffs
        super().__init__(f"dissipation coefficients violate {inequality}: {coeffs}")


class ConstructionError(RuntimeError):
    pass


@dataclass(frozen=True)
class CoefficientReport:
    ok: bool
    violation: str | None = None

    def __bool__(self) -> bool:
        return self.ok


def pad_coefficients(coeffs: Sequence[float], p: int) -> np.ndarray:
    c = np.zeros(p, dtype=np.float64)
    coeffs = np.atleast_1d(np.asarray(coeffs, dtype=np.float64))
    if len(coeffs) > p:
        if np.any(coeffs[p:] != 0):
            raise ValueError(f"{len(coeffs)} coefficients given for order p={p}")
        coeffs = coeffs[:p]
    c[: len(coeffs)] = coeffs
    return c


def validate_coefficients(p: int, coeffs, mode: str = CONSTANT_SIGNED) -> CoefficientReport:
    """Check coefficients against the positive semi-definiteness conditions.

    Returns the first violated inequality; no matrix is built.
    """
    if mode not in MODES:
        raise ValueError(f"unknown dissipation mode {mode!r}; expected one of {MODES}")

    c = np.asarray(coeffs, dtype=np.float64)
    if not np.all(np.isfinite(c)):
        return CoefficientReport(False, "finite coefficients")

    if mode == NONNEGATIVE_VARIABLE:
        # c may be (p,) element constants or (p, n_nodes) nodal fields
        if np.any(c < 0):
            return CoefficientReport(False, "eps_i(x) >= 0")
        return CoefficientReport(True)

    c = pad_coefficients(c, p)
    if np.all(c >= 0):
        # plain sum of Gram matrices
        return CoefficientReport(True)

    tol = 1.0e-14 * max(1.0, float(np.max(np.abs(c))))
    if p in (2, 3):
        if not c[0] > 0:
            return CoefficientReport(False, "eps1 > 0")
        if c[1] < -c[0] / 3 - tol:
            return CoefficientReport(False, "eps2 >= -eps1/3")
        if p == 3 and c[2] < -c[0] / 45 - c[1] / 3 - tol:
            return CoefficientReport(False, "eps3 >= -eps1/45 - eps2/3")
        return CoefficientReport(True)

    i = int(np.argmax(c < 0)) + 1
    return CoefficientReport(False, f"eps{i} >= 0 (negative coefficients only allowed for p = 2, 3)")


@dataclass(frozen=True)
class Window:
    """Activation region ``|x - center(t)| <= radius`` for ``t >= t_start``.

    ``speed`` lets the window follow a discontinuity advected at constant
    speed: ``center(t) = center + speed * t``.
    """

    center: float
    radius: float
    t_start: float = 0.0
    speed: float = 0.0

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"window radius must be positive, got {self.radius}")

    @classmethod
    def from_bounds(cls, lo: float, hi: float, t_start: float = 0.0) -> "Window":
        return cls(center=0.5 * (lo + hi), radius=0.5 * (hi - lo), t_start=t_start)

    def center_at(self, t: float) -> float:
        return self.center + self.speed * t

    def is_on(self, t: float) -> bool:
        return t >= self.t_start

    def contains(self, x, t: float = 0.0, tol: float = 1.0e-12) -> np.ndarray:
        return np.abs(np.asarray(x, dtype=np.float64) - self.center_at(t)) <= self.radius + tol


@dataclass(frozen=True)
class DissipationSpec:
    p: int
    coeffs: tuple
    mode: str = CONSTANT_SIGNED
    activation: Window | None = None
    nodal: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(pad_coefficients(self.coeffs, self.p)))
        if self.nodal is not None:
            nodal = np.asarray(self.nodal, dtype=np.float64)
            if nodal.shape != (self.p, self.p + 1):
                raise ValueError(f"nodal coefficients must have shape {(self.p, self.p + 1)}, got {nodal.shape}")
            if self.mode != NONNEGATIVE_VARIABLE:
                raise ValueError("nodal coefficients require mode 'nonnegative-variable'")
            object.__setattr__(self, "nodal", nodal)
        report = validate_coefficients(self.p, self.values, self.mode)
        if not report:
            raise CoefficientRegionError(report.violation, self.values.tolist())

    @property
    def values(self) -> np.ndarray:
        if self.nodal is not None:
            return self.nodal
        return np.asarray(self.coeffs)

    @property
    def is_zero(self) -> bool:
        return not np.any(self.values)


def transformed_coefficients(coeffs, J: float) -> np.ndarray:
    """Coefficients multiplying physical-derivative integrals, ``c_i J^(2i-1)``."""
    c = np.asarray(coeffs, dtype=np.float64)
    powers = 2 * np.arange(1, c.shape[0] + 1) - 1
    return c * np.asarray(J, dtype=np.float64) ** powers.reshape((-1,) + (1,) * (c.ndim - 1))


def build_ad(ops: SbpOperators, spec: DissipationSpec | Sequence[float], J: float = 1.0) -> np.ndarray:
    """Element dissipation matrix for the given coefficients.

    The integral is evaluated with physical derivatives ``D_i / J^i``, the
    physical mass ``J P`` and coefficients ``c_i J^(2i-1)``.
    """
    if not isinstance(spec, DissipationSpec):
        spec = DissipationSpec(ops.p, tuple(spec))
    if not J > 0:
        raise ValueError(f"element Jacobian must be positive, got {J}")

    kappa = transformed_coefficients(spec.values, J)
    P_phys = ops.P * J
    D_AD = np.zeros_like(ops.P)
    for i in range(1, ops.p + 1):
        if not np.any(kappa[i - 1]):
            continue
        Di = ops.D(i) / J**i
        if spec.nodal is not None:
            s = np.sqrt(kappa[i - 1])[:, None] * Di
            D_AD += s.T @ P_phys @ s
        else:
            D_AD += kappa[i - 1] * (Di.T @ P_phys @ Di)
    return D_AD


def psd_check(D: np.ndarray) -> float:
    """Smallest eigenvalue of a (numerically) symmetric matrix."""
    D = np.asarray(D, dtype=np.float64)
    scale = max(1.0, float(np.max(np.abs(D)))) if D.size else 1.0
    asym = float(np.max(np.abs(D - D.T))) if D.size else 0.0
    if asym > SYMMETRY_TOL * scale:
        raise ConstructionError(f"dissipation operator is not symmetric (asymmetry {asym:.3e})")
    return float(np.linalg.eigvalsh(0.5 * (D + D.T))[0])


def is_psd(D: np.ndarray) -> bool:
    D = np.asarray(D, dtype=np.float64)
    return psd_check(D) >= -PSD_RTOL * float(np.max(np.abs(D)))


def activation_field(mesh: Mesh1D, window: Window, t: float, base_coeffs) -> np.ndarray:
    """Per-element coefficients ``(n_e, p)``: ``base_coeffs`` where active, 0 elsewhere.

    An element is active when any of its nodes lies in the window and the
    window is switched on at time ``t``.
    """
    c = pad_coefficients(base_coeffs, mesh.p)
    out = np.zeros((mesh.n_elements, mesh.p))
    if not window.is_on(t):
        return out
    active = active_elements(mesh, window, t)
    out[active] = c
    return out


def active_elements(mesh: Mesh1D, window: Window, t: float) -> np.ndarray:
    inside = window.contains(mesh.nodes, t)
    return np.any(inside[mesh.element_index()], axis=1)


def element_blocks(mesh: Mesh1D, coeffs: np.ndarray, ops: SbpOperators | None = None) -> np.ndarray:
    """Element dissipation blocks ``(n_e, p+1, p+1)`` for element-constant coefficients."""
    ops = ops or build_sbp(mesh.p)
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.shape != (mesh.n_elements, mesh.p):
        raise ValueError(f"expected coefficients of shape {(mesh.n_elements, mesh.p)}, got {coeffs.shape}")
    J = np.asarray(mesh.jacobians, dtype=np.float64)
    blocks = np.zeros((mesh.n_elements, mesh.p + 1, mesh.p + 1))
    for i in range(1, mesh.p + 1):
        if not np.any(coeffs[:, i - 1]):
            continue
        kappa = coeffs[:, i - 1] * J ** (2 * i - 1)
        gram_phys = J[:, None, None] ** (1 - 2 * i) * gram_matrix(ops, ops.D(i), np.ones(mesh.p + 1))[None]
        blocks += kappa[:, None, None] * gram_phys
    return blocks


def assemble_dissipation(
    mesh: Mesh1D,
    coeffs: np.ndarray,
    mode: str = CONSTANT_SIGNED,
    scale: np.ndarray | None = None,
) -> BandedMatrix:
    """Global dissipation operator from per-element coefficients ``(n_e, p)``.

    ``scale`` optionally multiplies each element block by a non-negative
    factor (e.g. a local wave speed).
    """
    coeffs = np.asarray(coeffs, dtype=np.float64)
    for row in coeffs:
        report = validate_coefficients(mesh.p, row, mode)
        if not report:
            raise CoefficientRegionError(report.violation, row.tolist())
    blocks = element_blocks(mesh, coeffs)
    if scale is not None:
        blocks = blocks * np.asarray(scale, dtype=np.float64)[:, None, None]
    return assemble(mesh, blocks, scaling="dissipation")


def assemble_nodal_dissipation(mesh: Mesh1D, nodal: np.ndarray) -> BandedMatrix:
    """Global dissipation for nodal coefficients ``(p, n_nodes)``, all ``>= 0``."""
    nodal = np.asarray(nodal, dtype=np.float64)
    if nodal.shape != (mesh.p, mesh.n_nodes):
        raise ValueError(f"expected nodal coefficients of shape {(mesh.p, mesh.n_nodes)}, got {nodal.shape}")
    ops = build_sbp(mesh.p)
    idx = mesh.element_index()
    blocks = np.stack(
        [
            build_ad(ops, DissipationSpec(mesh.p, (), NONNEGATIVE_VARIABLE, nodal=nodal[:, idx[e]]), J=float(mesh.jacobians[e]))
            for e in range(mesh.n_elements)
        ]
    )
    return assemble(mesh, blocks, scaling="dissipation")
