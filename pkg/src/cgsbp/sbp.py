"""Single-element summation-by-parts operators in the reference frame.

With ``P = diag(w)`` and ``Dx`` the nodal derivative matrix, the weak first
derivative ``Qx = P Dx`` satisfies ``Qx + Qx^T = B = diag(-1, 0, ..., 0, 1)``.
The variable-coefficient weak second derivative is

    Qxx(eps) = E B Dx - (sqrt(E) Dx)^T P (sqrt(E) Dx).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from cgsbp.basis import ReferenceElement, reference_element


class InvalidCoefficientError(ValueError):
    pass


@dataclass(frozen=True)
class SbpOperators:
    p: int
    P: np.ndarray
    Qx: np.ndarray
    B: np.ndarray
    Dx: np.ndarray
    higher_D: tuple

    @property
    def weights(self) -> np.ndarray:
        return np.diag(self.P)

    def D(self, order: int) -> np.ndarray:
        """Strong derivative matrix of the given order (1..p)."""
        if order == 1:
            return self.Dx
        return self.higher_D[order - 2]

    def gram(self, order: int) -> np.ndarray:
        """``D^T P D`` for the derivative of the given order."""
        d = self.D(order)
        return d.T @ self.P @ d


@dataclass(frozen=True)
class EpsilonField:
    """Nodal diffusion/dissipation coefficients on one element."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values)
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise InvalidCoefficientError("nodal coefficients must be finite and non-negative")
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, value, n_nodes: int, dtype=np.float64) -> "EpsilonField":
        return cls(np.full(n_nodes, value, dtype=dtype))

    @property
    def E(self) -> np.ndarray:
        return np.diag(self.values)

    @property
    def sqrt_E(self) -> np.ndarray:
        return np.diag(np.sqrt(self.values))


def build_sbp(ref: ReferenceElement | int, dtype=np.float64) -> SbpOperators:
    if not isinstance(ref, ReferenceElement):
        return _cached_sbp(int(ref), np.dtype(dtype).name)
    return _build_sbp(ref)


@lru_cache(maxsize=64)
def _cached_sbp(p: int, dtype_name: str) -> SbpOperators:
    ops = _build_sbp(reference_element(p, dtype=np.dtype(dtype_name)))
    for arr in (ops.P, ops.Qx, ops.B):
        arr.setflags(write=False)
    return ops


def _build_sbp(ref: ReferenceElement) -> SbpOperators:
    p = ref.p
    P = np.diag(ref.weights)
    Dx = ref.derivative(1)
    B = np.zeros((p + 1, p + 1), dtype=P.dtype)
    B[0, 0], B[p, p] = -1, 1
    return SbpOperators(
        p=p,
        P=P,
        Qx=P @ Dx,
        B=B,
        Dx=Dx,
        higher_D=tuple(ref.deriv_matrices[1:]),
    )


def gram_matrix(ops: SbpOperators, D: np.ndarray, eps) -> np.ndarray:
    """``(sqrt(E) D)^T P (sqrt(E) D)`` for nodal coefficients ``eps``."""
    s = np.sqrt(np.asarray(eps))[:, None] * D
    return s.T @ (ops.weights[:, None] * s)


def build_qxx(ops: SbpOperators, eps: EpsilonField) -> np.ndarray:
    if not isinstance(eps, EpsilonField):
        eps = EpsilonField(np.broadcast_to(np.asarray(eps, dtype=ops.P.dtype), (ops.p + 1,)).copy())
    E = eps.values
    return E[:, None] * (ops.B @ ops.Dx) - gram_matrix(ops, ops.Dx, E)


def sbp_residual(ops: SbpOperators) -> float:
    return float(np.max(np.abs(ops.Qx + ops.Qx.T - ops.B)))
