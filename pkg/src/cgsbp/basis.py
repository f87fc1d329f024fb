"""Gauss-Lobatto rules and Lagrange nodal bases on the reference element [-1, 1]."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

MAX_ORDER = 10
NEWTON_TOL = 1.0e-14
NEWTON_MAXITER = 100


class OrderOutOfRangeError(ValueError):
    pass


class DegenerateOrderError(ValueError):
    pass


def _check_order(p: int, max_order: int) -> None:
    if int(p) != p or p < 1 or p > max_order:
        raise OrderOutOfRangeError(f"polynomial order must be in [1, {max_order}], got {p}")


def legendre_and_previous(p: int, x):
    """Return ``(L_p(x), L_{p-1}(x))`` by the three-term recurrence."""
    x = np.asarray(x)
    prev = np.ones_like(x)
    if p == 0:
        return prev, np.zeros_like(x)
    cur = x.copy()
    for k in range(2, p + 1):
        prev, cur = cur, ((2 * k - 1) * x * cur - (k - 1) * prev) / k
    return cur, prev


def gauss_lobatto_nodes(p: int, *, max_order: int = MAX_ORDER, dtype=np.float64) -> np.ndarray:
    """Roots of ``(1 - x^2) L_p'(x)``, sorted ascending.

    Interior roots are found by Newton iteration on ``L_p'`` started from the
    Chebyshev-Gauss-Lobatto points. The iteration uses the identity
    ``(1 - x^2) L_p' = p (L_{p-1} - x L_p)`` so only ``L_p`` and ``L_{p-1}``
    are evaluated.
    """
    _check_order(p, max_order)
    k = np.arange(p + 1)
    x = -np.cos(np.pi * k.astype(dtype) / p).astype(dtype)
    if p == 1:
        return x.astype(dtype)

    # extended precision runs the iteration to its own resolution
    tol = max(NEWTON_TOL * float(np.finfo(dtype).eps / np.finfo(np.float64).eps), 16 * float(np.finfo(dtype).eps))
    inner = x[1:-1].copy()
    for _ in range(NEWTON_MAXITER):
        lp, lm = legendre_and_previous(p, inner)
        dx = (inner * lp - lm) / ((p + 1) * lp)
        inner -= dx
        if np.max(np.abs(dx)) < tol:
            break

    # enforce exact symmetry about 0
    inner = 0.5 * (inner - inner[::-1])
    x[1:-1] = inner
    x[0], x[-1] = -1, 1
    return x


def gauss_lobatto_weights(p: int, nodes: np.ndarray) -> np.ndarray:
    lp, _ = legendre_and_previous(p, nodes)
    return 2 / (p * (p + 1) * lp**2)


def barycentric_weights(nodes: np.ndarray) -> np.ndarray:
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1)
    return 1 / np.prod(diff, axis=1)


def lagrange_derivative_matrices(p: int, nodes: np.ndarray, max_order: int | None = None) -> list[np.ndarray]:
    """Nodal derivative matrices ``[L_xi, L_xi^2, ..., L_xi^max_order]``.

    Entry ``(k, j)`` of the ``i``-th matrix is the ``i``-th derivative of the
    ``j``-th Lagrange polynomial at node ``k``. The first derivative matrix
    uses the barycentric formula with the negative-sum diagonal; higher
    orders are powers of it.
    """
    if max_order is None:
        max_order = p
    if max_order > p:
        raise DegenerateOrderError(f"derivative order {max_order} exceeds polynomial order {p}")
    if max_order < 1:
        raise DegenerateOrderError("derivative order must be at least 1")

    w = barycentric_weights(nodes)
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1)
    d1 = (w[None, :] / w[:, None]) / diff
    np.fill_diagonal(d1, 0)
    np.fill_diagonal(d1, -d1.sum(axis=1))

    mats = [d1]
    for _ in range(1, max_order):
        mats.append(mats[-1] @ d1)
    return mats


def lagrange_interpolate(nodes: np.ndarray, values: np.ndarray, x) -> np.ndarray:
    """Evaluate the nodal interpolant at ``x`` (second barycentric form)."""
    x = np.atleast_1d(np.asarray(x, dtype=nodes.dtype))
    w = barycentric_weights(nodes)
    diff = x[:, None] - nodes[None, :]
    exact = diff == 0
    diff[exact] = 1
    terms = w[None, :] / diff
    out = (terms @ values) / terms.sum(axis=1)
    hit_rows, hit_cols = np.nonzero(exact)
    out[hit_rows] = values[hit_cols]
    return out


@dataclass(frozen=True)
class ReferenceElement:
    p: int
    nodes: np.ndarray
    weights: np.ndarray
    deriv_matrices: tuple

    @property
    def n_nodes(self) -> int:
        return self.p + 1

    def derivative(self, order: int = 1) -> np.ndarray:
        if order < 1 or order > self.p:
            raise DegenerateOrderError(f"derivative order {order} not in [1, {self.p}]")
        return self.deriv_matrices[order - 1]


@lru_cache(maxsize=64)
def _reference_element(p: int, max_order: int, dtype_name: str) -> ReferenceElement:
    dtype = np.dtype(dtype_name).type
    # double-precision data is rounded from an extended-precision build, so
    # the large, cancellation-prone entries of high derivative matrices are
    # correctly rounded
    work = np.longdouble if np.finfo(dtype).precision <= np.finfo(np.longdouble).precision else dtype
    nodes = gauss_lobatto_nodes(p, max_order=max_order, dtype=work)
    weights = gauss_lobatto_weights(p, nodes)
    mats = lagrange_derivative_matrices(p, nodes)
    nodes, weights = nodes.astype(dtype), weights.astype(dtype)
    mats = [m.astype(dtype) for m in mats]
    for arr in (nodes, weights, *mats):
        arr.setflags(write=False)
    return ReferenceElement(p=p, nodes=nodes, weights=weights, deriv_matrices=tuple(mats))


def reference_element(p: int, *, max_order: int = MAX_ORDER, dtype=np.float64) -> ReferenceElement:
    """Cached, read-only reference element of order ``p``."""
    _check_order(p, max_order)
    return _reference_element(int(p), int(max_order), np.dtype(dtype).name)
