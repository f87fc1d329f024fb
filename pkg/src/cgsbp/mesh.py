"""1D continuous Galerkin meshes and global operator assembly."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from cgsbp.banded import BandedMatrix
from cgsbp.basis import reference_element
from cgsbp.sbp import SbpOperators, build_sbp, gram_matrix

# how an element matrix defined on the reference element scales with J
SCALINGS = {
    "mass": 1,
    "advection": 0,
    "diffusion": -1,
    "dissipation": 0,
}


class MeshError(ValueError):
    pass


@dataclass(frozen=True)
class Mesh1D:
    p: int
    boundaries: np.ndarray
    nodes: np.ndarray
    jacobians: np.ndarray
    dtype: type = np.float64

    @property
    def n_elements(self) -> int:
        return len(self.boundaries) - 1

    @property
    def n_nodes(self) -> int:
        return self.n_elements * self.p + 1

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.boundaries[0]), float(self.boundaries[-1])

    def element_slice(self, e: int) -> slice:
        return slice(e * self.p, e * self.p + self.p + 1)

    def element_nodes(self, e: int) -> np.ndarray:
        return self.nodes[self.element_slice(e)]

    def element_index(self) -> np.ndarray:
        """Global node indices per element, shape ``(n_e, p+1)``."""
        return np.arange(self.n_elements)[:, None] * self.p + np.arange(self.p + 1)[None, :]

    @property
    def ops(self) -> SbpOperators:
        return build_sbp(self.p, dtype=self.dtype)

    def gather(self, U: np.ndarray) -> np.ndarray:
        """Element-local copies of nodal data, shape ``(n_e, p+1)``."""
        return np.asarray(U)[self.element_index()]


def build_mesh(
    x0: float = 0.0,
    x1: float = 1.0,
    n_elements: int | None = None,
    p: int = 1,
    boundaries: Sequence[float] | None = None,
    dtype=np.float64,
) -> Mesh1D:
    """Uniform mesh on ``[x0, x1]`` or one with explicit element boundaries."""
    if boundaries is None:
        if n_elements is None or n_elements < 1:
            raise MeshError("need n_elements >= 1 or explicit boundaries")
        if not x1 > x0:
            raise MeshError(f"empty domain [{x0}, {x1}]")
        k = np.arange(n_elements + 1, dtype=dtype)
        b = (dtype(x0) * (n_elements - k) + dtype(x1) * k) / n_elements
    else:
        b = np.asarray(boundaries, dtype=dtype)
        if b.ndim != 1 or len(b) < 2:
            raise MeshError("explicit boundaries need at least two values")
        if np.any(np.diff(b) <= 0):
            raise MeshError("element boundaries must be strictly increasing")

    ref = reference_element(p, dtype=dtype)
    J = (b[1:] - b[:-1]) / 2
    n_e = len(b) - 1
    nodes = np.empty(n_e * p + 1, dtype=dtype)
    local = b[:-1, None] + (ref.nodes[None, :] + 1) * J[:, None]
    nodes[:-1] = local[:, :-1].ravel()
    nodes[-1] = b[-1]
    # interface nodes are exactly the element boundaries
    nodes[::p] = b
    for arr in (b, nodes, J):
        arr.setflags(write=False)
    return Mesh1D(p=p, boundaries=b, nodes=nodes, jacobians=J, dtype=dtype)


def assemble(mesh: Mesh1D, blocks, scaling: str | None = None) -> BandedMatrix:
    """Merge element matrices by summing entries at shared nodes.

    ``blocks`` is a single reference matrix (used for every element) or an
    array of per-element matrices. ``scaling`` multiplies element ``e`` by
    ``J_e ** k`` with ``k`` from :data:`SCALINGS`.
    """
    blocks = np.asarray(blocks)
    p = mesh.p
    if blocks.ndim == 2:
        blocks = np.broadcast_to(blocks, (mesh.n_elements, *blocks.shape))
    if blocks.shape != (mesh.n_elements, p + 1, p + 1):
        raise MeshError(f"expected element blocks of shape {(mesh.n_elements, p + 1, p + 1)}, got {blocks.shape}")
    if scaling is not None:
        power = SCALINGS[scaling]
        if power:
            blocks = blocks * (mesh.jacobians**power)[:, None, None]
    dtype = np.result_type(blocks.dtype, mesh.dtype)
    return BandedMatrix.from_blocks(np.ascontiguousarray(blocks, dtype=dtype), p)


def global_mass(mesh: Mesh1D) -> np.ndarray:
    w = mesh.ops.weights
    out = np.zeros(mesh.n_nodes, dtype=mesh.dtype)
    np.add.at(out, mesh.element_index(), w[None, :] * mesh.jacobians[:, None])
    return out


def global_boundary(mesh: Mesh1D) -> np.ndarray:
    """Diagonal of the global boundary operator ``B``."""
    b = np.zeros(mesh.n_nodes, dtype=mesh.dtype)
    b[0], b[-1] = -1, 1
    return b


def boundary_derivative_rows(mesh: Mesh1D) -> tuple[np.ndarray, np.ndarray]:
    """Physical first-derivative rows at the two domain end nodes.

    Each is a length ``p+1`` stencil acting on the first/last element.
    """
    Dx = mesh.ops.Dx
    return Dx[0] / mesh.jacobians[0], Dx[-1] / mesh.jacobians[-1]


def assemble_diffusion(mesh: Mesh1D, eps) -> tuple[BandedMatrix, BandedMatrix]:
    """Global ``Qxx(eps)`` split as ``(boundary flux part, -Gram part)``.

    The ``E B Dx`` flux part survives only in the two domain-boundary rows;
    at element interfaces the global boundary operator vanishes.
    """
    eps = np.broadcast_to(np.asarray(eps, dtype=mesh.dtype), (mesh.n_nodes,))
    if np.any(eps < 0):
        raise ValueError("diffusion coefficient must be non-negative")
    ops = mesh.ops
    local_eps = mesh.gather(eps)
    grams = np.stack([gram_matrix(ops, ops.Dx, local_eps[e]) for e in range(mesh.n_elements)])
    stiff = assemble(mesh, grams, scaling="diffusion")

    flux = BandedMatrix.zeros(mesh.n_nodes, mesh.p, dtype=stiff.dtype)
    left, right = boundary_derivative_rows(mesh)
    p, N = mesh.p, mesh.n_nodes
    for j in range(p + 1):
        flux.add_entry(0, j, -eps[0] * left[j])
        flux.add_entry(N - 1, N - 1 - p + j, eps[-1] * right[j])
    return flux, -stiff


@dataclass
class GlobalSystem:
    mesh: Mesh1D
    P: np.ndarray
    Qx: BandedMatrix
    B: np.ndarray
    D_AD: BandedMatrix | None = None
    Qxx: BandedMatrix | None = None
    Qxx_flux: BandedMatrix | None = None
    extras: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.mesh.n_nodes


def build_global_system(mesh: Mesh1D, eps=None, dissipation: BandedMatrix | None = None) -> GlobalSystem:
    ops = mesh.ops
    Qx = assemble(mesh, ops.Qx, scaling="advection")
    system = GlobalSystem(mesh=mesh, P=global_mass(mesh), Qx=Qx, B=global_boundary(mesh), D_AD=dissipation)
    if eps is not None:
        flux, neg_stiff = assemble_diffusion(mesh, eps)
        system.Qxx = flux + neg_stiff
        system.Qxx_flux = flux
    return system


def global_sbp_check(system: GlobalSystem) -> float:
    Q = system.Qx
    S = (Q + Q.T).add_diagonal(-system.B)
    return float(np.max(np.abs(S.ab)))
