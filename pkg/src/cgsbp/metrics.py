"""Error norms, observed orders and steady convergence tables."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from cgsbp.mesh import build_mesh
from cgsbp.solvers import exact_steady, solve_steady

REFERENCE_NODES = (10, 19, 40, 85, 181, 361)


@dataclass(frozen=True)
class ConvergenceRow:
    N: int
    error: float
    order: float | None = None
    requested_N: int | None = None
    note: str = ""


def p_norm_error(U, V, P) -> float:
    """``sqrt((U - V)^T P (U - V))`` with diagonal ``P`` given as a vector."""
    U, V, P = np.asarray(U), np.asarray(V), np.asarray(P)
    if not U.shape == V.shape == P.shape:
        raise ValueError(f"dimension mismatch: {U.shape}, {V.shape}, {P.shape}")
    d = U - V
    return float(np.sqrt(np.sum(P * d * d)))


def convergence_order(e1: float, e2: float, N1: int, N2: int, count: str = "intervals") -> float:
    """``(log e2 - log e1) / (log n1 - log n2)``.

    ``count="intervals"`` uses ``n = N - 1`` (the number of node spacings),
    which reproduces the reference orders; ``"nodes"`` uses ``N`` itself.
    """
    if count == "intervals":
        n1, n2 = N1 - 1, N2 - 1
    elif count == "nodes":
        n1, n2 = N1, N2
    else:
        raise ValueError(f"count must be 'intervals' or 'nodes', got {count!r}")
    if not (e1 > 0 and e2 > 0):
        raise ValueError("errors must be positive")
    return (math.log(e2) - math.log(e1)) / (math.log(n1) - math.log(n2))


def snap_node_count(N: int, p: int) -> int:
    """Nearest count with ``(N - 1) % p == 0``; ties go to the smaller mesh."""
    lo = (N - 1) // p * p + 1
    hi = lo + p
    if lo < p + 1:
        return hi
    return lo if N - lo <= hi - N else hi


def steady_error(p: int, N: int, ratio: float, a: float = 1.0, dtype=np.longdouble) -> float:
    if (N - 1) % p:
        raise ValueError(f"{N} nodes do not fit order {p} elements")
    mesh = build_mesh(0.0, 1.0, (N - 1) // p, p, dtype=dtype)
    a_ = np.asarray(a, dtype=dtype)
    eps = a_ / np.asarray(ratio, dtype=dtype)
    res = solve_steady(mesh, a_, eps)
    return p_norm_error(res.U, exact_steady(mesh.nodes, a_, eps), res.P)


def make_table(
    p: int,
    ratio: float,
    node_counts: Sequence[int] = REFERENCE_NODES,
    a: float = 1.0,
    workers: int | None = None,
    dtype=np.longdouble,
) -> list[ConvergenceRow]:
    """One convergence column: P-norm errors and orders versus node count."""
    snapped = [snap_node_count(N, p) for N in node_counts]

    def run(N):
        try:
            return steady_error(p, N, ratio, a, dtype), ""
        except Exception as exc:  # annotate the row, keep the table
            return float("nan"), f"{type(exc).__name__}: {exc}"

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, snapped))
    else:
        results = [run(N) for N in snapped]

    rows: list[ConvergenceRow] = []
    for req, N, (err, note) in zip(node_counts, snapped, results):
        order = None
        if rows and rows[-1].error > 0 and err > 0 and N != rows[-1].N:
            order = convergence_order(rows[-1].error, err, rows[-1].N, N)
        rows.append(ConvergenceRow(N, err, order, req, note))
    return rows


def render_csv(rows: Sequence[ConvergenceRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["N", "requested_N", "error", "order", "note"])
    for r in rows:
        w.writerow([r.N, r.requested_N if r.requested_N is not None else r.N, f"{r.error:.6e}", "" if r.order is None else f"{r.order:.4f}", r.note])
    return buf.getvalue()


def render_text(rows: Sequence[ConvergenceRow], title: str = "") -> str:
    lines = [title] if title else []
    lines.append(f"{'N':>6}  {'eps_p':>10}  {'O(eps_p)':>8}")
    for r in rows:
        order = "" if r.order is None else f"{r.order:.2f}"
        line = f"{r.N:>6}  {r.error:>10.2e}  {order:>8}"
        if r.requested_N is not None and r.requested_N != r.N:
            line += f"   (requested {r.requested_N})"
        if r.note:
            line += f"   ! {r.note}"
        lines.append(line)
    return "\n".join(lines) + "\n"
