"""One test per acceptance criterion, each printing a PASS/FAIL line."""

import json
from pathlib import Path

import numpy as np
import pytest

from cgsbp import cli
from cgsbp.dissipation import Window, active_elements, assemble_dissipation, build_ad, psd_check, validate_coefficients
from cgsbp.mesh import assemble, build_global_system, build_mesh, global_sbp_check
from cgsbp.metrics import make_table
from cgsbp.sbp import build_sbp, sbp_residual
from cgsbp.solvers import (
    LinearAdvectionSolver,
    StateVector,
    TimeIntegrator,
    advance_linear,
    discrete_energy,
    exact_burgers,
    semi_discrete_energy_rate,
)

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

# reference steady errors, rows N = 10, 19, 40, 85, 181, 361
REFERENCE_ERRORS = {
    10: {
        1: [1.76e-2, 4.17e-3, 8.71e-4, 1.87e-4, 4.07e-5, 1.01e-5],
        2: [4.44e-3, 5.30e-4, 2.39e-5, 1.25e-6, 5.97e-8, 3.73e-9],
        3: [3.05e-3, 1.56e-4, 3.89e-6, 8.74e-8, 1.95e-9, 6.11e-11],
        4: [2.47e-3, 8.55e-5, 4.92e-7, 6.09e-9, 6.38e-11, 9.99e-13],
    },
    40: {
        1: [1.4e-1, 3.8e-2, 7.4e-3, 1.5e-3, 3.3e-4, 8.1e-5],
        2: [9.0e-2, 2.4e-2, 2.2e-3, 1.5e-4, 7.5e-6, 4.8e-7],
        3: [8.6e-2, 1.6e-2, 1.1e-3, 3.8e-5, 9.6e-7, 3.1e-8],
        4: [8.7e-2, 1.6e-2, 4.5e-4, 9.8e-6, 1.2e-7, 2.0e-9],
    },
}
REFERENCE_FINEST_ORDER = {
    10: {1: 2.00, 2: 4.00, 3: 5.00, 4: 6.00},
    40: {1: 2.00, 2: 3.98, 3: 4.96, 4: 5.93},
}


def _cli(tmp_path, *argv):
    code = cli.main([*argv, "--out", str(tmp_path)])
    assert code == 0, f"cli exited with {code}"
    tag = argv[argv.index("--tag") + 1]
    summary = json.loads((tmp_path / f"manifest_{tag}.json").read_text())["summary"]
    err = np.loadtxt(tmp_path / f"e_{tag}.csv")
    return summary, err[:, 0], err[:, 1]


def test_criterion_1_operator_goldens(verdict):
    worst = {}
    worst["quadratic Qx"] = np.max(np.abs(build_sbp(2).Qx - np.array([[-3, 4, -1], [-4, 0, 4], [1, -4, 3]]) / 6))
    worst["quadratic D_AD"] = np.max(np.abs(build_ad(build_sbp(2), [1, 0]) - np.array([[7, -8, 1], [-8, 16, -8], [1, -8, 7]]) / 6))

    band = 0.5 * (np.diag(np.ones(6), 1) - np.diag(np.ones(6), -1))
    band[0, 0], band[-1, -1] = -0.5, 0.5
    mesh1 = build_mesh(0, 1, 6, 1)
    worst["6-element Qx"] = np.max(np.abs(assemble(mesh1, mesh1.ops.Qx).toarray() - band))

    # dissipation with eps1 = 1 on element 2; the last two rows are the plain
    # first-derivative rows (their last-column signs are misprinted in the reference)
    sc = band.copy()
    sc[2, 2:4] += [0.5, -0.5]
    sc[3, 2:4] += [-0.5, 0.5]
    coeffs = np.zeros((6, 1))
    coeffs[2] = 1
    worst["upwinded linear"] = np.max(np.abs((assemble(mesh1, mesh1.ops.Qx) + assemble_dissipation(mesh1, coeffs)).toarray() - sc))

    quad = np.array(
        [
            [-3, 4, -1, 0, 0, 0, 0],
            [-4, 0, 4, 0, 0, 0, 0],
            [1, -4, 3, 0, 0, 0, 0],
            [0, 0, -8, 8, 0, 0, 0],
            [0, 0, 2, -8, 6, 0, 0],
            [0, 0, 0, 0, -8, 8, 0],
            [0, 0, 0, 0, 2, -8, 6],
        ]
    ) / 6
    mesh2 = build_mesh(0, 1, 3, 2)
    c2 = np.array([[0, 0], [1 / 3, 1 / 18], [1 / 3, 1 / 18]])
    worst["upwinded quadratic"] = np.max(np.abs((assemble(mesh2, mesh2.ops.Qx) + assemble_dissipation(mesh2, c2)).toarray() - quad))

    ok = max(worst.values()) <= 1e-13
    assert verdict(1, ok, "max entry deviation " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))


def test_criterion_2_sbp_identity(verdict):
    worst = 0.0
    for p in range(1, 7):
        worst = max(worst, sbp_residual(build_sbp(p)))
        for n_e in (1, 2, 3, 10, 25, 50):
            worst = max(worst, global_sbp_check(build_global_system(build_mesh(0, 1, n_e, p))))
    assert verdict(2, worst <= 1e-13, f"max |Qx + Qx^T - B| = {worst:.1e} over p = 1..6, up to 50 elements")


def _raw(ops, c):
    return sum(ci * ops.gram(i + 1) for i, ci in enumerate(c))


def test_criterion_3_positivity_regions(verdict, rng):
    ops2, ops3 = build_sbp(2), build_sbp(3)
    inside, outside = [], []
    for _ in range(200):
        e1 = rng.uniform(1e-3, 2)
        e2 = -e1 / 3 + rng.uniform(0, 2)
        inside.append(psd_check(_raw(ops2, (e1, e2))))
        e2 = -e1 / 3 + rng.uniform(0, 1)
        e3 = -e1 / 45 - e2 / 3 + rng.uniform(0, 1)
        inside.append(psd_check(_raw(ops3, (e1, e2, e3))))
    for k in range(50):
        e1 = rng.uniform(1e-2, 2)
        outside.append(psd_check(_raw(ops2, (e1, -e1 / 3 - rng.uniform(1e-3, 1)))))
        if k % 2:
            c = (e1, -e1 / 3 - rng.uniform(1e-3, 1), rng.uniform(-1, 1))
        else:
            e2 = -e1 / 3 + rng.uniform(0, 1)
            c = (e1, e2, -e1 / 45 - e2 / 3 - rng.uniform(1e-3, 1))
        outside.append(psd_check(_raw(ops3, c)))
        assert not validate_coefficients(3, c)

    lam = np.linalg.eigvalsh(_raw(ops2, (1, -1 / 3)))
    spectrum = lam / lam.max()
    edge_ok = np.allclose(spectrum, [0, 0, 1], atol=1e-12)
    ok = min(inside) >= -1e-10 and max(outside) < -1e-8 and edge_ok
    assert verdict(
        3,
        ok,
        f"inside min eig {min(inside):.1e}, outside max eig {max(outside):.1e}, (1, -1/3) spectrum {np.round(lam, 12).tolist()}",
    )


@pytest.mark.slow
def test_criterion_4_steady_convergence(verdict):
    failures, worst_factor, worst_order = [], 1.0, 0.0
    for ratio, columns in REFERENCE_ERRORS.items():
        for p, reference in columns.items():
            rows = make_table(p, ratio, workers=3)
            for row, ref in zip(rows, reference):
                if ref > 1e-11:
                    factor = max(row.error / ref, ref / row.error)
                    worst_factor = max(worst_factor, factor)
                    if factor > 3:
                        failures.append(f"p{p} r{ratio} N{row.N}: {row.error:.2e} vs {ref:.2e}")
                elif row.error > 1e-11:
                    failures.append(f"p{p} r{ratio} N{row.N}: {row.error:.2e} above 1e-11")
            d = abs(rows[-1].order - REFERENCE_FINEST_ORDER[ratio][p])
            worst_order = max(worst_order, d)
            if d > 0.15:
                failures.append(f"p{p} r{ratio} order {rows[-1].order:.2f}")
    detail = f"worst error factor {worst_factor:.2f}, worst finest-pair order deviation {worst_order:.3f}"
    assert verdict(4, not failures, detail + ("; " + "; ".join(failures) if failures else ""))


def test_criterion_5_energy(verdict, rng):
    worst_rate, increases = -np.inf, 0
    for p, c in ((2, [1 / 6, 1 / 50]), (3, [1 / 4, 1 / 500, 0]), (4, [9 / 125, 1 / 500, 0, 0])):
        mesh = build_mesh(0, 1, 20, p)
        solver = LinearAdvectionSolver(mesh, 1.0, TimeIntegrator(dt=1e-4), ad_coeffs=c)
        L = solver.operator(0.0)
        for _ in range(20):
            U = rng.standard_normal(mesh.n_nodes)
            worst_rate = max(worst_rate, semi_discrete_energy_rate(U, L) / (U @ U))
        state = StateVector(rng.standard_normal(mesh.n_nodes))
        E = discrete_energy(state.U, solver.P)
        for _ in range(1000):
            state = advance_linear(solver, state)
            E_new = discrete_energy(state.U, solver.P)
            # one ulp-level allowance for the energy sum itself
            increases += E_new > E * (1 + 4 * np.finfo(float).eps)
            E = E_new
    ok = worst_rate <= 1e-12 and increases == 0
    assert verdict(5, ok, f"max rate/|U|^2 {worst_rate:.2e}, energy increases in 3x1000 BE steps: {increases}")


@pytest.mark.slow
def test_criterion_6_linear_pulse_step(verdict, tmp_path):
    parts, ok = [], True
    for p in (2, 3, 4):
        ini = str(CONFIGS / f"advect_p{p}.ini")
        off, _, _ = _cli(tmp_path, "advect", "--config", ini, "--set", "ad.coeffs=0", "--tag", f"off{p}")
        on, x, e = _cli(tmp_path, "advect", "--config", ini, "--tag", f"on{p}")
        _, xw, ew = _cli(tmp_path, "weno3", "--problem", "advect", "--nodes", str(on["nodes"]), "--tag", f"weno{p}")
        pulse = np.abs(e[(x >= 0.05) & (x <= 0.45)]).max()
        pulse_w = np.abs(ew[(xw >= 0.05) & (xw <= 0.45)]).max()
        ok_p = off["overshoot"] > 0.02 and on["overshoot"] <= 0.01 and pulse < pulse_w
        ok &= ok_p
        parts.append(
            f"p{p} N{on['nodes']}: overshoot off {off['overshoot']:.3f} on {on['overshoot']:.4f}, pulse error {pulse:.2e} vs WENO3 {pulse_w:.2e}"
        )
    assert verdict(6, ok, "; ".join(parts))


@pytest.mark.slow
def test_criterion_7_burgers(verdict, tmp_path):
    ini = str(CONFIGS / "burgers_p4.ini")
    early, _, _ = _cli(tmp_path, "burgers", "--config", ini, "--set", "ad.coeffs=0", "--t-end", "0.1", "--tag", "b01")
    ok_a = early["max_error"] <= 0.015

    late, x, e = _cli(tmp_path, "burgers", "--config", ini, "--tag", "b05")
    _, xw, ew = _cli(tmp_path, "weno3", "--problem", "burgers", "--nodes", str(late["nodes"]), "--t-end", "0.5", "--tag", "w05")
    osc = np.abs(e[(x < 0.45) | (x > 0.55)]).max()
    out_w = np.abs(ew[(xw < 0.4) | (xw > 0.6)]).max()
    ok_b = osc <= 0.05 and late["max_error_outside_window"] < out_w

    odd, xo, eo = _cli(tmp_path, "burgers", "--config", ini, "--elements", "19", "--tag", "b19")
    even, xe, ee = _cli(tmp_path, "burgers", "--config", ini, "--elements", "20", "--tag", "b20")
    rel = abs(odd["max_error"] - even["max_error"]) / min(odd["max_error"], even["max_error"])
    away_o = np.abs(eo[np.abs(xo - 0.5) > 0.05]).max()
    away_e = np.abs(ee[np.abs(xe - 0.5) > 0.05]).max()
    ok_c = rel <= 0.2

    detail = (
        f"(a) t=0.1 max error {early['max_error']:.2e} [{'ok' if ok_a else 'no'}]; "
        f"(b) error outside [0.45,0.55] {osc:.2e}, outside window CG {late['max_error_outside_window']:.2e} vs WENO3 {out_w:.2e} [{'ok' if ok_b else 'no'}]; "
        f"(c) max error 19 el {odd['max_error']:.3e} vs 20 el {even['max_error']:.3e} (rel diff {rel:.2f}; away from shock {away_o:.2e} vs {away_e:.2e}) [{'ok' if ok_c else 'no'}]"
    )
    assert verdict(7, ok_a and ok_b and ok_c, detail)


def test_criterion_8_mesh_size_invariance(verdict):
    worst = 0.0
    for p, c in ((2, [1 / 6, 1 / 50]), (3, [1 / 4, 1 / 500, 0]), (4, [9 / 125, 1 / 500, 0, 0])):
        rows = []
        for n_e in (10, 20):
            mesh = build_mesh(0, 1, n_e, p)
            coeffs = np.outer(active_elements(mesh, Window(0.5, 0.2), 0.0), c)
            A = assemble(mesh, mesh.ops.Qx) + assemble_dissipation(mesh, coeffs)
            i = (n_e // 2) * p
            rows.append(A.toarray()[i, i - p : i + p + 1])
        worst = max(worst, np.max(np.abs(rows[0] - rows[1])))
    assert verdict(8, worst <= 1e-12, f"max stencil difference h vs h/2 = {worst:.1e} for p = 2, 3, 4")


def test_criterion_9_exact_burgers(verdict, rng):
    x = rng.uniform(0, 1, 1000)
    t = rng.uniform(0, 0.5, 1000)
    u = exact_burgers(x, t)
    res = np.max(np.abs(-u + np.sin(2 * np.pi * (x - u * t))))
    d = rng.uniform(0, 0.5, 1000)
    anti = np.max(np.abs(exact_burgers(0.5 + d, t) + exact_burgers(0.5 - d, t)))
    ok = res <= 1e-13 and anti <= 1e-12
    assert verdict(9, ok, f"max residual {res:.1e}, max antisymmetry defect {anti:.1e}")
