"""Command-line experiment runner.

Every setting has a dotted key (``mesh.p``, ``ad.e1``, ``time.dt``...). Keys
come from an INI-style ``--config`` file (section ``[mesh]`` with ``p = 4``
gives ``mesh.p``), are overridden by ``--set key=value`` and finally by the
convenience flags. Coefficients accept exact fractions such as ``1/18``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure. Errors
are reported as a single JSON line on stderr.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from cgsbp import __version__, _kernels
from cgsbp.dissipation import (
    CONSTANT_SIGNED,
    MODES,
    CoefficientRegionError,
    Window,
    is_psd,
    pad_coefficients,
    psd_check,
    validate_coefficients,
)
from cgsbp.mesh import MeshError, build_mesh
from cgsbp.metrics import REFERENCE_NODES, make_table, render_csv, render_text, snap_node_count
from cgsbp.sbp import build_sbp, gram_matrix
from cgsbp.solvers import (
    AD_SCALINGS,
    BurgersSolver,
    ConfigurationError,
    LinearAdvectionSolver,
    NumericalFailure,
    TimeIntegrator,
    exact_burgers,
    exact_steady,
    solve_steady,
    initial_pulse_step,
)
from cgsbp.weno import BURGERS_FLUX, exact_ghosts, inflow_outflow_ghosts, linear_flux, weno3_solve

EXPERIMENTS = ("steady-convergence", "advect", "burgers", "operators", "ad-check", "weno3")
OUTPUT_ENV = "CGSBP_OUTPUT_DIR"

DEFAULTS = {
    "steady-convergence": {"physics.ratio": "10", "physics.a": "1", "table.p": "1,2,3,4", "table.nodes": ",".join(map(str, REFERENCE_NODES)), "table.workers": "1"},
    "advect": {"mesh.p": "2", "mesh.nodes": "80", "physics.a": "1", "time.t_end": "0.2", "time.dt": "1e-4", "time.scheme": "backward-euler", "ad.window_center": "0.6", "ad.window_radius": "0.1", "ad.t_start": "0", "ad.follow": "true"},
    "burgers": {"mesh.p": "4", "mesh.nodes": "81", "time.t_end": "0.5", "time.dt": "1e-4", "time.scheme": "backward-euler", "ad.window_lo": "0.4", "ad.window_hi": "0.6", "ad.t_start": "0.15", "ad.speed_scaling": "element-max"},
    "operators": {"mesh.p": "2"},
    "ad-check": {"mesh.p": "2"},
    "weno3": {"weno.problem": "advect", "mesh.nodes": "80", "physics.a": "1", "time.t_end": "0.2", "weno.cfl": "0.4"},
}
COMMON_DEFAULTS = {"ad.mode": CONSTANT_SIGNED, "output.precision": "17", "mesh.x0": "0", "mesh.x1": "1"}


class ConfigError(ValueError):
    pass


# {{{ config handling


def parse_number(text: str) -> float:
    try:
        return float(Fraction(str(text).strip()))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"not a number: {text!r}") from exc


def parse_list(text: str) -> list[float]:
    return [parse_number(t) for t in str(text).split(",") if t.strip()]


def parse_bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in {"1", "true", "yes", "on"}:
        return True
    if t in {"0", "false", "no", "off"}:
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def parse_ad_pairs(text: str) -> dict[str, str]:
    """``"e1=9/125,e2=1/500"`` -> ``{"ad.e1": "9/125", "ad.e2": "1/500"}``."""
    out = {}
    for item in str(text).split(","):
        if not item.strip():
            continue
        key, sep, value = item.partition("=")
        key = key.strip()
        if not sep or not key.startswith("e") or not key[1:].isdigit():
            raise ConfigError(f"bad AD coefficient {item!r}; expected e<i>=<value>")
        parse_number(value)
        out[f"ad.{key}"] = value.strip()
    return out


def read_config_file(path: str) -> dict[str, str]:
    parser = configparser.ConfigParser()
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    flat = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            flat[f"{section}.{key}"] = value
    return flat


class Config:
    """Flat dotted-key settings with typed accessors."""

    def __init__(self, experiment: str, values: dict[str, str]):
        self.experiment = experiment
        self.values = dict(values)

    def has(self, key: str) -> bool:
        return key in self.values and str(self.values[key]).strip() != ""

    def text(self, key: str) -> str:
        if not self.has(key):
            raise ConfigError(f"missing setting {key}")
        return str(self.values[key]).strip()

    def number(self, key: str) -> float:
        return parse_number(self.text(key))

    def integer(self, key: str) -> int:
        v = self.number(key)
        if v != int(v):
            raise ConfigError(f"{key} must be an integer, got {self.values[key]}")
        return int(v)

    def flag(self, key: str) -> bool:
        return parse_bool(self.text(key))

    def numbers(self, key: str) -> list[float]:
        return parse_list(self.text(key))

    def ad_coeffs(self, p: int) -> np.ndarray | None:
        """Coefficients from ``ad.coeffs`` or ``ad.e<i>``; None when absent."""
        if self.has("ad.coeffs"):
            c = self.numbers("ad.coeffs")
        else:
            idx = sorted(int(k[4:]) for k in self.values if k.startswith("ad.e") and k[4:].isdigit() and self.has(k))
            if not idx:
                return None
            c = [0.0] * max(idx)
            for i in idx:
                if i < 1:
                    raise ConfigError("AD coefficient indices start at e1")
                c[i - 1] = self.number(f"ad.e{i}")
        if len(c) > p and any(c[p:]):
            raise ConfigError(f"{len(c)} AD coefficients given for p={p}")
        return pad_coefficients(c, p)

    def echo(self) -> dict:
        return {k: self.values[k] for k in sorted(self.values)}


def build_config(args: argparse.Namespace) -> Config:
    values = dict(COMMON_DEFAULTS)
    values.update(DEFAULTS[args.experiment])
    if args.config:
        values.update(read_config_file(args.config))
    for item in args.set or []:
        key, sep, value = item.partition("=")
        if not sep or "." not in key:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        values[key.strip()] = value.strip()

    flags = {
        "p": "mesh.p",
        "nodes": "mesh.nodes",
        "elements": "mesh.n_elements",
        "ratio": "physics.ratio",
        "a": "physics.a",
        "t_end": "time.t_end",
        "dt": "time.dt",
        "scheme": "time.scheme",
        "t_start": "ad.t_start",
        "mode": "ad.mode",
        "speed_scaling": "ad.speed_scaling",
        "coeffs": "ad.coeffs",
        "problem": "weno.problem",
        "workers": "table.workers",
        "out": "output.dir",
        "tag": "output.tag",
    }
    for attr, key in flags.items():
        v = getattr(args, attr, None)
        if v is not None:
            values[key] = str(v)
    if args.experiment == "steady-convergence" and args.p is not None:
        values["table.p"] = str(args.p)
    if getattr(args, "ad", None):
        values.pop("ad.coeffs", None)
        for k in [k for k in values if k.startswith("ad.e") and k[4:].isdigit()]:
            del values[k]
        values.update(parse_ad_pairs(args.ad))
    if getattr(args, "window", None):
        values["ad.window_lo"], values["ad.window_hi"] = map(str, args.window)
    if getattr(args, "ad_window", None):
        values["ad.window_center"], values["ad.window_radius"] = map(str, args.ad_window)
    return Config(args.experiment, values)


# }}}


# {{{ output


def output_dir(cfg: Config) -> Path:
    d = cfg.values.get("output.dir") or os.environ.get(OUTPUT_ENV) or "."
    path = Path(d)
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_columns(path: Path, x: np.ndarray, y: np.ndarray, precision: int) -> None:
    fmt = f"%.{precision - 1}e"
    np.savetxt(path, np.column_stack([np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)]), fmt=fmt, delimiter=" ")


def write_manifest(out: Path, tag: str, cfg: Config, files: list[str], summary: dict) -> Path:
    manifest = {
        "experiment": cfg.experiment,
        "tag": tag,
        "version": __version__,
        "backend": _kernels.backend(),
        "parameters": cfg.echo(),
        "summary": summary,
        "files": sorted(files),
    }
    path = out / f"manifest_{tag}.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=float) + "\n")
    return path


def mesh_from(cfg: Config, p: int):
    x0, x1 = cfg.number("mesh.x0"), cfg.number("mesh.x1")
    if cfg.has("mesh.n_elements"):
        n_e = cfg.integer("mesh.n_elements")
    else:
        n_e = (snap_node_count(cfg.integer("mesh.nodes"), p) - 1) // p
    return build_mesh(x0, x1, n_e, p)


def check_ad(cfg: Config, p: int) -> np.ndarray | None:
    mode = cfg.text("ad.mode")
    if mode not in MODES:
        raise ConfigError(f"ad.mode must be one of {MODES}, got {mode!r}")
    c = cfg.ad_coeffs(p)
    if c is not None:
        report = validate_coefficients(p, c, mode)
        if not report:
            raise CoefficientRegionError(report.violation, c.tolist())
    return c


# }}}


# {{{ experiments


def run_steady(cfg: Config) -> tuple[str, list[str], dict]:
    ratio = cfg.number("physics.ratio")
    a = cfg.number("physics.a")
    nodes = [int(n) for n in cfg.numbers("table.nodes")]
    ps = [int(p) for p in cfg.numbers("table.p")]
    workers = cfg.integer("table.workers")
    tag = cfg.values.get("output.tag") or f"steady_r{ratio:g}"
    out = output_dir(cfg)
    prec = cfg.integer("output.precision")

    files, summary, text, csv_parts = [], {}, [], []
    for p in ps:
        rows = make_table(p, ratio, nodes, a=a, workers=workers)
        text.append(render_text(rows, f"P{p}  a/eps={ratio:g}"))
        csv_parts.append("".join(f"{p}," + line + "\n" for line in render_csv(rows).splitlines()[1:]))
        summary[f"p{p}"] = [{"N": r.N, "error": r.error, "order": r.order} for r in rows]
        bad = [r.note for r in rows if r.note]
        if bad:
            raise NumericalFailure(f"p={p}: {bad[0]}")

        # finest-mesh profile and nodal error
        N = rows[-1].N
        mesh = build_mesh(0.0, 1.0, (N - 1) // p, p, dtype=np.longdouble)
        a_ = np.longdouble(a)
        eps = a_ / np.longdouble(ratio)
        res = solve_steady(mesh, a_, eps)
        sub = f"{tag}_p{p}"
        write_columns(out / f"u_{sub}.csv", mesh.nodes, res.U, prec)
        write_columns(out / f"e_{sub}.csv", mesh.nodes, res.U - exact_steady(mesh.nodes, a_, eps), prec)
        files += [f"u_{sub}.csv", f"e_{sub}.csv"]

    header = "p," + render_csv([]).splitlines()[0] + "\n"
    (out / f"table_{tag}.csv").write_text(header + "".join(csv_parts))
    (out / f"table_{tag}.txt").write_text("\n".join(text))
    files += [f"table_{tag}.csv", f"table_{tag}.txt"]
    sys.stdout.write("\n".join(text))
    return tag, files, summary


def _integrator(cfg: Config) -> TimeIntegrator:
    return TimeIntegrator(scheme=cfg.text("time.scheme"), dt=cfg.number("time.dt"))


def run_advect(cfg: Config) -> tuple[str, list[str], dict]:
    p = cfg.integer("mesh.p")
    coeffs = check_ad(cfg, p)
    a = cfg.number("physics.a")
    t_end = cfg.number("time.t_end")
    integ = _integrator(cfg)
    mesh = mesh_from(cfg, p)
    window = Window(
        cfg.number("ad.window_center"),
        cfg.number("ad.window_radius"),
        t_start=cfg.number("ad.t_start"),
        speed=a if cfg.flag("ad.follow") else 0.0,
    )
    x0 = mesh.domain[0]
    solver = LinearAdvectionSolver(
        mesh, a, integ, ad_coeffs=coeffs, window=window, mode=cfg.text("ad.mode"), inflow=lambda t: float(initial_pulse_step(x0 - a * t))
    )
    state = solver.run(initial_pulse_step(mesh.nodes), t_end)
    exact = initial_pulse_step(mesh.nodes - a * t_end)
    tag = cfg.values.get("output.tag") or f"advect_p{p}_n{mesh.n_nodes}"
    near = np.abs(mesh.nodes - window.center_at(t_end)) <= window.radius
    summary = {
        "nodes": mesh.n_nodes,
        "max_error": float(np.max(np.abs(state.U - exact))),
        "overshoot": float(max(np.max(state.U[near] - 0.5, initial=0.0), np.max(-state.U[near], initial=0.0))),
    }
    return tag, _write_profile(cfg, tag, mesh.nodes, state.U, exact), summary


def run_burgers(cfg: Config) -> tuple[str, list[str], dict]:
    p = cfg.integer("mesh.p")
    coeffs = check_ad(cfg, p)
    scaling = cfg.text("ad.speed_scaling")
    if scaling not in AD_SCALINGS:
        raise ConfigError(f"ad.speed_scaling must be one of {AD_SCALINGS}")
    t_end = cfg.number("time.t_end")
    mesh = mesh_from(cfg, p)
    lo, hi = cfg.number("ad.window_lo"), cfg.number("ad.window_hi")
    if not hi > lo:
        raise ConfigError(f"empty AD window [{lo}, {hi}]")
    window = Window.from_bounds(lo, hi, t_start=cfg.number("ad.t_start"))
    solver = BurgersSolver(mesh, _integrator(cfg), ad_coeffs=coeffs, window=window, scaling=scaling, mode=cfg.text("ad.mode"))
    state = solver.run(np.sin(2 * np.pi * mesh.nodes), t_end)
    exact = exact_burgers(mesh.nodes, t_end)
    tag = cfg.values.get("output.tag") or f"burgers_p{p}_n{mesh.n_nodes}"
    err = np.abs(state.U - exact)
    outside = (mesh.nodes < lo) | (mesh.nodes > hi)
    summary = {
        "nodes": mesh.n_nodes,
        "max_error": float(err.max()),
        "max_error_outside_window": float(err[outside].max()) if outside.any() else 0.0,
        "newton_iterations": solver.newton_iterations,
    }
    return tag, _write_profile(cfg, tag, mesh.nodes, state.U, exact), summary


def run_weno(cfg: Config) -> tuple[str, list[str], dict]:
    problem = cfg.text("weno.problem")
    n = cfg.integer("mesh.nodes")
    t_end = cfg.number("time.t_end")
    cfl = cfg.number("weno.cfl")
    x = np.linspace(cfg.number("mesh.x0"), cfg.number("mesh.x1"), n)
    if problem == "advect":
        a = cfg.number("physics.a")

        def exact_fn(xx, t):
            return initial_pulse_step(np.asarray(xx) - a * t)

        u = weno3_solve(exact_fn(x, 0.0), x, t_end, linear_flux(a), inflow_outflow_ghosts(x, exact_fn), cfl)
    elif problem == "burgers":
        exact_fn = exact_burgers
        u = weno3_solve(np.sin(2 * np.pi * x), x, t_end, BURGERS_FLUX, exact_ghosts(x, exact_fn), cfl)
    else:
        raise ConfigError(f"weno.problem must be 'advect' or 'burgers', got {problem!r}")
    exact = exact_fn(x, t_end)
    tag = cfg.values.get("output.tag") or f"weno3_{problem}_n{n}"
    summary = {"nodes": n, "max_error": float(np.max(np.abs(u - exact)))}
    return tag, _write_profile(cfg, tag, x, u, exact), summary


def _write_profile(cfg: Config, tag: str, x, U, exact) -> list[str]:
    out = output_dir(cfg)
    prec = cfg.integer("output.precision")
    write_columns(out / f"u_{tag}.csv", x, U, prec)
    write_columns(out / f"e_{tag}.csv", x, np.asarray(U) - exact, prec)
    return [f"u_{tag}.csv", f"e_{tag}.csv"]


def _matrix_text(name: str, A: np.ndarray) -> str:
    with np.printoptions(precision=12, suppress=True, linewidth=160):
        return f"{name} =\n{np.asarray(A, dtype=np.float64)}\n"


def run_operators(cfg: Config) -> tuple[str, list[str], dict]:
    p = cfg.integer("mesh.p")
    ops = build_sbp(p)
    parts = [_matrix_text("P", ops.P), _matrix_text("Qx", ops.Qx), _matrix_text("B", ops.B), _matrix_text("Dx", ops.Dx)]
    parts += [_matrix_text(f"D{i}", ops.D(i)) for i in range(2, p + 1)]
    text = "".join(parts)
    sys.stdout.write(text)
    tag = cfg.values.get("output.tag") or f"operators_p{p}"
    out = output_dir(cfg)
    (out / f"{tag}.txt").write_text(text)
    summary = {"sbp_residual": float(np.max(np.abs(ops.Qx + ops.Qx.T - ops.B)))}
    return tag, [f"{tag}.txt"], summary


def run_ad_check(cfg: Config) -> tuple[str, list[str], dict]:
    p = cfg.integer("mesh.p")
    mode = cfg.text("ad.mode")
    c = cfg.ad_coeffs(p)
    if c is None:
        raise ConfigError("ad-check needs --coeffs or --ad")
    ops = build_sbp(p)
    # built directly so that matrices outside the valid region can be inspected too
    D = sum(ci * gram_matrix(ops, ops.D(i + 1), np.ones(p + 1)) for i, ci in enumerate(c))
    report = validate_coefficients(p, c, mode)
    lam = psd_check(D)
    verdict = "ok" if report else f"violation: {report.violation}"
    text = _matrix_text("D_AD", D) + f"coefficients = {c.tolist()}\nverdict = {verdict}\nmin eigenvalue = {lam:.6e}\npsd = {is_psd(D)}\n"
    sys.stdout.write(text)
    tag = cfg.values.get("output.tag") or f"adcheck_p{p}"
    out = output_dir(cfg)
    (out / f"{tag}.txt").write_text(text)
    return tag, [f"{tag}.txt"], {"valid": bool(report), "violation": report.violation, "min_eigenvalue": lam}


RUNNERS = {
    "steady-convergence": run_steady,
    "advect": run_advect,
    "burgers": run_burgers,
    "operators": run_operators,
    "ad-check": run_ad_check,
    "weno3": run_weno,
}


# }}}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cgsbp", description="Energy-stable CG/SBP experiments")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="experiment", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file with [mesh], [physics], [time], [ad], [output] sections")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a dotted setting")
    common.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or .)")
    common.add_argument("--tag", help="file name tag")
    common.add_argument("--p", type=int, help="polynomial order")

    timed = argparse.ArgumentParser(add_help=False)
    timed.add_argument("--nodes", type=int, help="node count, snapped to the nearest p-compatible value")
    timed.add_argument("--elements", type=int, help="element count (overrides --nodes)")
    timed.add_argument("--t-end", dest="t_end")
    timed.add_argument("--dt")
    timed.add_argument("--scheme", choices=("backward-euler", "rk4-explicit"))
    timed.add_argument("--ad", help='coefficients as "e1=9/125,e2=1/500"')
    timed.add_argument("--coeffs", help="comma-separated coefficients e1,e2,...")
    timed.add_argument("--mode", choices=MODES)
    timed.add_argument("--t-start", dest="t_start")

    s = sub.add_parser("steady-convergence", parents=[common], help="steady advection-diffusion convergence table")
    s.add_argument("--ratio", help="a/eps")
    s.add_argument("--a")
    s.add_argument("--workers", type=int)

    s = sub.add_parser("advect", parents=[common, timed], help="linear advection of a pulse and a step")
    s.add_argument("--a")
    s.add_argument("--ad-window", dest="ad_window", nargs=2, metavar=("CENTER", "RADIUS"))

    s = sub.add_parser("burgers", parents=[common, timed], help="split-form Burgers shock")
    s.add_argument("--window", nargs=2, metavar=("LO", "HI"))
    s.add_argument("--speed-scaling", dest="speed_scaling", choices=AD_SCALINGS)

    sub.add_parser("operators", parents=[common], help="print element operators")

    s = sub.add_parser("ad-check", parents=[common], help="dissipation matrix, validity and min eigenvalue")
    s.add_argument("--coeffs", help="comma-separated coefficients e1,e2,...")
    s.add_argument("--ad", help='coefficients as "e1=1,e2=-1/3"')
    s.add_argument("--mode", choices=MODES)

    s = sub.add_parser("weno3", parents=[common], help="WENO3 finite-difference baseline")
    s.add_argument("--problem", choices=("advect", "burgers"))
    s.add_argument("--nodes", type=int)
    s.add_argument("--t-end", dest="t_end")
    s.add_argument("--a")
    return parser


def _fail(kind: str, message: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = build_config(args)
        tag, files, summary = RUNNERS[args.experiment](cfg)
        write_manifest(output_dir(cfg), tag, cfg, files, summary)
    except CoefficientRegionError as exc:
        return _fail("coefficient-region", f"violates {exc.inequality}", 2)
    except (ConfigError, ConfigurationError, MeshError) as exc:
        return _fail("config", str(exc), 2)
    except (NumericalFailure, FloatingPointError, np.linalg.LinAlgError) as exc:
        return _fail("numerical", str(exc), 3)
    except ValueError as exc:
        return _fail("config", str(exc), 2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
