"""Command-line front end: config parsing, experiment runs, artifact files.

Every run writes a single machine-readable artifact that echoes the fully
resolved configuration, the library version, and the wall-clock time, so a
result file is sufficient to reproduce the run. Options may come from a
JSON config file (--config); explicit flags override config values, which
override built-in defaults.

Exit codes: 0 = the run completed (even if the iteration did not converge;
that is reported in-band), 2 = configuration error, 3 = I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__, _backend, domain, hgroup, kernel, solver

COMMANDS = (
    "constant",
    "ball-volume",
    "quotient",
    "solve",
    "critical",
    "pohozaev",
    "probe",
    "rescale",
)


class ConfigError(ValueError):
    pass


def _build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="heishls",
        description="HLS quotients, singular potentials, and integral-equation "
        "solvers on grid-discretized domains of the Heisenberg group",
    )
    sub = top.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON file with option defaults")
        p.add_argument("-o", "--output", help="artifact path (default: $HEISHLS_OUTDIR/<command>.<ext>)")
        p.add_argument("--format", choices=("json", "csv"), default=None)
        p.add_argument("--threads", type=int, default=None, help="kernel parallelism hint")
        p.add_argument(
            "--deterministic",
            action="store_true",
            default=None,
            help="sequential summation and no timestamps: byte-stable artifacts",
        )

    def group_opts(p):
        p.add_argument("--n", type=int, default=None)
        p.add_argument("--alpha", type=float, default=None)

    def domain_opts(p):
        p.add_argument("--kind", choices=("cylinder",), default=None)
        p.add_argument("--R", type=float, default=None)
        p.add_argument("--center", default=None, help="comma-separated packed coordinates x..,y..,t")
        p.add_argument("--h", type=float, default=None)
        p.add_argument("--ht", type=float, default=None, help="override t spacing")

    def solver_opts(p):
        p.add_argument("--lam", type=float, default=None)
        p.add_argument("--q", type=float, default=None)
        p.add_argument("--tol-residual", type=float, default=None)
        p.add_argument("--tol-energy", type=float, default=None)
        p.add_argument("--max-iter", type=int, default=None)
        p.add_argument("--damping", type=float, default=None)
        p.add_argument("--init", choices=("constant", "truncated_H"), default=None)

    p = sub.add_parser("constant", help="closed-form sharp constant")
    group_opts(p)
    common(p)

    p = sub.add_parser("ball-volume", help="unit gauge-ball volume, three ways")
    group_opts(p)
    p.add_argument("--h", type=float, default=None)
    p.add_argument("--mc-samples", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    common(p)

    p = sub.add_parser("quotient", help="energy quotient of a profile on a cylinder")
    group_opts(p)
    domain_opts(p)
    p.add_argument("--lam", type=float, default=None)
    p.add_argument("--q", type=float, default=None)
    p.add_argument("--profile", choices=("extremal", "constant"), default=None)
    p.add_argument("--eps", type=float, default=None, help="concentration of the extremal profile")
    common(p)

    p = sub.add_parser("solve", help="subcritical quotient maximizer")
    group_opts(p)
    domain_opts(p)
    solver_opts(p)
    common(p)

    p = sub.add_parser("critical", help="continuation to the critical exponent")
    group_opts(p)
    domain_opts(p)
    solver_opts(p)
    p.add_argument("--schedule", default=None, help="comma-separated decreasing q values")
    common(p)

    p = sub.add_parser("pohozaev", help="solve, convert, and check the dilation identity")
    group_opts(p)
    domain_opts(p)
    solver_opts(p)
    p.add_argument("--boundary-m", type=int, default=None)
    common(p)

    p = sub.add_parser("probe", help="unnormalized trajectory classification at lam <= 0")
    group_opts(p)
    domain_opts(p)
    solver_opts(p)
    p.add_argument("--init-scale", type=float, default=None)
    common(p)

    p = sub.add_parser("rescale", help="solve then peak-rescale the solution")
    group_opts(p)
    domain_opts(p)
    solver_opts(p)
    common(p)
    return top


_DEFAULTS = {
    "kind": "cylinder",
    "lam": 0.0,
    "h": 0.2,
    "mc_samples": 1_000_000,
    "seed": 0,
    "profile": "extremal",
    "eps": 1.0,
    "tol_residual": 1e-8,
    "tol_energy": 1e-12,
    "max_iter": 500,
    "damping": 1.0,
    "init": "constant",
    "boundary_m": 256,
    "init_scale": 1.0,
    "format": "json",
    "deterministic": False,
}


def _merge_config(args: argparse.Namespace) -> dict:
    """flags > config file > built-in defaults; unknown config keys are errors."""
    merged = dict(vars(args))
    merged.pop("config", None)
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except OSError as e:
            raise OSError(f"config file {args.config}: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file {args.config} is not valid JSON: {e}") from e
        if not isinstance(cfg, dict):
            raise ConfigError("config file must hold a JSON object")
        for key, val in cfg.items():
            dest = key.replace("-", "_")
            if dest not in merged:
                raise ConfigError(f"config key {key!r} is not an option of this command")
            if merged[dest] is None:
                merged[dest] = val
    for key, val in merged.items():
        if val is None and key in _DEFAULTS:
            merged[key] = _DEFAULTS[key]
    return merged


def _require(cfg: dict, *keys: str) -> None:
    for k in keys:
        if cfg.get(k) is None:
            raise ConfigError(f"{k}: required option is missing")


def _parse_center(cfg: dict, n: int) -> hgroup.HPoint:
    raw = cfg.get("center")
    if raw is None:
        return hgroup.identity(n)
    if isinstance(raw, str):
        parts = [float(v) for v in raw.split(",")]
    else:
        parts = [float(v) for v in raw]
    if len(parts) != 2 * n + 1:
        raise ConfigError(f"center: expected {2 * n + 1} coordinates, got {len(parts)}")
    return hgroup.HPoint.from_packed(np.asarray(parts))


def _make_grid(cfg: dict) -> domain.Grid:
    _require(cfg, "n", "R", "h")
    if cfg["kind"] != "cylinder":
        raise ConfigError(f"kind: unsupported domain kind {cfg['kind']!r}")
    n = int(cfg["n"])
    dom = domain.cylinder(n, float(cfg["R"]), _parse_center(cfg, n))
    return domain.build_grid(dom, float(cfg["h"]), ht=cfg.get("ht"))


def _make_kernel_spec(cfg: dict) -> kernel.KernelSpec:
    _require(cfg, "n", "alpha")
    return kernel.KernelSpec(n=int(cfg["n"]), alpha=float(cfg["alpha"]), lam=float(cfg["lam"]))


def _make_solver_config(cfg: dict, spec: kernel.KernelSpec, q: float) -> solver.SolverConfig:
    return solver.SolverConfig(
        q=q,
        spec=spec,
        tol_residual=float(cfg["tol_residual"]),
        tol_energy=float(cfg["tol_energy"]),
        max_iter=int(cfg["max_iter"]),
        damping=float(cfg["damping"]),
        init=cfg["init"],
    )


def _solution_cells(f: kernel.GridFunction) -> list[list[float]]:
    grid = f.grid
    rows = np.concatenate(
        [grid.points, grid.weights[:, None], f.values[:, None]], axis=1
    )
    return [[float(v) for v in row] for row in rows]


def _report_outputs(rep: solver.SolveReport) -> dict:
    return {
        "multiplier": rep.multiplier,
        "el_residual": rep.el_residual,
        "iterations": rep.iterations,
        "converged": rep.converged,
        "energy_trace": list(rep.energy_trace),
        "diagnostics": rep.diagnostics,
        "solution": {"cells": _solution_cells(rep.solution)},
        "norm_q": 1.0,
    }


# ---------------------------------------------------------------------------
# command implementations (each returns an `outputs` dict)
# ---------------------------------------------------------------------------

def _run_constant(cfg: dict) -> dict:
    _require(cfg, "n", "alpha")
    return {"value": kernel.sharp_constant(int(cfg["n"]), float(cfg["alpha"]))}


def _run_ball_volume(cfg: dict) -> dict:
    _require(cfg, "n")
    n = int(cfg["n"])
    closed = kernel.gauge_ball_volume(n)
    h = float(cfg["h"] if cfg["h"] is not None else 0.02)
    ball = domain.indicator_domain(
        n,
        lambda pts: hgroup.gauge_norm_packed(pts, n) < 1.0,
        np.array([[-1.0, 1.0]] * (2 * n) + [[-1.0, 1.0]]),
    )
    quad = domain.integrate(ball, lambda pts: np.ones(pts.shape[0]), h=h, ht=h)
    rng = np.random.default_rng(int(cfg["seed"]))
    m = int(cfg["mc_samples"])
    pts = rng.uniform(-1.0, 1.0, size=(m, 2 * n + 1))
    mc = float((hgroup.gauge_norm_packed(pts, n) < 1.0).mean() * 2 ** (2 * n + 1))
    return {"closed_form": closed, "grid_quadrature": quad, "monte_carlo": mc}


def _run_quotient(cfg: dict) -> dict:
    spec = _make_kernel_spec(cfg)
    grid = _make_grid(cfg)
    q = float(cfg["q"]) if cfg["q"] is not None else spec.q_critical
    if cfg["profile"] == "extremal":
        zeta = grid.domain.center
        f = kernel.grid_function(
            grid, lambda pts: kernel.conformal_values(pts, float(cfg["eps"]), zeta, spec)
        )
    else:
        f = kernel.grid_function(grid, 1.0)
    return {
        "quotient": kernel.energy_quotient(f, spec, q),
        "energy": kernel.hls_energy(f, spec),
        "norm_q": kernel.lp_norm(f, q),
        "q": q,
        "cells": grid.size,
    }


def _run_solve(cfg: dict) -> dict:
    spec = _make_kernel_spec(cfg)
    grid = _make_grid(cfg)
    q = float(cfg["q"]) if cfg["q"] is not None else 0.5 * (spec.q_critical + 2.0)
    rep = solver.solve_subcritical(grid, _make_solver_config(cfg, spec, q))
    out = _report_outputs(rep)
    out["q"] = q
    return out


def _run_critical(cfg: dict) -> dict:
    spec = _make_kernel_spec(cfg)
    grid = _make_grid(cfg)
    q_alpha = spec.q_critical
    if cfg.get("schedule"):
        raw = cfg["schedule"]
        qs = [float(v) for v in (raw.split(",") if isinstance(raw, str) else raw)]
    else:
        qs = [1.6, 1.5, 1.4]
    if not qs or abs(qs[-1] - q_alpha) > 1e-9:
        qs = qs + [q_alpha]
    scfg = _make_solver_config(cfg, spec, qs[0])
    rep = solver.solve_critical_via_limit(grid, spec, qs, scfg)
    out = _report_outputs(rep)
    out["schedule"] = qs
    return out


def _run_pohozaev(cfg: dict) -> dict:
    spec = _make_kernel_spec(cfg)
    grid = _make_grid(cfg)
    q = float(cfg["q"]) if cfg["q"] is not None else 0.5 * (spec.q_critical + 2.0)
    scfg = _make_solver_config(cfg, spec, q)
    rep = solver.solve_subcritical(grid, scfg)
    g, p = solver.pohozaev_input_from_solution(rep, scfg)
    bq = domain.boundary_quadrature(grid.domain, int(cfg["boundary_m"]))
    ident = solver.pohozaev_residual(g, p, spec, bq)
    return {
        "p": p,
        "lhs": ident.lhs,
        "rhs_bulk": ident.rhs_bulk,
        "rhs_boundary": ident.rhs_boundary,
        "rel_residual": ident.rel_residual,
        "solve": {
            "multiplier": rep.multiplier,
            "el_residual": rep.el_residual,
            "converged": rep.converged,
            "iterations": rep.iterations,
        },
    }


def _run_probe(cfg: dict) -> dict:
    spec = _make_kernel_spec(cfg)
    grid = _make_grid(cfg)
    q = float(cfg["q"]) if cfg["q"] is not None else spec.q_critical
    scale = float(cfg["init_scale"])
    scfg = _make_solver_config(cfg, spec, max(q, 1.0 + 1e-9))
    init = kernel.grid_function(grid, scale)
    scfg = solver.SolverConfig(
        q=scfg.q,
        spec=spec,
        tol_residual=scfg.tol_residual,
        tol_energy=scfg.tol_energy,
        max_iter=scfg.max_iter,
        damping=scfg.damping,
        init=init,
    )
    rep = solver.nonexistence_probe(grid, spec, q, scfg)
    return {
        "verdict": rep.verdict,
        "sup_norm_trace": list(rep.sup_norm_trace),
        "starshaped": rep.starshaped,
        "q": q,
    }


def _run_rescale(cfg: dict) -> dict:
    spec = _make_kernel_spec(cfg)
    grid = _make_grid(cfg)
    q = float(cfg["q"]) if cfg["q"] is not None else 0.5 * (spec.q_critical + 2.0)
    rep = solver.solve_subcritical(grid, _make_solver_config(cfg, spec, q))
    bm = solver.blowup_rescale(rep.solution, q, spec)
    stride = max(1, grid.size // 64)
    sample_pts = grid.points[::stride]
    back = hgroup.dilate_packed(
        1.0 / bm.mu,
        hgroup.mul_packed(hgroup.inv_packed(bm.peak.packed()), sample_pts, spec.n),
        spec.n,
    )
    gvals = bm.g(back)
    return {
        "mu": bm.mu,
        "peak": [float(v) for v in bm.peak.packed()],
        "domain_map": bm.domain_map,
        "g_at_origin": float(bm.g(np.zeros((1, 2 * spec.n + 1)))[0]),
        "g_samples": [[*map(float, pt), float(v)] for pt, v in zip(back, gvals)],
        "converged": rep.converged,
    }


_RUNNERS = {
    "constant": _run_constant,
    "ball-volume": _run_ball_volume,
    "quotient": _run_quotient,
    "solve": _run_solve,
    "critical": _run_critical,
    "pohozaev": _run_pohozaev,
    "probe": _run_probe,
    "rescale": _run_rescale,
}


# ---------------------------------------------------------------------------
# artifact writing
# ---------------------------------------------------------------------------

def _to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def emit_series(report: solver.SolveReport, fmt: str, path: str) -> None:
    """Dump a solve report's solution and energy trace.

    JSON: one file mirroring the CSV schema. CSV: the solution table at
    `path` (columns cell_index, coordinates, weight, value) and the energy
    trace at `path` + '.trace.csv'.
    """
    if fmt == "json":
        payload = {
            "energy_trace": list(report.energy_trace),
            "solution": {"cells": _solution_cells(report.solution)},
        }
        with open(path, "w") as fh:
            json.dump(_to_jsonable(payload), fh, indent=2, sort_keys=True)
            fh.write("\n")
        return
    grid = report.solution.grid
    n = grid.n
    coord_names = (
        [f"x{j}" for j in range(n)] + [f"y{j}" for j in range(n)] + ["t"]
        if n > 1
        else ["x", "y", "t"]
    )
    with open(path, "w") as fh:
        fh.write(",".join(["cell_index", *coord_names, "weight", "value"]) + "\n")
        for i, row in enumerate(_solution_cells(report.solution)):
            fh.write(",".join([str(i), *[repr(v) for v in row]]) + "\n")
    with open(path + ".trace.csv", "w") as fh:
        fh.write("iteration,energy\n")
        for i, e in enumerate(report.energy_trace):
            fh.write(f"{i},{e!r}\n")


def _write_artifact(path: str, fmt: str, artifact: dict) -> None:
    if fmt == "json":
        with open(path, "w") as fh:
            json.dump(_to_jsonable(artifact), fh, indent=2, sort_keys=True)
            fh.write("\n")
        return
    # CSV: config and metadata as comment lines, one key,value row per scalar
    # output, array outputs flattened one element per row.
    with open(path, "w") as fh:
        meta = {k: v for k, v in artifact.items() if k != "outputs"}
        fh.write("# " + json.dumps(_to_jsonable(meta), sort_keys=True) + "\n")
        fh.write("key,value\n")

        def emit(prefix, val):
            if isinstance(val, dict):
                for k in sorted(val):
                    emit(f"{prefix}.{k}" if prefix else str(k), val[k])
            elif isinstance(val, (list, tuple)):
                for i, v in enumerate(val):
                    emit(f"{prefix}[{i}]", v)
            else:
                fh.write(f"{prefix},{val!r}\n")

        emit("", _to_jsonable(artifact["outputs"]))


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _merge_config(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3

    deterministic = bool(cfg.get("deterministic"))
    if deterministic:
        _backend.set_threads(1)
    elif cfg.get("threads") is not None:
        _backend.set_threads(int(cfg["threads"]))

    command = args.command
    fmt = cfg["format"]
    out_path = cfg.get("output")
    if not out_path:
        outdir = os.environ.get("HEISHLS_OUTDIR", ".")
        ext = "json" if fmt == "json" else "csv"
        out_path = os.path.join(outdir, f"{command}.{ext}")

    started = time.perf_counter()
    try:
        outputs = _RUNNERS[command](cfg)
    except (ConfigError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    elapsed = time.perf_counter() - started

    resolved = {
        k: v
        for k, v in sorted(cfg.items())
        if k not in ("output", "threads") and v is not None
    }
    artifact = {
        "command": command,
        "version": __version__,
        "config": resolved,
        "wall_time_s": None if deterministic else elapsed,
        "outputs": outputs,
    }
    try:
        _write_artifact(out_path, fmt, artifact)
    except OSError as e:
        print(f"error: cannot write {out_path}: {e}", file=sys.stderr)
        return 3
    print(out_path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
