"""Command-line front end: ``varsteady <task> [options]``.

Each run writes one table (CSV or JSON) and, for CSV output, a JSON summary
next to it holding the resolved configuration, the package version, the
schema version and the task's headline results.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from pathlib import Path

import numpy as np

from . import __version__
from .config import ANSATZ, FORMATS, TASKS, ConfigError, RunConfig, load_config_file, parse_grid, parse_system
from .optimize import OptimizerOpts

SCHEMA_VERSION = 1
log = logging.getLogger("varsteady")


def parallel_map(fn, items, threads: int) -> list:
    """Ordered map; a process pool when ``threads > 1``."""
    items = list(items)
    if threads <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _opts(cfg: RunConfig) -> OptimizerOpts:
    return OptimizerOpts(restarts=cfg.restarts, seed=cfg.seed)


def _jump_dict(j) -> dict | None:
    return None if j is None else {"location": float(j.location), "magnitude": float(j.magnitude)}


def run_sweep(cfg: RunConfig) -> tuple[list[dict], dict]:
    from .correlated import CorrelatedProblem
    from .meanfield import NoFixedPointError, mf_steady_states
    from .product import ProductProblem
    from .sweep import find_jump, sweep

    axis = cfg.grid_axes()[0]
    values = cfg.grids[axis]
    m = cfg.model_spec()
    if cfg.ansatz == "meanfield":
        rows, ok = [], True
        for v in values:
            try:
                pts = mf_steady_states(m.with_params(**{axis: v}), seed=cfg.seed)
                orders = [p.order for p in pts]
            except NoFixedPointError:
                ok, orders = False, [float("nan")]
            rows.append({axis: v, "fixed_points": len(orders), "order_low": min(orders), "order_high": max(orders)})
        bistable = [r[axis] for r in rows if r["fixed_points"] > 1]
        return rows, {"converged": ok, "multistable_values": bistable}
    problem = CorrelatedProblem if cfg.ansatz == "correlated" else ProductProblem
    fresh = 0 if cfg.ansatz == "correlated" else None
    table = sweep(m, axis, values, _opts(cfg), problem=problem, fresh=fresh)
    jump = find_jump(table.values, table.order)
    converged = all(r.optimizer_info.converged for r in table.results)
    return table.rows(), {"jump": _jump_dict(jump), "converged": converged}


def run_phase_diagram(cfg: RunConfig) -> tuple[list[dict], dict]:
    from .correlated import NoTransitionError, correlated_sweeper, critical_point_scan
    from .sweep import find_jump, sweep

    opts = _opts(cfg)
    if cfg.ansatz == "correlated":
        base = correlated_sweeper(OptimizerOpts(restarts=1, seed=cfg.seed))
    else:
        def base(m, g_grid):
            return sweep(m, "g", g_grid, opts).order

    rows = []

    def recording(m, g_grid):
        order = base(m, g_grid)
        j = find_jump(g_grid, order)
        rows.append({"V": float(m.params.V), "jump_g": None if j is None else float(j.location),
                     "jump_dn": 0.0 if j is None else float(j.magnitude)})
        return order

    try:
        cp = critical_point_scan(cfg.model_spec(), cfg.grids["g"], cfg.grids["V"], sweeper=recording)
        summary = {"critical_point": {"g": float(cp.g), "V": float(cp.V)}, "converged": True}
    except NoTransitionError as e:
        summary = {"critical_point": None, "message": str(e), "converged": True}
    rows.sort(key=lambda r: r["V"])
    return rows, summary


def _compare_one(cfg: RunConfig, gh: tuple[float, float]):
    from .compare import compare_cell

    g, h = gh
    return compare_cell(cfg.model_spec(g=g, h=h), _opts(cfg))


def run_compare(cfg: RunConfig) -> tuple[list[dict], dict]:
    from .compare import ComparisonTable

    cells = [(g, h) for h in cfg.grids["h"] for g in cfg.grids["g"]]
    table = ComparisonTable(parallel_map(partial(_compare_one, cfg), cells, cfg.threads))
    summary = {
        "max_var_minus_mf": table.dominance_violation,
        "mf_inconsistent_cells": sum(c.mf_inconsistent for c in table.cells),
        "converged": True,
    }
    return table.rows(), summary


def run_exact(cfg: RunConfig) -> tuple[list[dict], dict]:
    from .exact import exact_sweep
    from .sweep import DERIVATIVES

    axis = cfg.grid_axes()[0]
    values = np.asarray(cfg.grids[axis])
    lat = parse_system(cfg.system)
    order, deriv, results = exact_sweep(cfg.model_spec(), lat, axis, values)
    name, sign = DERIVATIVES.get(axis, (f"d_{axis}", 1.0))
    order_name = "n_up" if cfg.model == "ising" else "n"
    rows = [
        {axis: float(v), order_name: float(o), name: float(sign * d), "residual": r.residual, "converged": int(r.converged)}
        for v, o, d, r in zip(values, order, deriv, results)
    ]
    peak = float(values[int(np.argmax(sign * deriv))]) if len(values) > 1 else None
    return rows, {"system": lat.name, "derivative_peak": peak, "converged": all(r.converged for r in results)}


def run_bias(cfg: RunConfig) -> tuple[list[dict], dict]:
    from .bias import bias_demo

    ns = [int(n) for n in parse_grid(cfg.N)]
    ps = parse_grid(cfg.p)
    report = bias_demo(cfg.model_spec(), ns, ps, _opts(cfg))
    summary = {
        "crossover_N": {str(p): report.crossover[p] for p in ps},
        "mixed_decay_base": {str(p): report.decay_base(p) for p in ps},
        "converged": True,
    }
    return report.rows(), summary


def run_single(cfg: RunConfig) -> tuple[list[dict], dict]:
    from .correlated import minimize_correlated
    from .meanfield import mf_steady_states
    from .product import minimize_product

    m = cfg.model_spec()
    if cfg.ansatz == "meanfield":
        pts = mf_steady_states(m, seed=cfg.seed)
        rows = [{"fixed_point": k, "order": p.order, "residual": p.residual, "basins": p.basin_count} for k, p in enumerate(pts)]
        return rows, {"fixed_points": len(pts), "converged": True}
    solver = minimize_correlated if cfg.ansatz == "correlated" else minimize_product
    res = solver(m, _opts(cfg))
    row = {"norm": res.norm, **res.observables}
    return [row], {"converged": res.optimizer_info.converged}


RUNNERS = {
    "sweep": run_sweep,
    "phase-diagram": run_phase_diagram,
    "compare-mf": run_compare,
    "exact": run_exact,
    "bias-demo": run_bias,
    "single-point": run_single,
}


def _clean(x):
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    return x


def write_outputs(cfg: RunConfig, rows: list[dict], summary: dict) -> list[Path]:
    out = Path(cfg.out or f"{cfg.task}.{cfg.format}")
    out.parent.mkdir(parents=True, exist_ok=True)
    columns = list(rows[0]) if rows else []
    meta = {
        "version": __version__,
        "schema_version": SCHEMA_VERSION,
        "task": cfg.task,
        "config": cfg.to_dict(),
        "columns": columns,
        "summary": summary,
    }
    if cfg.format == "json":
        out.write_text(json.dumps(_clean({**meta, "rows": rows}), indent=2, sort_keys=True) + "\n")
        return [out]
    with open(out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        for r in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in _clean(r).items()})
    summary_path = out.with_suffix(".summary.json")
    summary_path.write_text(json.dumps(_clean(meta), indent=2, sort_keys=True) + "\n")
    return [out, summary_path]


def run(cfg: RunConfig) -> int:
    """Dispatch, write artifacts, and return the exit status."""
    rows, summary = RUNNERS[cfg.task](cfg)
    paths = write_outputs(cfg, rows, summary)
    for p in paths:
        log.info("wrote %s", p)
    if cfg.strict and not summary.get("converged", True):
        print(f"error: non-converged results in {paths[0]}", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="varsteady", description="Variational steady states of open lattice models.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="task", required=True)
    for task in TASKS:
        p = sub.add_parser(task)
        p.add_argument("--config", help="JSON file with any of the options below; flags override it")
        p.add_argument("--model", choices=("ising", "bh"))
        for name in ("g", "h", "V", "J", "U", "F", "mu", "gamma"):
            p.add_argument(f"--{name}", help="number, comma list or start:stop:step")
        p.add_argument("--nmax", type=int, help="boson cutoff (bh)")
        p.add_argument("--lattice", help="chain, square or z=<int>")
        p.add_argument("--ansatz", choices=ANSATZ)
        p.add_argument("--system", help="exact: torus-L, plaquette, chain-N or ring-N")
        p.add_argument("--N", help="bias-demo: chain lengths")
        p.add_argument("--p", help="bias-demo: Schatten exponents")
        p.add_argument("--out")
        p.add_argument("--format", choices=FORMATS)
        p.add_argument("--seed", type=int)
        p.add_argument("--threads", type=int)
        p.add_argument("--restarts", type=int)
        p.add_argument("--strict", action="store_true", default=None)
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        file_values = load_config_file(args.config) if args.config else {}
        file_values.pop("task", None)
        cfg = RunConfig.from_sources(file_values, vars(args))
    except (ConfigError, OSError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
