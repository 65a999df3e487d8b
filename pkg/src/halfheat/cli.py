"""Command-line front end.

Experiment subcommands (identities, l2, lp-sweep, tail-decay, oscillation,
assumptions) run one harness experiment and write trials.csv + summary.json;
solve and oracle run a single problem described by a JSON config and write the
solution as HTPF plus a result.json.  Exit code 0 means every assertion
passed; on failure the process prints a machine-readable JSON failure list and
exits 1.  Output bytes for experiments depend only on (config, seed); wall
times appear only in solve/oracle results.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .coefficients import generate_coefficients
from .expressions import field_from_expression
from .experiments import EXPERIMENTS, ExperimentConfig, write_outputs
from .grid import VectorField, field_from_array, make_grid
from .htpf import read_coefficients, write_field
from .operators import DataBundle
from .solver import SolverOptions, compute_bundles, solve, solve_oracle

_EXPERIMENT_COMMANDS = (
    "identities",
    "l2",
    "lp-sweep",
    "tail-decay",
    "oscillation",
    "assumptions",
)


def _parse_axis_list(text: str):
    parts = [p for p in str(text).split(",") if p]
    if len(parts) == 1:
        return parts[0]
    return parts


def _apply_grid_overrides(mapping: dict, pairs: list[str]) -> None:
    grid = dict(mapping.get("grid") or {})
    for pair in pairs:
        if "=" not in pair:
            raise ValueError(f"--grid expects KEY=VALUE, got {pair!r}")
        key, value = pair.split("=", 1)
        key = key.strip()
        if key in ("d", "n_t"):
            grid[key] = int(value)
        elif key == "l_t":
            grid[key] = float(value)
        elif key == "n_x":
            v = _parse_axis_list(value)
            grid[key] = int(v) if isinstance(v, str) else [int(x) for x in v]
        elif key == "l_x":
            v = _parse_axis_list(value)
            grid[key] = float(v) if isinstance(v, str) else [float(x) for x in v]
        else:
            raise ValueError(f"unknown grid key {key!r} (use d, n_t, n_x, l_t, l_x)")
    mapping["grid"] = grid


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"config not found: {path}")
    try:
        mapping = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(mapping, dict):
        raise ValueError(f"config {path} must hold a JSON object")
    return mapping


def _fail(name: str, failures: list[str]) -> int:
    print(json.dumps({"command": name, "passed": False, "failures": failures}))
    return 1


def _run_experiment(name: str, args: argparse.Namespace) -> int:
    key = name.replace("-", "_")
    try:
        mapping = _load_config(args.config)
        if args.seed is not None:
            mapping["seed"] = args.seed
        if args.grid:
            _apply_grid_overrides(mapping, args.grid)
        config = ExperimentConfig.from_mapping(mapping, kind=key)
        result = EXPERIMENTS[key](config)
        out_dir = Path(args.out) if args.out else Path(mapping.get("out", f"halfheat_{key}"))
        csv_path, summary_path = write_outputs(result, out_dir)
    except (FileNotFoundError, ValueError) as exc:
        return _fail(key, [str(exc)])
    print(
        json.dumps(
            {
                "command": key,
                "passed": result.passed,
                "failures": result.failures,
                "outputs": {"trials": str(csv_path), "summary": str(summary_path)},
            }
        )
    )
    return 0 if result.passed else 1


def _build_problem(mapping: dict):
    grid_spec = mapping.get("grid")
    if grid_spec is None:
        raise ValueError("solve config needs a 'grid' section")
    grid = make_grid(
        d=int(grid_spec.get("d", 1)),
        n_t=int(grid_spec["n_t"]),
        n_x=grid_spec["n_x"],
        l_t=float(grid_spec["l_t"]),
        l_x=grid_spec["l_x"],
    )
    spec = mapping.get("coefficients", {"kind": "constant", "delta": 1.0})
    if "file" in spec:
        coeffs = read_coefficients(spec["file"])
        if coeffs.grid != grid:
            raise ValueError("coefficient file grid does not match the config grid")
    else:
        kwargs = {}
        if spec.get("roughness_scale") is not None:
            kwargs["roughness_scale"] = float(spec["roughness_scale"])
        if spec.get("epsilon") is not None:
            kwargs["roughness_scale"] = float(spec["epsilon"])
        if spec.get("cell_size") is not None:
            kwargs["cell_size"] = float(spec["cell_size"])
        coeffs = generate_coefficients(
            spec.get("kind", "constant"),
            float(spec.get("delta", 1.0)),
            int(spec.get("seed", 0)),
            grid,
            **kwargs,
        )
    data_spec = mapping.get("data")
    if not data_spec:
        raise ValueError(
            "solve config needs a 'data' section with h/g/f expressions"
        )
    lam = float(mapping.get("lambda", 1.0))
    h = field_from_expression(grid, data_spec.get("h", "0"))
    g_exprs = data_spec.get("g", ["0"] * grid.d)
    if isinstance(g_exprs, str):
        g_exprs = [g_exprs]
    if len(g_exprs) != grid.d:
        raise ValueError(f"data.g needs {grid.d} expressions, got {len(g_exprs)}")
    g = VectorField(tuple(field_from_expression(grid, e) for e in g_exprs))
    f = field_from_expression(grid, data_spec.get("f", "0"))
    data = DataBundle(h=h, g=g, f=f, lam=lam)
    solver = SolverOptions(**mapping.get("solver", {}))
    return coeffs, data, solver


def _run_solve(name: str, args: argparse.Namespace) -> int:
    try:
        mapping = _load_config(args.config)
        if not mapping:
            raise ValueError("solve/oracle need --config PATH")
        if args.grid:
            _apply_grid_overrides(mapping, args.grid)
        coeffs, data, options = _build_problem(mapping)
        if name == "oracle":
            result = solve_oracle(coeffs, data)
        else:
            result = solve(coeffs, data, options)
        _, norms = compute_bundles(result.u.u, data, (2.0,))
        out_dir = Path(args.out) if args.out else Path(mapping.get("out", f"halfheat_{name}"))
        out_dir.mkdir(parents=True, exist_ok=True)
        solution_path = out_dir / "u.htpf"
        write_field(solution_path, result.u.u)
        norm_f = norms["F"][2.0]
        payload = {
            "command": name,
            "converged": result.converged,
            "iterations": result.iterations,
            "final_relative_residual": result.final_relative_residual,
            "wall_time": result.wall_time,
            "lambda": data.lam,
            "norms": {
                "U_2": norms["U"][2.0],
                "F_2": norm_f,
                "ratio": norms["U"][2.0] / norm_f if norm_f > 0 else None,
            },
            "outputs": {"solution": str(solution_path)},
        }
        (out_dir / "result.json").write_text(
            json.dumps(payload, sort_keys=True, indent=2) + "\n"
        )
    except (FileNotFoundError, ValueError) as exc:
        return _fail(name, [str(exc)])
    print(json.dumps(payload))
    return 0 if result.converged else 1


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="halfheat",
        description="Space-time operator experiments: identities, estimate "
        "trials, decay regressions, assumption scans, and single solves.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _EXPERIMENT_COMMANDS + ("solve", "oracle"):
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", help="JSON config file (see README schema)")
        cmd.add_argument("--seed", type=int, help="override the config seed")
        cmd.add_argument("--out", help="output directory")
        cmd.add_argument(
            "--grid",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="grid override (d, n_t, n_x, l_t, l_x); repeatable",
        )
    args = parser.parse_args(argv)
    if args.command in ("solve", "oracle"):
        return _run_solve(args.command, args)
    return _run_experiment(args.command, args)


if __name__ == "__main__":
    sys.exit(main())
