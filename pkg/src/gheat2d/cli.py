"""Command-line front end: JSON run configurations, the solve / converge /
gexp subcommands and their file output.

Exit codes: 0 success, 2 iteration cap hit, 3 configuration error. Failures
are single-line JSON objects on stderr; stdout carries only results.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import bench, exprs
from .core import (
    ProblemSpec,
    SolverConfig,
    UncertaintyBox,
    make_grid,
    validate_box,
)
from .errors import ConfigError, ExpressionError, IterationCapError
from .gexp import GExpQuery, upper_and_lower
from .stepper import march

__all__ = ["RunConfig", "load_config", "run_solve", "run_converge", "run_gexp", "main"]

_DEFAULT_LEVELS = ((10, 50), (20, 200), (40, 800), (80, 3200))


@dataclass(frozen=True)
class RunConfig:
    """One run, as stated in a JSON file plus flag overrides.

    ``problem`` picks a built-in ("example1", "example2") or "custom", in
    which case ``box`` plus the ``initial``/``boundary`` (and optional
    ``forcing``) expressions must be given. Grid fields left as None fall
    back to per-subcommand defaults. Round-trips through to_dict/from_dict
    field by field.
    """

    problem: str = "example2"
    initial: Optional[str] = None
    boundary: Optional[str] = None
    forcing: Optional[str] = None
    payoff: Optional[str] = None
    box: Optional[UncertaintyBox] = None
    half_width: Optional[float] = None
    cells: Optional[int] = None
    horizon: float = 1.0
    steps: Optional[int] = None
    tol_picard: float = 1e-9
    tol_lin: float = 1e-12
    k_max: int = 30
    record_coefficients: bool = False
    override_diag_dom: bool = False
    slices: tuple[float, ...] = ()
    levels: tuple[tuple[int, int], ...] = _DEFAULT_LEVELS
    eval_time: float = 1.0
    eval_point: tuple[float, float] = (0.0, 0.0)
    out_dir: str = "."
    jobs: int = 1
    seed: int = 0


_FIELD_TYPES = {
    "problem": str,
    "initial": str,
    "boundary": str,
    "forcing": str,
    "payoff": str,
    "half_width": (int, float),
    "cells": int,
    "horizon": (int, float),
    "steps": int,
    "tol_picard": (int, float),
    "tol_lin": (int, float),
    "k_max": int,
    "record_coefficients": bool,
    "override_diag_dom": bool,
    "eval_time": (int, float),
    "out_dir": str,
    "jobs": int,
    "seed": int,
}


def _pair(field: str, v) -> tuple[float, float]:
    if (
        not isinstance(v, (list, tuple))
        or len(v) != 2
        or not all(isinstance(e, (int, float)) and not isinstance(e, bool) for e in v)
    ):
        raise ConfigError(field, "expected a [lo, hi] pair of numbers")
    return float(v[0]), float(v[1])


def _box_from_dict(d) -> UncertaintyBox:
    if not isinstance(d, dict):
        raise ConfigError("box", "expected an object with sigma1_sq, sigma2_sq, b12 pairs")
    extra = set(d) - {"sigma1_sq", "sigma2_sq", "b12"}
    if extra:
        raise ConfigError(f"box.{sorted(extra)[0]}", "unknown field")
    missing = {"sigma1_sq", "sigma2_sq", "b12"} - set(d)
    if missing:
        raise ConfigError(f"box.{sorted(missing)[0]}", "missing field")
    s1 = _pair("box.sigma1_sq", d["sigma1_sq"])
    s2 = _pair("box.sigma2_sq", d["sigma2_sq"])
    b = _pair("box.b12", d["b12"])
    try:
        return UncertaintyBox(s1[0], s1[1], s2[0], s2[1], b[0], b[1])
    except ValueError as err:
        raise ConfigError("box", str(err)) from None


def _box_to_dict(box: UncertaintyBox) -> dict:
    return {
        "sigma1_sq": [box.sigma1_sq_lo, box.sigma1_sq_hi],
        "sigma2_sq": [box.sigma2_sq_lo, box.sigma2_sq_hi],
        "b12": [box.b12_lo, box.b12_hi],
    }


def from_dict(d: dict) -> RunConfig:
    if not isinstance(d, dict):
        raise ConfigError("<config>", "top level must be a JSON object")
    known = {f.name for f in dataclasses.fields(RunConfig)}
    kwargs = {}
    for key, value in d.items():
        if key not in known:
            raise ConfigError(key, "unknown field")
        if value is None:
            continue
        if key == "box":
            kwargs["box"] = _box_from_dict(value)
        elif key == "slices":
            if not isinstance(value, list):
                raise ConfigError("slices", "expected a list of times")
            kwargs["slices"] = tuple(
                float(_num("slices", i, v)) for i, v in enumerate(value)
            )
        elif key == "levels":
            kwargs["levels"] = _levels_from(value)
        elif key == "eval_point":
            p = _pair("eval_point", value)
            kwargs["eval_point"] = p
        else:
            want = _FIELD_TYPES[key]
            if isinstance(value, bool) and want is not bool:
                raise ConfigError(key, f"expected {getattr(want, '__name__', 'number')}")
            if not isinstance(value, want):
                name = want.__name__ if isinstance(want, type) else "number"
                raise ConfigError(key, f"expected {name}, got {type(value).__name__}")
            kwargs[key] = float(value) if want == (int, float) else value
    try:
        return RunConfig(**kwargs)
    except TypeError as err:
        raise ConfigError("<config>", str(err)) from None


def _num(field: str, idx: int, v) -> float:
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        raise ConfigError(f"{field}[{idx}]", "expected a number")
    return float(v)


def _levels_from(value) -> tuple[tuple[int, int], ...]:
    if not isinstance(value, list) or not value:
        raise ConfigError("levels", "expected a non-empty list of [M, N] pairs")
    out = []
    for i, lv in enumerate(value):
        if (
            not isinstance(lv, (list, tuple))
            or len(lv) != 2
            or not all(isinstance(e, int) and not isinstance(e, bool) for e in lv)
        ):
            raise ConfigError(f"levels[{i}]", "expected an [M, N] pair of integers")
        out.append((lv[0], lv[1]))
    return tuple(out)


def to_dict(cfg: RunConfig) -> dict:
    d = dataclasses.asdict(cfg)
    if cfg.box is not None:
        d["box"] = _box_to_dict(cfg.box)
    d["slices"] = list(cfg.slices)
    d["levels"] = [list(lv) for lv in cfg.levels]
    d["eval_point"] = list(cfg.eval_point)
    return d


def load_config(path: Optional[str] = None, overrides: Optional[dict] = None) -> RunConfig:
    """Config file (if any) merged with flag overrides."""
    base = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                base = json.load(fh)
        except FileNotFoundError:
            raise ConfigError("<config>", f"no such file: {path}") from None
        except json.JSONDecodeError as err:
            raise ConfigError(
                "<config>", f"invalid JSON at line {err.lineno} column {err.colno}: {err.msg}"
            ) from None
    cfg = from_dict(base)
    if overrides:
        cfg = from_dict({**to_dict(cfg), **{k: v for k, v in overrides.items() if v is not None}})
    return cfg


def _solver_config(cfg: RunConfig) -> SolverConfig:
    try:
        return SolverConfig(
            tol_picard=cfg.tol_picard,
            k_max=cfg.k_max,
            tol_lin=cfg.tol_lin,
            record_coefficients=cfg.record_coefficients,
        )
    except ValueError as err:
        raise ConfigError("tol_picard", str(err)) from None


def _expression_fn(field: str, src: str, allowed: set[str], spacetime: bool):
    try:
        ast = exprs.parse_expression(src)
    except ExpressionError as err:
        raise ConfigError(field, str(err)) from None
    used = exprs.variables(ast)
    if not used <= allowed:
        bad = sorted(used - allowed)[0]
        raise ConfigError(field, f"variable {bad!r} is not available here")
    if spacetime:
        def fn(t, x, y):
            return np.broadcast_to(
                np.asarray(exprs.evaluate(ast, x, y, t), dtype=float), np.shape(x)
            )
    else:
        def fn(x, y):
            return np.broadcast_to(
                np.asarray(exprs.evaluate(ast, x, y, 0.0), dtype=float), np.shape(x)
            )
    return fn


def _problem(cfg: RunConfig) -> ProblemSpec:
    if cfg.problem == "example1":
        return bench.example1_problem().problem
    if cfg.problem == "example2":
        return bench.example2_problem()
    if cfg.problem != "custom":
        raise ConfigError("problem", f"unknown problem {cfg.problem!r}")
    if cfg.box is None:
        raise ConfigError("box", "required for custom problems")
    if cfg.initial is None:
        raise ConfigError("initial", "required for custom problems")
    if cfg.boundary is None:
        raise ConfigError("boundary", "required for custom problems")
    initial = _expression_fn("initial", cfg.initial, {"x", "y"}, spacetime=False)
    boundary = _expression_fn("boundary", cfg.boundary, {"t", "x", "y"}, spacetime=True)
    forcing = None
    if cfg.forcing is not None:
        forcing = _expression_fn("forcing", cfg.forcing, {"t", "x", "y"}, spacetime=True)
    return ProblemSpec(initial=initial, boundary=boundary, box=cfg.box, forcing=forcing)


def _require_diag_dom(problem: ProblemSpec, cfg: RunConfig) -> None:
    if not validate_box(problem.box).diag_dom_ok and not cfg.override_diag_dom:
        raise ConfigError(
            "box",
            "box violates the diagonal-dominance requirement (both variance "
            "lower bounds must be >= max |b12|); set override_diag_dom to "
            "proceed without the scheme's guarantees",
        )


def run_solve(cfg: RunConfig) -> int:
    problem = _problem(cfg)
    _require_diag_dom(problem, cfg)
    M = cfg.cells if cfg.cells is not None else 20
    N = cfg.steps if cfg.steps is not None else 200
    L = cfg.half_width if cfg.half_width is not None else 1.0
    try:
        grid = make_grid(L, M, cfg.horizon, N)
    except ValueError as err:
        raise ConfigError("cells", str(err)) from None
    scfg = _solver_config(cfg)

    slice_times = cfg.slices if cfg.slices else (cfg.horizon,)
    slice_levels = []
    for s in slice_times:
        n = round(s / grid.dt)
        if not (0 <= n <= N) or abs(s - n * grid.dt) > 1e-9 * max(1.0, cfg.horizon):
            raise ConfigError("slices", f"time {s} is not a level of the grid (dt={grid.dt})")
        slice_levels.append(n)

    lattice = march(problem, grid, scfg, override_diag_dom=cfg.override_diag_dom)

    os.makedirs(cfg.out_dir, exist_ok=True)
    slice_path = os.path.join(cfg.out_dir, "solution_slices.csv")
    X, Y = grid.meshes()
    ts = grid.times()
    with open(slice_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x", "y", "value"])
        for n in slice_levels:
            lv = lattice.values[n]
            for i in range(M + 1):
                for j in range(M + 1):
                    w.writerow(
                        [f"{ts[n]:.6e}", f"{X[i, j]:.6e}", f"{Y[i, j]:.6e}", f"{lv[i, j]:.6e}"]
                    )

    series_path = os.path.join(cfg.out_dir, "iteration_series.csv")
    if cfg.record_coefficients:
        bench.write_series_csv(series_path, bench.iteration_series(lattice))
    else:
        with open(series_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "time", "iterations"])
            for n, rep in enumerate(lattice.reports, start=1):
                w.writerow([n, f"{ts[n]:.6e}", rep.iterations])

    print(json.dumps({
        "written": [slice_path, series_path],
        "steps": N,
        "max_iterations": max((r.iterations for r in lattice.reports), default=0),
        "warnings": list(lattice.warnings),
    }))
    return 0


def run_converge(cfg: RunConfig) -> int:
    L = cfg.half_width if cfg.half_width is not None else 1.0
    restrict_to = None
    if cfg.problem == "example1":
        ex = bench.example1_problem()
        problem, exact = ex.problem, ex.exact
    elif cfg.problem == "example2":
        problem = bench.example2_problem()
        ref = bench.reference_solution(
            problem, _solver_config(cfg), half_width=L, horizon=cfg.horizon
        )
        exact = bench.lattice_evaluator(ref)
        restrict_to = ref.grid
    else:
        raise ConfigError("problem", "converge supports the built-in problems only")
    rows = bench.convergence_study(
        problem,
        exact,
        cfg.levels,
        _solver_config(cfg),
        half_width=L,
        horizon=cfg.horizon,
        jobs=cfg.jobs,
        restrict_to=restrict_to,
    )
    os.makedirs(cfg.out_dir, exist_ok=True)
    path = os.path.join(cfg.out_dir, "convergence.csv")
    bench.write_convergence_csv(path, rows)
    print(json.dumps({"written": path, "rows": [dataclasses.asdict(r) for r in rows]}))
    return 0


def run_gexp(cfg: RunConfig) -> int:
    if cfg.payoff is None:
        raise ConfigError("payoff", "required for gexp")
    payoff = _expression_fn("payoff", cfg.payoff, {"x", "y"}, spacetime=False)
    if cfg.box is not None:
        box = cfg.box
    elif cfg.problem in ("example1", "example2"):
        box = bench.EXAMPLE_BOX
    else:
        raise ConfigError("box", "required when no built-in problem is selected")
    if not validate_box(box).diag_dom_ok and not cfg.override_diag_dom:
        raise ConfigError(
            "box",
            "box violates the diagonal-dominance requirement (both variance "
            "lower bounds must be >= max |b12|)",
        )
    boundary = None
    if cfg.boundary is not None:
        boundary = _expression_fn("boundary", cfg.boundary, {"t", "x", "y"}, spacetime=True)
    try:
        query = GExpQuery(
            payoff=payoff,
            box=box,
            eval_time=cfg.eval_time,
            eval_point=cfg.eval_point,
            half_width=cfg.half_width,
            cells=cfg.cells if cfg.cells is not None else 160,
            steps=cfg.steps if cfg.steps is not None else 400,
            boundary=boundary,
        )
        query.grid()
    except ValueError as err:
        raise ConfigError("eval_point", str(err)) from None
    result = upper_and_lower(query, _solver_config(cfg))
    print(json.dumps({
        "upper": result.upper,
        "lower": result.lower,
        "boundary_diagnostic": result.boundary_diagnostic,
    }))
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gheat2d",
        description="Implicit monotone solver for the 2-D G-heat equation",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("solve", "march one problem and write solution slices"),
        ("converge", "run a refinement study and write the table CSV"),
        ("gexp", "evaluate upper and lower expectations of a payoff"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--out", help="output directory")
        p.add_argument("--jobs", type=int, help="parallel marches for converge")
        p.add_argument("--tol-picard", type=float, dest="tol_picard")
        p.add_argument("--seed", type=int, help="seed for randomized utilities")
        p.add_argument("--problem", help="example1, example2 or custom")
        p.add_argument("--cells", type=int, help="cells per axis M")
        p.add_argument("--steps", type=int, help="time steps N")
        p.add_argument("--half-width", type=float, dest="half_width")
        p.add_argument("--horizon", type=float)
        p.add_argument("--record-coefficients", action="store_true", default=None,
                       dest="record_coefficients")
        p.add_argument("--override-diag-dom", action="store_true", default=None,
                       dest="override_diag_dom")
        if name == "gexp":
            p.add_argument("--payoff", help="payoff expression in x and y")
            p.add_argument("--eval-time", type=float, dest="eval_time")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    overrides = {
        key: getattr(args, key, None)
        for key in (
            "problem", "cells", "steps", "half_width", "horizon", "tol_picard",
            "jobs", "seed", "record_coefficients", "override_diag_dom",
            "payoff", "eval_time",
        )
    }
    if args.out is not None:
        overrides["out_dir"] = args.out
    try:
        cfg = load_config(args.config, overrides)
        if args.command == "solve":
            return run_solve(cfg)
        if args.command == "converge":
            return run_converge(cfg)
        return run_gexp(cfg)
    except ConfigError as err:
        print(
            json.dumps({"error": "config", "field": err.field, "message": err.message}),
            file=sys.stderr,
        )
        return 3
    except IterationCapError as err:
        print(
            json.dumps({
                "error": "iteration_cap",
                "step": err.step,
                "iterations": err.report.iterations,
                "message": str(err),
            }),
            file=sys.stderr,
        )
        return 2


if __name__ == "__main__":
    sys.exit(main())
