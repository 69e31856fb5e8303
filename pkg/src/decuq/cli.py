"""Command-line driver: fit surrogates, sample decision uncertainty,
compute sensitivity indices, and emit plot-ready artifacts.

All randomness flows from the --seed flag through named streams, so a
rerun with the same configuration is byte-identical. Exit codes:
0 success, 2 input/configuration error, 3 infeasible region,
4 degenerate statistics.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import problems
from .decision import (
    FeasibleRegion,
    density_grid,
    grid_to_csv,
    sample_decision_uncertainty,
    sample_decision_uncertainty_constrained,
    sample_from_csv,
    sample_to_csv,
    summarize,
)
from .exceptions import (
    DegenerateSampleError,
    DegenerateVarianceError,
    InfeasibleRegionError,
    InvalidArgumentError,
)
from .gp import Dataset, FitConfig, fit, load_model, save_model
from .rng import SeededRng
from .sampling import lhs
from .sensitivity import Evaluator, InputDistribution, sobol_indices

EXIT_INPUT_ERROR = 2
EXIT_INFEASIBLE = 3
EXIT_DEGENERATE = 4

DEMO_SEED = 20240501


def _out_dir(args) -> Path:
    out = args.out or os.environ.get("DECUQ_OUT") or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_config(args) -> None:
    """Fill unset flags from the optional JSON config file; flags win."""
    if not getattr(args, "config", None):
        return
    with open(args.config, encoding="utf-8") as fh:
        cfg = json.load(fh)
    for key, value in cfg.items():
        attr = key.replace("-", "_")
        if hasattr(args, attr) and getattr(args, attr) is None:
            setattr(args, attr, value)


def _require(args, *names) -> None:
    for name in names:
        if getattr(args, name) is None:
            raise InvalidArgumentError(
                f"--{name.replace('_', '-')} is required (flag or config file)"
            )


def _builtin_problem(name: str) -> problems.AnalyticProblem:
    table = {
        "ellipsoid": problems.ellipsoid_problem,
        "synthetic-constrained": problems.synthetic_constrained,
    }
    if name not in table:
        raise InvalidArgumentError(
            f"unknown problem {name!r}; choose from {sorted(table)}"
        )
    return table[name]()


def _fit_builtin(problem, n, seed):
    """Fit surrogates to fresh LHS evaluations of a builtin problem."""
    rng = SeededRng(seed).child(0xD0E)
    design = lhs(n, problem.box, rng)
    data = Dataset(design.points, problem.objective(design.points), problem.box)
    model = fit(data, FitConfig(seed=seed))
    con_model = None
    if problem.constraint is not None:
        con_data = Dataset(design.points, problem.constraint(design.points),
                           problem.box)
        con_model = fit(con_data, FitConfig(seed=seed))
    return model, con_model


def _fit_csv(data_path, schema_path, seed):
    schema = problems.CsvSchema.from_manifest(schema_path)
    table = problems.load_csv(data_path, schema)
    box = schema.box
    models = {}
    for name in schema.output_columns:
        data = Dataset(table.inputs, table.output_column(name), box)
        models[name] = fit(data, FitConfig(seed=seed))
    return models, schema


def _is_cure_schema(schema) -> bool:
    return schema.input_columns == ("t1", "T1", "t2", "T2")


def _print_model(name, model) -> None:
    print(f"model {name}: lengthscales={np.round(model.ell, 6).tolist()} "
          f"mu={model.mu_hat:.6g} sigma2={model.sigma2_hat:.6g} "
          f"loglik={model.log_likelihood:.6g} nugget={model.nugget:g}")


# ---------------------------------------------------------------------------
# Subcommands


def cmd_fit(args) -> int:
    _require(args, "seed")
    out = _out_dir(args)
    if args.data:
        _require(args, "schema")
        models, _ = _fit_csv(args.data, args.schema, args.seed)
        for name, model in models.items():
            path = out / f"model_{name}.json"
            save_model(model, path)
            _print_model(name, model)
            print(f"wrote {path}")
    else:
        _require(args, "problem", "n")
        problem = _builtin_problem(args.problem)
        model, con_model = _fit_builtin(problem, int(args.n), args.seed)
        save_model(model, out / "model_y.json")
        _print_model("y", model)
        print(f"wrote {out / 'model_y.json'}")
        if con_model is not None:
            save_model(con_model, out / "model_z.json")
            _print_model("z", con_model)
            print(f"wrote {out / 'model_z.json'}")
    return 0


def _density_pairs(d: int):
    if d == 2:
        return [(0, 1)]
    return [(h, h + 1) for h in range(0, d - 1, 2)]


def _write_uq_artifacts(sample, out, grid_size) -> None:
    sample_to_csv(sample, out / "sample.csv", out / "sample_meta.json")
    with open(out / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summarize(sample), fh, indent=2, sort_keys=True)
    for pair in _density_pairs(sample.d):
        grid = density_grid(sample, dims=pair, grid_size=grid_size)
        grid_to_csv(grid, out / f"density_{pair[0]}_{pair[1]}.csv")


def cmd_uq(args) -> int:
    _require(args, "seed", "m", "n_design")
    m, n_design = int(args.m), int(args.n_design)
    if m < 1 or n_design < 1:
        raise InvalidArgumentError("M and N must be positive")
    grid_size = int(args.grid or 64)
    out = _out_dir(args)
    rng = SeededRng(args.seed)
    if args.data:
        _require(args, "schema")
        models, schema = _fit_csv(args.data, args.schema, args.seed)
        names = list(schema.output_columns)
        obj_model = models[names[0]]
        con_model = models[names[1]] if len(names) > 1 else None
        if con_model is not None:
            _require(args, "threshold")
            if _is_cure_schema(schema):
                region = problems.cure_region(con_model)
            else:
                region = FeasibleRegion(box=schema.box)
            sample = sample_decision_uncertainty_constrained(
                obj_model, con_model, float(args.threshold), region,
                m, n_design, rng)
        else:
            region = FeasibleRegion(box=schema.box)
            sample = sample_decision_uncertainty(obj_model, region, m,
                                                 n_design, rng)
    else:
        _require(args, "problem", "n")
        problem = _builtin_problem(args.problem)
        obj_model, con_model = _fit_builtin(problem, int(args.n), args.seed)
        region = FeasibleRegion(box=problem.box)
        if con_model is not None:
            threshold = (float(args.threshold) if args.threshold is not None
                         else problem.threshold)
            sample = sample_decision_uncertainty_constrained(
                obj_model, con_model, threshold, region, m, n_design, rng)
        else:
            sample = sample_decision_uncertainty(obj_model, region, m,
                                                 n_design, rng)
    _write_uq_artifacts(sample, out, grid_size)
    print(f"decision sample: M={sample.m} "
          f"discarded={sample.meta['discarded_realization_count']}")
    print(f"wrote {out / 'sample.csv'}, {out / 'summary.json'}")
    return 0


def cmd_sobol(args) -> int:
    _require(args, "seed", "n_base")
    n_base = int(args.n_base)
    mode = args.mode or "uniform"
    if mode not in ("uniform", "empirical", "both"):
        raise InvalidArgumentError("mode must be uniform, empirical, or both")
    out = _out_dir(args)
    if (args.evaluator or "true") == "surrogate":
        _require(args, "model")
        model = load_model(args.model)
        evaluator = Evaluator.from_gp(model)
        box = model.data.box
    else:
        _require(args, "problem")
        problem = _builtin_problem(args.problem)
        evaluator = Evaluator.from_function(problem.objective, problem.d)
        box = problem.box
    results = {}
    if mode in ("uniform", "both"):
        dist = InputDistribution.uniform(box)
        results["uniform"] = sobol_indices(evaluator, dist, n_base,
                                           SeededRng(args.seed).child(0x50B, 0))
    if mode in ("empirical", "both"):
        if args.sample is None:
            raise InvalidArgumentError(
                "empirical mode needs --sample (a decision sample CSV)"
            )
        sample = sample_from_csv(args.sample)
        dist = InputDistribution.empirical(sample)
        results["empirical"] = sobol_indices(evaluator, dist, n_base,
                                             SeededRng(args.seed).child(0x50B, 1))
    for name, result in results.items():
        with open(out / f"sobol_{name}.json", "w", encoding="utf-8") as fh:
            fh.write(result.to_json())
        result.to_csv(out / f"sobol_{name}.csv")
        print(f"{name}: S={np.round(result.first_order, 4).tolist()} "
              f"ST={np.round(result.total, 4).tolist()}")
    return 0


def cmd_density(args) -> int:
    _require(args, "sample")
    out = _out_dir(args)
    sample = sample_from_csv(args.sample)
    dims = tuple(int(v) for v in (args.dims or "0,1").split(","))
    if len(dims) != 2:
        raise InvalidArgumentError("--dims must be two comma-separated indices")
    grid = density_grid(sample, dims=dims, grid_size=int(args.grid or 64))
    path = out / f"density_{dims[0]}_{dims[1]}.csv"
    grid_to_csv(grid, path)
    print(f"wrote {path} (integral {grid.integral():.4f})")
    return 0


def cmd_demo(args) -> int:
    out = _out_dir(args)
    seed = args.seed if args.seed is not None else DEMO_SEED
    if args.which == "ellipsoid":
        n = int(args.n or 100)
        m = int(args.m or 500)
        n_design = int(args.n_design or 1000)
        n_base = int(args.n_base or 2 ** 14)
        problem = _builtin_problem("ellipsoid")
        model, _ = _fit_builtin(problem, n, seed)
        save_model(model, out / "model_y.json")
        _print_model("y", model)
        region = FeasibleRegion(box=problem.box)
        sample = sample_decision_uncertainty(model, region, m, n_design,
                                             SeededRng(seed))
        _write_uq_artifacts(sample, out, int(args.grid or 64))
        evaluator = Evaluator.from_function(problem.objective, problem.d)
        for name, dist in (
                ("uniform", InputDistribution.uniform(problem.box)),
                ("empirical", InputDistribution.empirical(sample))):
            result = sobol_indices(evaluator, dist, n_base,
                                   SeededRng(seed).child(0x50B, 0 if name == "uniform" else 1))
            with open(out / f"sobol_{name}.json", "w", encoding="utf-8") as fh:
                fh.write(result.to_json())
            result.to_csv(out / f"sobol_{name}.csv")
            print(f"sobol {name}: S={np.round(result.first_order, 4).tolist()}")
        return 0
    if args.which == "cure":
        m = int(args.m or 10_000)
        n_design = int(args.n_design or 500)
        n_base = int(args.n_base or 2 ** 12)
        table = problems.load_cure_fixture()
        box = problems.CURE_BOX
        model_y = fit(Dataset(table.inputs, table.output_column("y"), box),
                      FitConfig(seed=seed))
        model_z = fit(Dataset(table.inputs, table.output_column("z"), box),
                      FitConfig(seed=seed))
        save_model(model_y, out / "model_y.json")
        save_model(model_z, out / "model_z.json")
        _print_model("y", model_y)
        _print_model("z", model_z)
        region = problems.cure_region(model_z)
        sample = sample_decision_uncertainty_constrained(
            model_y, model_z, problems.CURE_THRESHOLD, region, m, n_design,
            SeededRng(seed))
        _write_uq_artifacts(sample, out, int(args.grid or 64))
        print(f"decision sample: M={sample.m} "
              f"discarded={sample.meta['discarded_realization_count']}")
        evaluator = Evaluator.from_gp(model_y)
        for name, dist in (
                ("uniform", InputDistribution.uniform(box)),
                ("empirical", InputDistribution.empirical(sample))):
            result = sobol_indices(evaluator, dist, n_base,
                                   SeededRng(seed).child(0x50B, 0 if name == "uniform" else 1))
            with open(out / f"sobol_{name}.json", "w", encoding="utf-8") as fh:
                fh.write(result.to_json())
            result.to_csv(out / f"sobol_{name}.csv")
            print(f"sobol {name}: S={np.round(result.first_order, 4).tolist()}")
        return 0
    raise InvalidArgumentError(f"unknown demo {args.which!r}")


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="decuq",
        description="Surrogate-based decision uncertainty and sensitivity analysis",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file; flags override it")
        p.add_argument("--out", help="output directory (or env DECUQ_OUT)")
        p.add_argument("--seed", type=int, help="base RNG seed")

    p_fit = sub.add_parser("fit", help="fit GP surrogates and save them")
    common(p_fit)
    p_fit.add_argument("--problem", help="builtin problem name")
    p_fit.add_argument("--n", type=int, help="training design size for builtins")
    p_fit.add_argument("--data", help="CSV dataset path")
    p_fit.add_argument("--schema", help="JSON schema manifest for --data")
    p_fit.set_defaults(func=cmd_fit)

    p_uq = sub.add_parser("uq", help="sample decision uncertainty")
    common(p_uq)
    p_uq.add_argument("--problem")
    p_uq.add_argument("--n", type=int, help="training design size for builtins")
    p_uq.add_argument("--data")
    p_uq.add_argument("--schema")
    p_uq.add_argument("--threshold", type=float,
                      help="black-box constraint threshold")
    p_uq.add_argument("--M", dest="m", type=int, help="number of realizations")
    p_uq.add_argument("--N", dest="n_design", type=int,
                      help="candidate set size per realization")
    p_uq.add_argument("--grid", type=int, help="density grid size")
    p_uq.set_defaults(func=cmd_uq)

    p_sobol = sub.add_parser("sobol", help="Sobol sensitivity indices")
    common(p_sobol)
    p_sobol.add_argument("--problem")
    p_sobol.add_argument("--model", help="GP model JSON for --evaluator surrogate")
    p_sobol.add_argument("--mode", help="uniform | empirical | both")
    p_sobol.add_argument("--evaluator", help="true | surrogate")
    p_sobol.add_argument("--sample", help="decision sample CSV for empirical mode")
    p_sobol.add_argument("--n-base", dest="n_base", type=int)
    p_sobol.set_defaults(func=cmd_sobol)

    p_density = sub.add_parser("density", help="KDE grid from a sample CSV")
    common(p_density)
    p_density.add_argument("--sample")
    p_density.add_argument("--dims", help="two indices, e.g. 0,1")
    p_density.add_argument("--grid", type=int)
    p_density.set_defaults(func=cmd_density)

    p_demo = sub.add_parser("demo", help="run a full built-in pipeline")
    common(p_demo)
    p_demo.add_argument("which", choices=["ellipsoid", "cure"])
    p_demo.add_argument("--n", type=int, help="training design size")
    p_demo.add_argument("--M", dest="m", type=int)
    p_demo.add_argument("--N", dest="n_design", type=int)
    p_demo.add_argument("--n-base", dest="n_base", type=int)
    p_demo.add_argument("--grid", type=int)
    p_demo.set_defaults(func=cmd_demo)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _load_config(args)
        return args.func(args)
    except (DegenerateVarianceError, DegenerateSampleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except InfeasibleRegionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (InvalidArgumentError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
