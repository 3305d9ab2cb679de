"""Command-line surface: tune, campaign, sweep-weights, select-weight, stats, gen-landscape.

Exit codes: 0 on success, 1 on usage errors, 2 on runtime failures.
The environment variable MMO_TUNE_SEED overrides the master seed when set.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

from .harness import (
    ALL_MODELS,
    DEFAULT_WEIGHTS,
    PRESETS,
    SEED_ENV_VAR,
    ExperimentPlan,
    build_oracle,
    canonical_model,
    data_driven_weight_selection,
    derive_seed,
    emit_trace,
    execute_run,
    preliminary_weight_selection,
    recompute_report,
    report_bytes,
    weight_token,
    write_campaign,
)
from .measurement import SyntheticLandscapeParams, SyntheticOracle, load_table
from .space import load_space

# Guard for table emission: enumerating beyond this is a mistake, not a use case.
MAX_TABLE_ROWS = 1_000_000


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise _UsageError(message)


def _add_oracle_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--table", help="CSV of pre-measured configurations")
    parser.add_argument("--command", help="external measurement command")
    parser.add_argument("--samples", type=int, default=5)
    parser.add_argument("--timeout", type=float, default=60.0)
    parser.add_argument("--landscape-seed", type=int, default=0)
    parser.add_argument("--density", type=float, default=0.05)
    parser.add_argument("--ruggedness", type=float, default=0.3)
    parser.add_argument("--correlation", type=float, default=0.0)
    parser.add_argument("--planted", help="comma-separated planted optimum values")
    parser.add_argument(
        "--synthetic", action="store_true", help="use the synthetic landscape oracle"
    )


def _add_plan_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--space", required=True, help="space definition file")
    _add_oracle_args(parser)
    parser.add_argument("--budget", type=int)
    parser.add_argument("--pop", type=int, default=20)
    parser.add_argument("--preset", choices=sorted(PRESETS))
    parser.add_argument("--repeats", type=int, default=30)
    parser.add_argument("--models", default=",".join(ALL_MODELS))
    parser.add_argument(
        "--weights", default=",".join(weight_token(w) for w in DEFAULT_WEIGHTS)
    )
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--target-direction", choices=("minimize", "maximize"),
                        default="minimize")
    parser.add_argument("--auxiliary-direction", choices=("minimize", "maximize"),
                        default="minimize")
    parser.add_argument("--jobs", type=int, default=1)


def _oracle_spec(args: argparse.Namespace) -> dict:
    chosen = [
        name
        for name, flag in (
            ("table", args.table),
            ("command", args.command),
            ("synthetic", args.synthetic),
        )
        if flag
    ]
    if len(chosen) != 1:
        raise _UsageError("choose exactly one of --table, --command, --synthetic")
    if args.table:
        return {"kind": "table", "path": args.table}
    if args.command:
        return {
            "kind": "command",
            "command": args.command,
            "samples": args.samples,
            "timeout": args.timeout,
        }
    spec: dict = {
        "kind": "synthetic",
        "seed": args.landscape_seed,
        "density": args.density,
        "ruggedness": args.ruggedness,
        "correlation": args.correlation,
    }
    if args.planted:
        spec["planted"] = [int(v) for v in args.planted.split(",")]
    return spec


def _master_seed(args: argparse.Namespace) -> int:
    env = os.environ.get(SEED_ENV_VAR)
    return int(env) if env else args.seed


def _plan_from_args(args: argparse.Namespace) -> ExperimentPlan:
    space = load_space(args.space)
    budget, population = args.budget, args.pop
    if args.preset:
        population, budget = PRESETS[args.preset]
    if budget is None:
        raise _UsageError("--budget is required (or use --preset)")
    return ExperimentPlan(
        space=space,
        oracle_spec=_oracle_spec(args),
        budget=budget,
        population_size=population,
        repeats=args.repeats,
        models=tuple(m for m in args.models.split(",") if m),
        weights=tuple(float(w) for w in args.weights.split(",") if w),
        master_seed=_master_seed(args),
        target_direction=args.target_direction,
        auxiliary_direction=args.auxiliary_direction,
    )


def _cmd_tune(args: argparse.Namespace) -> int:
    space = load_space(args.space)
    plan = ExperimentPlan(
        space=space,
        oracle_spec=_oracle_spec(args),
        budget=args.budget,
        population_size=args.pop,
        repeats=1,
        models=(canonical_model(args.model),),
        weights=(args.weight,) if args.weight is not None else DEFAULT_WEIGHTS,
        master_seed=_master_seed(args),
        target_direction=args.target_direction,
        auxiliary_direction=args.auxiliary_direction,
    )
    model = plan.models[0]
    weight = float(args.weight) if args.weight is not None else None
    if model.startswith("mmo:") and weight is None:
        raise _UsageError(f"model {model} needs --weight")
    oracle = build_oracle(plan)
    seed = derive_seed(plan.master_seed, model, weight_token(weight), 0)
    trace = execute_run(
        space, oracle, plan.budget, plan.population_size, model, weight, seed
    )
    emit_trace(trace, args.out)
    best = trace.best_target() if trace.entries else None
    print(
        json.dumps(
            {
                "model": model,
                "weight": weight,
                "seed": seed,
                "measurements": len(trace.entries),
                "best_target": best,
                "trace": args.out,
            }
        )
    )
    return 0


def _cmd_campaign(args: argparse.Namespace) -> int:
    plan = _plan_from_args(args)
    report = write_campaign(plan, args.out, jobs=args.jobs)
    print(
        json.dumps(
            {
                "out": args.out,
                "plan_hash": report["plan_hash"],
                "best_counterpart": report["best_counterpart"],
                "groups": len(report["groups"]),
            }
        )
    )
    return 0


def _cmd_sweep_weights(args: argparse.Namespace) -> int:
    plan = _plan_from_args(args)
    if not plan.mmo_models():
        raise _UsageError("sweep-weights needs at least one mmo:* model")
    report = write_campaign(plan, args.out, jobs=args.jobs)
    sweep_path = os.path.join(args.out, "sweep.csv")
    groups = [g for g in report["groups"] if g["model"].startswith("mmo:")]
    best: dict[str, dict] = {}
    for g in groups:
        key = g["model"]
        current = best.get(key)
        if current is None or (g["sk_rank"], g["mean"], g["weight"]) < (
            current["sk_rank"],
            current["mean"],
            current["weight"],
        ):
            best[key] = g
    with open(sweep_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["model", "weight", "mean", "sk_rank", "a12", "wilcoxon_p",
             "significant", "best_weight"]
        )
        for g in groups:
            writer.writerow(
                [
                    g["model"],
                    weight_token(g["weight"]),
                    repr(g["mean"]),
                    g["sk_rank"],
                    "" if g["a12"] is None else repr(g["a12"]),
                    "" if g["wilcoxon_p"] is None else repr(g["wilcoxon_p"]),
                    "" if g["significant"] is None else int(g["significant"]),
                    int(best[g["model"]] is g),
                ]
            )
    print(json.dumps({"out": args.out, "sweep": sweep_path}))
    return 0


def _cmd_select_weight(args: argparse.Namespace) -> int:
    plan = _plan_from_args(args)
    if args.method == "preliminary":
        chosen = preliminary_weight_selection(plan)
        print(json.dumps({"method": "preliminary", "weights": chosen}, sort_keys=True))
        return 0
    if not args.table:
        raise _UsageError("data-driven selection needs --table")
    table = load_table(
        args.table,
        space=plan.space,
        target_direction=plan.target_direction,
        auxiliary_direction=plan.auxiliary_direction,
    )
    chosen, elapsed = data_driven_weight_selection(table, plan, mode=args.scale)
    print(
        json.dumps(
            {
                "method": "data-driven",
                "scale": args.scale,
                "weights": chosen,
                "elapsed_seconds": elapsed,
            },
            sort_keys=True,
        )
    )
    return 0


def _cmd_stats(args: argparse.Namespace) -> int:
    report = recompute_report(args.dir)
    path = os.path.join(args.dir, "report.json")
    with open(path, "wb") as fh:
        fh.write(report_bytes(report))
    print(json.dumps({"report": path, "plan_hash": report["plan_hash"]}))
    return 0


def _cmd_gen_landscape(args: argparse.Namespace) -> int:
    space = load_space(args.space)
    if space.size() > MAX_TABLE_ROWS:
        raise ValueError(
            f"space has {space.size()} configurations; refusing to enumerate "
            f"more than {MAX_TABLE_ROWS}"
        )
    planted = None
    if args.planted:
        planted = space.config(int(v) for v in args.planted.split(","))
    oracle = SyntheticOracle(
        SyntheticLandscapeParams(
            space=space,
            seed=args.landscape_seed,
            local_optima_density=args.density,
            ruggedness=args.ruggedness,
            correlation=args.correlation,
            planted_optimum=planted,
        )
    )
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([*space.names, "target", "auxiliary"])
        for config in space.enumerate_all():
            writer.writerow(
                [
                    *config.values,
                    f"{oracle.target(config):.2f}",
                    f"{oracle.auxiliary(config):.2f}",
                ]
            )
    print(
        json.dumps(
            {
                "out": args.out,
                "rows": space.size(),
                "planted": list(oracle.params.planted_optimum.values),
            }
        )
    )
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="mmo-tune", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    tune = sub.add_parser("tune", help="one tuning run")
    tune.add_argument("--space", required=True)
    _add_oracle_args(tune)
    tune.add_argument("--model", required=True)
    tune.add_argument("--weight", type=float)
    tune.add_argument("--budget", type=int, required=True)
    tune.add_argument("--pop", type=int, default=20)
    tune.add_argument("--seed", type=int, default=0)
    tune.add_argument("--target-direction", choices=("minimize", "maximize"),
                      default="minimize")
    tune.add_argument("--auxiliary-direction", choices=("minimize", "maximize"),
                      default="minimize")
    tune.add_argument("--out", default="trace.csv")
    tune.set_defaults(func=_cmd_tune)

    campaign = sub.add_parser("campaign", help="full multi-run experiment")
    _add_plan_args(campaign)
    campaign.add_argument("--out", required=True)
    campaign.set_defaults(func=_cmd_campaign)

    sweep = sub.add_parser("sweep-weights", help="weight sensitivity grid")
    _add_plan_args(sweep)
    sweep.add_argument("--out", required=True)
    sweep.set_defaults(func=_cmd_sweep_weights)

    select = sub.add_parser("select-weight", help="pick weights per meta instance")
    _add_plan_args(select)
    select.add_argument(
        "--method", choices=("preliminary", "data-driven"), default="preliminary"
    )
    select.add_argument("--scale", choices=("preliminary", "full"),
                        default="preliminary")
    select.set_defaults(func=_cmd_select_weight)

    stats = sub.add_parser("stats", help="recompute a report from stored traces")
    stats.add_argument("--dir", required=True)
    stats.set_defaults(func=_cmd_stats)

    gen = sub.add_parser("gen-landscape", help="emit a synthetic table as CSV")
    gen.add_argument("--space", required=True)
    gen.add_argument("--landscape-seed", type=int, default=0)
    gen.add_argument("--density", type=float, default=0.05)
    gen.add_argument("--ruggedness", type=float, default=0.3)
    gen.add_argument("--correlation", type=float, default=0.0)
    gen.add_argument("--planted")
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=_cmd_gen_landscape)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
