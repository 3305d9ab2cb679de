"""Experiment orchestration: plans, campaigns, weight selection, trace files.

A campaign is fully determined by its plan and master seed: every run's seed is
a stable hash of (master seed, model, weight, run index), traces are written as
CSV, and the report is a pure function of the plan plus the traces, so it can
be recomputed byte-for-byte from disk.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import random
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from statistics import fmean, stdev

from .measurement import (
    BudgetLedger,
    CommandOracle,
    Direction,
    Oracle,
    SyntheticLandscapeParams,
    SyntheticOracle,
    TabularOracle,
    load_table,
)
from .models import PMO, MmoInstance
from .optimizers import (
    OptimizerConfig,
    RunTrace,
    TraceEntry,
    run_nsga2,
    run_rs,
    run_sa,
    run_shc_restart,
    run_soga,
)
from .space import OptionSpace, OptionSpec
from .stats import (
    compare_results,
    efficiency_ratio,
    normalized_gain,
    pick_best_counterpart,
    scott_knott,
    utopian,
)

SEED_ENV_VAR = "MMO_TUNE_SEED"

SINGLE_MODELS = ("single:rs", "single:shc-r", "single:sa", "single:soga")
MMO_MODELS = ("mmo:linear", "mmo:sqrt", "mmo:square")
ALL_MODELS = SINGLE_MODELS + (PMO,) + MMO_MODELS

DEFAULT_WEIGHTS = (0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 10.0)

POPULATION_MODELS = ("single:soga", PMO) + MMO_MODELS

# Budget and population presets for the reference systems.
PRESETS: dict[str, tuple[int, int]] = {
    "trimesh": (20, 1000),
    "x264": (50, 2500),
    "storm-wc": (50, 600),
    "storm-rs": (50, 900),
    "storm-sol": (50, 700),
    "keras-dnn-dsr": (60, 800),
    "keras-dnn-coffee": (50, 900),
    "keras-lstm": (20, 400),
}


class CampaignError(RuntimeError):
    """Raised when a campaign run fails; names the failing run."""


def canonical_model(name: str) -> str:
    model = name.strip().lower()
    if model not in ALL_MODELS:
        raise ValueError(f"unknown model {name!r}; expected one of {ALL_MODELS}")
    return model


def weight_token(weight: float | None) -> str:
    return "-" if weight is None else repr(float(weight))


def derive_seed(master_seed: int, *parts: object) -> int:
    """Stable 64-bit seed from the master seed and contextual parts."""
    h = hashlib.blake2b(digest_size=8)
    h.update(str(master_seed).encode())
    for part in parts:
        h.update(b"\x1f")
        h.update(str(part).encode())
    return int.from_bytes(h.digest(), "big")


@dataclass(frozen=True)
class ExperimentPlan:
    """Everything a campaign needs: space, oracle, budgets, models, seeding."""

    space: OptionSpace
    oracle_spec: dict
    budget: int
    population_size: int
    repeats: int = 30
    models: tuple[str, ...] = ALL_MODELS
    weights: tuple[float, ...] = DEFAULT_WEIGHTS
    master_seed: int = 0
    target_direction: Direction = "minimize"
    auxiliary_direction: Direction = "minimize"

    def __post_init__(self) -> None:
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if not self.models:
            raise ValueError("plan selects no models")
        object.__setattr__(
            self, "models", tuple(canonical_model(m) for m in self.models)
        )
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if any(m in MMO_MODELS for m in self.models) and not self.weights:
            raise ValueError("weights must be nonempty when a meta model is selected")
        if any(w <= 0 for w in self.weights):
            raise ValueError("weights must be positive")
        if (
            any(m in POPULATION_MODELS for m in self.models)
            and self.budget < self.population_size
        ):
            raise ValueError("budget must cover at least one population")

    def mmo_models(self) -> tuple[str, ...]:
        return tuple(m for m in self.models if m in MMO_MODELS)

    def group_keys(self) -> list[tuple[str, float | None]]:
        """Canonical (model, weight) grid: plan order, weights ascending."""
        keys: list[tuple[str, float | None]] = []
        for model in self.models:
            if model in MMO_MODELS:
                keys.extend((model, w) for w in sorted(self.weights))
            else:
                keys.append((model, None))
        return keys

    def to_doc(self) -> dict:
        return {
            "space": {
                "options": [
                    {
                        "name": opt.name,
                        "kind": opt.kind,
                        "lower": opt.lower,
                        "upper": opt.upper,
                    }
                    for opt in self.space.options
                ]
            },
            "oracle": self.oracle_spec,
            "budget": self.budget,
            "population_size": self.population_size,
            "repeats": self.repeats,
            "models": list(self.models),
            "weights": list(self.weights),
            "master_seed": self.master_seed,
            "target_direction": self.target_direction,
            "auxiliary_direction": self.auxiliary_direction,
        }

    def canonical_json(self) -> str:
        return json.dumps(self.to_doc(), sort_keys=True, separators=(",", ":"))

    def plan_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()


def plan_from_doc(doc: dict) -> ExperimentPlan:
    options = tuple(
        OptionSpec(o["name"], o["kind"], o["lower"], o["upper"])
        for o in doc["space"]["options"]
    )
    return ExperimentPlan(
        space=OptionSpace(options),
        oracle_spec=doc["oracle"],
        budget=doc["budget"],
        population_size=doc["population_size"],
        repeats=doc["repeats"],
        models=tuple(doc["models"]),
        weights=tuple(doc["weights"]),
        master_seed=doc["master_seed"],
        target_direction=doc["target_direction"],
        auxiliary_direction=doc["auxiliary_direction"],
    )


def build_oracle(plan: ExperimentPlan) -> Oracle:
    spec = plan.oracle_spec
    kind = spec.get("kind")
    if kind == "table":
        return load_table(
            spec["path"],
            space=plan.space,
            target_direction=plan.target_direction,
            auxiliary_direction=plan.auxiliary_direction,
        )
    if kind == "command":
        return CommandOracle(
            spec["command"],
            plan.space,
            samples=spec.get("samples", 5),
            timeout=spec.get("timeout", 60.0),
            target_direction=plan.target_direction,
            auxiliary_direction=plan.auxiliary_direction,
        )
    if kind == "synthetic":
        planted = spec.get("planted")
        params = SyntheticLandscapeParams(
            space=plan.space,
            seed=spec["seed"],
            local_optima_density=spec.get("density", 0.05),
            ruggedness=spec.get("ruggedness", 0.3),
            correlation=spec.get("correlation", 0.0),
            planted_optimum=(
                plan.space.config(planted) if planted is not None else None
            ),
        )
        return SyntheticOracle(params)
    raise ValueError(f"unknown oracle kind {kind!r}")


def execute_run(
    space: OptionSpace,
    oracle: Oracle,
    budget: int,
    population_size: int,
    model: str,
    weight: float | None,
    seed: int,
) -> RunTrace:
    """One tuning run of the given model with its own ledger and generator."""
    ledger = BudgetLedger(budget)
    cfg = OptimizerConfig(population_size=population_size, seed=seed)
    if model == "single:rs":
        return run_rs(space, ledger, oracle, cfg)
    if model == "single:shc-r":
        return run_shc_restart(space, ledger, oracle, cfg)
    if model == "single:sa":
        return run_sa(space, ledger, oracle, cfg)
    if model == "single:soga":
        return run_soga(space, ledger, oracle, cfg)
    if model == PMO:
        return run_nsga2(space, ledger, oracle, PMO, cfg)
    if model in MMO_MODELS:
        if weight is None:
            raise ValueError(f"model {model} needs a weight")
        shape = model.split(":", 1)[1]
        return run_nsga2(space, ledger, oracle, MmoInstance(shape, weight), cfg)
    raise ValueError(f"unknown model {model!r}")


def _campaign_task(
    args: tuple[ExperimentPlan, Oracle, str, float | None, int],
) -> tuple[tuple[str, float | None, int], RunTrace]:
    plan, oracle, model, weight, run_index = args
    seed = derive_seed(plan.master_seed, model, weight_token(weight), run_index)
    trace = execute_run(
        plan.space, oracle, plan.budget, plan.population_size, model, weight, seed
    )
    return (model, weight, run_index), trace


def run_campaign_traces(
    plan: ExperimentPlan, jobs: int = 1, oracle: Oracle | None = None
) -> dict[tuple[str, float | None, int], RunTrace]:
    """Execute the full model-by-weight-by-repeat grid of a plan."""
    oracle = oracle if oracle is not None else build_oracle(plan)
    tasks = [
        (plan, oracle, model, weight, run_index)
        for model, weight in plan.group_keys()
        for run_index in range(plan.repeats)
    ]
    traces: dict[tuple[str, float | None, int], RunTrace] = {}
    if jobs > 1:
        try:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                for key, trace in pool.map(_campaign_task, tasks):
                    traces[key] = trace
        except CampaignError:
            raise
        except Exception as exc:
            raise CampaignError(f"campaign run failed: {exc}") from exc
    else:
        for task in tasks:
            _, _, model, weight, run_index = task
            try:
                key, trace = _campaign_task(task)
            except Exception as exc:
                raise CampaignError(
                    f"run failed: model={model} weight={weight_token(weight)} "
                    f"run={run_index}: {exc}"
                ) from exc
            traces[key] = trace
    return traces


def build_report(
    plan: ExperimentPlan, traces: dict[tuple[str, float | None, int], RunTrace]
) -> dict:
    """Assemble the campaign report; a pure function of the plan and traces."""
    group_keys = plan.group_keys()
    best_targets: dict[tuple[str, float | None], list[float]] = {}
    for model, weight in group_keys:
        best_targets[(model, weight)] = [
            traces[(model, weight, run)].best_target() for run in range(plan.repeats)
        ]

    singles = {
        model: best_targets[(model, None)]
        for model in plan.models
        if model in SINGLE_MODELS
    }
    counterpart = pick_best_counterpart(singles) if singles else None
    counterpart_results = singles.get(counterpart) if counterpart else None
    counterpart_traces = (
        [traces[(counterpart, None, run)] for run in range(plan.repeats)]
        if counterpart
        else None
    )

    all_results = [v for results in best_targets.values() for v in results]
    try:
        utopian_value: float | None = utopian(all_results)
    except ValueError:
        utopian_value = None

    labels = {
        key: key[0] if key[1] is None else f"{key[0]}@{weight_token(key[1])}"
        for key in group_keys
    }
    ranks = scott_knott({labels[key]: best_targets[key] for key in group_keys})

    groups = []
    for key in group_keys:
        model, weight = key
        results = best_targets[key]
        runs = []
        for run_index in range(plan.repeats):
            trace = traces[(model, weight, run_index)]
            runs.append(
                {
                    "run": run_index,
                    "seed": derive_seed(
                        plan.master_seed, model, weight_token(weight), run_index
                    ),
                    "best_target": trace.best_target(),
                    "measurements_to_best": trace.measurements_to_best(),
                }
            )
        entry: dict = {
            "model": model,
            "weight": weight,
            "label": labels[key],
            "runs": runs,
            "mean": fmean(results),
            "stddev": stdev(results) if len(results) > 1 else 0.0,
            "sk_rank": ranks[labels[key]],
            "gain_pct": None,
            "wilcoxon_p": None,
            "a12": None,
            "a12_magnitude": None,
            "significant": None,
            "efficiency_pct": None,
            "converged": None,
        }
        if model not in SINGLE_MODELS and counterpart_results is not None:
            if utopian_value is not None:
                entry["gain_pct"] = normalized_gain(
                    results, counterpart_results, utopian_value
                )
            stat = compare_results(results, counterpart_results)
            entry["wilcoxon_p"] = stat.p_value
            entry["a12"] = stat.a12
            entry["a12_magnitude"] = stat.magnitude
            entry["significant"] = stat.significant
            model_traces = [
                traces[(model, weight, run)] for run in range(plan.repeats)
            ]
            ratio = efficiency_ratio(model_traces, counterpart_traces)
            entry["efficiency_pct"] = ratio
            entry["converged"] = ratio is not None
        groups.append(entry)

    return {
        "plan_hash": plan.plan_hash(),
        "master_seed": plan.master_seed,
        "repeats": plan.repeats,
        "best_counterpart": counterpart,
        "utopian": utopian_value,
        "groups": groups,
    }


# ---------------------------------------------------------------------------
# Weight selection


def _preliminary_scale(plan: ExperimentPlan) -> tuple[int, int]:
    budget = math.ceil(0.10 * plan.budget)
    population = max(2, math.floor(0.10 * plan.population_size))
    return budget, population


def preliminary_weight_selection(
    plan: ExperimentPlan, oracle: Oracle | None = None
) -> dict[str, float]:
    """Choose one weight per meta-model instance from cheap preliminary runs.

    One run per weight at 10% of the budget (ceiling) and 10% of the population
    (floored at 2); the weight with the best target wins, ties broken uniformly
    at random from a seeded generator.
    """
    mmo_models = plan.mmo_models()
    if not mmo_models:
        raise ValueError("plan selects no meta models")
    if not plan.weights:
        raise ValueError("plan has no candidate weights")
    oracle = oracle if oracle is not None else build_oracle(plan)
    budget, population = _preliminary_scale(plan)
    chosen: dict[str, float] = {}
    for model in mmo_models:
        results: list[tuple[float, float]] = []
        for weight in sorted(plan.weights):
            seed = derive_seed(
                plan.master_seed, "prelim", model, weight_token(weight), 0
            )
            trace = execute_run(
                plan.space, oracle, budget, population, model, weight, seed
            )
            results.append((weight, trace.best_target()))
        best_value = min(value for _, value in results)
        tied = [weight for weight, value in results if value == best_value]
        if len(tied) == 1:
            chosen[model] = tied[0]
        else:
            tie_rng = random.Random(
                derive_seed(plan.master_seed, "prelim-tie", model)
            )
            chosen[model] = tied[tie_rng.randrange(len(tied))]
    return chosen


def data_driven_weight_selection(
    table: TabularOracle,
    plan: ExperimentPlan,
    mode: str = "preliminary",
) -> tuple[dict[str, float], float]:
    """Choose weights by replaying tuning against pre-measured data only.

    ``mode="preliminary"`` reuses the preliminary-selection computation path
    (identical choice for equal seeds). ``mode="full"`` replays the full-scale
    grid with campaign seeds and selects per instance by Scott-Knott rank
    first, mean second. Returns the chosen weights and the elapsed seconds.
    """
    if mode not in ("preliminary", "full"):
        raise ValueError(f"unknown mode {mode!r}")
    start = time.perf_counter()
    if mode == "preliminary":
        chosen = preliminary_weight_selection(plan, oracle=table)
        return chosen, time.perf_counter() - start
    chosen = {}
    for model in plan.mmo_models():
        groups: dict[str, list[float]] = {}
        means: dict[str, float] = {}
        by_token: dict[str, float] = {}
        for weight in sorted(plan.weights):
            token = weight_token(weight)
            results = []
            for run_index in range(plan.repeats):
                seed = derive_seed(plan.master_seed, model, token, run_index)
                trace = execute_run(
                    plan.space,
                    table,
                    plan.budget,
                    plan.population_size,
                    model,
                    weight,
                    seed,
                )
                results.append(trace.best_target())
            groups[token] = results
            means[token] = fmean(results)
            by_token[token] = weight
        ranks = scott_knott(groups)
        best = min(groups, key=lambda t: (ranks[t], means[t], by_token[t]))
        chosen[model] = by_token[best]
    return chosen, time.perf_counter() - start


# ---------------------------------------------------------------------------
# Trace and campaign files


def emit_trace(trace: RunTrace, path: str) -> None:
    """Write a trace as CSV: step, option values, raw values, budget, best-so-far."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["step", *trace.space.names, "target", "auxiliary", "consumed", "best_so_far"]
        )
        for entry in trace.entries:
            writer.writerow(
                [
                    entry.step,
                    *entry.config.values,
                    repr(entry.target_raw),
                    repr(entry.auxiliary_raw),
                    entry.consumed_after,
                    repr(entry.best_so_far),
                ]
            )


def load_trace(path: str, space: OptionSpace) -> RunTrace:
    """Read a trace CSV back; lossless against emit_trace."""
    expected = ["step", *space.names, "target", "auxiliary", "consumed", "best_so_far"]
    trace = RunTrace(space)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != expected:
            raise ValueError(f"{path}: unexpected trace header {header}")
        n = len(space.names)
        for cells in reader:
            config = space.config(int(v) for v in cells[1 : 1 + n])
            trace.entries.append(
                TraceEntry(
                    step=int(cells[0]),
                    config=config,
                    target_raw=float(cells[1 + n]),
                    auxiliary_raw=float(cells[2 + n]),
                    consumed_after=int(cells[3 + n]),
                    best_so_far=float(cells[4 + n]),
                )
            )
    return trace


def trace_filename(model: str, weight: float | None, run_index: int) -> str:
    slug = model.replace(":", "_").replace("-", "_")
    suffix = "" if weight is None else f"__w{weight_token(weight)}"
    return f"{slug}{suffix}__run{run_index:03d}.csv"


def _report_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def write_campaign(plan: ExperimentPlan, out_dir: str, jobs: int = 1) -> dict:
    """Run a campaign and persist plan, traces, report, and the flat summary."""
    traces = run_campaign_traces(plan, jobs=jobs)
    os.makedirs(os.path.join(out_dir, "traces"), exist_ok=True)
    with open(os.path.join(out_dir, "plan.json"), "w", encoding="utf-8") as fh:
        fh.write(plan.canonical_json() + "\n")
    for model, weight in plan.group_keys():
        for run_index in range(plan.repeats):
            emit_trace(
                traces[(model, weight, run_index)],
                os.path.join(
                    out_dir, "traces", trace_filename(model, weight, run_index)
                ),
            )
    report = build_report(plan, traces)
    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
        fh.write(_report_json(report))
    _write_summary(plan, traces, os.path.join(out_dir, "summary.csv"))
    return report


def _write_summary(
    plan: ExperimentPlan,
    traces: dict[tuple[str, float | None, int], RunTrace],
    path: str,
) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["model", "weight", "run", "best_target", "measurements_to_best"])
        for model, weight in plan.group_keys():
            for run_index in range(plan.repeats):
                trace = traces[(model, weight, run_index)]
                writer.writerow(
                    [
                        model,
                        "" if weight is None else weight_token(weight),
                        run_index,
                        repr(trace.best_target()),
                        trace.measurements_to_best(),
                    ]
                )


def recompute_report(out_dir: str) -> dict:
    """Rebuild the report purely from the stored plan and traces."""
    with open(os.path.join(out_dir, "plan.json"), "r", encoding="utf-8") as fh:
        plan = plan_from_doc(json.load(fh))
    traces: dict[tuple[str, float | None, int], RunTrace] = {}
    for model, weight in plan.group_keys():
        for run_index in range(plan.repeats):
            path = os.path.join(
                out_dir, "traces", trace_filename(model, weight, run_index)
            )
            traces[(model, weight, run_index)] = load_trace(path, plan.space)
    return build_report(plan, traces)


def report_bytes(report: dict) -> bytes:
    return _report_json(report).encode()
