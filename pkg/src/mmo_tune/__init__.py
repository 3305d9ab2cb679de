"""Black-box configuration tuning with meta multi-objectivized search models."""

from .harness import (
    ALL_MODELS,
    DEFAULT_WEIGHTS,
    PRESETS,
    ExperimentPlan,
    build_oracle,
    build_report,
    data_driven_weight_selection,
    derive_seed,
    emit_trace,
    execute_run,
    load_trace,
    preliminary_weight_selection,
    recompute_report,
    run_campaign_traces,
    write_campaign,
)
from .measurement import (
    BudgetExhausted,
    BudgetLedger,
    CommandOracle,
    MeasurementRecord,
    SyntheticLandscapeParams,
    SyntheticOracle,
    TabularOracle,
    cached_measure,
    load_table,
    synth_landscape,
)
from .models import (
    PMO,
    MmoInstance,
    NormalizationBounds,
    dominance,
    dominates,
    meta_objectives,
    pareto_front,
    pmo_objectives,
    to_minimization,
)
from .optimizers import (
    OptimizerConfig,
    RunTrace,
    boundary_mutation,
    crowding_distance,
    fast_nondominated_sort,
    run_nsga2,
    run_rs,
    run_sa,
    run_shc_restart,
    run_soga,
    uniform_crossover,
)
from .space import Configuration, OptionSpace, OptionSpec, load_space, parse_space
from .stats import (
    StatResult,
    a12,
    a12_magnitude,
    compare_results,
    efficiency_ratio,
    normalized_gain,
    pick_best_counterpart,
    scott_knott,
    utopian,
    wilcoxon_signed_rank,
)

__all__ = [name for name in dir() if not name.startswith("_")]
