"""Benchmark recipes, experiment runner and CSV output."""

from .config import PRESET_NAMES, load_kv, parse_kv, parse_rank, parse_rank_grid, parse_seed, preset_specs, spec_from_kv
from .recipes import (
    gen_decaying_tt,
    gen_hilbert,
    gen_random_cp,
    gen_sqrt_sum,
    gen_sum_of_tt,
    gen_tt_plus_sparse,
    sigma_profile,
)
from .runner import (
    COLUMNS,
    ExperimentRecord,
    ExperimentSpec,
    OversamplingRule,
    Summary,
    build_tensor,
    emit_csv,
    emit_plot_data,
    percentiles,
    read_csv,
    run_experiment,
    run_method,
    summarize,
    trial_seed,
)

__all__ = [
    "COLUMNS", "ExperimentRecord", "ExperimentSpec", "OversamplingRule", "PRESET_NAMES", "Summary",
    "build_tensor", "emit_csv", "emit_plot_data", "gen_decaying_tt", "gen_hilbert", "gen_random_cp",
    "gen_sqrt_sum", "gen_sum_of_tt", "gen_tt_plus_sparse", "load_kv", "parse_kv", "parse_rank",
    "parse_rank_grid", "parse_seed", "percentiles", "preset_specs", "read_csv", "run_experiment",
    "run_method", "sigma_profile", "spec_from_kv", "summarize", "trial_seed",
]
