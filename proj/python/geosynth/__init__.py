"""Partially synthetic geocoded microdata: clustering, synthesis, risk and utility."""

from ._core import (
    GeosynthError,
    InputError,
    autocorrelation,
    bayesian_bootstrap_indices,
    cell_corner,
    coarsen_geocode,
    evaluate_risk,
    geweke_z,
    gini_impurity,
    heidelberger_welch,
    k_curve,
    l_function,
    load_config,
    mdav_partition,
    run_cluster,
    run_evaluate_risk,
    run_evaluate_utility,
    run_pipeline,
    run_synthesize,
    select_snapshots,
    simulate_population,
    stick_breaking_weights,
)

__all__ = [
    "GeosynthError",
    "InputError",
    "autocorrelation",
    "bayesian_bootstrap_indices",
    "cell_corner",
    "coarsen_geocode",
    "evaluate_risk",
    "geweke_z",
    "gini_impurity",
    "heidelberger_welch",
    "k_curve",
    "l_function",
    "load_config",
    "mdav_partition",
    "run_cluster",
    "run_evaluate_risk",
    "run_evaluate_utility",
    "run_pipeline",
    "run_synthesize",
    "select_snapshots",
    "simulate_population",
    "stick_breaking_weights",
]
