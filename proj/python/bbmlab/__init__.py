"""Python access to the bbmlab simulation and rate-function core."""

from ._core import (
    OffspringLaw,
    counterexample_log_mean,
    counterexample_rate,
    energy,
    k_value,
    population_counts,
    run_experiment,
    schilder_inf,
    size_biased,
    sup_k_over_ball,
    theta0,
    tube_count,
)

__all__ = [
    "OffspringLaw",
    "counterexample_log_mean",
    "counterexample_rate",
    "energy",
    "k_value",
    "population_counts",
    "run_experiment",
    "schilder_inf",
    "size_biased",
    "sup_k_over_ball",
    "theta0",
    "tube_count",
]
__version__ = "0.1.0"
