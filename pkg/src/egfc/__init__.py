"""Evolving Gaussian fuzzy classifier (eGFC) for data streams."""

from .granule import (
    SIGMA_MAX,
    SIGMA_MIN,
    Granule,
    InvalidInputError,
    absorb_sample,
    create_granule,
    granule_activation,
    membership_degree,
)
from .rules import ClassEstimate, HyperParams, RuleBase, granule_distance, merge_pair
from .evaluation import EvalReport, RunConfig, run_stream

__version__ = "0.1.0"

__all__ = [
    "SIGMA_MAX",
    "SIGMA_MIN",
    "ClassEstimate",
    "EvalReport",
    "Granule",
    "HyperParams",
    "InvalidInputError",
    "RuleBase",
    "RunConfig",
    "absorb_sample",
    "create_granule",
    "granule_activation",
    "granule_distance",
    "membership_degree",
    "merge_pair",
    "run_stream",
]
