"""Valuing data distributions from finite samples.

Thin wrapper over the compiled ``_distval`` extension: numpy in, plain
dicts and floats out.
"""

import json

from ._distval import (
    Dataset,
    Model,
    annotator_valuation,
    etran_energy,
    gbv_posterior,
    leep,
    logme,
    median_heuristic_bandwidth,
    neg_mmd,
    pearson,
    quick_tau,
    run_experiment_json,
    train,
)

__version__ = "1.0.0"

__all__ = [
    "Dataset",
    "Model",
    "annotator_valuation",
    "etran_energy",
    "gbv_posterior",
    "leep",
    "logme",
    "median_heuristic_bandwidth",
    "neg_mmd",
    "pearson",
    "quick_tau",
    "run_experiment",
    "run_experiment_json",
    "train",
]


def run_experiment(scenario, **kwargs):
    """Runs a benchmark scenario and returns the report as a dict."""
    return json.loads(run_experiment_json(scenario, **kwargs))
