"""Area-level small-area MSPE estimation (Python bindings)."""

import json

from ._core import (
    AreaDataset,
    BiasVarEstimate,
    DataError,
    FitResult,
    NumericError,
    ParamVector,
    UnsupportedError,
    best_predictor,
    bootstrap_bias_var,
    compute_mspe,
    fit,
    jackknife_fits,
    m1,
    m1_derivatives,
    m2,
    read_dataset_csv,
    simulate_dataset,
    summarize,
)
from ._core import _run_simulation_json


def run_simulation(config=None, threads=0):
    """Run the Monte Carlo study.

    `config` is a dict or a JSON string with SimulationConfig fields; missing
    keys keep their defaults. Returns the summary as a dict.
    """
    if config is None:
        config = {}
    text = config if isinstance(config, str) else json.dumps(config)
    return json.loads(_run_simulation_json(text, threads))


__all__ = [
    "AreaDataset",
    "BiasVarEstimate",
    "DataError",
    "FitResult",
    "NumericError",
    "ParamVector",
    "UnsupportedError",
    "best_predictor",
    "bootstrap_bias_var",
    "compute_mspe",
    "fit",
    "jackknife_fits",
    "m1",
    "m1_derivatives",
    "m2",
    "read_dataset_csv",
    "run_simulation",
    "simulate_dataset",
    "summarize",
]
