"""Diffusion-based data assimilation on a multi-level Lorenz-96 system."""

from ._core import (
    Config,
    Error,
    FormatError,
    Model,
    NumericalError,
    UsageError,
    assimilate,
    climatology,
    forecast,
    interpolate,
    linear_schedule,
    post_process,
    rmse,
    run_experiment,
    sample_columns,
    simulate,
    softbleed,
    train_model,
)

__all__ = [
    "Config",
    "Error",
    "FormatError",
    "Model",
    "NumericalError",
    "UsageError",
    "assimilate",
    "climatology",
    "forecast",
    "interpolate",
    "linear_schedule",
    "post_process",
    "rmse",
    "run_experiment",
    "sample_columns",
    "simulate",
    "softbleed",
    "train_model",
]
