"""Unions of lines in R^n: line-space geometry, delta-tube functionals and experiments."""

import json as _json

from ._core import (
    BudgetExceeded,
    ConfigError,
    DomainError,
    Error,
    ResolutionError,
    TubeFamily,
    __version__,
    ball_condition_ratio,
    cantor_offsets,
    decide_dichotomy,
    fit_power_law,
    generate,
    holder_comparison,
    line_metric,
    lp_norm,
    multilinear_kakeya_ratio,
    scenarios,
    split_by_axis,
    wedge_volume,
)
from ._core import run_scenario as _run_scenario


def run_scenario(config):
    """Run a scenario given as a dict (or JSON text) and return the report as a dict."""
    text = config if isinstance(config, str) else _json.dumps(config)
    return _json.loads(_run_scenario(text))


__all__ = [
    "BudgetExceeded",
    "ConfigError",
    "DomainError",
    "Error",
    "ResolutionError",
    "TubeFamily",
    "ball_condition_ratio",
    "cantor_offsets",
    "decide_dichotomy",
    "fit_power_law",
    "generate",
    "holder_comparison",
    "line_metric",
    "lp_norm",
    "multilinear_kakeya_ratio",
    "run_scenario",
    "scenarios",
    "split_by_axis",
    "wedge_volume",
]
