"""Symbolic regression with a set-transformer model, plus a GP baseline."""

from ._core import (
    Expression,
    Model,
    __version__,
    a1_fraction,
    gp_fit,
    load_suite,
    parse,
    r2_score,
    run_cli,
    sample_pool,
)

__all__ = [
    "Expression",
    "Model",
    "__version__",
    "a1_fraction",
    "gp_fit",
    "load_suite",
    "parse",
    "r2_score",
    "run_cli",
    "sample_pool",
]
