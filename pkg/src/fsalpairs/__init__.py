"""Embedded FSAL (4,5) Runge-Kutta pairs: construction, verification, benchmarks.

The main entry points::

    from fsalpairs import builtin, construct_family, residuals, metrics
    pair = construct_family("B", {"c2": "1/6", "c3": "7/32", "c5": "3/4", "c6": "7/8"})
    residuals(pair).ok()
"""

from .analyze import dso, error_norm, interpolant_check, metrics, residuals, stability
from .derive import (
    ConstructionError,
    DegenerateParametersError,
    GeneralParams,
    InconsistentPairError,
    NoSolutionError,
    construct_family,
    solve_d,
)
from .integrate import ControllerConfig, dense_eval, integrate_adaptive, integrate_fixed, rk_step
from .library import available, builtin
from .problems import problem
from .tableau import ButcherPair, load, loads, save
from .trees import RootedTree, enumerate_trees

__version__ = "0.1.0"

__all__ = [
    "ButcherPair", "ConstructionError", "ControllerConfig", "DegenerateParametersError",
    "GeneralParams", "InconsistentPairError", "NoSolutionError", "RootedTree", "available",
    "builtin", "construct_family", "dense_eval", "dso", "enumerate_trees",
    "error_norm", "integrate_adaptive", "integrate_fixed", "interpolant_check", "load",
    "loads", "metrics", "problem", "residuals", "rk_step", "save", "solve_d", "stability",
]
