"""Discrete restricted fractional Laplacian with singular and measure data on an interval."""

from .config import ConfigError, ExperimentConfig, from_dict, load_config
from .grid import Grid, build_grid, compact_subset
from .nonlinearity import HSpec, MeasureSpec, SourceSpec
from .operator import OperatorMatrix, assemble_operator, bilinear_form
from .solver import ProblemSpec, Solution, SolverError, approximation_limit, solve_approximant

__version__ = "0.1.0"

__all__ = ["ConfigError", "ExperimentConfig", "from_dict", "load_config", "Grid", "build_grid", "compact_subset",
           "HSpec", "MeasureSpec", "SourceSpec", "OperatorMatrix", "assemble_operator", "bilinear_form",
           "ProblemSpec", "Solution", "SolverError", "approximation_limit", "solve_approximant"]
