"""Trace-driven planning and evaluation of recomputation instead of loads."""

from .cache import CacheConfig, CacheHierarchy, CacheStats, LevelConfig, simulate
from .dependence import RSlice, build_graph, evaluate_slice, extract_rslice, prune
from .energy import EpiTable, LatencyTable, probabilistic_load_cost, rslice_cost
from .evaluate import GainReport, evaluate
from .locality import histogram, profile
from .program import DynamicTrace, Program, execute, parse_program
from .transforms import (
    Plan,
    analyze,
    make_plan,
    plan_combined,
    plan_prediction,
    plan_recalculation,
)

__version__ = "0.1.0"
