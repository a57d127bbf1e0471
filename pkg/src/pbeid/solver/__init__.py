"""Forward solvers used to generate benchmark data and re-simulate identified models."""

from .cases import (
    CASES,
    REPORTED_CLEAN_ERROR,
    CaseSpec,
    MomentReport,
    generate_case,
    get_case,
    resimulate,
    simulate_breakage_aggregation,
    simulate_combined,
)
from .fixed_pivot import FixedPivotSystem, SolverError, breakage_matrix, integrate
from .growth import characteristic_solution, simulate_growth, simulate_shift_splitting, upwind

__all__ = [
    "CASES",
    "REPORTED_CLEAN_ERROR",
    "CaseSpec",
    "FixedPivotSystem",
    "MomentReport",
    "SolverError",
    "breakage_matrix",
    "characteristic_solution",
    "generate_case",
    "get_case",
    "integrate",
    "resimulate",
    "simulate_breakage_aggregation",
    "simulate_combined",
    "simulate_growth",
    "simulate_shift_splitting",
    "upwind",
]
