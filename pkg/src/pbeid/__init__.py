"""Data-driven identification of population balance equations."""

__version__ = "0.1.0"

from .estimator import LibraryTransformer, PBEDiscovery  # noqa: E402
from .grid import DensityField, InternalGrid, TemporalGrid, load_density, save_density  # noqa: E402
from .library import BasisCatalog, Library, build_library, eliminate_dependent_columns  # noqa: E402
from .model import PBEModel, coefficient_error, formulate_pbe, resolve_dependent_terms  # noqa: E402
from .pipeline import RunConfig, run_benchmark, run_discovery, run_noise_study  # noqa: E402
from .selector import SelectWeights, identify  # noqa: E402
from .stls import STLSRegressor, stls  # noqa: E402

__all__ = [
    "BasisCatalog",
    "DensityField",
    "InternalGrid",
    "Library",
    "LibraryTransformer",
    "PBEDiscovery",
    "PBEModel",
    "RunConfig",
    "SelectWeights",
    "STLSRegressor",
    "TemporalGrid",
    "build_library",
    "coefficient_error",
    "eliminate_dependent_columns",
    "formulate_pbe",
    "identify",
    "load_density",
    "resolve_dependent_terms",
    "run_benchmark",
    "run_discovery",
    "run_noise_study",
    "save_density",
    "stls",
]
