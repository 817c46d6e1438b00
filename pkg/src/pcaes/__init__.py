"""CMA-ES with online PCA dimensionality reduction, plus a benchmark harness."""
from .es import EsParams, EsState, RunTrace, run
from .numerics import RngStream
from .objectives import list_suite, make_instance
from .strategy import Kind, VariantSpec, run_variant

__all__ = [
    "EsParams", "EsState", "RunTrace", "run", "RngStream", "list_suite",
    "make_instance", "Kind", "VariantSpec", "run_variant",
]
