"""Simulator and analytic models for hybrid P2P/mesh video-on-demand delivery."""
__version__ = "0.1.0"

from .analytic import (admission_limit, erlang_b, khintchine_bounds, offered_load,
                       tier_capacity_closed, tier_capacity_iterative)
from .engine import MetricsReport, SimConfig, run, sweep_adjacency
from .errors import ConfigError, HybridVodError, InvalidArgument, SizeLimitError, TopologyError
from .search import heuristic_path_search, bfs_distance_oracle
from .topology import build_hybrid, form_clusters

__all__ = [
    "admission_limit", "erlang_b", "khintchine_bounds", "offered_load",
    "tier_capacity_closed", "tier_capacity_iterative", "MetricsReport", "SimConfig",
    "run", "sweep_adjacency", "ConfigError", "HybridVodError", "InvalidArgument",
    "SizeLimitError", "TopologyError", "heuristic_path_search", "bfs_distance_oracle",
    "build_hybrid", "form_clusters",
]
