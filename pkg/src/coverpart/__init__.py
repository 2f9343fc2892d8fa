"""Distributed connected set cover partitioning for block-grid sensor networks."""

from .engine import EnergyModel, SimConfig, SimReport, run_lifetime, run_scenario
from .geometry import BlockGrid, block_side, build_graph, deploy
from .oracle import brute_force_max_partitions, verify_cover
from .protocol import Partition, run_partitioning

__all__ = [
    "BlockGrid", "EnergyModel", "Partition", "SimConfig", "SimReport",
    "block_side", "brute_force_max_partitions", "build_graph", "deploy",
    "run_lifetime", "run_partitioning", "run_scenario", "verify_cover",
]
