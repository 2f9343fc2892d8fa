"""Evaluation quantities: diameter, message overhead, rounds, partition bound."""

from collections import deque
from typing import Dict, Iterable, Sequence

from .geometry import DeploymentGraph
from .messages import Trace, Variant
from .protocol import Partition


class DisconnectedPartition(ValueError):
    pass


def _bfs(src: int, members, graph: DeploymentGraph) -> Dict[int, int]:
    dist = {src: 0}
    q = deque([src])
    while q:
        v = q.popleft()
        for w in graph.neighbors(v):
            if w in members and w not in dist:
                dist[w] = dist[v] + 1
                q.append(w)
    return dist


def partition_diameter(partition: Partition, graph: DeploymentGraph) -> int:
    """Longest shortest hop path between members, using every link among members."""
    members = partition.members
    if not members:
        raise ValueError("empty partition")
    diam = 0
    for v in members:
        dist = _bfs(v, members, graph)
        if len(dist) != len(members):
            raise DisconnectedPartition(f"partition {partition.partition_id} is not connected")
        diam = max(diam, max(dist.values()))
    return diam


def tree_depth(partition: Partition) -> int:
    parent = partition.parent_of
    depth = 0
    for v in parent:
        d, u = 0, v
        while parent[u] is not None:
            u = parent[u]
            d += 1
        depth = max(depth, d)
    return depth


def total_messages(trace: Trace) -> int:
    return len(trace.records)


def messages_per_node(trace: Trace, n: int) -> float:
    if n <= 0:
        raise ValueError("n must be positive")
    return len(trace.records) / n


def rounds_to_complete(trace: Trace) -> int:
    """Round of the last Success broadcast (0 when nobody terminated)."""
    return max((r.round for r in trace.records if r.variant is Variant.SUCCESS), default=0)


def termination_rounds(trace: Trace) -> Dict[int, int]:
    """partition_id -> round of its Success broadcast."""
    out: Dict[int, int] = {}
    for r in trace.records:
        if r.variant is Variant.SUCCESS:
            out.setdefault(r.partition_id, r.round)
    return out


def max_partitions_upper_bound(occupancy: Sequence[int]) -> int:
    return min(occupancy) if len(occupancy) else 0


def mean(xs: Iterable[float]) -> float:
    xs = list(xs)
    return sum(xs) / len(xs) if xs else 0.0
