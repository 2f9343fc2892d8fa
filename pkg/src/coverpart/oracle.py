"""
Independent checks: the connected 1-cover predicate and an exhaustive
search for the maximum number of disjoint connected covers on small
instances. Deliberately shares no code with the protocol.
"""

from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

import networkx as nx

from .geometry import BlockGrid, DeploymentGraph, NodePlacement


class InstanceTooLarge(ValueError):
    pass


@dataclass
class CoverCheck:
    ok: bool
    uncovered_blocks: List[int] = field(default_factory=list)
    components: List[List[int]] = field(default_factory=list)

    def __bool__(self):
        return self.ok

    def describe(self) -> str:
        if self.ok:
            return "ok"
        parts = []
        if self.uncovered_blocks:
            parts.append("uncovered blocks " + ",".join(map(str, self.uncovered_blocks)))
        if len(self.components) > 1:
            parts.append(f"{len(self.components)} components: "
                         + " | ".join(",".join(map(str, c)) for c in self.components))
        if not parts:
            parts.append("empty member set")
        return "; ".join(parts)


def _induced(graph: DeploymentGraph, members) -> nx.Graph:
    keep = set(members)
    g = nx.Graph()
    g.add_nodes_from(keep)
    g.add_edges_from((i, j) for i in keep for j in graph.neighbors(i) if j in keep and i < j)
    return g


def verify_cover(members: Iterable[int], grid: BlockGrid, graph: DeploymentGraph,
                 placements: Sequence[NodePlacement]) -> CoverCheck:
    members = sorted(set(members))
    if not members:
        return CoverCheck(False, list(range(grid.n_blocks)), [])
    occupied = {placements[v].block_id for v in members}
    uncovered = [b for b in range(grid.n_blocks) if b not in occupied]
    sub = _induced(graph, members)
    comps = sorted(sorted(c) for c in nx.connected_components(sub))
    return CoverCheck(not uncovered and len(comps) == 1, uncovered, comps)


def _minimal_covers(n: int, block_mask: List[int], adj: List[int]) -> List[int]:
    """All inclusion-minimal connected covers, as node bitmasks."""
    full = (1 << n) - 1

    def connected(mask):
        start = mask & -mask
        seen = start
        frontier = start
        while frontier:
            nxt = 0
            m = frontier
            while m:
                low = m & -m
                nxt |= adj[low.bit_length() - 1]
                m ^= low
            frontier = nxt & mask & ~seen
            seen |= frontier
        return seen == mask

    def covers(mask):
        return all(mask & bm for bm in block_mask)

    good = [m for m in range(1, full + 1) if covers(m) and connected(m)]
    good_set = set(good)
    minimal = []
    for m in good:
        rest = m
        is_min = True
        while rest:
            low = rest & -rest
            if (m ^ low) in good_set:
                is_min = False
                break
            rest ^= low
        if is_min:
            minimal.append(m)
    return minimal


def brute_force_max_partitions(placements: Sequence[NodePlacement], grid: BlockGrid,
                               graph: DeploymentGraph, max_nodes: int = 16
                               ) -> Tuple[int, List[List[int]]]:
    """Exact maximum number of pairwise disjoint connected 1-covers.

    Enumerates every node subset, so it refuses instances with more than
    `max_nodes` nodes. Returns (K*, witness covers).
    """
    n = len(placements)
    if n > max_nodes:
        raise InstanceTooLarge(f"{n} nodes exceeds the exhaustive-search limit of {max_nodes}")
    block_mask = [0] * grid.n_blocks
    for p in placements:
        block_mask[p.block_id] |= 1 << p.node_id
    if any(bm == 0 for bm in block_mask):
        return 0, []
    adj = [0] * n
    for i, j in graph.edges():
        adj[i] |= 1 << j
        adj[j] |= 1 << i

    covers = sorted(_minimal_covers(n, block_mask, adj), key=lambda m: (bin(m).count("1"), m))
    best: List[int] = []

    def bound(used):
        return min(bin(bm & ~used).count("1") for bm in block_mask)

    def search(start, used, chosen):
        nonlocal best
        if len(chosen) > len(best):
            best = list(chosen)
        if len(chosen) + bound(used) <= len(best):
            return
        for k in range(start, len(covers)):
            c = covers[k]
            if c & used:
                continue
            chosen.append(c)
            search(k + 1, used | c, chosen)
            chosen.pop()
            if len(chosen) + bound(used) <= len(best):
                return

    search(0, 0, [])
    witness = [[i for i in range(n) if c >> i & 1] for c in best]
    return len(best), witness
