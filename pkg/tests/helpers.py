"""Hand-built instances for the unit tests."""

from coverpart.geometry import BlockGrid, DeploymentGraph, NodePlacement, assign_block
from coverpart.protocol import Partition


def placements_at(points, grid):
    return [NodePlacement(i, x, y, assign_block(x, y, grid)) for i, (x, y) in enumerate(points)]


def graph_from_edges(n, edges):
    adj = [set() for _ in range(n)]
    for i, j in edges:
        adj[i].add(j)
        adj[j].add(i)
    return DeploymentGraph(tuple(tuple(sorted(a)) for a in adj))


def placements_in_blocks(blocks, grid):
    """One node per entry of `blocks`, placed at that block's centre."""
    pts = []
    for b in blocks:
        r, c = divmod(b, grid.cols)
        pts.append(((c + 0.5) * grid.block_side, (r + 0.5) * grid.block_side))
    return placements_at(pts, grid)


def tree(pid, leader, parent_of, placements, n_blocks):
    blocks = {p.node_id: p.block_id for p in placements}
    return Partition.build(pid, leader, parent_of, blocks, n_blocks)


# acceptance verdicts, printed in the terminal summary
VERDICTS = {}


def report(number, title, ok, detail):
    line = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
    VERDICTS[number] = line
    print(line)
    return ok
