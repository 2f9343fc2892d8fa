"""
Block grid, random deployment and the communication graph.

The monitored region is a rows x cols grid of square blocks whose side is
min(sensing, transmission) / sqrt(2). Any sensor inside a block covers all
of it, and any two sensors in the same block can talk to each other.
"""

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple

import numpy as np

# relative slack on the closed-ball test so that block-diagonal pairs
# (distance == R up to rounding) stay adjacent
_RANGE_RTOL = 1e-9


class InvalidParameter(ValueError):
    """Raised when a geometric parameter is out of its domain."""


@dataclass(frozen=True)
class BlockGrid:
    rows: int
    cols: int
    block_side: float

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise InvalidParameter(f"grid must be at least 1x1, got {self.rows}x{self.cols}")
        if not self.block_side > 0:
            raise InvalidParameter(f"block_side must be positive, got {self.block_side}")

    @property
    def n_blocks(self) -> int:
        return self.rows * self.cols

    @property
    def width(self) -> float:
        return self.cols * self.block_side

    @property
    def height(self) -> float:
        return self.rows * self.block_side

    @classmethod
    def from_ranges(cls, rows: int, cols: int, sensing_range: float, transmission_range: float):
        return cls(rows, cols, block_side(sensing_range, transmission_range))


@dataclass(frozen=True)
class NodePlacement:
    node_id: int
    x: float
    y: float
    block_id: int


@dataclass(frozen=True)
class DeploymentGraph:
    adjacency: Tuple[Tuple[int, ...], ...]

    @property
    def degree(self) -> Tuple[int, ...]:
        return tuple(len(a) for a in self.adjacency)

    @property
    def n(self) -> int:
        return len(self.adjacency)

    def neighbors(self, i: int) -> Tuple[int, ...]:
        return self.adjacency[i]

    def edges(self):
        for i, nbrs in enumerate(self.adjacency):
            for j in nbrs:
                if i < j:
                    yield i, j


def block_side(sensing_range: float, transmission_range: float) -> float:
    if not (sensing_range > 0 and transmission_range > 0):
        raise InvalidParameter(
            f"ranges must be positive, got S={sensing_range}, T={transmission_range}")
    return min(sensing_range, transmission_range) / math.sqrt(2)


def assign_block(x: float, y: float, grid: BlockGrid) -> int:
    """Row-major block index of point (x, y).

    A point lying exactly on an interior block boundary belongs to the
    cell with the higher index (floor semantics).
    """
    if not (0 <= x < grid.width and 0 <= y < grid.height):
        raise InvalidParameter(
            f"point ({x}, {y}) outside region [0, {grid.width}) x [0, {grid.height})")
    col = min(int(math.floor(x / grid.block_side)), grid.cols - 1)
    row = min(int(math.floor(y / grid.block_side)), grid.rows - 1)
    return row * grid.cols + col


def deploy(n: int, grid: BlockGrid, seed) -> List[NodePlacement]:
    """Place n nodes i.i.d. uniformly over the region.

    `seed` is anything accepted by numpy.random.default_rng (int or a
    sequence of ints); the result is a pure function of (n, grid, seed).
    """
    if n < 1:
        raise InvalidParameter(f"need at least one node, got n={n}")
    rng = np.random.default_rng(seed)
    xs = rng.uniform(0.0, grid.width, size=n)
    ys = rng.uniform(0.0, grid.height, size=n)
    # uniform() can round up to the open upper bound
    xs = np.minimum(xs, np.nextafter(grid.width, 0.0))
    ys = np.minimum(ys, np.nextafter(grid.height, 0.0))
    return [
        NodePlacement(i, float(x), float(y), assign_block(float(x), float(y), grid))
        for i, (x, y) in enumerate(zip(xs, ys))
    ]


def build_graph(placements: Sequence[NodePlacement], transmission_range: float) -> DeploymentGraph:
    """Unit-disk graph: i ~ j iff dist(i, j) <= transmission_range (closed ball)."""
    if not placements:
        raise InvalidParameter("cannot build a graph over zero placements")
    for k, p in enumerate(placements):
        if p.node_id != k:
            raise InvalidParameter("placements must be indexed 0..n-1 in order")
    pts = np.array([(p.x, p.y) for p in placements], dtype=float)
    diff = pts[:, None, :] - pts[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    limit = (transmission_range * (1.0 + _RANGE_RTOL)) ** 2
    adj = d2 <= limit
    np.fill_diagonal(adj, False)
    return DeploymentGraph(tuple(tuple(int(j) for j in np.flatnonzero(row)) for row in adj))


def block_occupancy(placements: Iterable[NodePlacement], grid: BlockGrid) -> List[int]:
    counts = [0] * grid.n_blocks
    for p in placements:
        if not 0 <= p.block_id < grid.n_blocks:
            raise InvalidParameter(f"node {p.node_id} has invalid block {p.block_id}")
        counts[p.block_id] += 1
    return counts


# -- deployment export / import ------------------------------------------------

DEPLOYMENT_FIELDS = ("node_id", "x", "y", "block_id")


def deployment_to_csv(placements: Sequence[NodePlacement]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(DEPLOYMENT_FIELDS)
    for p in placements:
        w.writerow([p.node_id, repr(p.x), repr(p.y), p.block_id])
    return buf.getvalue()


def deployment_from_csv(text: str) -> List[NodePlacement]:
    """Parse the output of deployment_to_csv. Errors name the offending line."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != DEPLOYMENT_FIELDS:
        raise ValueError(f"line 1: expected header {','.join(DEPLOYMENT_FIELDS)}, got {header}")
    out = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(DEPLOYMENT_FIELDS):
            raise ValueError(f"line {lineno}: expected {len(DEPLOYMENT_FIELDS)} fields, got {len(row)}")
        try:
            out.append(NodePlacement(int(row[0]), float(row[1]), float(row[2]), int(row[3])))
        except ValueError as e:
            raise ValueError(f"line {lineno}: {e}") from None
    return out
