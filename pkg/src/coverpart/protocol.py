"""
Round-synchronous construction of disjoint connected set covers.

Every elected leader grows a tree-shaped partition. One round is a full
cycle: Selectlist convergecast from the leaves to the leader, Selected
sent to the chosen free nodes, Confirm back from the nodes that join,
and an Include flood per joiner. A leader stops with Success(1) when its
partition covers every block and with Success(0) (dissolving the
partition) when no member has a free neighbour in an uncovered block.
"""

from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np

from .geometry import BlockGrid, DeploymentGraph, NodePlacement
from .messages import Candidate, Message, Trace, Variant


class Status(Enum):
    FREE = 0
    MEMBER = 1


class Role(Enum):
    NONE = 0
    LEADER = 1


class NoLeadersElected(RuntimeError):
    """No node drew r <= l_prob; the caller should redraw with a new seed."""


@dataclass(slots=True)
class NeighborInfo:
    block_id: int
    degree: int
    free: bool = True


@dataclass
class NodeState:
    node_id: int
    block_id: int
    degree: int
    neighbor_table: Dict[int, NeighborInfo]
    status: Status = Status.FREE
    role: Role = Role.NONE
    partition_id: Optional[int] = None
    parent: Optional[int] = None
    children: Set[int] = field(default_factory=set)
    covered_blocks: Set[int] = field(default_factory=set)
    members: Set[int] = field(default_factory=set)  # local view of own partition
    # static index over neighbor_table: block -> neighbour ids by (degree, id)
    by_block: Dict[int, List[int]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.by_block:
            table = self.neighbor_table
            for j in sorted(table, key=lambda u: (table[u].degree, u)):
                self.by_block.setdefault(table[j].block_id, []).append(j)

    def mark_neighbor(self, j: int, free: bool):
        info = self.neighbor_table.get(j)
        if info is not None:
            info.free = free

    def make_free(self):
        self.status = Status.FREE
        self.role = Role.NONE
        self.partition_id = None
        self.parent = None
        self.children = set()
        self.covered_blocks = set()
        self.members = set()


@dataclass(frozen=True)
class Partition:
    """A leader-rooted tree of members; `parent[leader]` is None."""
    partition_id: int
    leader: int
    parent: Tuple[Tuple[int, Optional[int]], ...]
    covered_blocks: FrozenSet[int]
    complete: bool

    @property
    def members(self) -> FrozenSet[int]:
        return frozenset(v for v, _ in self.parent)

    @property
    def parent_of(self) -> Dict[int, Optional[int]]:
        return dict(self.parent)

    @property
    def tree_edges(self) -> FrozenSet[Tuple[int, int]]:
        return frozenset((p, v) for v, p in self.parent if p is not None)

    def children_of(self, v: int) -> List[int]:
        return sorted(c for c, p in self.parent if p == v)

    @classmethod
    def build(cls, partition_id, leader, parent_of: Dict[int, Optional[int]],
              blocks: Dict[int, int], n_blocks: int):
        covered = frozenset(blocks[v] for v in parent_of)
        return cls(partition_id, leader, tuple(sorted(parent_of.items())),
                   covered, len(covered) == n_blocks)


def init_states(placements: Sequence[NodePlacement], graph: DeploymentGraph) -> List[NodeState]:
    deg = graph.degree
    return [
        NodeState(
            node_id=p.node_id,
            block_id=p.block_id,
            degree=deg[p.node_id],
            neighbor_table={j: NeighborInfo(placements[j].block_id, deg[j])
                            for j in graph.neighbors(p.node_id)},
        )
        for p in placements
    ]


def _derive(seed, *extra) -> List[int]:
    base = list(seed) if isinstance(seed, (list, tuple)) else [int(seed)]
    return base + [int(e) for e in extra]


def elect_leaders(nodes: Sequence[NodeState], l_prob: float, seed) -> List[int]:
    """Each node draws r ~ U[0, 1) and leads iff r <= l_prob."""
    if not 0 < l_prob < 1:
        raise ValueError(f"l_prob must lie in (0, 1), got {l_prob}")
    draws = np.random.default_rng(seed).random(len(nodes))
    leaders = [nd.node_id for nd, r in zip(nodes, draws) if r <= l_prob]
    if not leaders:
        raise NoLeadersElected(f"no leader among {len(nodes)} nodes at l_prob={l_prob}")
    appoint_leaders(nodes, leaders)
    return leaders


def appoint_leaders(nodes: Sequence[NodeState], leaders: Iterable[int]):
    """Make each given node the sole member and root of its own partition."""
    for i in leaders:
        nd = nodes[i]
        nd.role = Role.LEADER
        nd.status = Status.MEMBER
        nd.partition_id = i
        nd.parent = None
        nd.children = set()
        nd.covered_blocks = {nd.block_id}
        nd.members = {i}


def _best_per_block(cands: Iterable[Candidate]) -> List[Candidate]:
    best: Dict[int, Candidate] = {}
    for c in cands:
        cur = best.get(c.block_id)
        if cur is None or c.key() < cur.key():
            best[c.block_id] = c
    return [best[b] for b in sorted(best)]


def build_selectlist(node: NodeState) -> List[Candidate]:
    """Per uncovered block, the free neighbour of least degree (then least id)."""
    if node.status is not Status.MEMBER:
        raise ValueError(f"node {node.node_id} is not a partition member")
    out = []
    table = node.neighbor_table
    covered = node.covered_blocks
    for b in sorted(node.by_block):
        if b in covered:
            continue
        for j in node.by_block[b]:
            if table[j].free:
                out.append(Candidate(j, b, table[j].degree, node.node_id, node.degree))
                break
    return out


def aggregate_selectlists(node: NodeState, child_lists: Iterable[Sequence[Candidate]],
                          own: Optional[Sequence[Candidate]] = None) -> List[Candidate]:
    """Merge own and children's candidates, keeping one per block."""
    if own is None:
        own = build_selectlist(node)
    pool = list(own)
    for lst in child_lists:
        pool.extend(c for c in lst if c.block_id not in node.covered_blocks)
    return _best_per_block(pool)


def leader_select(leader: NodeState, merged: Sequence[Candidate], n_blocks: int) -> List[Message]:
    if leader.role is not Role.LEADER:
        raise ValueError(f"node {leader.node_id} is not a leader")
    pid = leader.partition_id
    if not merged:
        flag = 1 if len(leader.covered_blocks) == n_blocks else 0
        return [Message(Variant.SUCCESS, pid, leader.node_id, flag)]
    covered = frozenset(leader.covered_blocks)
    members = frozenset(leader.members)
    return [Message(Variant.SELECTED, pid, leader.node_id, (c, covered, members)) for c in merged]


def _offer_key(msg: Message):
    cand = msg.payload[0]
    return (cand.proposer_degree, msg.partition_id, cand.proposer)


def resolve_selected(node: NodeState, offers: Sequence[Message]) -> Tuple[int, int, Message]:
    """Join the offering partition whose proposing member has least degree.

    Ties go to the smaller partition id, then the smaller proposer id.
    """
    if node.status is not Status.FREE:
        raise ValueError(f"node {node.node_id} is already a member")
    if not offers:
        raise ValueError("no offers to resolve")
    win = min(offers, key=_offer_key)
    cand, covered, members = win.payload
    node.status = Status.MEMBER
    node.role = Role.NONE
    node.partition_id = win.partition_id
    node.parent = cand.proposer
    node.children = set()
    node.covered_blocks = set(covered) | {node.block_id}
    node.members = set(members) | {node.node_id}
    node.mark_neighbor(cand.proposer, False)
    return win.partition_id, cand.proposer, Message(Variant.CONFIRM, win.partition_id, node.node_id, node.node_id)


def apply_include(members: Iterable[NodeState], include_msg: Message, block_id: int):
    """Every member records node j (payload) as a member covering `block_id`. Idempotent."""
    j = include_msg.payload
    for nd in members:
        nd.members.add(j)
        nd.covered_blocks.add(block_id)
        nd.mark_neighbor(j, False)


class World:
    """All node states plus the bookkeeping of one partitioning run."""

    def __init__(self, placements: Sequence[NodePlacement], grid: BlockGrid,
                 graph: DeploymentGraph):
        self.placements = list(placements)
        self.grid = grid
        self.graph = graph
        self.nodes = init_states(placements, graph)
        self.active: List[int] = []
        self.round = 0
        self.trace = Trace()
        self.sent = [0] * len(self.nodes)  # live per-node transmission counter
        self.outcome: Dict[int, Tuple[int, int]] = {}  # leader -> (round, success flag)
        self.stalls: Dict[int, int] = defaultdict(int)  # rounds in which every offer was lost

    def start(self, leaders: Iterable[int]):
        self.active = sorted(leaders)
        _announce_status(self, self.active)

    def transmit(self, sender: int, variant: Variant, pid: int):
        self.sent[sender] += 1
        self.trace.add(self.round, sender, variant, pid)

    def transmit_many(self, senders: Sequence[int], variant: Variant, pid: int):
        sent = self.sent
        for v in senders:
            sent[v] += 1
        self.trace.add_many(self.round, senders, variant, pid)

    def members_of(self, leader: int) -> List[int]:
        return sorted(self.nodes[leader].members)

    def is_done(self) -> bool:
        return not self.active


def _depths(world: World, leader: int) -> Dict[int, int]:
    depth = {leader: 0}
    stack = [leader]
    while stack:
        v = stack.pop()
        for c in world.nodes[v].children:
            depth[c] = depth[v] + 1
            stack.append(c)
    return depth


def _path_to_leader(world: World, v: int) -> List[int]:
    path = [v]
    while world.nodes[path[-1]].parent is not None:
        path.append(world.nodes[path[-1]].parent)
    return path


def _forwarders(world: World, leader: int) -> List[int]:
    nodes = world.nodes
    return [v for v in world.members_of(leader) if v == leader or nodes[v].children]


def _flood(world: World, leader: int, variant: Variant, forwarders=None):
    pid = world.nodes[leader].partition_id
    world.transmit_many(forwarders if forwarders is not None else _forwarders(world, leader),
                        variant, pid)


def _announce_status(world: World, changed: Iterable[int]):
    """Round-boundary status exchange: neighbours of each changed node update their table."""
    nodes = world.nodes
    for v in changed:
        free = nodes[v].status is Status.FREE
        for k in world.graph.neighbors(v):
            nodes[k].neighbor_table[v].free = free


def step_round(world: World) -> World:
    """Advance every active leader by one full construction round (in place)."""
    if world.is_done():
        raise RuntimeError("partitioning already terminated")
    world.round += 1
    nodes = world.nodes
    n_blocks = world.grid.n_blocks
    offers: Dict[int, List[Message]] = defaultdict(list)
    still_active = []
    dissolved: List[int] = []

    for leader in world.active:
        members = world.members_of(leader)
        lnode = nodes[leader]
        pid = lnode.partition_id
        if len(lnode.covered_blocks) == n_blocks:
            _flood(world, leader, Variant.SUCCESS)
            world.outcome[leader] = (world.round, 1)
            continue

        depth = _depths(world, leader)
        lists: Dict[int, List[Candidate]] = {}
        for v in sorted(members, key=lambda u: (-depth[u], u)):
            nd = nodes[v]
            lists[v] = aggregate_selectlists(nd, [lists[c] for c in sorted(nd.children)])
            if v != leader:
                world.transmit(v, Variant.SELECTLIST, pid)

        msgs = leader_select(lnode, lists[leader], n_blocks)
        if msgs[0].variant is Variant.SUCCESS:
            _flood(world, leader, Variant.SUCCESS)
            world.outcome[leader] = (world.round, msgs[0].payload)
            dissolved.extend(members)
            continue

        for msg in msgs:
            cand = msg.payload[0]
            # leader -> ... -> proposer -> candidate
            world.transmit_many(_path_to_leader(world, cand.proposer)[::-1], Variant.SELECTED, pid)
            offers[cand.node_id].append(msg)
        still_active.append(leader)

    joined: Dict[int, List[int]] = defaultdict(list)
    for j in sorted(offers):
        pid, parent, confirm = resolve_selected(nodes[j], offers[j])
        world.transmit(j, Variant.CONFIRM, pid)
        world.transmit_many(_path_to_leader(world, parent)[:-1], Variant.CONFIRM, pid)
        nodes[parent].children.add(j)
        joined[pid].append(j)

    world.active = []
    for leader in still_active:
        lnode = nodes[leader]
        pid = lnode.partition_id
        new = sorted(joined.get(pid, ()))
        if not new:
            world.stalls[leader] += 1
        recipients = [nodes[v] for v in sorted(lnode.members.union(new))]
        fwd = [nd.node_id for nd in recipients if nd.node_id == leader or nd.children]
        for j in new:
            apply_include(recipients, Message(Variant.INCLUDE, pid, leader, j), nodes[j].block_id)
            _flood(world, leader, Variant.INCLUDE, fwd)
        if len(lnode.covered_blocks) == n_blocks:
            _flood(world, leader, Variant.SUCCESS)
            world.outcome[leader] = (world.round, 1)
        else:
            world.active.append(leader)

    for v in dissolved:
        nodes[v].make_free()
    _announce_status(world, sorted(dissolved + [j for js in joined.values() for j in js]))

    world.trace.snapshot(world.round, {
        nd.partition_id: nd.members
        for nd in nodes if nd.role is Role.LEADER and nd.status is Status.MEMBER
    })
    return world


@dataclass
class PartitioningResult:
    partitions: List[Partition]
    free: Set[int]
    trace: Trace
    rounds: int
    leaders: List[int]
    sent: List[int]
    outcome: Dict[int, Tuple[int, int]]
    stalls: Dict[int, int] = field(default_factory=dict)
    draws: int = 1


def extract_partitions(world: World) -> List[Partition]:
    out = []
    blocks = {p.node_id: p.block_id for p in world.placements}
    for leader, (_, flag) in sorted(world.outcome.items()):
        if flag != 1:
            continue
        parent_of = {v: world.nodes[v].parent for v in world.members_of(leader)}
        out.append(Partition.build(leader, leader, parent_of, blocks, world.grid.n_blocks))
    return out


def run_partitioning(placements: Sequence[NodePlacement], grid: BlockGrid,
                     graph: DeploymentGraph, l_prob: float, seed,
                     max_draws: int = 1000,
                     leaders: Optional[Sequence[int]] = None) -> PartitioningResult:
    """Elect leaders and run rounds until every leader has terminated.

    A draw that elects nobody is repeated with a derived seed. Passing
    `leaders` skips the election. Zero complete partitions is a valid result.
    """
    draw = 0
    if leaders is not None:
        if not leaders:
            raise NoLeadersElected("empty leader list")
        world = World(placements, grid, graph)
        leaders = sorted(set(leaders))
        appoint_leaders(world.nodes, leaders)
    else:
        for draw in range(max_draws):
            world = World(placements, grid, graph)
            try:
                leaders = elect_leaders(world.nodes, l_prob, _derive(seed, draw))
            except NoLeadersElected:
                continue
            break
        else:
            raise NoLeadersElected(f"no leader after {max_draws} draws")

    world.start(leaders)
    cap = len(world.nodes) + grid.n_blocks + 1
    while not world.is_done():
        if world.round >= cap:
            raise RuntimeError("partitioning failed to terminate")
        step_round(world)

    partitions = extract_partitions(world)
    used = set().union(*(p.members for p in partitions)) if partitions else set()
    free = {nd.node_id for nd in world.nodes if nd.node_id not in used}
    return PartitioningResult(partitions, free, world.trace, world.round, leaders,
                              world.sent, dict(world.outcome), dict(world.stalls), draw + 1)
