"""
Local repair of a partition after a single member fails.

The parent and children of the failed node f (the set S_i) notice the
failure. A temporary coordinator is chosen: the smallest-id child when f
led the partition, otherwise f's parent. Starting from the coordinator
the repair set `temp` grows one wave at a time. Each participant proposes
orphaned S_i members it can reach, then free nodes in blocks that still
need restoring, and, only if it has neither, its highest-degree free
neighbour as a bridge. The repair succeeds once every S_i member is
reattached and every block is covered again.
"""

from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Sequence, Set

from .geometry import DeploymentGraph, NodePlacement
from .protocol import Partition


class RecoveryFailed(Exception):
    """Raised when a partition cannot be repaired around a fault."""


@dataclass(frozen=True)
class FaultEvent:
    node_id: int
    time: int
    partition_id: int


@dataclass
class RecoveryContext:
    leader_temp: int
    S_i: FrozenSet[int]
    B_S: Dict[int, int]  # block -> 0 (needs restoring) / 1 (restored)
    temp: List[int] = field(default_factory=list)


@dataclass
class RecoveryResult:
    partition_id: int
    fault: int
    recovered: bool
    partition: Partition  # repaired partition, or the original one on failure
    recruited: List[int]
    messages: Counter  # sender -> transmissions
    waves: int
    reason: str = ""

    @property
    def n_messages(self) -> int:
        return sum(self.messages.values())

    def record(self, time) -> dict:
        return {
            "time": time,
            "partition_id": self.partition_id,
            "fault": self.fault,
            "outcome": "FaultRecovered" if self.recovered else "RecoveryFailed",
            "recruited": sorted(self.recruited),
            "messages": self.n_messages,
        }


def detect_fault(partition: Partition, f: int) -> FrozenSet[int]:
    """Nodes that notice f's failure: its tree parent (if any) and children."""
    if f not in partition.members:
        raise ValueError(f"node {f} is not a member of partition {partition.partition_id}")
    parent = partition.parent_of[f]
    s = set(partition.children_of(f))
    if parent is not None:
        s.add(parent)
    return frozenset(s)


def select_temp_leader(partition: Partition, f: int, S_i) -> int:
    if not S_i:
        raise RecoveryFailed(f"node {f} has no parent or children to take over")
    if f == partition.leader:
        return min(partition.children_of(f))
    return partition.parent_of[f]


def compute_restore_blocks(f: int, S_i, leader_temp: int,
                           placements: Sequence[NodePlacement]) -> Dict[int, int]:
    """Blocks of f and S_i, minus the coordinator's own block, all flagged 0."""
    blocks = {placements[v].block_id for v in set(S_i) | {f}}
    blocks.discard(placements[leader_temp].block_id)
    return {b: 0 for b in sorted(blocks)}


def _tree_component(parent_of: Dict[int, Optional[int]], root: int, removed: int) -> Set[int]:
    children: Dict[int, List[int]] = {}
    for v, p in parent_of.items():
        if p is not None:
            children.setdefault(p, []).append(v)
    comp, stack = set(), [root]
    while stack:
        v = stack.pop()
        if v == removed or v in comp:
            continue
        comp.add(v)
        stack.extend(children.get(v, ()))
    return comp


def _connected(nodes: Set[int], graph: DeploymentGraph) -> bool:
    if not nodes:
        return False
    start = next(iter(nodes))
    seen, stack = {start}, [start]
    while stack:
        v = stack.pop()
        for w in graph.neighbors(v):
            if w in nodes and w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == len(nodes)


def recover(partition: Partition, f: int, free_nodes, graph: DeploymentGraph,
            placements: Sequence[NodePlacement], n_blocks: int,
            max_waves: Optional[int] = None) -> RecoveryResult:
    """Repair `partition` after member f fails, recruiting only from `free_nodes`.

    Never raises for an unrecoverable fault; returns recovered=False with
    the original partition instead, having consumed no free node.
    """
    msgs: Counter = Counter()
    pid = partition.partition_id

    def failed(reason, waves=0):
        return RecoveryResult(pid, f, False, partition, [], msgs, waves, reason)

    S_i = detect_fault(partition, f)
    try:
        leader_temp = select_temp_leader(partition, f, S_i)
    except RecoveryFailed as e:
        return failed(str(e))
    ctx = RecoveryContext(leader_temp, S_i, compute_restore_blocks(f, S_i, leader_temp, placements),
                          [leader_temp])

    parent_of = partition.parent_of
    new_leader = leader_temp if f == partition.leader else partition.leader
    new_parent: Dict[int, Optional[int]] = {}
    block = {p.node_id: p.block_id for p in placements}
    free = set(free_nodes) - partition.members
    degree = graph.degree

    # the piece of the old tree still attached to the coordinator
    reached = _tree_component(parent_of, new_leader, f)
    if f == partition.leader:
        new_parent[leader_temp] = None
    in_temp = {leader_temp}
    recruited: List[int] = []

    def update_blocks():
        covered = {block[v] for v in reached}
        for b in ctx.B_S:
            if b in covered:
                ctx.B_S[b] = 1

    def done():
        return all(ctx.B_S.values()) and not (S_i - reached)

    update_blocks()
    waves = 0
    while not done():
        if max_waves is not None and waves >= max_waves:
            return failed("wave limit reached", waves)
        waves += 1
        pending = [b for b, st in ctx.B_S.items() if st == 0]
        orphans = S_i - reached
        proposals: Dict[int, int] = {}  # node -> proposing participant
        for i in sorted(ctx.temp):
            nbrs = graph.neighbors(i)
            picks = [j for j in nbrs if j in orphans]
            for b in pending:
                opts = [j for j in nbrs if j in free and block[j] == b and j not in in_temp]
                if opts:
                    picks.append(min(opts, key=lambda u: (-sum(w in orphans for w in graph.neighbors(u)),
                                                          -degree[u], u)))
            if not picks:
                bridge = [j for j in nbrs if j in free and j not in in_temp]
                if bridge:
                    picks.append(min(bridge, key=lambda u: (-degree[u], u)))
            if i != leader_temp:
                msgs[i] += 1  # Selectlist to leader_temp
            for j in picks:
                proposals.setdefault(j, i)

        if not proposals:
            msgs[leader_temp] += 1
            return failed("repair set cannot grow", waves)

        for j in sorted(proposals):
            i = proposals[j]
            msgs[leader_temp] += 1  # Recruit / reattach order
            if j in S_i:
                new_parent[j] = i
                reached |= _tree_component(parent_of, j, f)
            else:
                new_parent[j] = i
                recruited.append(j)
                free.discard(j)
                reached.add(j)
            in_temp.add(j)
            ctx.temp.append(j)
        update_blocks()
        msgs[leader_temp] += 1  # temp[] and B_S[] to participants

    # drop recruits that turned out unnecessary, newest first
    members = (partition.members - {f}) | set(recruited)
    for r in reversed(list(recruited)):
        trial = members - {r}
        if any(new_parent.get(v) == r for v in trial):
            continue
        if len({block[v] for v in trial}) == n_blocks and _connected(trial, graph):
            members = trial
            recruited.remove(r)
            del new_parent[r]

    merged = {v: parent_of[v] for v in members if v in parent_of}
    merged.update({v: p for v, p in new_parent.items() if v in members})
    repaired = Partition.build(pid, new_leader, merged, block, n_blocks)
    for v in _forwarders(repaired):
        msgs[v] += 1  # FaultRecovered flood
    return RecoveryResult(pid, f, True, repaired, recruited, msgs, waves)


def _forwarders(p: Partition) -> List[int]:
    has_child = {q for _, q in p.parent if q is not None}
    return sorted(v for v in p.members if v == p.leader or v in has_child)
