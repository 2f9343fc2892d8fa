"""Wire vocabulary and the per-run message trace."""

from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, NamedTuple, Optional


class Variant(str, Enum):
    SELECTLIST = "Selectlist"
    SELECTED = "Selected"
    CONFIRM = "Confirm"
    INCLUDE = "Include"
    SUCCESS = "Success"
    # fault recovery
    RECRUIT = "Recruit"
    RECOVERY_UPDATE = "RecoveryUpdate"
    FAULT_RECOVERED = "FaultRecovered"
    RECOVERY_FAILED = "RecoveryFailed"


class Candidate(NamedTuple):
    """One proposed inclusion: free node `node_id` in `block_id`, reached via `proposer`."""
    node_id: int
    block_id: int
    degree: int
    proposer: int
    proposer_degree: int

    def key(self):
        return (self.degree, self.node_id, self.proposer_degree, self.proposer)


@dataclass(frozen=True)
class Message:
    variant: Variant
    partition_id: int
    sender: int
    payload: Any = None


class TraceRecord(NamedTuple):
    round: int
    sender: int
    variant: Variant
    partition_id: int


_new_record = tuple.__new__


@dataclass
class Trace:
    """Link-level transmissions, membership snapshots and recovery outcomes.

    Every record is one transmission by `sender`; floods and multi-hop
    routes appear as one record per forwarding node.
    """
    records: List[TraceRecord] = field(default_factory=list)
    snapshots: List[Dict[str, Any]] = field(default_factory=list)
    recoveries: List[Dict[str, Any]] = field(default_factory=list)

    def add(self, rnd: int, sender: int, variant: Variant, partition_id: int):
        self.records.append(_new_record(TraceRecord, (rnd, sender, variant, partition_id)))

    def add_many(self, rnd: int, senders, variant: Variant, partition_id: int):
        self.records.extend(_new_record(TraceRecord, (rnd, s, variant, partition_id))
                            for s in senders)

    def snapshot(self, rnd: int, partitions: Dict[int, List[int]]):
        self.snapshots.append({
            "round": rnd,
            "partitions": {str(k): sorted(v) for k, v in sorted(partitions.items())},
        })

    def count_by_sender(self, variants: Optional[set] = None) -> Counter:
        return Counter(r.sender for r in self.records
                       if variants is None or r.variant in variants)

    def per_round_counts(self) -> List[Dict[str, Any]]:
        """Variant counts per (round, sender), in round then sender order."""
        acc: Dict[tuple, Counter] = {}
        for r in self.records:
            acc.setdefault((r.round, r.sender), Counter())[r.variant.value] += 1
        return [
            {"round": rnd, "sender": s, "counts": dict(sorted(c.items()))}
            for (rnd, s), c in sorted(acc.items())
        ]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "messages": self.per_round_counts(),
            "snapshots": self.snapshots,
            "recoveries": self.recoveries,
        }
