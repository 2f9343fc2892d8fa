"""
End-to-end scenarios: deploy, partition, then run the partitions round
robin until none is left, with or without local fault repair.

Energy model: a node only spends energy while its partition is the
active one (active_cost per epoch) and when it transmits (message_cost
per transmission). A node whose residual energy can no longer pay for an
epoch has failed.
"""

from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Set, Tuple

from .fault import FaultEvent, RecoveryResult, recover
from .geometry import (BlockGrid, DeploymentGraph, NodePlacement, block_occupancy,
                       build_graph, deploy)
from .messages import Trace
from .metrics import (max_partitions_upper_bound, mean, messages_per_node,
                      partition_diameter, rounds_to_complete, tree_depth)
from .protocol import Partition, PartitioningResult, run_partitioning


class InvalidConfig(ValueError):
    def __init__(self, field_name: str, msg: str):
        super().__init__(f"{field_name}: {msg}")
        self.field = field_name


@dataclass
class EnergyModel:
    initial_energy: float = 100.0
    active_cost_per_epoch: float = 1.0
    message_cost: float = 0.0


@dataclass
class SimConfig:
    rows: int = 3
    cols: int = 3
    n: int = 90
    sensing_range: float = 10.0
    transmission_range: float = 10.0
    l_prob: float = 0.05
    seed: int = 0
    trials: int = 1
    energy: EnergyModel = field(default_factory=EnergyModel)
    recovery_enabled: bool = True

    def validate(self) -> "SimConfig":
        for name in ("rows", "cols", "n", "trials"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise InvalidConfig(name, f"must be a positive integer, got {v!r}")
        for name in ("sensing_range", "transmission_range"):
            if not getattr(self, name) > 0:
                raise InvalidConfig(name, f"must be positive, got {getattr(self, name)!r}")
        if not 0 < self.l_prob < 1:
            raise InvalidConfig("l_prob", f"must lie in (0, 1), got {self.l_prob!r}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise InvalidConfig("seed", f"must be a non-negative integer, got {self.seed!r}")
        e = self.energy
        if not e.initial_energy > 0:
            raise InvalidConfig("initial_energy", "must be positive")
        if not e.active_cost_per_epoch > 0:
            raise InvalidConfig("active_cost_per_epoch", "must be positive")
        if e.message_cost < 0:
            raise InvalidConfig("message_cost", "must be non-negative")
        return self

    @property
    def grid(self) -> BlockGrid:
        return BlockGrid.from_ranges(self.rows, self.cols, self.sensing_range,
                                     self.transmission_range)


@dataclass
class Deployment:
    grid: BlockGrid
    placements: List[NodePlacement]
    graph: DeploymentGraph
    occupancy: List[int]


def make_deployment(config: SimConfig, trial: int) -> Deployment:
    grid = config.grid
    placements = deploy(config.n, grid, [config.seed, trial, 0])
    graph = build_graph(placements, config.transmission_range)
    return Deployment(grid, placements, graph, block_occupancy(placements, grid))


def partition_deployment(config: SimConfig, dep: Deployment, trial: int) -> PartitioningResult:
    return run_partitioning(dep.placements, dep.grid, dep.graph, config.l_prob,
                            [config.seed, trial, 1])


# -- post-construction network ------------------------------------------------

class Network:
    """Partitions, free pool, dead nodes and residual energy after construction."""

    def __init__(self, dep: Deployment, partitions: Sequence[Partition], free: Set[int],
                 energy: EnergyModel, recovery_enabled: bool,
                 sent: Optional[Sequence[int]] = None):
        self.dep = dep
        self.partitions: Dict[int, Partition] = {p.partition_id: p for p in partitions}
        self.order = sorted(self.partitions)
        self.retired: Set[int] = set()
        self.free = set(free)
        self.dead: Set[int] = set()
        self.energy_model = energy
        self.recovery_enabled = recovery_enabled
        self.energy = [float(energy.initial_energy)] * len(dep.placements)
        if sent is not None:
            for v, k in enumerate(sent):
                self.spend(v, k * energy.message_cost)
        self.owner: Dict[int, int] = {v: pid for pid, p in self.partitions.items() for v in p.members}
        self.trace = Trace()
        self.attempts = 0
        self.successes = 0

    def spend(self, v: int, amount: float):
        self.energy[v] = max(0.0, self.energy[v] - amount)

    def operational(self) -> List[int]:
        return [pid for pid in self.order if pid not in self.retired]

    def alive(self, v: int) -> bool:
        return v not in self.dead


def inject_fault(net: Network, node_id: int, time: int) -> Tuple[FaultEvent, Optional[RecoveryResult]]:
    """Fail an active member abruptly and, if enabled, repair its partition locally."""
    if node_id in net.dead:
        raise ValueError(f"node {node_id} is already dead")
    pid = net.owner.get(node_id)
    if pid is None or pid in net.retired:
        raise ValueError(f"node {node_id} is not a member of an operational partition")
    event = FaultEvent(node_id, time, pid)
    net.dead.add(node_id)
    net.free.discard(node_id)
    del net.owner[node_id]
    if not net.recovery_enabled:
        net.retired.add(pid)
        return event, None

    net.attempts += 1
    res = recover(net.partitions[pid], node_id, net.free, net.dep.graph, net.dep.placements,
                  net.dep.grid.n_blocks)
    for v, k in sorted(res.messages.items()):
        if v != node_id:
            net.spend(v, k * net.energy_model.message_cost)
    net.trace.recoveries.append(res.record(time))
    if res.recovered:
        net.successes += 1
        net.partitions[pid] = res.partition
        for r in res.recruited:
            net.free.discard(r)
            net.owner[r] = pid
    else:
        net.retired.add(pid)
    return event, res


@dataclass
class LifetimeResult:
    epochs: int
    attempts: int = 0
    successes: int = 0
    recoveries: List[Dict[str, Any]] = field(default_factory=list)


def simulate_lifetime(dep: Deployment, partitions: Sequence[Partition], free: Set[int],
                      energy: EnergyModel, recovery_enabled: bool,
                      sent: Optional[Sequence[int]] = None,
                      max_epochs: int = 10_000_000) -> LifetimeResult:
    """Round-robin activation, one partition per epoch, until none is operational."""
    net = Network(dep, partitions, free, energy, recovery_enabled, sent)
    cost = energy.active_cost_per_epoch
    epoch = 0
    turn = 0

    def process_deaths(pid):
        # simultaneous exhaustions are serialised as single faults, weakest first
        while pid not in net.retired:
            dying = [v for v in net.partitions[pid].members if net.energy[v] < cost]
            if not dying:
                return
            f = min(dying, key=lambda v: (net.energy[v], v))
            inject_fault(net, f, epoch)
        for v in net.partitions[pid].members:
            if net.energy[v] < cost:
                net.dead.add(v)

    while True:
        if not net.operational():
            break
        pid = _next_in_cycle(net.order, net.retired, turn)
        turn = net.order.index(pid) + 1
        process_deaths(pid)
        if pid in net.retired:
            continue
        for v in net.partitions[pid].members:
            net.energy[v] -= cost
        epoch += 1
        if epoch >= max_epochs:
            raise RuntimeError("lifetime simulation exceeded max_epochs")
        process_deaths(pid)

    return LifetimeResult(epoch, net.attempts, net.successes, net.trace.recoveries)


def _next_in_cycle(order: Sequence[int], retired: Set[int], start: int) -> int:
    k = len(order)
    for step in range(k):
        pid = order[(start + step) % k]
        if pid not in retired:
            return pid
    raise RuntimeError("no operational partition")


# -- scenario -----------------------------------------------------------------

REPORT_COLUMNS = (
    "trial", "grid", "n", "l_prob", "partitions_found", "upper_bound", "rounds",
    "avg_msgs_per_node", "diameter_mean", "diameter_max",
    "lifetime_no_recovery", "lifetime_with_recovery",
    "leaders", "tree_depth_max", "recovery_attempts", "recovery_successes",
    "lifetime_ratio",
)


@dataclass
class TrialReport:
    trial: int
    grid: str
    n: int
    l_prob: float
    partitions_found: int
    upper_bound: int
    rounds: int
    avg_msgs_per_node: float
    diameter_mean: float
    diameter_max: int
    lifetime_no_recovery: int
    lifetime_with_recovery: int
    leaders: int
    tree_depth_max: int
    recovery_attempts: int
    recovery_successes: int
    lifetime_ratio: float
    live_msgs_per_node: float = 0.0
    diameters: List[int] = field(default_factory=list)

    def row(self) -> Dict[str, Any]:
        d = asdict(self)
        return {k: d[k] for k in REPORT_COLUMNS}


@dataclass
class SimReport:
    config: SimConfig
    trials: List[TrialReport]
    traces: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def partitions_found(self) -> float:
        return mean(t.partitions_found for t in self.trials)

    @property
    def rounds(self) -> float:
        return mean(t.rounds for t in self.trials)

    @property
    def avg_messages_per_node(self) -> float:
        return mean(t.avg_msgs_per_node for t in self.trials)

    @property
    def diameter_mean(self) -> float:
        return mean(t.diameter_mean for t in self.trials if t.partitions_found)

    @property
    def max_partition_diameter(self) -> int:
        return max((t.diameter_max for t in self.trials), default=0)

    @property
    def lifetime_epochs(self) -> float:
        return mean(t.lifetime_with_recovery for t in self.trials)

    def summary(self) -> Dict[str, Any]:
        trials = self.trials
        return {
            "grid": f"{self.config.rows}x{self.config.cols}",
            "blocks": self.config.rows * self.config.cols,
            "n": self.config.n,
            "l_prob": self.config.l_prob,
            "trials": len(trials),
            "partitions_found": round(self.partitions_found, 6),
            "upper_bound": round(mean(t.upper_bound for t in trials), 6),
            "rounds": round(self.rounds, 6),
            "avg_msgs_per_node": round(self.avg_messages_per_node, 6),
            "diameter_mean": round(self.diameter_mean, 6),
            "diameter_max": self.max_partition_diameter,
            "lifetime_no_recovery": round(mean(t.lifetime_no_recovery for t in trials), 6),
            "lifetime_with_recovery": round(mean(t.lifetime_with_recovery for t in trials), 6),
            "recovery_attempts": sum(t.recovery_attempts for t in trials),
            "recovery_successes": sum(t.recovery_successes for t in trials),
        }


def run_trial(config: SimConfig, trial: int, keep_trace: bool = False,
              lifetime: bool = True) -> Tuple[TrialReport, Optional[Dict[str, Any]]]:
    dep = make_deployment(config, trial)
    res = partition_deployment(config, dep, trial)
    diam = [partition_diameter(p, dep.graph) for p in res.partitions]
    depth = [tree_depth(p) for p in res.partitions]

    life_off = life_on = 0
    attempts = successes = 0
    recoveries: List[Dict[str, Any]] = []
    if lifetime and res.partitions:
        off = simulate_lifetime(dep, res.partitions, res.free, config.energy, False, res.sent)
        life_off = life_on = off.epochs
        if config.recovery_enabled:
            on = simulate_lifetime(dep, res.partitions, res.free, config.energy, True, res.sent)
            life_on, attempts, successes = on.epochs, on.attempts, on.successes
            recoveries = on.recoveries

    report = TrialReport(
        trial=trial,
        grid=f"{config.rows}x{config.cols}",
        n=config.n,
        l_prob=config.l_prob,
        partitions_found=len(res.partitions),
        upper_bound=max_partitions_upper_bound(dep.occupancy),
        rounds=rounds_to_complete(res.trace),
        avg_msgs_per_node=round(messages_per_node(res.trace, config.n), 6),
        diameter_mean=round(mean(diam), 6),
        diameter_max=max(diam, default=0),
        lifetime_no_recovery=life_off,
        lifetime_with_recovery=life_on,
        leaders=len(res.leaders),
        tree_depth_max=max(depth, default=0),
        recovery_attempts=attempts,
        recovery_successes=successes,
        lifetime_ratio=round(life_on / life_off, 6) if life_off else 0.0,
        live_msgs_per_node=sum(res.sent) / config.n,
        diameters=diam,
    )
    trace = None
    if keep_trace:
        trace = {"trial": trial, **res.trace.to_dict()}
        trace["recoveries"] = recoveries
    return report, trace


def run_scenario(config: SimConfig, keep_trace: bool = False, lifetime: bool = True) -> SimReport:
    config.validate()
    trials, traces = [], []
    for t in range(config.trials):
        rep, tr = run_trial(config, t, keep_trace, lifetime)
        trials.append(rep)
        if tr is not None:
            traces.append(tr)
    return SimReport(config, trials, traces)


def run_lifetime(config: SimConfig, trial: int = 0) -> Tuple[LifetimeResult, LifetimeResult]:
    """Paired lifetimes (without, with recovery) on one seeded deployment."""
    config.validate()
    dep = make_deployment(config, trial)
    res = partition_deployment(config, dep, trial)
    if not res.partitions:
        raise ValueError("partitioning produced no complete partition")
    off = simulate_lifetime(dep, res.partitions, res.free, config.energy, False, res.sent)
    on = simulate_lifetime(dep, res.partitions, res.free, config.energy, True, res.sent)
    return off, on
