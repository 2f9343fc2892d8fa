"""
Acceptance suite. Each test prints one verdict line; the lines are
repeated under "acceptance criteria" in the pytest terminal summary.
"""

import random
import time
from collections import defaultdict

import pytest

from coverpart.cli import main
from coverpart.engine import (EnergyModel, Network, SimConfig, inject_fault, make_deployment,
                              partition_deployment, run_lifetime)
from coverpart.geometry import BlockGrid, build_graph, deploy
from coverpart.metrics import mean, messages_per_node
from coverpart.oracle import brute_force_max_partitions, verify_cover
from coverpart.protocol import run_partitioning

from helpers import report

SWEEP_SEED = 2024
SWEEP_TRIALS = {2: 167, 3: 167, 4: 167, 5: 167, 6: 166, 7: 166}  # 1000 in total
TIME_LIMIT = 120.0


@pytest.fixture(scope="module")
def sweep():
    """Partition 1000 seeded deployments at 10 nodes per block and check every output."""
    start = time.perf_counter()
    out = defaultdict(list)
    for side, trials in SWEEP_TRIALS.items():
        cfg = SimConfig(rows=side, cols=side, n=10 * side * side, l_prob=0.05, seed=SWEEP_SEED)
        for t in range(trials):
            dep = make_deployment(cfg, t)
            res = partition_deployment(cfg, dep, t)
            problems = []
            used = set()
            for p in res.partitions:
                check = verify_cover(p.members, dep.grid, dep.graph, dep.placements)
                if not check.ok:
                    problems.append(f"partition {p.partition_id}: {check.describe()}")
                if used & p.members:
                    problems.append(f"partition {p.partition_id} overlaps another")
                used |= p.members
            if len(res.partitions) > min(dep.occupancy):
                problems.append(f"{len(res.partitions)} partitions > bound {min(dep.occupancy)}")
            out[side].append({
                "trial": t,
                "problems": problems,
                "rounds": res.rounds,
                "max_stalls": max(res.stalls.values(), default=0),
                "recount": messages_per_node(res.trace, cfg.n),
                "live": sum(res.sent) / cfg.n,
            })
    return dict(out), time.perf_counter() - start


def test_criterion_1_correctness_sweep(sweep):
    results, elapsed = sweep
    total = sum(len(v) for v in results.values())
    bad = [(side, r["trial"], r["problems"]) for side, rs in results.items() for r in rs
           if r["problems"]]
    ok = total == 1000 and not bad and elapsed < TIME_LIMIT
    report(1, "correctness sweep", ok,
           f"{total} trials over 2x2..7x7, {len(bad)} violating trials, {elapsed:.1f}s "
           f"(limit {TIME_LIMIT:.0f}s)")
    assert total == 1000
    assert not bad, bad[:5]
    assert elapsed < TIME_LIMIT


def test_criterion_2_oracle_equivalence():
    rnd = random.Random(7)
    shapes = [(1, 1), (1, 2), (2, 1), (2, 2)]
    instances = violations = optimal = 0
    for k in range(300):
        rows, cols = rnd.choice(shapes)
        n = rnd.randint(1, 12)
        grid = BlockGrid.from_ranges(rows, cols, 10, 10)
        pl = deploy(n, grid, [7, k])
        gr = build_graph(pl, 10)
        res = run_partitioning(pl, grid, gr, rnd.choice([0.1, 0.25, 0.5]), [7, k, 1])
        k_star, _ = brute_force_max_partitions(pl, grid, gr)
        instances += 1
        if len(res.partitions) > k_star:
            violations += 1
        violations += sum(not verify_cover(p.members, grid, gr, pl).ok for p in res.partitions)
        optimal += len(res.partitions) == k_star
    ok = instances >= 200 and violations == 0
    report(2, "oracle equivalence", ok,
           f"{instances} instances (n<=12, grids<=2x2), {violations} violations, "
           f"protocol reached K* on {optimal}")
    assert instances >= 200 and violations == 0


def test_criterion_3_rounds_trend(sweep):
    results, _ = sweep
    sides = sorted(results)
    means = [mean(r["rounds"] for r in results[s]) for s in sides]
    monotone = all(a <= b for a, b in zip(means, means[1:]))
    within = all(m <= s * s for m, s in zip(means, sides))
    enough = all(len(results[s]) >= 100 for s in sides)
    over = [(s, r["trial"], r["rounds"], r["max_stalls"]) for s in sides for r in results[s]
            if r["rounds"] > s * s]
    explained = all(rounds <= s * s + stalls for s, _, rounds, stalls in over)
    ok = monotone and within and enough and explained
    trend = ", ".join(f"{s}x{s}:{m:.2f}" for s, m in zip(sides, means))
    report(3, "rounds trend", ok,
           f"mean rounds {trend}; non-decreasing={monotone}; mean<=m on every grid={within}; "
           f"{len(over)} single trials above m, all from contention stalls={explained}")
    assert enough and monotone and within and explained


def test_criterion_4_fault_recovery():
    rnd = random.Random(11)
    faults = leader_faults = recovered = failed = violations = 0
    for trial in range(400):
        side = rnd.choice([2, 3, 4, 5])
        cfg = SimConfig(rows=side, cols=side, n=rnd.choice([10, 15, 20]) * side * side,
                        l_prob=0.05, seed=404)
        dep = make_deployment(cfg, trial)
        res = partition_deployment(cfg, dep, trial)
        for p in res.partitions:
            f = rnd.choice(sorted(p.members))
            net = Network(dep, res.partitions, res.free, cfg.energy, recovery_enabled=True)
            before = {pid: q for pid, q in net.partitions.items()}
            free_before = set(net.free)
            _, out = inject_fault(net, f, 0)
            faults += 1
            leader_faults += f == p.leader
            others_same = all(net.partitions[pid] == q for pid, q in before.items()
                              if pid != p.partition_id)
            if out.recovered:
                recovered += 1
                q = net.partitions[p.partition_id]
                good = (verify_cover(q.members, dep.grid, dep.graph, dep.placements).ok
                        and f not in q.members
                        and set(out.recruited) <= free_before
                        and net.free == free_before - set(out.recruited)
                        and others_same)
            else:
                failed += 1
                good = (net.partitions[p.partition_id] == before[p.partition_id]
                        and net.free == free_before and others_same
                        and net.retired == {p.partition_id})
            violations += not good
        if faults >= 600:
            break
    ok = faults >= 500 and violations == 0
    report(4, "fault recovery soundness", ok,
           f"{faults} faults ({leader_faults} on leaders): {recovered} FaultRecovered, "
           f"{failed} RecoveryFailed, {violations} violations")
    assert faults >= 500 and violations == 0


def test_criterion_5_lifetime_gain():
    cfg = SimConfig(rows=2, cols=2, n=120, l_prob=0.02, seed=11,
                    energy=EnergyModel(100, 1, 0))
    gains, headroom = [], []
    for t in range(40):
        dep = make_deployment(cfg, t)
        res = partition_deployment(cfg, dep, t)
        if not res.partitions:
            continue
        headroom.append(min(dep.occupancy) / len(res.partitions))
        off, on = run_lifetime(cfg, t)
        gains.append(on.epochs / off.epochs - 1.0)
    dense = min(headroom) >= 3.0
    gain = mean(gains)
    ok = dense and len(gains) >= 30 and gain >= 0.25
    report(5, "lifetime gain", ok,
           f"2x2, 30 nodes/block, {len(gains)} paired trials, min occupancy headroom "
           f"{min(headroom):.2f}x, mean improvement {gain * 100:.1f}% (target >= 25%)")
    assert dense and len(gains) >= 30 and gain >= 0.25


def _cli_bytes(tmp_path, capsys, tag, argv, files=()):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    blobs = [out.encode(), err.encode()] + [(tmp_path / f).read_bytes() for f in files]
    return code, blobs


def test_criterion_6_cli_determinism(tmp_path, capsys):
    commands = {
        "partition": (["partition", "--grid", "3x3", "--nodes", 90, "--seed", 42, "--trials", 5,
                       "--lifetime", "on", "--out", tmp_path / "r.csv",
                       "--trace", tmp_path / "t.json", "--partitions", tmp_path / "p.json",
                       "--deployment", tmp_path / "d.csv"],
                      ["r.csv", "t.json", "p.json", "d.csv"]),
        "partition-json": (["partition", "--grid", "2x3", "--nodes", 60, "--seed", 1,
                            "--trials", 3, "--format", "json"], []),
        "sweep": (["sweep", "--grids", "2x2..4x4", "--trials", 5, "--seed", 3,
                   "--lifetime", "on"], []),
        "lifetime": (["lifetime", "--grid", "3x3", "--nodes-per-block", 12, "--trials", 4,
                      "--energy", "40:1:0.05", "--format", "json"], []),
        "verify": (["verify", tmp_path / "p.json", tmp_path / "d.csv"], []),
    }
    differing = []
    for name, (argv, files) in commands.items():
        first = _cli_bytes(tmp_path, capsys, name, argv, files)
        second = _cli_bytes(tmp_path, capsys, name, argv, files)
        if first != second or first[0] != 0:
            differing.append(name)
    ok = not differing
    report(6, "CLI determinism", ok,
           f"{len(commands)} commands run twice, byte-identical outputs for "
           f"{len(commands) - len(differing)}" + (f"; differing: {differing}" if differing else ""))
    assert not differing


def test_criterion_7_message_accounting(sweep):
    results, _ = sweep
    total = sum(len(v) for v in results.values())
    mismatched = [(s, r["trial"]) for s, rs in results.items() for r in rs
                  if r["recount"] != r["live"]]
    ok = total == 1000 and not mismatched
    report(7, "message accounting", ok,
           f"trace recount equals live counter exactly on {total - len(mismatched)}/{total} trials")
    assert not mismatched
