"""
Command line: partition, sweep, lifetime, verify.

Exit codes: 0 ok, 1 usage or configuration error, 2 runtime failure
(including a partition that fails verification).
"""

import argparse
import csv
import io
import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from .engine import (REPORT_COLUMNS, EnergyModel, InvalidConfig, SimConfig, make_deployment,
                     partition_deployment, run_scenario, run_trial)
from .geometry import BlockGrid, build_graph, deployment_from_csv, deployment_to_csv
from .oracle import verify_cover

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2

SCENARIO_KEYS = {
    "grid", "nodes", "nodes_per_block", "srange", "trange", "lprob", "target_leaders",
    "seed", "trials", "recovery", "energy", "format",
}

SWEEP_COLUMNS = (
    "grid", "blocks", "n", "l_prob", "trials", "partitions_found", "upper_bound", "rounds",
    "avg_msgs_per_node", "diameter_mean", "diameter_max",
    "lifetime_no_recovery", "lifetime_with_recovery", "recovery_attempts", "recovery_successes",
)

LIFETIME_COLUMNS = (
    "trial", "grid", "n", "l_prob", "partitions_found", "upper_bound",
    "lifetime_no_recovery", "lifetime_with_recovery", "improvement_ratio",
    "recovery_attempts", "recovery_successes",
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- scenario files and flag parsing ------------------------------------------

def read_scenario(path: str) -> Dict[str, str]:
    """Flat `key = value` file; `#` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in SCENARIO_KEYS:
            raise UsageError(f"{path}:{lineno}: unknown key '{key}'")
        out[key] = value
    return out


def parse_grid(text: str):
    try:
        r, c = text.lower().split("x")
        rows, cols = int(r), int(c)
    except ValueError:
        raise UsageError(f"grid: expected RxC, got {text!r}") from None
    if rows < 1 or cols < 1:
        raise UsageError(f"grid: dimensions must be positive, got {text!r}")
    return rows, cols


def parse_grid_range(text: str):
    """'2x2..7x7' (both sides grow together) or a comma list '2x2,3x4'."""
    if ".." in text:
        lo, hi = text.split("..", 1)
        (r0, c0), (r1, c1) = parse_grid(lo), parse_grid(hi)
        if r1 - r0 != c1 - c0:
            raise UsageError(f"grids: range {text!r} must grow rows and cols together")
        if r1 < r0:
            raise UsageError(f"grids: empty range {text!r}")
        return [(r0 + k, c0 + k) for k in range(r1 - r0 + 1)]
    grids = [parse_grid(g) for g in text.split(",") if g.strip()]
    if not grids:
        raise UsageError("grids: empty range")
    return grids


def parse_energy(text: str) -> EnergyModel:
    parts = text.split(":")
    if len(parts) not in (2, 3):
        raise UsageError(f"energy: expected E0:cost[:msgcost], got {text!r}")
    try:
        vals = [float(p) for p in parts]
    except ValueError:
        raise UsageError(f"energy: non-numeric value in {text!r}") from None
    return EnergyModel(*vals)


def _on_off(name, text) -> bool:
    t = str(text).lower()
    if t in ("on", "true", "yes", "1"):
        return True
    if t in ("off", "false", "no", "0"):
        return False
    raise UsageError(f"{name}: expected on|off, got {text!r}")


def _as(name, text, kind):
    try:
        return kind(text)
    except (TypeError, ValueError):
        raise UsageError(f"{name}: invalid value {text!r}") from None


def merged_settings(args) -> Dict[str, Any]:
    settings: Dict[str, Any] = read_scenario(args.config) if args.config else {}
    for key in SCENARIO_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            settings[key] = val
    return settings


def build_config(settings: Dict[str, Any], grid=None, need_nodes=True) -> SimConfig:
    if grid is None:
        if "grid" not in settings:
            raise UsageError("grid: missing (use --grid RxC)")
        grid = parse_grid(str(settings["grid"]))
    rows, cols = grid
    if "nodes" in settings and "nodes_per_block" in settings:
        raise UsageError("nodes: give either --nodes or --nodes-per-block, not both")
    if "nodes" in settings:
        n = _as("nodes", settings["nodes"], int)
    elif "nodes_per_block" in settings:
        n = _as("nodes_per_block", settings["nodes_per_block"], int) * rows * cols
    elif need_nodes:
        raise UsageError("nodes: missing (use --nodes N or --nodes-per-block D)")
    else:
        n = 10 * rows * cols
    if "lprob" in settings and "target_leaders" in settings:
        raise UsageError("lprob: give either --lprob or --target-leaders, not both")
    if "target_leaders" in settings:
        l_prob = _as("target_leaders", settings["target_leaders"], float) / max(n, 1)
    else:
        l_prob = _as("lprob", settings.get("lprob", 0.05), float)
    cfg = SimConfig(
        rows=rows, cols=cols, n=n,
        sensing_range=_as("srange", settings.get("srange", 10.0), float),
        transmission_range=_as("trange", settings.get("trange", 10.0), float),
        l_prob=l_prob,
        seed=_as("seed", settings.get("seed", 0), int),
        trials=_as("trials", settings.get("trials", 1), int),
        energy=parse_energy(str(settings["energy"])) if "energy" in settings else EnergyModel(),
        recovery_enabled=_on_off("recovery", settings.get("recovery", "on")),
    )
    try:
        return cfg.validate()
    except InvalidConfig as e:
        raise UsageError(str(e)) from None


# -- output -------------------------------------------------------------------

def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(round(v, 6))
    return str(v)


def render(rows: List[Dict[str, Any]], columns, fmt: str, meta: Optional[Dict[str, Any]] = None) -> str:
    if fmt == "json":
        doc = {"columns": list(columns), "rows": [{c: r.get(c) for c in columns} for r in rows]}
        if meta:
            doc.update(meta)
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def _emit(text: str, out: Optional[str]):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _config_meta(cfg: SimConfig) -> Dict[str, Any]:
    return {"config": {
        "grid": f"{cfg.rows}x{cfg.cols}", "n": cfg.n, "l_prob": cfg.l_prob, "seed": cfg.seed,
        "trials": cfg.trials, "srange": cfg.sensing_range, "trange": cfg.transmission_range,
        "energy": [cfg.energy.initial_energy, cfg.energy.active_cost_per_epoch,
                   cfg.energy.message_cost],
        "recovery": cfg.recovery_enabled,
    }}


def partitions_document(cfg: SimConfig, trial: int = 0):
    """(partition JSON document, deployment CSV) for one seeded trial."""
    dep = make_deployment(cfg, trial)
    res = partition_deployment(cfg, dep, trial)
    doc = {
        "grid": {"rows": dep.grid.rows, "cols": dep.grid.cols, "block_side": dep.grid.block_side},
        "transmission_range": cfg.transmission_range,
        "trial": trial,
        "partitions": [
            {"partition_id": p.partition_id, "leader": p.leader, "members": sorted(p.members),
             "parent": {str(v): q for v, q in p.parent}}
            for p in res.partitions
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n", deployment_to_csv(dep.placements)


# -- commands -----------------------------------------------------------------

def cmd_partition(args) -> int:
    settings = merged_settings(args)
    cfg = build_config(settings)
    fmt = args.format or settings.get("format", "csv")
    lifetime = _on_off("lifetime", args.lifetime)
    report = run_scenario(cfg, keep_trace=bool(args.trace), lifetime=lifetime)
    rows = [t.row() for t in report.trials]
    if not lifetime:
        for r in rows:
            for c in ("lifetime_no_recovery", "lifetime_with_recovery", "lifetime_ratio",
                      "recovery_attempts", "recovery_successes"):
                r[c] = None
    meta = {**_config_meta(cfg), "summary": report.summary()} if fmt == "json" else None
    _emit(render(rows, REPORT_COLUMNS, fmt, meta), args.out)
    if args.trace:
        Path(args.trace).write_text(json.dumps({"trials": report.traces}, sort_keys=True) + "\n")
    if args.partitions:
        doc, dep_csv = partitions_document(cfg, args.export_trial)
        Path(args.partitions).write_text(doc)
        if args.deployment:
            Path(args.deployment).write_text(dep_csv)
    return EXIT_OK


def cmd_sweep(args) -> int:
    settings = merged_settings(args)
    if not args.grids:
        raise UsageError("grids: missing (use --grids 2x2..7x7)")
    grids = parse_grid_range(args.grids)
    settings.pop("grid", None)
    fmt = args.format or settings.get("format", "csv")
    lifetime = _on_off("lifetime", args.lifetime)
    rows = []
    for g in grids:
        cfg = build_config(settings, grid=g, need_nodes=False)
        rep = run_scenario(cfg, lifetime=lifetime)
        s = rep.summary()
        if not lifetime:
            for c in ("lifetime_no_recovery", "lifetime_with_recovery", "recovery_attempts",
                      "recovery_successes"):
                s[c] = None
        rows.append(s)
    _emit(render(rows, SWEEP_COLUMNS, fmt), args.out)
    return EXIT_OK


def cmd_lifetime(args) -> int:
    settings = merged_settings(args)
    cfg = build_config(settings)
    fmt = args.format or settings.get("format", "csv")
    rows = []
    for t in range(cfg.trials):
        rep, _ = run_trial(cfg, t)
        off, on = rep.lifetime_no_recovery, rep.lifetime_with_recovery
        rows.append({
            "trial": t, "grid": rep.grid, "n": rep.n, "l_prob": rep.l_prob,
            "partitions_found": rep.partitions_found, "upper_bound": rep.upper_bound,
            "lifetime_no_recovery": off, "lifetime_with_recovery": on,
            "improvement_ratio": round(on / off, 6) if off else 1.0,
            "recovery_attempts": rep.recovery_attempts,
            "recovery_successes": rep.recovery_successes,
        })
    meta = None
    if fmt == "json":
        tot_off = sum(r["lifetime_no_recovery"] for r in rows)
        tot_on = sum(r["lifetime_with_recovery"] for r in rows)
        meta = {**_config_meta(cfg),
                "mean_improvement": round(sum(r["improvement_ratio"] for r in rows) / len(rows) - 1.0, 6),
                "pooled_improvement": round(tot_on / tot_off - 1.0, 6) if tot_off else 0.0}
    _emit(render(rows, LIFETIME_COLUMNS, fmt, meta), args.out)
    return EXIT_OK


def load_partitions(text: str) -> Dict[str, Any]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise UsageError(f"partitions: line {e.lineno}: {e.msg}") from None
    for key in ("grid", "transmission_range", "partitions"):
        if key not in doc:
            raise UsageError(f"partitions: missing field '{key}'")
    for key in ("rows", "cols", "block_side"):
        if key not in doc["grid"]:
            raise UsageError(f"partitions: missing field 'grid.{key}'")
    for k, p in enumerate(doc["partitions"]):
        if "members" not in p:
            raise UsageError(f"partitions: entry {k} missing field 'members'")
    return doc


def cmd_verify(args) -> int:
    doc = load_partitions(Path(args.partitions).read_text())
    try:
        placements = deployment_from_csv(Path(args.deployment).read_text())
    except ValueError as e:
        raise UsageError(f"deployment: {e}") from None
    g = doc["grid"]
    grid = BlockGrid(int(g["rows"]), int(g["cols"]), float(g["block_side"]))
    graph = build_graph(placements, float(doc["transmission_range"]))
    if not doc["partitions"]:
        print("warning: no partitions to verify", file=sys.stderr)
        print("PASS (vacuous)")
        return EXIT_OK
    failed = 0
    for k, p in enumerate(doc["partitions"]):
        pid = p.get("partition_id", k)
        check = verify_cover(p["members"], grid, graph, placements)
        if check.ok:
            print(f"partition {pid}: PASS")
        else:
            failed += 1
            print(f"partition {pid}: FAIL {check.describe()}")
    return EXIT_RUNTIME if failed else EXIT_OK


# -- entry point --------------------------------------------------------------

def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="scenario file with key = value lines")
    p.add_argument("--grid", help="grid as RxC")
    p.add_argument("--nodes", type=int)
    p.add_argument("--nodes-per-block", dest="nodes_per_block", type=int)
    p.add_argument("--srange", type=float)
    p.add_argument("--trange", type=float)
    p.add_argument("--lprob", type=float)
    p.add_argument("--target-leaders", dest="target_leaders", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--recovery", choices=("on", "off"))
    p.add_argument("--energy", help="E0:cost[:msgcost]")
    p.add_argument("--out")
    p.add_argument("--format", choices=("csv", "json"))


def make_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="coverpart", description="Connected set cover partitioning simulator")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("partition", help="partition seeded deployments and report per trial")
    _common(p)
    p.add_argument("--trace")
    p.add_argument("--lifetime", choices=("on", "off"), default="off")
    p.add_argument("--partitions", help="write trial partitions as JSON")
    p.add_argument("--deployment", help="write trial deployment as CSV")
    p.add_argument("--export-trial", dest="export_trial", type=int, default=0)
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("sweep", help="aggregate one row per grid size")
    _common(p)
    p.add_argument("--grids", help="2x2..7x7 or 2x2,3x3")
    p.add_argument("--lifetime", choices=("on", "off"), default="off")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("lifetime", help="paired lifetimes with and without recovery")
    _common(p)
    p.set_defaults(func=cmd_lifetime)

    p = sub.add_parser("verify", help="check exported partitions are connected covers")
    p.add_argument("partitions")
    p.add_argument("deployment")
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    try:
        args = make_parser().parse_args(argv)
    except SystemExit as e:  # usage errors and --help
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as e:
        print(f"coverpart: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"coverpart: error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
