"""Command line entry point: tree, graph, maxcut, cycles, internal, check."""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import json
import logging
import math
import sys
from importlib import resources
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import __version__, rng
from .coloring import RED, balance_repair, cut_size, run_schedule
from .graphs import (Graph, complete_bipartite, complete_graph, count_cycles, cycle_graph, petersen_graph,
                     poisson_mean, sample_regular_graph)
from .partitions import Partition, check_internal, exhaustive_internal, internal_search
from .recolor import miscolored_sets, recolor
from .rng import GENERATOR_ID, SeedTable
from .tree import MAX_TRANSITION_D, MIN_D, tree_report
from .vertex_types import StepParams

log = logging.getLogger("localcut")

EXIT_OK, EXIT_CONFIG, EXIT_CHECK = 0, 2, 3
SCHEDULE_FORMAT = "localcut-schedule"
SCHEDULE_VERSION = 1

# (1/eps, mode) -> (cut, miscolored); the last two are long runs
GOLDEN = {
    (1000, "exact"): (0.501778, 0.0199445),
    (10000, "exact"): (0.503125, 0.0190561),
    (50000, "exact"): (0.502832, 0.0187139),
    (50000, "simplified"): (0.502803, 0.018679),
}
GOLDEN_TOL = {"exact": 5e-6, "simplified": 1e-4}


class ConfigError(ValueError):
    pass


def load_defaults() -> dict:
    with resources.files("localcut").joinpath("defaults.json").open() as fh:
        return json.load(fh)


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


# schedule files

def schedule_document(d: int, eps: float, mode: str, schedule: Sequence[StepParams]) -> dict:
    return {"format": SCHEDULE_FORMAT, "version": SCHEDULE_VERSION, "d": d, "eps": eps, "mode": mode,
            "N": len(schedule), "steps": [p.to_dict() for p in schedule]}


def schedule_hash(doc: dict) -> str:
    return hashlib.sha256(_canonical(doc).encode()).hexdigest()


def read_schedule(path) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read schedule {path}: {exc}") from exc
    if doc.get("format") != SCHEDULE_FORMAT or doc.get("version") != SCHEDULE_VERSION:
        raise ConfigError(f"{path} is not a version-{SCHEDULE_VERSION} schedule file")
    if doc["N"] != len(doc["steps"]):
        raise ConfigError("schedule header N does not match the number of steps")
    return doc


def schedule_steps(doc: dict) -> List[StepParams]:
    return [StepParams.from_dict(s) for s in doc["steps"]]


def obtain_schedule(cfg: dict) -> dict:
    """Schedule from --schedule, or computed on the tree with the config's d/eps/mode."""
    if cfg.get("schedule"):
        doc = read_schedule(cfg["schedule"])
        if doc["d"] != cfg["d"]:
            raise ConfigError(f"schedule is for d={doc['d']}, run asks for d={cfg['d']}")
        return doc
    rep = tree_report(cfg["d"], cfg["eps"], cfg["mode"])
    return schedule_document(cfg["d"], cfg["eps"], cfg["mode"], rep.schedule)


# outputs

def provenance(cfg: dict, sched: Optional[dict] = None) -> dict:
    return {"config": {k: cfg[k] for k in sorted(cfg) if k not in ("func", "check_mode")},
            "master_seed": cfg.get("seed"), "generator": GENERATOR_ID, "version": __version__,
            "schedule_sha256": schedule_hash(sched) if sched is not None else None}


def write_outputs(out: Path, name: str, report: dict, rows: Optional[List[dict]] = None) -> None:
    out.mkdir(parents=True, exist_ok=True)
    report = dict(report)
    report["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    with open(out / f"{name}.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if rows:
        with open(out / f"{name}.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)


def rep_seed(master: int, r: int) -> int:
    return rng.stream_key(master, f"repetition/{r}") % (2 ** 63)


# subcommands

def cmd_tree(cfg: dict) -> int:
    rep = tree_report(cfg["d"], cfg["eps"], cfg["mode"])
    sched = schedule_document(cfg["d"], cfg["eps"], cfg["mode"], rep.schedule)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "schedule.json", "w") as fh:
        json.dump(sched, fh, indent=1)
        fh.write("\n")
    summary = rep.summary()
    write_outputs(out, "tree_report", {**provenance(cfg, sched), "report": summary}, [summary])
    print(f"cut {rep.cut_per_vertex:.6f}  miscolored {rep.miscolored_measure:.7f}  "
          f"improved cut {rep.improved_cut_per_vertex:.6f}  (N={rep.steps_taken})")
    return EXIT_OK


def _graph_run(cfg: dict, sched: dict, r: int, objective: str) -> dict:
    seed = rep_seed(cfg["seed"], r)
    g = sample_regular_graph(cfg["n"], cfg["d"], seed, cfg.get("graph_mode", "reject"))
    steps = schedule_steps(sched)
    seeds = SeedTable(seed, g.n)
    normal = run_schedule(g, steps, seeds, "normal")
    row = {"rep": r, "seed": seed, "n": g.n, "switchings": getattr(g, "switchings", 0)}
    if objective == "min":
        left, right = miscolored_sets(g, normal, "terminal")
        row["cut_per_vertex"] = cut_size(g, normal) / g.n
        row["miscolored_fraction"] = (len(left) + len(right)) / g.n
        repaired = balance_repair(g, normal, seed)
        row["repair_moves"] = repaired.moves
        row["cut_after_repair"] = cut_size(g, repaired.coloring) / g.n
        final, rr, deltas = recolor(g, repaired.coloring, cfg["criterion"], cfg["strategy"], seed, "min")
        if any(x > -1 for x in deltas) or rr.cut_before - rr.cut_after < rr.swap_size:
            raise AssertionError(f"swap accounting failed on repetition {r}")
        row["cut_final"] = cut_size(g, final) / g.n
    else:
        blind = run_schedule(g, steps, seeds, "colorblind")
        row["cut_A_per_vertex"] = cut_size(g, normal) / g.n
        row["cut_B_before_recolor"] = cut_size(g, blind) / g.n
        final, rr, deltas = recolor(g, blind, cfg["criterion"], cfg["strategy"], seed, "max")
        if any(x < 1 for x in deltas) or rr.cut_after - rr.cut_before < rr.swap_size:
            raise AssertionError(f"swap accounting failed on repetition {r}")
        row["cut_final"] = cut_size(g, final) / g.n
    nr, nb = final.class_sizes()
    row.update({"red": nr, "blue": nb, "swap_size": rr.swap_size, "min_delta": min(deltas, default=0),
                "max_delta": max(deltas, default=0), "isolated_fraction": rr.isolated_fraction})
    return row


def _run_reps(cfg: dict, objective: str, name: str) -> int:
    sched = obtain_schedule(cfg)
    rows = [_graph_run(cfg, sched, r, objective) for r in range(cfg["reps"])]
    key = "cut_final"
    vals = np.array([row[key] for row in rows])
    agg = {"reps": len(rows), "mean_cut_final": float(vals.mean()), "min_cut_final": float(vals.min()),
           "max_cut_final": float(vals.max())}
    write_outputs(Path(cfg["out"]), name, {**provenance(cfg, sched), "aggregate": agg, "runs": rows}, rows)
    print(json.dumps(agg))
    return EXIT_OK


def cmd_graph(cfg: dict) -> int:
    return _run_reps(cfg, "min", "graph_report")


def cmd_maxcut(cfg: dict) -> int:
    if cfg["criterion"] == "strict":
        # strict gains are not guaranteed in the max direction
        cfg = {**cfg, "criterion": "terminal"}
    return _run_reps(cfg, "max", "maxcut_report")


def cmd_cycles(cfg: dict) -> int:
    kmax = cfg["kmax"]
    rows = []
    for r in range(cfg["reps"]):
        seed = rep_seed(cfg["seed"], r)
        census = count_cycles(sample_regular_graph(cfg["n"], cfg["d"], seed), kmax)
        rows.append({"rep": r, "seed": seed, **{f"X{k}": census[k] for k in range(3, kmax + 1)}})
    stats = {}
    for k in range(3, kmax + 1):
        x = np.array([row[f"X{k}"] for row in rows], dtype=float)
        se = x.std(ddof=1) / math.sqrt(len(x)) if len(x) > 1 else float("nan")
        lam = poisson_mean(k, cfg["d"])
        stats[str(k)] = {"mean": float(x.mean()), "se": float(se), "poisson_mean": lam,
                         "z": float((x.mean() - lam) / se) if se > 0 else float("nan")}
    write_outputs(Path(cfg["out"]), "cycles_report", {**provenance(cfg), "stats": stats, "samples": rows}, rows)
    print(json.dumps(stats))
    return EXIT_OK


FIXTURES = {"K4": lambda: complete_graph(4), "K33": lambda: complete_bipartite(3, 3),
            "C4": lambda: cycle_graph(4), "petersen": petersen_graph}


def cmd_internal(cfg: dict) -> int:
    out = Path(cfg["out"])
    if cfg.get("fixture"):
        g = FIXTURES[cfg["fixture"]]()
        p = exhaustive_internal(g)
        cert = check_internal(g, p).certificate() if p is not None else {
            "ok": False, "class_sizes": None, "violations": None, "reason": "no internal partition exists"}
        write_outputs(out, "internal_certificate", {**provenance(cfg), "fixture": cfg["fixture"], **cert})
        print(json.dumps({"fixture": cfg["fixture"], "ok": cert["ok"]}))
        return EXIT_OK
    sched = obtain_schedule(cfg)
    steps = schedule_steps(sched)
    rows = []
    for r in range(cfg["reps"]):
        seed = rep_seed(cfg["seed"], r)
        g = sample_regular_graph(cfg["n"], cfg["d"], seed)
        col = run_schedule(g, steps, SeedTable(seed, g.n), "normal")
        col = balance_repair(g, col, seed).coloring
        col, rr, _ = recolor(g, col, cfg["criterion"], cfg["strategy"], seed, "min")
        found = internal_search(g, Partition(col.color != RED), cfg["max_moves"], seed)
        cert = check_internal(g, found).certificate() if found is not None else {"ok": False}
        rows.append({"rep": r, "seed": seed, "bisection": rr.cut_after, "ok": cert["ok"],
                     "meets_n_half_plus_5": rr.cut_after <= g.n / 2 + 5})
    rate = sum(row["ok"] for row in rows) / len(rows)
    write_outputs(out, "internal_report", {**provenance(cfg, sched), "success_rate": rate, "runs": rows}, rows)
    print(json.dumps({"success_rate": rate}))
    return EXIT_OK


def run_golden(mode: str, inv_eps: int, d: int = 5) -> dict:
    want_cut, want_mis = GOLDEN[(inv_eps, mode)]
    rep = tree_report(d, 1.0 / inv_eps, mode)
    tol = GOLDEN_TOL[mode]
    return {"inv_eps": inv_eps, "mode": mode, "cut": rep.cut_per_vertex, "cut_expected": want_cut,
            "miscolored": rep.miscolored_measure, "miscolored_expected": want_mis, "tol": tol,
            "pass": abs(rep.cut_per_vertex - want_cut) <= tol and abs(rep.miscolored_measure - want_mis) <= tol}


def cmd_check(cfg: dict) -> int:
    rows = [run_golden("exact", 1000)]
    if cfg.get("extended"):
        rows += [run_golden("exact", 10000), run_golden("exact", 50000), run_golden("simplified", 50000)]
    for row in rows:
        print(f"{'PASS' if row['pass'] else 'FAIL'} 1/eps={row['inv_eps']} {row['mode']}: "
              f"cut {row['cut']:.7f} (want {row['cut_expected']}), "
              f"miscolored {row['miscolored']:.7f} (want {row['miscolored_expected']})")
    write_outputs(Path(cfg["out"]), "check_report", {**provenance(cfg), "rows": rows}, rows)
    return EXIT_OK if all(r["pass"] for r in rows) else EXIT_CHECK


COMMANDS = {"tree": cmd_tree, "graph": cmd_graph, "maxcut": cmd_maxcut, "cycles": cmd_cycles,
            "internal": cmd_internal, "check": cmd_check}


def build_parser(defaults: dict) -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="localcut", description=__doc__)
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--d", type=int, default=defaults["d"])
        p.add_argument("--eps", type=float, default=defaults["eps"])
        p.add_argument("--mode", choices=("exact", "simplified"), default=defaults["mode"])
        p.add_argument("--n", type=int, default=defaults["n"])
        p.add_argument("--seed", type=int, default=defaults["seed"])
        p.add_argument("--reps", type=int, default=defaults["reps"])
        p.add_argument("--criterion", choices=("terminal", "strict"), default=defaults["criterion"])
        p.add_argument("--strategy", choices=("greedy", "exact"), default=defaults["strategy"])
        p.add_argument("--schedule", default=None)
        p.add_argument("--out", default=defaults["out"])
        p.add_argument("--kmax", type=int, default=defaults["kmax"])
        p.add_argument("--graph-mode", dest="graph_mode", choices=("reject", "erase"),
                       default=defaults["graph_mode"])
        p.add_argument("--max-moves", dest="max_moves", type=int, default=defaults["max_moves"])
        p.add_argument("--fixture", choices=sorted(FIXTURES), default=None)
        p.add_argument("--check", dest="check_mode", action="store_true",
                       help="run the golden table comparisons after the command")
        p.add_argument("--extended", action="store_true", help="include the long golden rows")
    return ap


def validate(cfg: dict) -> None:
    if cfg["command"] == "tree" and not MIN_D <= cfg["d"] <= MAX_TRANSITION_D:
        raise ConfigError(f"tree runs need {MIN_D} <= d <= {MAX_TRANSITION_D}")
    if not 0 < cfg["eps"] < 1:
        raise ConfigError("--eps must lie in (0, 1)")
    if cfg["reps"] < 1:
        raise ConfigError("--reps must be positive")
    if cfg["command"] in ("graph", "maxcut", "cycles", "internal") and not cfg.get("fixture"):
        if cfg["d"] < 3 or cfg["n"] <= cfg["d"] or (cfg["n"] * cfg["d"]) % 2:
            raise ConfigError("need d >= 3, n > d and n*d even")
    if cfg["command"] == "cycles" and not 3 <= cfg["kmax"] <= 12:
        raise ConfigError("--kmax must lie in 3..12")


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    defaults = load_defaults()
    args = build_parser(defaults).parse_args(argv)
    cfg = {k: v for k, v in vars(args).items()}
    cfg["config_version"] = defaults["config_version"]
    try:
        validate(cfg)
        code = COMMANDS[cfg["command"]](cfg)
        if cfg.get("check_mode") and cfg["command"] != "check":
            code = code or cmd_check(cfg)
        return code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AssertionError as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
