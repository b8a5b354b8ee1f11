"""Command line entry point.

Exit status is 0 on success, 2 when the input fails to parse or validate
and 1 for any other failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import re
import sys
from dataclasses import replace
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .analysis import euclidean_mst
from .errors import ConfigurationError, InputError, PhysarumError, ScenarioError
from .scenario.builtins import builtin
from .scenario.config import load_scenario
from .scenario.engine import run
from .scenario.model import Scenario
from .scenario.ops import TRACE_FIELDS, run_ops
from .scenario.output import atomic_write, csv_bytes, fmt, write_outputs

EXIT_OK, EXIT_RUNTIME, EXIT_INVALID = 0, 1, 2
BATCH_FIELDS = ("rng_seed", "sites_covered", "sites_total", "is_tree", "length_ratio",
                "mean_tortuosity", "completion_min")


def resolve(target: str, seed=None, ticks=None, snapshot_every=None) -> Scenario:
    """``builtin:NAME`` or a scenario file, with command line overrides applied."""
    if target.startswith("builtin:"):
        s = builtin(target[len("builtin:"):])
    else:
        s = load_scenario(target)
    changes = {}
    if seed is not None:
        changes["rng_seed"] = seed
    sched = {}
    if ticks is not None:
        sched["ticks"] = ticks
    if snapshot_every is not None:
        sched["snapshot_every"] = snapshot_every
    if sched:
        changes["schedule"] = replace(s.schedule, **sched)
    return s.replace(**changes) if changes else s


def _nonneg(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {v}")
    return v


def _seed_range(text: str) -> range:
    m = re.fullmatch(r"(\d+)\.\.(\d+)", text.strip())
    if not m:
        raise argparse.ArgumentTypeError(f"expected A..B, got {text!r}")
    a, b = int(m.group(1)), int(m.group(2))
    if b < a:
        raise argparse.ArgumentTypeError(f"empty seed range {text!r}")
    return range(a, b + 1)


def cmd_run(args) -> int:
    s = resolve(args.scenario, args.seed, args.ticks, args.snapshot_every)
    rec = run(s)
    write_outputs(rec, args.out)
    m = rec.final
    if m is not None:
        print(f"{s.name} seed {s.rng_seed}: {m.sites_covered}/{m.sites_total} sites, "
              f"tree={m.is_tree}, ratio={fmt(m.length_ratio)}, completion_min={fmt(rec.completion_min)}")
    print(f"outputs in {args.out}")
    return EXIT_OK


def _batch_one(job):
    target, seed, out = job
    s = resolve(target, seed)
    rec = run(s)
    write_outputs(rec, Path(out) / f"seed_{seed:04d}")
    m = rec.final
    if m is None:
        return (seed, 0, len(s.sites()), 0, math.inf, math.inf, rec.completion_min)
    return (seed, m.sites_covered, m.sites_total, int(m.is_tree), m.length_ratio,
            m.mean_tortuosity, rec.completion_min)


def cmd_batch(args) -> int:
    base = resolve(args.scenario)  # validate once before fanning out
    jobs = [(args.scenario, seed, args.out) for seed in args.seeds]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            rows = list(ex.map(_batch_one, jobs))
    else:
        rows = [_batch_one(j) for j in jobs]
    atomic_write(Path(args.out) / "batch.csv", csv_bytes(base.digest(), BATCH_FIELDS, rows))
    ok = sum(1 for r in rows if r[1] == r[2] and r[3])
    print(f"{len(rows)} runs, {ok} complete trees; summary in {Path(args.out) / 'batch.csv'}")
    return EXIT_OK


def read_points(path) -> list[tuple[float, float]]:
    """Rows of ``x,y``; a non-numeric first row is taken as a header, ``#`` lines are skipped."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from None
    pts = []
    for ln, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or row[0].lstrip().startswith("#"):
            continue
        if len(row) < 2:
            raise ConfigurationError(f"{path} line {ln}: expected x,y")
        try:
            x, y = float(row[0]), float(row[1])
        except ValueError:
            if not pts and ln == 1:
                continue
            raise ConfigurationError(f"{path} line {ln}: non-numeric coordinate") from None
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ConfigurationError(f"{path} line {ln}: coordinates must be finite")
        pts.append((x, y))
    return pts


def cmd_mst(args) -> int:
    pts = read_points(args.points)
    edges, total = euclidean_mst(pts)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["i", "j", "length"])
    for i, j in edges:
        w.writerow([i, j, fmt(math.dist(pts[i], pts[j]))])
    w.writerow(["total", "", fmt(total)])
    return EXIT_OK


def cmd_ops(args) -> int:
    s = resolve(args.scenario, args.seed)
    try:
        script = Path(args.opscript).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {args.opscript}: {exc.strerror or exc}") from None
    res = run_ops(s, script, snapshots=True)
    out = Path(args.out)
    write_outputs(res.record, out)
    atomic_write(out / "trace.csv", csv_bytes(res.record.scenario_hash, TRACE_FIELDS, res.trace))
    rejected = sum(1 for r in res.trace if r[3] == "rejected")
    print(f"{len(res.trace)} trace rows ({rejected} rejected); trace in {out / 'trace.csv'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="physarum-surface", description="Plasmodium growth on a floating surface.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one scenario")
    r.add_argument("scenario", help="scenario file or builtin:NAME")
    r.add_argument("--seed", type=_nonneg)
    r.add_argument("--out", default="out")
    r.add_argument("--ticks", type=_nonneg)
    r.add_argument("--snapshot-every", type=_nonneg)
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("batch", help="run one scenario over a range of seeds")
    b.add_argument("scenario")
    b.add_argument("--seeds", type=_seed_range, required=True, help="inclusive range A..B")
    b.add_argument("--out", default="batch_out")
    b.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    b.set_defaults(func=cmd_batch)

    m = sub.add_parser("mst", help="exact Euclidean MST of a points CSV")
    m.add_argument("points")
    m.set_defaults(func=cmd_mst)

    o = sub.add_parser("ops", help="run an op script against a scenario")
    o.add_argument("scenario")
    o.add_argument("opscript")
    o.add_argument("--seed", type=_nonneg)
    o.add_argument("--out", default="ops_out")
    o.set_defaults(func=cmd_ops)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, ScenarioError) as exc:  # parse, validation, unknown builtins
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (PhysarumError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
