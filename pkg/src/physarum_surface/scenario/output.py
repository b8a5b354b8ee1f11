"""Run artefacts: CSV tables, SVG/PGM snapshots and the run summary.

Every file carries the scenario hash in its first line (a ``#`` comment
for CSV and PGM, an XML comment for SVG, a field for the summary).  Files
are written to a temporary sibling and renamed into place.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import re
import tempfile
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from ..errors import PhysarumError
from .engine import BODY_FIELDS, EDGE_FIELDS, EVENT_FIELDS, METRIC_FIELDS, RunRecord

if TYPE_CHECKING:
    from .engine import Simulation

SNAPSHOT_RE = re.compile(r"^\d{6}\.(svg|pgm)$")


class OutputError(PhysarumError):
    """An output file could not be written."""


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".10g")
    return str(v)


def atomic_write(path: Path, data: bytes) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from exc


def csv_bytes(scenario_hash: str, header, rows) -> bytes:
    buf = io.StringIO()
    buf.write(f"# scenario {scenario_hash}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue().encode()


def summary_bytes(r: RunRecord) -> bytes:
    doc = {
        "scenario_hash": r.scenario_hash,
        "scenario": r.scenario_name,
        "rng_seed": r.rng_seed,
        "ticks": r.ticks,
        "completion_min": r.completion_min,
        "final": None,
    }
    if r.final is not None:
        doc["final"] = {k: (fmt(v) if isinstance(v, float) and not math.isfinite(v) else v)
                        for k, v in r.final.as_row().items()}
    return (json.dumps(doc, indent=2, sort_keys=False) + "\n").encode()


def write_outputs(r: RunRecord, out_dir) -> Path:
    """Write every artefact of ``r`` into ``out_dir``; stale snapshots are removed."""
    out = Path(out_dir)
    h = r.scenario_hash
    atomic_write(out / "metrics.csv", csv_bytes(h, METRIC_FIELDS, r.metrics))
    atomic_write(out / "events.csv", csv_bytes(h, EVENT_FIELDS, r.events))
    atomic_write(out / "bodies.csv", csv_bytes(h, BODY_FIELDS, r.bodies))
    atomic_write(out / "edges.csv", csv_bytes(h, EDGE_FIELDS, r.edges))
    snap_dir = out / "snapshots"
    keep = set()
    for snap in r.snapshots:
        for ext, data in (("svg", snap.svg.encode()), ("pgm", snap.pgm)):
            name = f"{snap.tick:06d}.{ext}"
            atomic_write(snap_dir / name, data)
            keep.add(name)
    if snap_dir.is_dir():
        for p in sorted(snap_dir.iterdir()):
            if SNAPSHOT_RE.match(p.name) and p.name not in keep:
                p.unlink()
    atomic_write(out / "run.summary", summary_bytes(r))
    return out


# -- rendering ---------------------------------------------------------------

def _f(x: float) -> str:
    return f"{x:.3f}"


def _poly(pts) -> str:
    return " ".join(f"{_f(x)},{_f(y)}" for x, y in pts)


def render_svg(sim: Simulation) -> str:
    """Arena, branches, tubes, bodies and sites in millimetres, north up."""
    s = sim.scenario
    w, hgt = s.arena.extent
    pad = 2.0
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f"<!-- scenario {sim.digest} tick {sim.tick} -->",
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="{_f(-w / 2 - pad)} {_f(-hgt / 2 - pad)} '
        f'{_f(w + 2 * pad)} {_f(hgt + 2 * pad)}" width="{_f((w + 2 * pad) * 8)}" height="{_f((hgt + 2 * pad) * 8)}">',
        '<g transform="scale(1,-1)">',
    ]
    if s.arena.shape == "disc":
        lines.append(f'<circle cx="0" cy="0" r="{_f(s.arena.radius)}" fill="#eef4fb" stroke="#456" stroke-width="0.3"/>')
    else:
        lines.append(f'<rect x="{_f(-w / 2)}" y="{_f(-hgt / 2)}" width="{_f(w)}" height="{_f(hgt)}" '
                     'fill="#eef4fb" stroke="#456" stroke-width="0.3"/>')
    for bid in sorted(sim.bodies):
        b = sim.bodies[bid]
        fill = "#b9a27a" if b.anchored else "#f0e6c8"
        if b.polygon is not None:
            pts = [(b.position.x + x, b.position.y + y) for x, y in b.polygon]
            lines.append(f'<polygon points="{_poly(pts)}" fill="{fill}" stroke="#654" stroke-width="0.2"/>')
        else:
            lines.append(f'<circle cx="{_f(b.position.x)}" cy="{_f(b.position.y)}" r="{_f(b.radius)}" '
                         f'fill="{fill}" stroke="#654" stroke-width="0.2"/>')
    for src in sim.sources:
        eaten = src.id in sim.state.engulfed_sources
        lines.append(f'<circle cx="{_f(src.position.x)}" cy="{_f(src.position.y)}" r="0.8" '
                     f'fill="{"#7a5" if eaten else "#c83"}"/>')
    for bid in sorted(sim.state.branches):
        path = sim.state.branches[bid].path
        if len(path) >= 2:
            lines.append(f'<polyline points="{_poly(path)}" fill="none" stroke="#e3b505" stroke-width="0.25"/>')
    net = sim.network
    top = max(net.tensions.values(), default=0.0)
    for tid in sorted(net.tubes):
        t = net.tubes[tid]
        # stroke width grows with tension
        w = 0.4 + (0.8 * net.tensions.get(tid, 0.0) / top if top > 0 else 0.0)
        lines.append(f'<polyline points="{_poly(t.path.tolist())}" fill="none" stroke="#c60" stroke-width="{_f(w)}"/>')
    for t in sorted(sim.state.tips, key=lambda t: t.id):
        if t.alive:
            lines.append(f'<circle cx="{_f(t.position.x)}" cy="{_f(t.position.y)}" r="0.25" fill="#a40"/>')
    seed = sim.state.seed
    lines.append(f'<circle cx="{_f(seed.x)}" cy="{_f(seed.y)}" r="0.6" fill="none" stroke="#222" stroke-width="0.2"/>')
    lines += ["</g>", "</svg>", ""]
    return "\n".join(lines)


def render_pgm(sim: Simulation) -> bytes:
    """Binary greyscale of the attractant grid, normalised to its maximum, north up."""
    grid = np.flipud(sim.field.attractant)
    peak = float(grid.max())
    if peak > 0:
        img = np.floor(grid / peak * 255.0 + 0.5).clip(0, 255).astype(np.uint8)
    else:
        img = np.zeros(grid.shape, dtype=np.uint8)
    ny, nx = img.shape
    header = f"P5\n# scenario {sim.digest} tick {sim.tick}\n{nx} {ny}\n255\n".encode()
    return header + img.tobytes()
