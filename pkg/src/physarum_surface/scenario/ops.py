"""Op scripts: storage-graph maneuvers driven against a running simulation.

One operation per line, ``OPNAME arg ...``, with ``#`` starting a comment::

    RUN 3000              # advance 3000 ticks (WAIT is a synonym)
    ADD seed oat          # new node bound to the seed site
    ADD foam              # colour defaults to the first preference label
    LINK n0 n1            # nodes by id or by binding
    UNLINK n0 n1
    ACTIVE n1
    PUSH foam 1 0 120     # direction dx dy, duration in minutes
    PULL foam seed 600    # optional window in minutes

Each op logs an ``accepted`` or ``rejected`` trace row, and accepted ops
log ``completed`` when they finish: at once for graph edits, at the end of
the maneuver for PUSH and PULL.  Once the script ends the simulation keeps stepping until the
queue is idle or the schedule runs out.
"""
from __future__ import annotations

import shlex
from dataclasses import dataclass, field
from typing import Optional

from ..errors import GraphStoreError, ParseError
from ..graphstore.maneuvers import DEFAULT_PULL_WINDOW, pull_node, push_node
from ..graphstore.storage import add_node, link, set_active, unlink
from ..vec import Vec2
from .engine import RunRecord, Simulation, finish
from .model import Scenario

TRACE_FIELDS = ("tick", "line", "op", "status", "detail", "positions")

# opname -> (min args, max args)
ARITY = {
    "RUN": (1, 1), "WAIT": (1, 1), "ADD": (1, 2), "LINK": (2, 2), "UNLINK": (2, 2),
    "ACTIVE": (1, 1), "PUSH": (4, 4), "PULL": (2, 3),
}


@dataclass(frozen=True)
class Op:
    line: int
    name: str
    args: tuple
    text: str


@dataclass
class OpsResult:
    trace: list = field(default_factory=list)
    record: Optional[RunRecord] = None


def _int(tok: str, line: int, col: int) -> int:
    try:
        v = int(tok)
    except ValueError:
        raise ParseError(f"expected an integer, got {tok!r}", line, col) from None
    if v < 0:
        raise ParseError(f"expected a non-negative integer, got {v}", line, col)
    return v


def _float(tok: str, line: int, col: int) -> float:
    try:
        return float(tok)
    except ValueError:
        raise ParseError(f"expected a number, got {tok!r}", line, col) from None


def parse_ops(text: str) -> list[Op]:
    """Parse an op script; syntax errors carry line and column."""
    ops = []
    for ln, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0]
        if not body.strip():
            continue
        try:
            toks = shlex.split(body, posix=True)
        except ValueError as exc:
            raise ParseError(str(exc), ln, 1) from None
        name = toks[0].upper()
        col = len(body) - len(body.lstrip()) + 1
        if name not in ARITY:
            raise ParseError(f"unknown op {toks[0]!r} (known: {', '.join(sorted(ARITY))})", ln, col)
        lo, hi = ARITY[name]
        args = toks[1:]
        if not lo <= len(args) <= hi:
            want = str(lo) if lo == hi else f"{lo} to {hi}"
            raise ParseError(f"{name} takes {want} arguments, got {len(args)}", ln, col)
        argcol = col + len(toks[0]) + 1
        if name in ("RUN", "WAIT"):
            args = [_int(args[0], ln, argcol)]
        elif name == "PUSH":
            args = [args[0]] + [_float(a, ln, argcol) for a in args[1:]]
        elif name == "PULL" and len(args) == 3:
            args = [args[0], args[1], _float(args[2], ln, argcol)]
        ops.append(Op(ln, name, tuple(args), body.strip()))
    return ops


class OpRunner:
    def __init__(self, scenario: Scenario, snapshots: bool = False):
        self.sim = Simulation(scenario)
        self.snapshots = snapshots
        self.trace: list = []
        self.sim.on_maneuver = self._on_maneuver
        self._lines: dict = {}  # id(maneuver) -> Op

    def _positions(self) -> str:
        g, sim = self.sim.graph, self.sim
        parts = []
        for nid in sorted(g.nodes, key=lambda k: int(k[1:])):
            p = sim.position_of(g.nodes[nid].binding)
            parts.append(f"{nid}:{p.x:.4f},{p.y:.4f}")
        return ";".join(parts)

    def _row(self, op: Op, status: str, detail: str = "") -> None:
        self.trace.append((self.sim.tick, op.line, op.text, status, detail, self._positions()))

    def _on_maneuver(self, kind: str, m) -> None:
        op = self._lines.get(id(m))
        if op is not None and kind == "completed":
            self._row(op, "completed", m.outcome)

    def _node(self, ref: str) -> str:
        g = self.sim.graph
        if ref in g.nodes:
            return ref
        n = g.node_by_binding(ref)
        if n is None:
            raise GraphStoreError(f"no storage node {ref!r}")
        return n.id

    def _advance(self, n: int) -> None:
        for _ in range(n):
            self.sim.step()
            self._schedule_hooks()

    def _schedule_hooks(self) -> None:
        sim, sch = self.sim, self.sim.scenario.schedule
        if sch.metric_every and sim.tick % sch.metric_every == 0:
            sim.metric_rows.append(sim.metric_row())
        if self.snapshots and sch.snapshot_every and sim.tick % sch.snapshot_every == 0:
            sim.snapshot()

    def apply(self, op: Op) -> None:
        g = self.sim.graph
        if op.name in ("RUN", "WAIT"):
            self._row(op, "accepted")
            self._advance(op.args[0])
            self._row(op, "completed")
            return
        try:
            if op.name == "ADD":
                color = op.args[1] if len(op.args) > 1 else self.sim.scenario.preferences.ranking()[0]
                if color not in self.sim.scenario.preferences.weights:
                    raise GraphStoreError(f"colour {color!r} not in preference table")
                detail = add_node(g, op.args[0], color)
            elif op.name == "LINK":
                added = link(g, self._node(op.args[0]), self._node(op.args[1]))
                detail = "" if added else "already linked"
            elif op.name == "UNLINK":
                unlink(g, self._node(op.args[0]), self._node(op.args[1]))
                detail = ""
            elif op.name == "ACTIVE":
                set_active(g, self._node(op.args[0]))
                detail = ""
            elif op.name == "PUSH":
                _, dx, dy, dur = op.args
                m = push_node(g, self._node(op.args[0]), Vec2(dx, dy), dur)
                self._submit(op, m)
                return
            else:  # PULL
                window = op.args[2] if len(op.args) > 2 else DEFAULT_PULL_WINDOW
                m = pull_node(g, self._node(op.args[0]), self._node(op.args[1]), window=window)
                self._submit(op, m)
                return
        except GraphStoreError as exc:
            self._row(op, "rejected", str(exc))
            return
        self._row(op, "accepted", detail)
        self._row(op, "completed", detail)

    def _submit(self, op: Op, m) -> None:
        self._lines[id(m)] = op
        self.sim.queue.submit(m)
        self._row(op, "accepted", type(m).__name__)

    def run(self, ops: list[Op]) -> OpsResult:
        if self.snapshots:
            self.sim.snapshot()
        for op in ops:
            self.apply(op)
        budget = max(self.sim.scenario.schedule.ticks - self.sim.tick, 0)
        while not self.sim.queue.idle and budget > 0:
            self._advance(1)
            budget -= 1
        rec = finish(self.sim, self.snapshots, keep_sim=True)
        return OpsResult(list(self.trace), rec)


def run_ops(scenario: Scenario, script: str, snapshots: bool = False) -> OpsResult:
    """Parse ``script`` and execute it against a fresh simulation of ``scenario``."""
    ops = parse_ops(script)
    return OpRunner(scenario, snapshots).run(ops)


__all__ = ["TRACE_FIELDS", "Op", "OpsResult", "OpRunner", "parse_ops", "run_ops"]
