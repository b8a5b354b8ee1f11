"""Push and pull node operations as multi-tick maneuvers.

A maneuver is created by :func:`push_node` or :func:`pull_node` after the
preconditions have been checked against the storage graph, then executed
by a :class:`CommandQueue` that runs one maneuver at a time.  Execution
needs a *world*: any object exposing ``bodies`` (id -> FloatingBody),
``push_mag``, ``push_range``, ``tip_speed``, ``tube_for(token)`` and
``position_of(binding)``.
"""
from __future__ import annotations

import math
import warnings
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from ..errors import GraphStoreError
from ..mechanics import push_from_tip
from ..vec import Vec2
from .storage import StorageGraph, link

DEFAULT_PULL_BOOST = 5.0
DEFAULT_PULL_WINDOW = 600.0


class IndeterminatePullWarning(UserWarning):
    """Both pull endpoints are free with equal drag."""


@dataclass
class Maneuver:
    node_id: str
    body_id: str
    status: str = "pending"  # pending | running | completed
    elapsed: float = 0.0
    outcome: str = ""

    def start(self, world) -> None:
        self.status = "running"

    def forces(self, world) -> dict:
        return {}

    def advance(self, world, dt: float) -> None:
        self.elapsed += dt

    @property
    def done(self) -> bool:
        return self.status == "completed"

    def finish(self, world, outcome: str) -> None:
        self.status = "completed"
        self.outcome = outcome


@dataclass
class PushManeuver(Maneuver):
    """A maneuver-owned pseudopodium grows at the body from behind and presses on it."""

    direction: Vec2 = Vec2(1.0, 0.0)
    duration: float = 120.0
    tip: Optional[Vec2] = None

    def start(self, world) -> None:
        super().start(world)
        body = world.bodies[self.body_id]
        self.tip = body.position - self.direction * world.push_range

    def forces(self, world) -> dict:
        if self.tip is None:
            return {}
        body = world.bodies[self.body_id]
        f = push_from_tip(self.tip, body, world.push_mag, world.push_range, heading=self.direction)
        return {self.body_id: f}

    def advance(self, world, dt: float) -> None:
        super().advance(world, dt)
        body = world.bodies[self.body_id]
        gap = body.position - self.tip
        d = gap.norm()
        if d > body.radius:
            step = min(world.tip_speed * dt, d - body.radius)
            self.tip = self.tip + gap * (step / d)
        if self.elapsed >= self.duration - 1e-9:
            self.tip = None  # retract
            self.finish(world, "retracted")


@dataclass
class PullManeuver(Maneuver):
    """Raises the contraction gain of one tube until the body arrives or time runs out."""

    target_binding: str = ""
    token: object = None
    boost: float = DEFAULT_PULL_BOOST
    window: float = DEFAULT_PULL_WINDOW
    _saved_gain: float = 1.0

    def _distance(self, world) -> float:
        return world.bodies[self.body_id].position.dist(world.position_of(self.target_binding))

    def start(self, world) -> None:
        super().start(world)
        if self._distance(world) < world.bodies[self.body_id].radius:
            self.finish(world, "arrived")
            return
        tube = world.tube_for(self.token)
        if tube is not None:
            self._saved_gain = tube.gain
            tube.gain = self.boost

    def advance(self, world, dt: float) -> None:
        super().advance(world, dt)
        if self._distance(world) < world.bodies[self.body_id].radius:
            self._restore(world)
            self.finish(world, "arrived")
        elif self.elapsed >= self.window - 1e-9:
            self._restore(world)
            self.finish(world, "expired")

    def _restore(self, world) -> None:
        tube = world.tube_for(self.token)
        if tube is not None:
            tube.gain = self._saved_gain


def _free_body(g: StorageGraph, nid: str):
    if nid not in g.nodes:
        raise GraphStoreError(f"unknown storage node {nid!r}")
    body_of = getattr(g.realizer, "body", None)
    body = body_of(g.nodes[nid].binding) if body_of else None
    if body is None:
        raise GraphStoreError(f"node {nid} is not bound to a floating body")
    if body.anchored:
        raise GraphStoreError(f"node {nid} is bound to anchored body {body.id}")
    return body


def push_node(g: StorageGraph, n: str, direction: Vec2, duration: float) -> PushManeuver:
    body = _free_body(g, n)
    if body.carries_food:
        raise GraphStoreError(f"push target {body.id} carries food")
    if not duration > 0:
        raise GraphStoreError(f"push duration must be > 0, got {duration}")
    d = Vec2.of(direction)
    if d.norm() == 0.0:
        raise GraphStoreError("push direction must be non-zero")
    return PushManeuver(n, body.id, direction=d.unit(), duration=float(duration))


def pull_node(
    g: StorageGraph,
    n: str,
    target: str,
    boost: float = DEFAULT_PULL_BOOST,
    window: float = DEFAULT_PULL_WINDOW,
) -> PullManeuver:
    body = _free_body(g, n)
    if target not in g.nodes:
        raise GraphStoreError(f"unknown storage node {target!r}")
    if not (boost >= 1.0 and math.isfinite(boost)):
        raise GraphStoreError(f"pull boost must be >= 1, got {boost}")
    body_of = getattr(g.realizer, "body", None)
    other = body_of(g.nodes[target].binding) if body_of else None
    if other is not None and not other.anchored and other.gamma == body.gamma:
        warnings.warn(
            f"pull {n}->{target}: both bodies free with equal drag, outcome indeterminate",
            IndeterminatePullWarning,
            stacklevel=2,
        )
    key = frozenset((n, target))
    if key not in g.edges:
        link(g, n, target)
    return PullManeuver(
        n, body.id, target_binding=g.nodes[target].binding, token=g.edges[key],
        boost=float(boost), window=float(window),
    )


@dataclass
class CommandQueue:
    """Serialises maneuvers: the head runs to completion before the next starts."""

    pending: deque = field(default_factory=deque)
    current: Optional[Maneuver] = None
    _backlog: list = field(default_factory=list)  # promotions seen by forces()

    def submit(self, m: Maneuver) -> None:
        self.pending.append(m)

    @property
    def idle(self) -> bool:
        return self.current is None and not self.pending

    def _promote(self, world) -> list:
        events = []
        while self.current is None and self.pending:
            self.current = self.pending.popleft()
            self.current.start(world)
            events.append(("started", self.current))
            if self.current.done:
                events.append(("completed", self.current))
                self.current = None
        return events

    def forces(self, world) -> dict:
        self._backlog.extend(self._promote(world))
        return self.current.forces(world) if self.current else {}

    def advance(self, world, dt: float) -> list:
        events = self._backlog + self._promote(world)
        self._backlog = []
        if self.current is not None:
            self.current.advance(world, dt)
            if self.current.done:
                events.append(("completed", self.current))
                self.current = None
        return events
