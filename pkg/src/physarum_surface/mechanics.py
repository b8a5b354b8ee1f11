"""Overdamped rigid bodies on the water plane.

Velocity is force over drag; there is no inertia and no rotation.  Forces
come from two places: the ripple ahead of a growing tip (push) and the
tension of tubes attached to a body (pull).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Mapping, Optional

from .errors import ConfigurationError
from .vec import ZERO, Vec2

if TYPE_CHECKING:
    from .arena import ArenaSpec
    from .tubes import TubeNetwork, TubeNode

DEFAULT_GAMMA = 1.0
DEFAULT_PUSH_MAG = 0.05
DEFAULT_PUSH_RANGE = 3.0


@dataclass
class FloatingBody:
    id: str
    radius: float
    position: Vec2
    gamma: float = DEFAULT_GAMMA
    anchored: bool = False
    carries_food: bool = False
    polygon: Optional[tuple] = None  # convex, counter-clockwise, relative to centroid
    attachments: set = field(default_factory=set)

    def __post_init__(self):
        if self.polygon is not None:
            self.polygon = tuple(Vec2.of(v) for v in self.polygon)
            if len(self.polygon) < 3:
                raise ConfigurationError(f"body {self.id}: polygon needs at least 3 vertices")
            for i, a in enumerate(self.polygon):
                b = self.polygon[(i + 1) % len(self.polygon)]
                c = self.polygon[(i + 2) % len(self.polygon)]
                if (b - a).cross(c - b) <= 0:
                    raise ConfigurationError(
                        f"body {self.id}: polygon must be convex and counter-clockwise"
                    )
            self.radius = max(v.norm() for v in self.polygon)
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise ConfigurationError(f"body {self.id}: radius must be > 0, got {self.radius}")
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise ConfigurationError(f"body {self.id}: drag must be > 0, got {self.gamma}")
        self.position = Vec2.of(self.position)

    def contains(self, p: Vec2) -> bool:
        rel = p - self.position
        if self.polygon is None:
            return rel.norm() <= self.radius
        n = len(self.polygon)
        for i in range(n):
            a = self.polygon[i]
            b = self.polygon[(i + 1) % n]
            if (b - a).cross(rel - a) < 0:
                return False
        return True


@dataclass
class ForceAccumulator:
    forces: dict = field(default_factory=dict)

    def clear(self) -> None:
        self.forces.clear()

    def add(self, body_id: str, f: Vec2) -> None:
        self.forces[body_id] = self.forces.get(body_id, ZERO) + f

    def get(self, body_id: str) -> Vec2:
        return self.forces.get(body_id, ZERO)

    def is_zero(self) -> bool:
        return all(f.x == 0.0 and f.y == 0.0 for f in self.forces.values())


def attach_tube(body: FloatingBody, node: TubeNode) -> None:
    """Bind ``node`` to ``body``; the node then follows the body's centroid."""
    if node.body_id is not None and node.body_id != body.id:
        raise ConfigurationError(f"node {node.id} is already bound to body {node.body_id}")
    if node.id in body.attachments:
        return
    node.body_id = body.id
    node.position = body.position
    body.attachments.add(node.id)


def sync_attachments(net: TubeNetwork, bodies: Mapping[str, FloatingBody]) -> None:
    for node in net.nodes.values():
        if node.body_id is not None and node.body_id in bodies:
            node.position = bodies[node.body_id].position


def push_from_tip(
    tip_pos: Vec2,
    body: FloatingBody,
    p_mag: float = DEFAULT_PUSH_MAG,
    p_range: float = DEFAULT_PUSH_RANGE,
    heading: Vec2 | None = None,
) -> Vec2:
    """Ripple force on ``body`` from a tip: linear falloff, zero beyond range.

    A tip sitting exactly on the centroid pushes along its own heading
    (or +x when no heading is given).
    """
    if p_mag < 0:
        raise ConfigurationError(f"push magnitude must be >= 0, got {p_mag}")
    if p_range <= 0:
        raise ConfigurationError(f"push range must be > 0, got {p_range}")
    delta = body.position - tip_pos
    d = delta.norm()
    if d >= p_range:
        return ZERO
    if d == 0.0:
        direction = heading.unit() if heading is not None else Vec2(1.0, 0.0)
    else:
        direction = delta / d
    return direction * (p_mag * (1.0 - d / p_range))


def pull_from_tension(
    net: TubeNetwork,
    bodies: Mapping[str, FloatingBody],
    acc: ForceAccumulator | None = None,
) -> ForceAccumulator:
    """Tension times the inward tangent at every free-body attachment endpoint."""
    acc = acc if acc is not None else ForceAccumulator()
    by_body: dict = {}
    for node in net.nodes.values():
        if node.body_id is not None:
            by_body.setdefault(node.body_id, set()).add(node.id)
    for bid in sorted(by_body):
        body = bodies.get(bid)
        if body is None or body.anchored:
            continue
        ids = by_body[bid]
        for tid in sorted(net.tubes):
            tube = net.tubes[tid]
            tension = net.tensions.get(tid, 0.0)
            for end in (0, 1):
                if tube.endpoints[end] not in ids:
                    continue
                t_hat = tube.end_tangent(end)
                if t_hat is None:
                    continue
                acc.add(bid, t_hat * tension)
    return acc


def integrate_bodies(
    bodies: Mapping[str, FloatingBody],
    forces: ForceAccumulator,
    dt: float,
    arena: ArenaSpec | None = None,
) -> dict:
    """Explicit overdamped update, then wall clamping and pairwise separation.

    Returns the per-body displacement from this call.
    """
    if dt <= 0:
        raise ConfigurationError(f"mechanics dt must be > 0, got {dt}")
    start = {bid: b.position for bid, b in bodies.items()}
    for bid in sorted(bodies):
        b = bodies[bid]
        if b.anchored:
            continue
        f = forces.get(bid)
        if f.x != 0.0 or f.y != 0.0:
            b.position = b.position + f * (dt / b.gamma)
        if arena is not None:
            b.position = _clamp(arena, b)
    _separate(bodies, arena)
    return {bid: bodies[bid].position - start[bid] for bid in sorted(bodies)}


def _clamp(arena: ArenaSpec, b: FloatingBody) -> Vec2:
    if arena.contains(b.position, margin=b.radius):
        return b.position
    margin = b.radius if min(arena.extent) > 2 * b.radius else 0.0
    return arena.project_inside(b.position, margin)


def _separate(bodies: Mapping[str, FloatingBody], arena: ArenaSpec | None) -> None:
    ids = sorted(bodies)
    for i, a_id in enumerate(ids):
        for b_id in ids[i + 1:]:
            a, b = bodies[a_id], bodies[b_id]
            if a.anchored and b.anchored:
                continue
            delta = b.position - a.position
            d = delta.norm()
            overlap = a.radius + b.radius - d
            if overlap <= 0:
                continue
            n = delta / d if d > 0 else Vec2(1.0, 0.0)
            if a.anchored:
                b.position = b.position + n * overlap
            elif b.anchored:
                a.position = a.position - n * overlap
            else:
                half = 0.5 * overlap
                a.position = a.position - n * half
                b.position = b.position + n * half
            if arena is not None:
                for body in (a, b):
                    if not body.anchored:
                        body.position = _clamp(arena, body)


def bodies_by_id(bodies: Iterable[FloatingBody]) -> dict:
    out = {}
    for b in bodies:
        if b.id in out:
            raise ConfigurationError(f"duplicate body id {b.id!r}")
        out[b.id] = b
    return out
