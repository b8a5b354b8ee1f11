"""Tip/branch growth model of the plasmodium over an occupancy lattice.

Each branch is a polyline.  A tip rides the last point of its branch and
advances every growth step; spawning a child starts a new branch at the
tip's current point, which is then frozen in the parent so the child's
attachment vertex never moves.  The root branch is a two-point stub at the
seed and never carries a tip.

Tip ``age`` is the number of minutes since the tip was last refreshed:
created, spawned a child, or sensed a gradient above threshold.  It drives
both budget triage and retraction.

Functions mutate the state they are given and return it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Mapping, Optional

import numpy as np

from .arena import ChemoField, NutrientSource, gradient_many
from .errors import ConfigurationError, ScenarioError
from .vec import Vec2

if TYPE_CHECKING:
    from .mechanics import FloatingBody


@dataclass(frozen=True)
class GrowthParams:
    step_length: float = 0.5
    speed: float = 0.08
    branch_prob: float = 0.03
    sensor_angle: float = math.radians(30.0)
    sensor_offset: float = 1.5
    wander_sigma: float = 0.15
    gradient_threshold: float = 1e-5
    density_cap: float = 10.0
    reward_gain: float = 100.0
    retract_age: float = 240.0
    initial_tips: int = 6
    site_tips: int = 3
    seed_deposit: float = 1.0

    def __post_init__(self):
        for name in ("step_length", "speed", "sensor_angle", "sensor_offset",
                     "gradient_threshold", "density_cap", "retract_age"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ConfigurationError(f"growth.{name} must be > 0, got {v}")
        for name in ("wander_sigma", "reward_gain", "seed_deposit"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise ConfigurationError(f"growth.{name} must be >= 0, got {v}")
        if not 0.0 <= self.branch_prob <= 1.0:
            raise ConfigurationError(f"growth.branch_prob must be in [0, 1], got {self.branch_prob}")
        if self.initial_tips < 1:
            raise ConfigurationError("growth.initial_tips must be >= 1")
        if self.site_tips < 0:
            raise ConfigurationError("growth.site_tips must be >= 0")
        if self.seed_deposit > self.density_cap:
            raise ConfigurationError("growth.seed_deposit exceeds density_cap")


@dataclass
class Tip:
    id: int
    position: Vec2
    heading: Vec2
    branch_id: int
    age: float = 0.0
    alive: bool = True
    stalled: bool = False
    sensing: bool = False
    origin_source: Optional[str] = None
    contacted: set = field(default_factory=set)

    @property
    def active(self) -> bool:
        return self.alive and not self.stalled


@dataclass
class Branch:
    id: int
    parent: Optional[int]
    path: list
    attach_index: int = 0
    rewarded: bool = False
    children: list = field(default_factory=list)
    pin: int = 0
    deposits: list = field(default_factory=list)
    attachments: list = field(default_factory=list)
    end_source: Optional[str] = None
    tip_id: Optional[int] = None
    created: float = 0.0

    def length(self) -> float:
        p = np.asarray(self.path)
        return float(np.hypot(*np.diff(p, axis=0).T).sum()) if len(p) > 1 else 0.0


@dataclass
class PlasmodiumState:
    branches: dict
    tips: list
    occupancy: np.ndarray
    engulfed_sources: set
    mass_budget: float
    params: GrowthParams
    root_id: int
    seed: Vec2
    seed_body: Optional[str] = None
    time: float = 0.0
    next_branch: int = 0
    next_tip: int = 0
    seed_sources: set = field(default_factory=set)
    log: list = field(default_factory=list)

    @property
    def root(self) -> Branch:
        return self.branches[self.root_id]

    def tip(self, tip_id: int) -> Tip:
        for t in self.tips:
            if t.id == tip_id:
                return t
        raise KeyError(tip_id)

    def tip_of(self, branch: Branch) -> Optional[Tip]:
        if branch.tip_id is None:
            return None
        return self.tip(branch.tip_id)

    def live_tips(self) -> list[Tip]:
        return [t for t in self.tips if t.active]

    def used_mass(self) -> float:
        return float(self.occupancy.sum())

    def ancestors(self, bid: int) -> list[int]:
        out = []
        b = self.branches[bid]
        while b.parent is not None:
            out.append(b.parent)
            b = self.branches[b.parent]
        return out

    def _new_branch(self, parent: Optional[Branch], point: tuple[float, float]) -> Branch:
        b = Branch(self.next_branch, parent.id if parent else None, [point, point], created=self.time)
        self.next_branch += 1
        if parent is not None:
            b.attach_index = len(parent.path) - 1
            parent.pin = max(parent.pin, b.attach_index)
            parent.children.append(b.id)
        self.branches[b.id] = b
        return b

    def _new_tip(self, branch: Branch, heading: Vec2, origin: Optional[str] = None) -> Tip:
        x, y = branch.path[-1]
        t = Tip(self.next_tip, Vec2(x, y), heading, branch.id, origin_source=origin)
        self.next_tip += 1
        branch.tip_id = t.id
        self.tips.append(t)
        return t


@dataclass(frozen=True)
class GrowthEvent:
    kind: str  # engulf | fuse | occupy | abandon
    time: float
    source_id: Optional[str] = None
    tip_id: Optional[int] = None
    branch_id: Optional[int] = None
    body_id: Optional[str] = None


def seed_at(
    where,
    initial_mass: float,
    fld: ChemoField,
    params: GrowthParams | None = None,
    bodies: Mapping[str, FloatingBody] | None = None,
) -> PlasmodiumState:
    """Place the organism at a point or on a body (given by id)."""
    params = params or GrowthParams()
    if not (initial_mass > 0 and math.isfinite(initial_mass)):
        raise ScenarioError(f"initial plasmodium mass must be > 0, got {initial_mass}")
    seed_body = None
    if isinstance(where, str):
        if bodies is None or where not in bodies:
            raise ScenarioError(f"seed body {where!r} does not exist")
        seed_body = where
        where = bodies[where].position
    where = Vec2.of(where)
    if not fld.contains(where):
        raise ScenarioError(f"seed location {where.as_tuple()} lies outside the arena")
    occ = np.zeros(fld.shape)
    state = PlasmodiumState({}, [], occ, set(), float(initial_mass), params, 0, where, seed_body)
    pt = (where.x, where.y)
    root = state._new_branch(None, pt)
    state.root_id = root.id
    deposit = min(params.seed_deposit, initial_mass)
    if deposit > 0:
        r, c = fld.cell_of(where)
        occ[r, c] += deposit
        root.deposits.append((r * occ.shape[1] + c, deposit, 0))
    k = params.initial_tips
    for i in range(k):
        child = state._new_branch(root, pt)
        state._new_tip(child, Vec2.from_angle(2 * math.pi * i / k))
    return state


def _rotate(h: np.ndarray, ang) -> np.ndarray:
    c = np.cos(ang)
    s = np.sin(ang)
    return np.stack([c * h[:, 0] - s * h[:, 1], s * h[:, 0] + c * h[:, 1]], axis=1)


def _steer(
    pos: np.ndarray,
    head: np.ndarray,
    fld: ChemoField,
    params: GrowthParams,
    normals: np.ndarray,
    advance: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised sensing for N tips.  Returns new headings and a sensed mask."""
    n = len(pos)
    sa = params.sensor_angle
    dirs = [head, _rotate(head, sa), _rotate(head, -sa)]
    pts = np.concatenate([pos + params.sensor_offset * d for d in dirs])
    grads = gradient_many(fld, pts)
    inside = fld.contains_many(pts)
    dd = np.einsum("ij,ij->i", grads, np.concatenate(dirs))
    dd = np.where(inside, dd, -np.inf).reshape(3, n)
    best = np.argmax(dd, axis=0)  # ties keep the forward sensor
    best_val = dd[best, np.arange(n)]
    sensed = best_val > params.gradient_threshold
    steered = np.stack(dirs)[best, np.arange(n)]
    sigma = params.wander_sigma * math.sqrt(advance / params.step_length)
    wandered = _rotate(head, sigma * normals)
    out = np.where(sensed[:, None], steered, wandered)
    out /= np.hypot(out[:, 0], out[:, 1])[:, None]
    return out, sensed


def sense_and_steer(
    tip: Tip,
    fld: ChemoField,
    rng: np.random.Generator,
    params: GrowthParams | None = None,
    advance: float | None = None,
) -> Vec2:
    """New unit heading for one tip; consumes exactly one normal draw."""
    params = params or GrowthParams()
    advance = params.step_length if advance is None else advance
    z = rng.standard_normal(1)
    h, sensed = _steer(
        np.array([[tip.position.x, tip.position.y]]),
        np.array([[tip.heading.x, tip.heading.y]]),
        fld, params, z, advance,
    )
    tip.sensing = bool(sensed[0])
    return Vec2(float(h[0, 0]), float(h[0, 1]))


def _advance_path(b: Branch, new: tuple[float, float], step_length: float) -> int:
    path = b.path
    last = len(path) - 1
    if last > b.pin:
        px, py = path[-2]
        if math.hypot(new[0] - px, new[1] - py) <= step_length:
            path[-1] = new
            return last
    path.append(new)
    return last + 1


def grow_step(
    state: PlasmodiumState,
    fld: ChemoField,
    bodies: Mapping[str, FloatingBody] | None,
    rng: np.random.Generator,
    dt: float,
) -> PlasmodiumState:
    """Advance every active tip by ``speed * dt`` along its steered heading."""
    if dt <= 0:
        raise ConfigurationError(f"growth dt must be > 0, got {dt}")
    p = state.params
    live = state.live_tips()
    for t in state.tips:
        if not t.active:
            t.age += dt
    if not live:
        state.time += dt
        return state
    n = len(live)
    advance = p.speed * dt
    pos = np.array([[t.position.x, t.position.y] for t in live])
    head = np.array([[t.heading.x, t.heading.y] for t in live])
    normals = rng.standard_normal(n)
    branch_u = rng.random(n)
    new_head, sensed = _steer(pos, head, fld, p, normals, advance)

    # budget triage: oldest unrewarded tips die first, lower branch id on ties
    free = state.mass_budget - state.used_mass()
    fundable = max(int(math.floor(free / advance + 1e-9)), 0)
    funded = [True] * n
    if fundable < n:
        order = sorted(
            range(n),
            key=lambda i: (state.branches[live[i].branch_id].rewarded, -live[i].age, live[i].branch_id),
        )
        excess = n - fundable
        for i in order:
            if excess == 0:
                break
            t = live[i]
            funded[i] = False
            excess -= 1
            if not state.branches[t.branch_id].rewarded:
                t.alive = False
                state.log.append(("starve", state.time, t.id, t.branch_id))

    occ = state.occupancy
    ncols = occ.shape[1]
    p_branch = 1.0 - (1.0 - p.branch_prob) ** (advance / p.step_length)
    new_pos = pos + advance * new_head
    inside = fld.contains_many(new_pos)
    rows, cols = fld.cells_of(new_pos)
    for i, t in enumerate(live):
        t.heading = Vec2(float(new_head[i, 0]), float(new_head[i, 1]))
        t.sensing = bool(sensed[i])
        t.age = 0.0 if t.sensing else t.age + dt
        if not t.alive or not funded[i]:
            continue
        if not inside[i]:
            t.alive = False
            state.log.append(("exit", state.time, t.id, t.branch_id))
            continue
        r, c = int(rows[i]), int(cols[i])
        if (r, c) != fld.cell_of(t.position) and occ[r, c] + advance > p.density_cap:
            # saturated protoplasm ahead: the tip stalls and will later retract
            t.stalled = True
            state.log.append(("block", state.time, t.id, t.branch_id))
            continue
        amount = max(min(advance, p.density_cap - occ[r, c]), 0.0)
        occ[r, c] += amount
        b = state.branches[t.branch_id]
        npt = (float(new_pos[i, 0]), float(new_pos[i, 1]))
        idx = _advance_path(b, npt, p.step_length)
        b.deposits.append((r * ncols + c, amount, idx))
        t.position = Vec2(*npt)
        if branch_u[i] < p_branch:
            sign = 1.0 if branch_u[i] < p_branch / 2 else -1.0
            child = state._new_branch(b, npt)
            state._new_tip(child, t.heading.rotate(sign * p.sensor_angle), t.origin_source)
            t.age = 0.0
    state.time += dt
    return state


def _mark_rewarded(state: PlasmodiumState, bid: int) -> None:
    for b in [bid, *state.ancestors(bid)]:
        state.branches[b].rewarded = True


def _extend_to(b: Branch, target: tuple[float, float], step_length: float) -> None:
    """Append points from the branch end to ``target`` no more than a step apart."""
    x0, y0 = b.path[-1]
    d = math.hypot(target[0] - x0, target[1] - y0)
    n = max(int(math.ceil(d / step_length - 1e-9)), 1)
    for k in range(1, n + 1):
        f = k / n
        b.path.append((x0 + f * (target[0] - x0), y0 + f * (target[1] - y0)))
    b.pin = len(b.path) - 1


def _reach(src: NutrientSource, bodies) -> float:
    """Engulf distance: a step length, or the hosting foam radius if larger."""
    if src.host_body is not None and bodies and src.host_body in bodies:
        return max(bodies[src.host_body].radius, 0.0)
    return 0.0


def engulf_check(
    state: PlasmodiumState,
    sources: Iterable[NutrientSource],
    bodies: Mapping[str, FloatingBody] | None = None,
) -> list[GrowthEvent]:
    """Detect engulfing, fusion with already-taken sites, and body contacts."""
    p = state.params
    events: list[GrowthEvent] = []
    sources = sorted(sources, key=lambda s: s.id)
    bodies = bodies or {}
    for src in sources:
        if src.id in state.engulfed_sources:
            continue
        reach = max(p.step_length, _reach(src, bodies))
        hit: Optional[Tip] = None
        if src.position.dist(state.seed) <= reach:
            state.engulfed_sources.add(src.id)
            state.mass_budget += p.reward_gain
            state.root.rewarded = True
            state.seed_sources.add(src.id)
            events.append(GrowthEvent("engulf", state.time, src.id, None, state.root_id, src.host_body))
            continue
        for t in state.tips:
            if t.alive and t.position.dist(src.position) <= reach:
                hit = t
                break
        if hit is None:
            continue
        b = state.branches[hit.branch_id]
        _extend_to(b, (src.position.x, src.position.y), p.step_length)
        b.end_source = src.id
        hit.position = src.position
        hit.alive = False
        b.tip_id = None
        state.tips.remove(hit)
        _mark_rewarded(state, b.id)
        state.engulfed_sources.add(src.id)
        state.mass_budget += p.reward_gain
        body_id = None
        host = bodies.get(src.host_body) if src.host_body else None
        if host is not None and not host.anchored:
            body_id = host.id
            b.attachments.append((len(b.path) - 1, host.id))
        events.append(GrowthEvent("engulf", state.time, src.id, hit.id, b.id, body_id))
        arrival = hit.heading
        k = p.site_tips
        for i in range(k):
            child = state._new_branch(b, b.path[-1])
            state._new_tip(child, arrival.rotate(2 * math.pi * i / k), src.id)

    taken = [s for s in sources if s.id in state.engulfed_sources and s.id not in state.seed_sources]
    for t in state.tips:
        if not t.active:
            continue
        for src in taken:
            if src.id == t.origin_source:
                continue
            if t.position.dist(src.position) <= max(p.step_length, _reach(src, bodies)):
                t.stalled = True
                events.append(GrowthEvent("fuse", state.time, src.id, t.id, t.branch_id))
                break

    food_bodies = {s.host_body for s in sources if s.host_body}
    for bid in sorted(bodies):
        body = bodies[bid]
        if body.anchored or bid in food_bodies:
            continue
        for t in state.tips:
            if not t.active or bid in t.contacted:
                continue
            if not body.contains(t.position):
                continue
            t.contacted.add(bid)
            br = state.branches[t.branch_id]
            if t.sensing:
                # crawl onto the piece: the path passes through its centroid
                _extend_to(br, (body.position.x, body.position.y), p.step_length)
                t.position = body.position
                br.attachments.append((len(br.path) - 1, bid))
                events.append(GrowthEvent("occupy", state.time, None, t.id, br.id, bid))
            else:
                t.stalled = True
                events.append(GrowthEvent("abandon", state.time, None, t.id, br.id, bid))
    return events


def _refund(state: PlasmodiumState, deposits: list) -> float:
    flat = state.occupancy.reshape(-1)
    total = 0.0
    for cell, amount, _ in deposits:
        flat[cell] -= amount
        if flat[cell] < 0.0:
            flat[cell] = 0.0
        total += amount
    return total


def _remove_tip(state: PlasmodiumState, b: Branch) -> None:
    if b.tip_id is not None:
        state.tips.remove(state.tip(b.tip_id))
        b.tip_id = None


def retract_unrewarded(state: PlasmodiumState, now: float | None = None) -> PlasmodiumState:
    """Withdraw expired pseudopodia until a fix point is reached.

    A tip has expired once its age exceeds ``retract_age``.  An unrewarded
    leaf with an expired (or no) tip is deleted outright; any other branch
    with an expired tip loses the tail beyond its last child attachment.
    Branches on a route to an engulfed source keep that route.
    """
    limit = state.params.retract_age
    now = state.time if now is None else now
    changed = True
    while changed:
        changed = False
        for bid in sorted(state.branches):
            if bid == state.root_id:
                continue
            b = state.branches[bid]
            tip = state.tip_of(b)
            if tip is not None and tip.age <= limit:
                continue
            if tip is None and (b.rewarded or b.children):
                continue
            if not b.rewarded and not b.children:
                refunded = _refund(state, b.deposits)
                _remove_tip(state, b)
                parent = state.branches[b.parent]
                parent.children.remove(bid)
                del state.branches[bid]
                state.log.append(("retract", now, bid, refunded))
            else:
                keep = max([state.branches[c].attach_index for c in b.children] + [1])
                if b.end_source is not None:
                    keep = len(b.path) - 1
                tail = [d for d in b.deposits if d[2] > keep]
                refunded = _refund(state, tail)
                b.deposits = [d for d in b.deposits if d[2] <= keep]
                del b.path[keep + 1:]
                b.attachments = [a for a in b.attachments if a[0] <= keep]
                b.pin = min(b.pin, keep)
                _remove_tip(state, b)
                state.log.append(("trim", now, bid, refunded))
            changed = True
    return state


def check_tree(state: PlasmodiumState) -> None:
    """Assert the structural invariants; used by tests and debug runs."""
    root = state.root_id
    parents = 0
    for bid, b in state.branches.items():
        assert len(b.path) >= 2, f"branch {bid} has <2 points"
        if bid == root:
            assert b.parent is None
            continue
        parents += 1
        seen = set()
        cur = b
        while cur.parent is not None:
            assert cur.id not in seen, "cycle"
            seen.add(cur.id)
            cur = state.branches[cur.parent]
        assert cur.id == root
        assert bid in state.branches[b.parent].children
        start = b.path[0]
        anchor = state.branches[b.parent].path[b.attach_index]
        assert math.hypot(start[0] - anchor[0], start[1] - anchor[1]) < 1e-9
        seg = np.hypot(*np.diff(np.asarray(b.path), axis=0).T)
        assert (seg <= state.params.step_length + 1e-9).all(), f"branch {bid} segment too long"
    assert parents == len(state.branches) - 1
    for t in state.tips:
        b = state.branches[t.branch_id]
        assert b.tip_id == t.id
        last = b.path[-1]
        assert math.hypot(last[0] - t.position.x, last[1] - t.position.y) < 1e-9
    assert state.used_mass() <= state.mass_budget + 1e-9
