"""Protoplasmic tube network: extraction, pruning and contraction.

Rewarded branches of the plasmodium become polyline tubes between named
nodes.  Node ids are stable strings so that a tube contracted over many
ticks can be recognised again when the network is re-extracted:

* ``seed`` for the seed site,
* ``src:<id>`` for an engulfed source on water or on an anchored body,
* ``body:<id>`` for a free floating body (hosted food or an occupied piece),
* ``j:<branch>:<index>`` for a branch point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Mapping, Optional

import numpy as np

from .errors import ConfigurationError, TortuosityError
from .vec import Vec2

if TYPE_CHECKING:
    from .arena import NutrientSource
    from .mechanics import FloatingBody
    from .plasmodium import PlasmodiumState

SIMPLIFY_TOL = 0.05
DEFAULT_STIFFNESS = 1.0
DEFAULT_LAMBDA = 0.01

SITE = "site"
JUNCTION = "junction"
ATTACHMENT = "attachment"


@dataclass
class TubeNode:
    id: str
    kind: str
    position: Vec2
    body_id: Optional[str] = None
    source_id: Optional[str] = None
    anchored: bool = True

    @property
    def is_site(self) -> bool:
        """Sites survive pruning: the seed, engulfed sources, every body attachment."""
        return self.kind != JUNCTION


@dataclass
class Tube:
    id: int
    endpoints: tuple
    path: np.ndarray
    stiffness: float = DEFAULT_STIFFNESS
    rest_length: float = math.inf
    gain: float = 1.0

    def __post_init__(self):
        self.path = np.array(self.path, dtype=float).reshape(-1, 2)
        if len(self.path) < 2:
            raise ConfigurationError(f"tube {self.id} needs at least 2 path points")
        self.rest_length = min(self.rest_length, self.length())

    def length(self) -> float:
        d = np.diff(self.path, axis=0)
        return float(np.hypot(d[:, 0], d[:, 1]).sum())

    def chord(self) -> float:
        a, b = self.path[0], self.path[-1]
        return float(math.hypot(b[0] - a[0], b[1] - a[1]))

    @property
    def rest_ratio(self) -> float:
        if not self.rest_length > 0:
            return 1.0
        return max(1.0, self.length() / self.rest_length)

    def deviation(self) -> float:
        """Largest perpendicular distance of a path vertex from the chord line."""
        a, b = self.path[0], self.path[-1]
        c = b - a
        n = math.hypot(*c)
        rel = self.path - a
        if n == 0.0:
            return float(np.hypot(rel[:, 0], rel[:, 1]).max())
        return float(np.abs(rel[:, 0] * c[1] - rel[:, 1] * c[0]).max() / n)

    def end_tangent(self, end: int) -> Optional[Vec2]:
        """Unit tangent at endpoint ``end`` (0 or 1), pointing into the tube."""
        pts = self.path if end == 0 else self.path[::-1]
        p0 = pts[0]
        for q in pts[1:]:
            d = q - p0
            n = math.hypot(d[0], d[1])
            if n > 1e-12:
                return Vec2(d[0] / n, d[1] / n)
        return None

    def oriented(self, start: str) -> np.ndarray:
        return self.path if self.endpoints[0] == start else self.path[::-1]


def tortuosity(t: Tube) -> float:
    c = t.chord()
    if c <= 1e-12:
        raise TortuosityError(f"tube {t.id}: endpoints coincide, tortuosity undefined")
    return t.length() / c


def tension_of(t: Tube) -> float:
    c = t.chord()
    if c <= 1e-12:
        return 0.0
    return t.stiffness * t.gain * max(t.length() - c, 0.0) / c


@dataclass
class TubeNetwork:
    nodes: dict = field(default_factory=dict)
    tubes: dict = field(default_factory=dict)
    tensions: dict = field(default_factory=dict)
    next_id: int = 0

    def add_node(self, node: TubeNode) -> TubeNode:
        self.nodes.setdefault(node.id, node)
        return self.nodes[node.id]

    def add_tube(self, a: str, b: str, path, stiffness: float = DEFAULT_STIFFNESS) -> Tube:
        if self.tube_between(a, b) is not None:
            raise ConfigurationError(f"duplicate tube between {a} and {b}")
        t = Tube(self.next_id, (a, b), path, stiffness)
        self.next_id += 1
        self.tubes[t.id] = t
        return t

    def tube_between(self, a: str, b: str) -> Optional[Tube]:
        for t in self.tubes.values():
            if set(t.endpoints) == {a, b} and (a != b or t.endpoints == (a, a)):
                return t
        return None

    def degree(self, nid: str) -> int:
        return sum((t.endpoints[0] == nid) + (t.endpoints[1] == nid) for t in self.tubes.values())

    def neighbours(self, nid: str) -> list[str]:
        out = []
        for tid in sorted(self.tubes):
            a, b = self.tubes[tid].endpoints
            if a == nid:
                out.append(b)
            elif b == nid:
                out.append(a)
        return out

    def components(self) -> list[set]:
        adj = {n: set() for n in self.nodes}
        for t in self.tubes.values():
            a, b = t.endpoints
            adj[a].add(b)
            adj[b].add(a)
        seen: set = set()
        comps = []
        for n in sorted(adj):
            if n in seen:
                continue
            stack, comp = [n], set()
            while stack:
                u = stack.pop()
                if u in comp:
                    continue
                comp.add(u)
                stack.extend(adj[u] - comp)
            seen |= comp
            comps.append(comp)
        return comps

    def is_connected(self) -> bool:
        return len(self.components()) <= 1

    def site_nodes(self) -> list[TubeNode]:
        return [self.nodes[k] for k in sorted(self.nodes) if self.nodes[k].is_site]

    def total_length(self) -> float:
        return sum(t.length() for t in self.tubes.values())

    def sync(self, sources: Iterable[NutrientSource] = (), bodies: Mapping[str, FloatingBody] | None = None) -> None:
        """Move site and attachment nodes to their hosts and re-pin tube ends.

        Path vertices that now lie on the body carrying an endpoint are
        dropped; that part of the organism rides on the piece.
        """
        bodies = bodies or {}
        src = {s.id: s for s in sources}
        for node in self.nodes.values():
            if node.body_id is not None and node.body_id in bodies:
                node.position = bodies[node.body_id].position
            elif node.source_id is not None and node.source_id in src:
                node.position = src[node.source_id].position
        for tid in sorted(self.tubes):
            t = self.tubes[tid]
            for end in (0, 1):
                node = self.nodes[t.endpoints[end]]
                body = bodies.get(node.body_id) if node.body_id else None
                if body is not None and body.anchored:
                    body = None
                t.path = _repin(t.path, end, node.position, body)


def _repin(path: np.ndarray, end: int, pos: Vec2, body) -> np.ndarray:
    pts = path if end == 0 else path[::-1]
    if body is not None and len(pts) > 2:
        half = max(len(pts) // 2, 1)
        inside = [i for i in range(1, half) if body.contains(Vec2(pts[i, 0], pts[i, 1]))]
        if inside:
            pts = np.concatenate([pts[:1], pts[inside[-1] + 1:]])
    pts = pts.copy()
    pts[0] = (pos.x, pos.y)
    return pts if end == 0 else pts[::-1]


def simplify(path: np.ndarray, tol: float = SIMPLIFY_TOL) -> np.ndarray:
    """Douglas-Peucker: every removed vertex lies within ``tol`` of the result."""
    pts = np.asarray(path, dtype=float)
    n = len(pts)
    if n <= 2:
        return pts.copy()
    keep = np.zeros(n, dtype=bool)
    keep[0] = keep[-1] = True
    stack = [(0, n - 1)]
    while stack:
        i, j = stack.pop()
        if j <= i + 1:
            continue
        a, b = pts[i], pts[j]
        seg = b - a
        L2 = float(seg @ seg)
        rel = pts[i + 1:j] - a
        if L2 == 0.0:
            d = np.hypot(rel[:, 0], rel[:, 1])
        else:
            u = np.clip(rel @ seg / L2, 0.0, 1.0)
            proj = rel - u[:, None] * seg
            d = np.hypot(proj[:, 0], proj[:, 1])
        k = int(np.argmax(d))
        if d[k] > tol:
            m = i + 1 + k
            keep[m] = True
            stack.append((i, m))
            stack.append((m, j))
    return pts[keep]


def _source_node(src: NutrientSource, bodies: Mapping) -> TubeNode:
    host = bodies.get(src.host_body) if src.host_body else None
    if host is not None and not host.anchored:
        return TubeNode(f"body:{host.id}", ATTACHMENT, host.position, host.id, src.id, False)
    return TubeNode(f"src:{src.id}", SITE, src.position, None, src.id, True)


def extract_network(
    state: PlasmodiumState,
    sources: Iterable[NutrientSource] = (),
    bodies: Mapping[str, FloatingBody] | None = None,
    previous: TubeNetwork | None = None,
    stiffness: float = DEFAULT_STIFFNESS,
    tol: float = SIMPLIFY_TOL,
) -> TubeNetwork:
    """Tubes along rewarded branches, pruned; contracted paths are carried over.

    A tube whose endpoint pair already existed in ``previous`` keeps the
    previous tube's id, path, rest length and gain.
    """
    bodies = bodies or {}
    src_by_id = {s.id: s for s in sources}
    net = TubeNetwork()
    seed_anchored = True
    if state.seed_body is not None and state.seed_body in bodies:
        seed_anchored = bodies[state.seed_body].anchored
    net.add_node(TubeNode("seed", SITE, state.seed, state.seed_body, None, seed_anchored))

    def key(bid: int, idx: int) -> str:
        b = state.branches[bid]
        if bid == state.root_id:
            return "seed"
        if idx == 0:
            return key(b.parent, b.attach_index)
        if idx == len(b.path) - 1 and b.end_source is not None:
            return node_for_source(b.end_source).id
        for i, body_id in b.attachments:
            if i == idx:
                return node_for_body(body_id).id
        return f"j:{bid}:{idx}"

    def node_for_source(sid: str) -> TubeNode:
        src = src_by_id.get(sid)
        if src is None:
            return net.add_node(TubeNode(f"src:{sid}", SITE, state.seed, None, sid, True))
        return net.add_node(_source_node(src, bodies))

    def node_for_body(body_id: str) -> TubeNode:
        body = bodies.get(body_id)
        pos = body.position if body is not None else state.seed
        anchored = body.anchored if body is not None else True
        return net.add_node(TubeNode(f"body:{body_id}", ATTACHMENT, pos, body_id, None, anchored))

    for sid in sorted(state.seed_sources):
        src = src_by_id.get(sid)
        if src is not None and src.host_body and src.host_body in bodies and not bodies[src.host_body].anchored:
            node_for_source(sid)

    raw: list = []
    for bid in sorted(state.branches):
        b = state.branches[bid]
        if bid == state.root_id or not b.rewarded:
            continue
        rewarded_children = [state.branches[c].attach_index for c in b.children if state.branches[c].rewarded]
        last = len(b.path) - 1 if b.end_source is not None else max(rewarded_children, default=0)
        if last <= 0:
            continue
        cuts = {0, last, *rewarded_children}
        cuts |= {i for i, _ in b.attachments if i <= last}
        cuts = sorted(c for c in cuts if c <= last)
        for i, j in zip(cuts, cuts[1:]):
            ka, kb = key(bid, i), key(bid, j)
            if ka == kb:
                continue
            for k, idx in ((ka, i), (kb, j)):
                if k not in net.nodes:
                    x, y = b.path[idx]
                    net.add_node(TubeNode(k, JUNCTION, Vec2(x, y)))
            raw.append((ka, kb, np.asarray(b.path[i:j + 1], dtype=float)))

    for ka, kb, path in raw:
        existing = net.tube_between(ka, kb)
        if existing is not None:
            continue  # parallel routes between the same nodes: keep the first
        net.add_tube(ka, kb, path, stiffness)
    prune_redundant(net)
    carried = {frozenset(t.endpoints) for t in previous.tubes.values()} if previous is not None else set()
    for tid in sorted(net.tubes):
        t = net.tubes[tid]
        if frozenset(t.endpoints) not in carried:  # carried tubes keep their old path
            t.path = simplify(t.path, tol)
    if previous is not None:
        _carry_over(net, previous)
    net.sync(sources, bodies)
    net.tensions = {tid: tension_of(t) for tid, t in sorted(net.tubes.items())}
    return net


def _carry_over(net: TubeNetwork, previous: TubeNetwork) -> None:
    by_pair = {frozenset(t.endpoints): t for t in previous.tubes.values()}
    next_id = previous.next_id
    out = {}
    for tid in sorted(net.tubes):
        t = net.tubes[tid]
        old = by_pair.get(frozenset(t.endpoints))
        if old is not None:
            t = Tube(old.id, t.endpoints, old.oriented(t.endpoints[0]).copy(),
                     old.stiffness, old.rest_length, old.gain)
        else:
            t = Tube(next_id, t.endpoints, t.path, t.stiffness)
            next_id += 1
        out[t.id] = t
    net.tubes = dict(sorted(out.items()))
    net.next_id = next_id


def prune_redundant(net: TubeNetwork) -> TubeNetwork:
    """Drop dead-end junction twigs and fuse pass-through junctions, in place."""
    changed = True
    while changed:
        changed = False
        for nid in sorted(net.nodes):
            node = net.nodes.get(nid)
            if node is None or node.is_site:
                continue
            incident = [t for _, t in sorted(net.tubes.items()) if nid in t.endpoints]
            if len(incident) <= 1:
                for t in incident:
                    del net.tubes[t.id]
                del net.nodes[nid]
                changed = True
            elif len(incident) == 2:
                t1, t2 = incident
                a = t1.endpoints[0] if t1.endpoints[1] == nid else t1.endpoints[1]
                b = t2.endpoints[0] if t2.endpoints[1] == nid else t2.endpoints[1]
                if a == nid or b == nid or a == b:
                    continue
                if net.tube_between(a, b) is not None:
                    continue
                p1 = t1.oriented(a)
                p2 = t2.oriented(nid)
                merged = Tube(
                    min(t1.id, t2.id), (a, b), np.concatenate([p1, p2[1:]]),
                    t1.stiffness, math.inf, t1.gain,
                )
                del net.tubes[t1.id]
                del net.tubes[t2.id]
                net.tubes[merged.id] = merged
                del net.nodes[nid]
                changed = True
    net.tensions = {tid: net.tensions.get(tid, 0.0) for tid in sorted(net.tubes)}
    return net


def contract_step(net: TubeNetwork, dt: float, lam: float = DEFAULT_LAMBDA) -> tuple[TubeNetwork, dict]:
    """Relax every interior vertex toward its chord point by ``lam * gain * dt``.

    A vertex's target sits on the chord at the vertex's arclength fraction,
    so the perpendicular offset shrinks by exactly ``1 - lam*dt`` per step
    and the path length excess by at least that factor.  Endpoints stay on
    their nodes.  Tensions are evaluated after the move.
    """
    if dt <= 0:
        raise ConfigurationError(f"contraction dt must be > 0, got {dt}")
    if lam < 0:
        raise ConfigurationError(f"contraction rate must be >= 0, got {lam}")
    tensions = {}
    for tid in sorted(net.tubes):
        t = net.tubes[tid]
        alpha = lam * t.gain * dt
        if alpha > 1.0 + 1e-12:
            raise ConfigurationError(f"tube {tid}: lambda*dt = {alpha} exceeds 1")
        alpha = min(alpha, 1.0)
        p = t.path
        p[0] = net.nodes[t.endpoints[0]].position.as_tuple()
        p[-1] = net.nodes[t.endpoints[1]].position.as_tuple()
        if len(p) > 2 and alpha > 0.0:
            seg = np.hypot(*np.diff(p, axis=0).T)
            total = seg.sum()
            if total > 0.0:
                frac = np.concatenate([[0.0], np.cumsum(seg)]) / total
                target = p[0] + frac[:, None] * (p[-1] - p[0])
                p[1:-1] += alpha * (target[1:-1] - p[1:-1])
        t.rest_length = min(t.rest_length, t.length())
        tensions[tid] = tension_of(t)
    net.tensions = tensions
    return net, tensions


def site_topology(net: TubeNetwork) -> set:
    """Site pairs joined by a path whose interior visits only junctions."""
    adj: dict = {n: [] for n in net.nodes}
    for t in net.tubes.values():
        a, b = t.endpoints
        adj[a].append(b)
        adj[b].append(a)
    pairs = set()
    for s in net.site_nodes():
        stack, seen = [s.id], {s.id}
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v in seen:
                    continue
                seen.add(v)
                if net.nodes[v].is_site:
                    pairs.add(frozenset((s.id, v)))
                else:
                    stack.append(v)
    return pairs


def edge_rows(net: TubeNetwork) -> list[dict]:
    rows = []
    for tid in sorted(net.tubes):
        t = net.tubes[tid]
        a, b = (net.nodes[e] for e in t.endpoints)
        rows.append({
            "tube": tid, "node_a": a.id, "node_b": b.id,
            "ax": a.position.x, "ay": a.position.y, "bx": b.position.x, "by": b.position.y,
            "length": t.length(), "chord": t.chord(), "tension": net.tensions.get(tid, 0.0),
        })
    return rows
