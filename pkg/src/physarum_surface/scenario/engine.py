"""Deterministic tick loop.

One tick advances the chemical field by 0.1 min.  Every ``substep`` ticks
the organism grows, sites are checked, expired pseudopodia retract, tubes
contract and bodies move, all with a step of ``substep * 0.1`` minutes.
The order of these stages inside a tick is fixed:

emit -> diffuse -> grow -> engulf -> retract -> extract/prune -> contract
-> pull + push forces -> integrate bodies -> maneuvers -> metrics/snapshots
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..analysis import Metrics, spanning_metrics
from ..arena import NutrientSource, build_arena, diffuse_decay_step, emit_sources
from ..graphstore.maneuvers import CommandQueue
from ..graphstore.storage import StorageGraph
from ..mechanics import ForceAccumulator, integrate_bodies, pull_from_tension, push_from_tip
from ..plasmodium import engulf_check, grow_step, retract_unrewarded, seed_at
from ..tubes import Tube, TubeNetwork, contract_step, edge_rows, extract_network
from ..vec import Vec2
from .model import TICK_MINUTES, Scenario

METRIC_FIELDS = (
    "tick", "time_min", "sites_covered", "sites_total", "is_tree", "total_length",
    "mst_length", "length_ratio", "mean_tortuosity", "edge_jaccard_vs_rng",
    "live_tips", "branches", "mass_used", "mass_budget", "final",
)
EVENT_FIELDS = ("tick", "time_min", "kind", "source", "tip", "branch", "body", "value")
BODY_FIELDS = ("tick", "body", "x", "y", "anchored", "fx", "fy")
EDGE_FIELDS = ("tube", "node_a", "node_b", "ax", "ay", "bx", "by", "length", "chord", "tension")


@dataclass
class PushContact:
    """First moment a tip came within push range of a body, plus its total impulse."""

    time_min: float
    tip_position: Vec2
    body_position: Vec2
    impulse: float = 0.0


@dataclass
class Snapshot:
    tick: int
    svg: str
    pgm: bytes


@dataclass
class RunRecord:
    scenario_hash: str
    scenario_name: str
    rng_seed: int
    ticks: int
    metrics: list = field(default_factory=list)
    events: list = field(default_factory=list)
    bodies: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    edges: list = field(default_factory=list)  # final tube network
    final: Optional[Metrics] = None
    completion_min: Optional[float] = None
    sim: Optional["Simulation"] = field(default=None, repr=False, compare=False)


class SimulationRealizer:
    """Storage realizer backed by a live simulation.

    Bindings are ``seed``, source ids and body ids.  Two bindings are
    reachable when their tube nodes lie in one component of the current
    network.  A link copies the network route between them into a
    maneuver-owned tube kept beside the extracted network.
    """

    def __init__(self, sim: Simulation):
        self.sim = sim

    def node_of(self, binding: str) -> Optional[str]:
        sim = self.sim
        if binding == "seed" or binding == sim.state.seed_body:
            return "seed"
        src = sim.source_map.get(binding)
        if src is not None:
            host = sim.bodies.get(src.host_body) if src.host_body else None
            if src.id in sim.state.seed_sources:
                return "seed"
            return f"body:{host.id}" if host is not None and not host.anchored else f"src:{src.id}"
        body = sim.bodies.get(binding)
        if body is not None:
            if not body.anchored:
                return f"body:{body.id}"
            for s in sim.sources:
                if s.host_body == body.id:
                    return self.node_of(s.id)
        return None

    def exists(self, binding: str) -> bool:
        return binding == "seed" or binding in self.sim.source_map or binding in self.sim.bodies

    def body(self, binding: str):
        return self.sim.bodies.get(binding)

    def _route(self, a: str, b: str) -> Optional[list]:
        net = self.sim.network
        if a not in net.nodes or b not in net.nodes:
            return None
        prev = {a: None}
        queue = [a]
        while queue:
            u = queue.pop(0)
            if u == b:
                break
            for tid in sorted(net.tubes):
                t = net.tubes[tid]
                if u not in t.endpoints:
                    continue
                v = t.endpoints[1] if t.endpoints[0] == u else t.endpoints[0]
                if v not in prev:
                    prev[v] = (u, tid)
                    queue.append(v)
        if b not in prev:
            return None
        hops = []
        v = b
        while prev[v] is not None:
            u, tid = prev[v]
            hops.append((u, tid))
            v = u
        return hops[::-1]

    def reachable(self, src: str, dst: str) -> bool:
        a, b = self.node_of(src), self.node_of(dst)
        if a is None or b is None:
            return False
        return a == b or self._route(a, b) is not None

    def realize_link(self, a: str, b: str):
        na, nb = self.node_of(a), self.node_of(b)
        if na is None or nb is None or na == nb:
            return None
        hops = self._route(na, nb)
        if hops is None:
            return None
        net = self.sim.network
        pts = []
        for u, tid in hops:
            seg = net.tubes[tid].oriented(u)
            pts.extend(seg if not pts else seg[1:])
        token = ("link", *sorted((na, nb)))
        path = np.array(pts) if token[1] == na else np.array(pts[::-1])
        self.sim.links[token] = Tube(-1 - len(self.sim.links), (token[1], token[2]), path,
                                     self.sim.scenario.tubes.stiffness)
        return token

    def release_link(self, token) -> None:
        self.sim.links.pop(token, None)

    def alive(self, token) -> bool:
        net = self.sim.network
        return token in self.sim.links and token[1] in net.nodes and token[2] in net.nodes


class Simulation:
    def __init__(self, scenario: Scenario):
        s = scenario
        self.scenario = s
        self.digest = s.digest()
        self.rng = np.random.default_rng(s.rng_seed)
        self.field = build_arena(s.arena, s.field.diffusion, s.field.decay, TICK_MINUTES, s.field.stencil)
        hosts = {src.host_body for src in s.sources if src.host_body}
        self.bodies = {b.id: b.build(b.id in hosts) for b in sorted(s.bodies, key=lambda b: b.id)}
        self.anchored_start = {k: b.position for k, b in self.bodies.items() if b.anchored}
        self.start_positions = {k: b.position for k, b in self.bodies.items()}
        self.sources = list(s.sources)
        self.source_map = {src.id: src for src in self.sources}
        self.sites = s.sites()
        self.state = seed_at(s.seed.where, s.seed.mass, self.field, s.growth, self.bodies)
        self.links: dict = {}
        self.network = extract_network(self.state, self.sources, self.bodies,
                                       stiffness=s.tubes.stiffness, tol=s.tubes.simplify_tol)
        self.graph = StorageGraph(SimulationRealizer(self))
        self.queue = CommandQueue()
        self.forces = ForceAccumulator()
        self.tick = 0
        self.events: list = []
        self.metric_rows: list = []
        self.body_rows: list = []
        self.snapshots: list = []
        self.completion_min: Optional[float] = None
        self.push_log: dict = {}  # (body, tip) -> PushContact
        self._log_seen = 0
        self.on_maneuver = None
        for ev in engulf_check(self.state, self.sources, self.bodies):
            self._event(ev.kind, ev.source_id, ev.tip_id, ev.branch_id, ev.body_id)
        self._check_completion()

    # world interface used by maneuvers
    @property
    def push_mag(self) -> float:
        return self.scenario.mechanics.push_mag

    @property
    def push_range(self) -> float:
        return self.scenario.mechanics.push_range

    @property
    def tip_speed(self) -> float:
        return self.scenario.growth.speed

    def tube_for(self, token) -> Optional[Tube]:
        return self.links.get(token)

    def position_of(self, binding: str) -> Vec2:
        if binding in self.bodies:
            return self.bodies[binding].position
        if binding in self.source_map:
            return self.source_map[binding].position
        return self.state.seed

    @property
    def time_min(self) -> float:
        return self.tick * TICK_MINUTES

    def _event(self, kind, source=None, tip=None, branch=None, body=None, value="") -> None:
        self.events.append((self.tick, round(self.time_min, 6), kind, source, tip, branch, body, value))

    def _drain_log(self) -> None:
        log = self.state.log
        for entry in log[self._log_seen:]:
            kind = entry[0]
            if kind in ("retract", "trim"):
                self._event(kind, branch=entry[2], value=f"{entry[3]:.6g}")
            else:
                self._event(kind, tip=entry[2], branch=entry[3])
        self._log_seen = len(log)

    def _check_completion(self) -> None:
        if self.completion_min is None and self.sources:
            if all(s.id in self.state.engulfed_sources for s in self.sources):
                self.completion_min = self.time_min

    def _lineage_bodies(self, branch_id: int) -> set:
        out = set()
        st = self.state
        for bid in [branch_id, *st.ancestors(branch_id)]:
            out.update(b for _, b in st.branches[bid].attachments)
        if st.seed_body:
            out.add(st.seed_body)
        return out

    def _push_forces(self) -> None:
        free = [b for _, b in sorted(self.bodies.items()) if not b.anchored]
        tips = sorted((t for t in self.state.tips if t.alive), key=lambda t: t.id)
        if not free or not tips:
            return
        mag, rng_ = self.push_mag, self.push_range
        pos = np.array([[t.position.x, t.position.y] for t in tips])
        for body in free:
            d = np.hypot(pos[:, 0] - body.position.x, pos[:, 1] - body.position.y)
            for i in np.flatnonzero(d < rng_):
                t = tips[i]
                if body.id in self._lineage_bodies(t.branch_id):
                    continue
                f = push_from_tip(t.position, body, mag, rng_, t.heading)
                if f.x == 0.0 and f.y == 0.0:
                    continue
                self.forces.add(body.id, f)
                key = (body.id, t.id)
                if key not in self.push_log:
                    self.push_log[key] = PushContact(self.time_min, t.position, body.position)
                    self._event("push", tip=t.id, branch=t.branch_id, body=body.id,
                                value=f"{t.position.x:.6f} {t.position.y:.6f}")
                self.push_log[key].impulse += f.norm() * self.scenario.substep_minutes

    def main_pusher(self, body_id: str) -> Optional[tuple[int, PushContact]]:
        """The tip that delivered the largest impulse to ``body_id``."""
        hits = [(c.impulse, -tid, tid, c) for (b, tid), c in self.push_log.items() if b == body_id]
        if not hits:
            return None
        _, _, tid, c = max(hits)
        return tid, c

    def _sync_sources(self) -> None:
        changed = False
        out = []
        for src in self.sources:
            host = self.bodies.get(src.host_body) if src.host_body else None
            if host is not None and host.position != src.position:
                src = NutrientSource(src.id, host.position, src.emission_rate, src.color, src.host_body)
                changed = True
            out.append(src)
        if changed:
            self.sources = out
            self.source_map = {s.id: s for s in out}

    def step(self) -> None:
        s = self.scenario
        dt = TICK_MINUTES
        # consumed food stops emitting once the organism covers it
        eaten = self.state.engulfed_sources
        live = [src for src in self.sources if src.id not in eaten] if eaten else self.sources
        self.field = emit_sources(self.field, live, dt, s.preferences)
        self.field = diffuse_decay_step(self.field, dt)
        self.tick += 1
        sub = self.tick % s.schedule.substep == 0
        h = s.substep_minutes
        if sub:
            grow_step(self.state, self.field, self.bodies, self.rng, h)
            for ev in engulf_check(self.state, self.sources, self.bodies):
                self._event(ev.kind, ev.source_id, ev.tip_id, ev.branch_id, ev.body_id)
            self._check_completion()
            retract_unrewarded(self.state)
            self._drain_log()
        if self.tick % s.tubes.extract_every == 0:
            self.network = extract_network(
                self.state, self.sources, self.bodies, previous=self.network,
                stiffness=s.tubes.stiffness, tol=s.tubes.simplify_tol,
            )
        if sub:
            contract_step(self.network, h, s.tubes.contraction)
            links = self._links_view()
            if links.tubes:
                contract_step(links, h, s.tubes.contraction)
            self.forces.clear()
            pull_from_tension(self.network, self.bodies, self.forces)
            if links.tubes:
                pull_from_tension(links, self.bodies, self.forces)
            self._push_forces()
            for bid, f in sorted(self.queue.forces(self).items()):
                self.forces.add(bid, f)
            moved = integrate_bodies(self.bodies, self.forces, h, s.arena)
            if any(v.x != 0.0 or v.y != 0.0 for v in moved.values()):
                self._sync_sources()
                self.network.sync(self.sources, self.bodies)
                if self.links:
                    self._links_view().sync(self.sources, self.bodies)
            for kind, m in self.queue.advance(self, h):
                self._event(f"maneuver_{kind}", body=m.body_id, value=m.outcome or type(m).__name__)
                if self.on_maneuver is not None:
                    self.on_maneuver(kind, m)
            for bid, b in self.bodies.items():
                f = self.forces.get(bid)
                self.body_rows.append((self.tick, bid, b.position.x, b.position.y, int(b.anchored), f.x, f.y))

    def _links_view(self) -> TubeNetwork:
        view = TubeNetwork(self.network.nodes, {}, {})
        for tok in sorted(self.links):
            t = self.links[tok]
            if all(e in self.network.nodes for e in t.endpoints):
                view.tubes[t.id] = t
        return view

    def metrics(self) -> Metrics:
        return spanning_metrics(self.network, self.sites, tol=self._site_tol())

    def _site_tol(self) -> float:
        r = max([b.radius for b in self.bodies.values()], default=0.0)
        return max(1.0, self.scenario.growth.step_length, r)

    def metric_row(self, final: bool = False) -> tuple:
        m = self.metrics()
        st = self.state
        return (
            self.tick, round(self.time_min, 6), m.sites_covered, m.sites_total, int(m.is_tree),
            m.total_length, m.mst_length, m.length_ratio, m.mean_tortuosity, m.edge_jaccard_vs_rng,
            len(st.live_tips()), len(st.branches), st.used_mass(), st.mass_budget, int(final),
        )

    def snapshot(self) -> None:
        from .output import render_pgm, render_svg
        self.snapshots.append(Snapshot(self.tick, render_svg(self), render_pgm(self)))


def run(s: Scenario, ticks: Optional[int] = None, snapshots: bool = True, keep_sim: bool = False) -> RunRecord:
    """Run ``s`` for ``ticks`` (default: the schedule) and collect the record."""
    sim = Simulation(s)
    n = s.schedule.ticks if ticks is None else ticks
    return drive(sim, n, snapshots, keep_sim)


def drive(sim: Simulation, n: int, snapshots: bool = True, keep_sim: bool = False) -> RunRecord:
    s = sim.scenario
    every_snap = s.schedule.snapshot_every
    every_metric = s.schedule.metric_every
    if snapshots:
        sim.snapshot()
    for _ in range(n):
        sim.step()
        if every_metric and sim.tick % every_metric == 0:
            sim.metric_rows.append(sim.metric_row())
        if snapshots and every_snap and sim.tick % every_snap == 0:
            sim.snapshot()
    return finish(sim, snapshots, keep_sim)


def finish(sim: Simulation, snapshots: bool = True, keep_sim: bool = False) -> RunRecord:
    s = sim.scenario
    if snapshots and sim.tick > 0 and (not sim.snapshots or sim.snapshots[-1].tick != sim.tick):
        sim.snapshot()
    final = sim.metrics() if sim.tick > 0 else None
    if sim.tick > 0:
        sim.metric_rows.append(sim.metric_row(final=True))
    return RunRecord(
        sim.digest, s.name, s.rng_seed, sim.tick, list(sim.metric_rows), list(sim.events),
        list(sim.body_rows), list(sim.snapshots),
        [tuple(r[k] for k in EDGE_FIELDS) for r in edge_rows(sim.network)], final, sim.completion_min,
        sim if keep_sim else None,
    )
