"""Bounded-degree storage graph whose edges are realised by tubes.

The graph itself is plain data.  Anything physical (does a binding exist,
can the organism grow between two bindings, is a tube still alive) is
delegated to a *realizer*.  :class:`AbstractRealizer` answers from a fixed
set of bindings and is what the property tests drive; the simulation
supplies its own realizer backed by the tube network.

Nodes join the structure when first linked (the first node joins at
once).  Connectivity is required over joined nodes, so a freshly added
node may sit isolated until its first link.  Every rejected operation
raises :class:`GraphStoreError` and leaves the graph untouched.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Hashable, Optional, Protocol

from ..errors import GraphStoreError

DEFAULT_DEGREE_CAP = 5


class Realizer(Protocol):
    def exists(self, binding: str) -> bool: ...

    def reachable(self, src: str, dst: str) -> bool: ...

    def realize_link(self, a: str, b: str) -> Optional[Hashable]: ...

    def release_link(self, token: Hashable) -> None: ...

    def alive(self, token: Hashable) -> bool: ...


@dataclass
class AbstractRealizer:
    """Every known binding is reachable from every other; links always succeed."""

    bindings: set = field(default_factory=set)
    live: set = field(default_factory=set)
    bodies: dict = field(default_factory=dict)

    def body(self, binding: str):
        return self.bodies.get(binding)

    def exists(self, binding: str) -> bool:
        return binding in self.bindings

    def reachable(self, src: str, dst: str) -> bool:
        return src in self.bindings and dst in self.bindings

    def realize_link(self, a: str, b: str):
        token = tuple(sorted((a, b)))
        self.live.add(token)
        return token

    def release_link(self, token) -> None:
        self.live.discard(token)

    def alive(self, token) -> bool:
        return token in self.live


@dataclass
class StorageNode:
    id: str
    binding: str
    color: str
    is_active: bool = False
    joined: bool = False


@dataclass
class StorageGraph:
    realizer: Realizer = field(default_factory=AbstractRealizer)
    degree_cap: int = DEFAULT_DEGREE_CAP
    nodes: dict = field(default_factory=dict)
    edges: dict = field(default_factory=dict)  # frozenset({a, b}) -> realizer token
    next_id: int = 0

    def __post_init__(self):
        if self.degree_cap < 1:
            raise GraphStoreError(f"degree_cap must be >= 1, got {self.degree_cap}")

    @property
    def active(self) -> Optional[StorageNode]:
        for k in sorted(self.nodes):
            if self.nodes[k].is_active:
                return self.nodes[k]
        return None

    def degree(self, nid: str) -> int:
        return sum(1 for e in self.edges if nid in e)

    def neighbours(self, nid: str) -> list[str]:
        return sorted(next(iter(e - {nid})) for e in self.edges if nid in e)

    def node_by_binding(self, binding: str) -> Optional[StorageNode]:
        for k in sorted(self.nodes):
            if self.nodes[k].binding == binding:
                return self.nodes[k]
        return None

    def _joined_connected(self, edges) -> bool:
        joined = sorted(k for k, n in self.nodes.items() if n.joined)
        if not joined:
            return True
        adj = {k: set() for k in self.nodes}
        for e in edges:
            a, b = tuple(e)
            adj[a].add(b)
            adj[b].add(a)
        seen, stack = set(), [joined[0]]
        while stack:
            u = stack.pop()
            if u in seen:
                continue
            seen.add(u)
            stack.extend(adj[u] - seen)
        return all(k in seen for k in joined)

    def is_connected(self) -> bool:
        return self._joined_connected(self.edges)

    def snapshot(self) -> bytes:
        """Canonical serialisation, used to prove rejected ops change nothing."""
        doc = {
            "cap": self.degree_cap,
            "next": self.next_id,
            "nodes": [[k, n.binding, n.color, n.is_active, n.joined] for k, n in sorted(self.nodes.items())],
            "edges": sorted([sorted(e), repr(t)] for e, t in self.edges.items()),
        }
        return json.dumps(doc, sort_keys=True).encode()

    def check(self) -> None:
        """Assert every structural invariant."""
        assert sum(n.is_active for n in self.nodes.values()) == (1 if self.nodes else 0)
        for k in self.nodes:
            assert self.degree(k) <= self.degree_cap, f"degree cap exceeded at {k}"
        for e, tok in self.edges.items():
            assert len(e) == 2 and all(x in self.nodes and self.nodes[x].joined for x in e)
            assert self.realizer.alive(tok), f"edge {sorted(e)} lost its tube"
        assert self.is_connected()


def _node(g: StorageGraph, nid: str) -> StorageNode:
    if nid not in g.nodes:
        raise GraphStoreError(f"unknown storage node {nid!r}")
    return g.nodes[nid]


def add_node(g: StorageGraph, binding: str, color: str) -> str:
    if not g.realizer.exists(binding):
        raise GraphStoreError(f"binding {binding!r} does not exist")
    if g.node_by_binding(binding) is not None:
        raise GraphStoreError(f"binding {binding!r} already has a node")
    act = g.active
    if act is not None and not g.realizer.reachable(act.binding, binding):
        raise GraphStoreError(f"{binding!r} is not reachable from active node {act.id}")
    nid = f"n{g.next_id}"
    g.next_id += 1
    first = not g.nodes
    g.nodes[nid] = StorageNode(nid, binding, color, is_active=first, joined=first)
    return nid


def link(g: StorageGraph, a: str, b: str) -> bool:
    """Add edge ``a``-``b``.  Returns False when the edge already existed."""
    na, nb = _node(g, a), _node(g, b)
    if a == b:
        raise GraphStoreError("cannot link a node to itself")
    key = frozenset((a, b))
    if key in g.edges:
        return False
    if not (na.joined or nb.joined):
        raise GraphStoreError(f"neither {a} nor {b} is part of the connected structure")
    for n in (a, b):
        if g.degree(n) >= g.degree_cap:
            raise GraphStoreError(f"node {n} is at degree cap {g.degree_cap}")
    if not g.realizer.reachable(na.binding, nb.binding):
        raise GraphStoreError(f"no growth path between {a} and {b}")
    token = g.realizer.realize_link(na.binding, nb.binding)
    if token is None:
        raise GraphStoreError(f"could not realise a tube between {a} and {b}")
    g.edges[key] = token
    na.joined = nb.joined = True
    return True


def unlink(g: StorageGraph, a: str, b: str) -> None:
    _node(g, a)
    _node(g, b)
    key = frozenset((a, b))
    if key not in g.edges:
        raise GraphStoreError(f"no edge between {a} and {b}")
    rest = {e: t for e, t in g.edges.items() if e != key}
    if not g._joined_connected(rest):
        raise GraphStoreError(f"unlinking {a}-{b} would disconnect the graph")
    token = g.edges.pop(key)
    g.realizer.release_link(token)


def set_active(g: StorageGraph, n: str) -> None:
    node = _node(g, n)
    act = g.active
    if act is not None and act.id == n:
        return
    if act is not None and frozenset((act.id, n)) not in g.edges:
        raise GraphStoreError(f"{n} is not a neighbour of active node {act.id}")
    if act is not None:
        act.is_active = False
    node.is_active = True
