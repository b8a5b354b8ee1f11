"""Exact geometric oracles and network scoring."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .errors import ConfigurationError
from .tubes import TubeNetwork, site_topology, tortuosity
from .vec import Vec2

DEDUP_TOL = 1e-6


class PointSet(Sequence):
    """Ordered site positions; near-duplicates (< 1e-6 mm) keep the first."""

    def __init__(self, points: Iterable = ()):
        kept: list[Vec2] = []
        for p in points:
            v = Vec2.of(p)
            if all(v.dist(q) >= DEDUP_TOL for q in kept):
                kept.append(v)
        self._pts = tuple(kept)

    def __getitem__(self, i):
        return self._pts[i]

    def __len__(self) -> int:
        return len(self._pts)

    def __repr__(self) -> str:
        return f"PointSet({[p.as_tuple() for p in self._pts]})"

    def array(self) -> np.ndarray:
        return np.array([p.as_tuple() for p in self._pts], dtype=float).reshape(-1, 2)


def _as_pointset(p) -> PointSet:
    return p if isinstance(p, PointSet) else PointSet(p)


def _distances(xy: np.ndarray) -> np.ndarray:
    d = xy[:, None, :] - xy[None, :, :]
    return np.hypot(d[..., 0], d[..., 1])


def euclidean_mst(p) -> tuple[list[tuple[int, int]], float]:
    """Prim's algorithm over the complete graph.

    Among equal-weight candidates the edge with the lexicographically
    smallest ``(min index, max index)`` wins.
    """
    pts = _as_pointset(p)
    n = len(pts)
    if n == 0:
        raise ConfigurationError("euclidean_mst needs at least one point")
    D = _distances(pts.array())
    in_tree = np.zeros(n, dtype=bool)
    in_tree[0] = True
    best = {v: (float(D[0, v]), (0, v)) for v in range(1, n)}
    edges = []
    total = 0.0
    for _ in range(n - 1):
        v = min(best, key=lambda k: best[k])
        d, e = best.pop(v)
        edges.append(e)
        total += d
        in_tree[v] = True
        for w in best:
            cand = (float(D[v, w]), (min(v, w), max(v, w)))
            if cand < best[w]:
                best[w] = cand
    return edges, total


def proximity_graphs(p) -> dict:
    """Relative neighbourhood and Gabriel graphs by brute-force predicates.

    The Gabriel test uses the closed diameter disc, so four corners of a
    square yield only the perimeter.
    """
    pts = _as_pointset(p)
    n = len(pts)
    if n < 2:
        raise ConfigurationError("proximity graphs need at least two points")
    D = _distances(pts.array())
    D2 = D * D
    rng, gab = set(), set()
    others = np.arange(n)
    for i in range(n):
        for j in range(i + 1, n):
            mask = (others != i) & (others != j)
            if not np.any(np.maximum(D[i, mask], D[j, mask]) < D[i, j]):
                rng.add((i, j))
            if not np.any(D2[i, mask] + D2[j, mask] <= D2[i, j]):
                gab.add((i, j))
    mst = set(euclidean_mst(pts)[0])
    assert mst <= rng <= gab, "proximity nesting violated"
    return {"rng": rng, "gabriel": gab}


@dataclass(frozen=True)
class Metrics:
    sites_covered: int
    sites_total: int
    is_tree: bool
    total_length: float
    mst_length: float
    length_ratio: float
    mean_tortuosity: float
    edge_jaccard_vs_rng: float

    @property
    def complete(self) -> bool:
        return self.sites_covered == self.sites_total

    def as_row(self) -> dict:
        return asdict(self)


def site_assignment(net: TubeNetwork, sites, tol: float = 1.0) -> dict:
    """Map site index to the nearest non-junction node within ``tol`` mm."""
    pts = _as_pointset(sites)
    nodes = net.site_nodes()
    out = {}
    taken = set()
    for i, s in enumerate(pts):
        cands = sorted(
            (s.dist(n.position), n.id) for n in nodes if n.id not in taken and s.dist(n.position) <= tol
        )
        if cands:
            out[i] = cands[0][1]
            taken.add(cands[0][1])
    return out


def spanning_metrics(net: TubeNetwork, sites, tol: float = 1.0) -> Metrics:
    """Score ``net`` as a spanning structure over ``sites``.

    A site counts as covered when a site or attachment node sits within
    ``tol`` of it.  The tree test is run on the whole extracted network.
    """
    pts = _as_pointset(sites)
    assign = site_assignment(net, pts, tol) if len(pts) else {}
    n_nodes = len(net.nodes)
    n_tubes = len(net.tubes)
    is_tree = n_nodes > 0 and net.is_connected() and n_tubes == n_nodes - 1
    total = net.total_length()
    mst_len = euclidean_mst(pts)[1] if len(pts) else 0.0
    if mst_len > 0:
        ratio = total / mst_len
    else:
        ratio = math.inf if n_tubes else 1.0
    torts = []
    for tid in sorted(net.tubes):
        t = net.tubes[tid]
        if t.chord() > 1e-12:
            torts.append(tortuosity(t))
    mean_tort = float(np.mean(torts)) if torts else 1.0
    if len(pts) >= 2:
        node_to_site = {v: k for k, v in assign.items()}
        topo = {
            tuple(sorted((node_to_site[a], node_to_site[b])))
            for a, b in (tuple(pair) for pair in site_topology(net))
            if a in node_to_site and b in node_to_site
        }
        ref = proximity_graphs(pts)["rng"]
        union = topo | ref
        jac = len(topo & ref) / len(union) if union else 1.0
    else:
        jac = 1.0
    return Metrics(len(assign), len(pts), bool(is_tree), total, mst_len, ratio, mean_tort, jac)


def front_cv(occupancy: np.ndarray, centres: np.ndarray, origin: Vec2, rays: int = 64) -> float:
    """Coefficient of variation of the front's radial distance from ``origin``.

    The front is the convex hull of the occupied cell centres; its distance
    from ``origin`` is sampled along ``rays`` evenly spaced directions.  An
    outline that is round about the seed scores near 0.  ``centres`` holds
    cell-centre coordinates with shape ``occupancy.shape + (2,)``.  Fewer
    than three non-collinear occupied cells, or an origin outside the hull,
    give ``inf``.
    """
    pts = centres[occupancy > 0]
    if len(pts) < 3:
        return math.inf
    try:
        hull = ConvexHull(pts)
    except QhullError:
        return math.inf
    o = np.array([origin.x, origin.y])
    # facet equations n.x + c <= 0 inside; ray o + t*d meets facet at t = -(n.o + c)/(n.d)
    normals, offsets = hull.equations[:, :2], hull.equations[:, 2]
    slack = -(normals @ o + offsets)
    if (slack < 0).any():
        return math.inf
    ang = 2 * math.pi * np.arange(rays) / rays
    d = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    nd = d @ normals.T  # (rays, facets)
    with np.errstate(divide="ignore"):
        t = np.where(nd > 0, slack[None, :] / nd, np.inf)
    r = t.min(axis=1)
    mean = float(r.mean())
    return float(r.std() / mean) if mean > 0 else math.inf
