"""Brute-force reference implementations shared by several test files."""
import itertools
import math


def brute_mst_length(pts):
    """Minimum over every (n-1)-edge subset that connects all points."""
    n = len(pts)
    if n == 1:
        return 0.0
    edges = list(itertools.combinations(range(n), 2))
    best = math.inf
    for subset in itertools.combinations(edges, n - 1):
        parent = list(range(n))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        ok = True
        for a, b in subset:
            ra, rb = find(a), find(b)
            if ra == rb:
                ok = False
                break
            parent[ra] = rb
        if ok:
            best = min(best, sum(math.dist(pts[a], pts[b]) for a, b in subset))
    return best


AMBIGUOUS = 1e-9


def brute_proximity(pts):
    """RNG (open lune) and Gabriel (closed diameter disc) edge sets.

    Pairs with a witness within a relative 1e-9 of the lune or circle
    boundary are returned separately as ambiguous and not compared.
    """
    rng, gab, unsure = set(), set(), set()
    for i, j in itertools.combinations(range(len(pts)), 2):
        d = math.dist(pts[i], pts[j])
        c = ((pts[i][0] + pts[j][0]) / 2, (pts[i][1] + pts[j][1]) / 2)
        lune, disc = [], []
        for k in range(len(pts)):
            if k in (i, j):
                continue
            lune.append(max(math.dist(pts[i], pts[k]), math.dist(pts[j], pts[k])) / d - 1)
            disc.append(math.dist(c, pts[k]) / (d / 2) - 1)
        if any(abs(v) < AMBIGUOUS for v in lune + disc):
            unsure.add((i, j))
            continue
        if not any(v < 0 for v in lune):
            rng.add((i, j))
        if not any(v <= 0 for v in disc):
            gab.add((i, j))
    return rng, gab, unsure
