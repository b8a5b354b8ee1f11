import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from physarum_surface.arena import ArenaSpec, NutrientSource, build_arena
from physarum_surface.errors import ConfigurationError, TortuosityError
from physarum_surface.mechanics import FloatingBody
from physarum_surface.plasmodium import GrowthParams, engulf_check, seed_at
from physarum_surface.tubes import (
    JUNCTION, SITE, Tube, TubeNetwork, TubeNode, contract_step, edge_rows, extract_network,
    prune_redundant, simplify, tension_of, tortuosity,
)
from physarum_surface.vec import Vec2


def semicircle(radius=10.0, n=101):
    a = np.linspace(math.pi, 0.0, n)
    return np.stack([radius * np.cos(a), radius * np.sin(a)], axis=1)


def two_site_net(path):
    net = TubeNetwork()
    net.add_node(TubeNode("a", SITE, Vec2(*path[0])))
    net.add_node(TubeNode("b", SITE, Vec2(*path[-1])))
    net.add_tube("a", "b", path)
    return net


class TestTortuosity:
    def test_straight(self):
        assert tortuosity(Tube(0, ("a", "b"), [(0, 0), (1, 0), (3, 0)])) == 1.0

    def test_elbow(self):
        assert tortuosity(Tube(0, ("a", "b"), [(0, 0), (1, 0), (1, 1)])) == pytest.approx(2 / math.sqrt(2))

    def test_semicircle(self):
        t = Tube(0, ("a", "b"), semicircle(n=4001))
        assert tortuosity(t) == pytest.approx(math.pi / 2, rel=1e-6)

    def test_closed_loop(self):
        with pytest.raises(TortuosityError):
            tortuosity(Tube(0, ("a", "a"), [(0, 0), (1, 1), (0, 0)]))


class TestContraction:
    def test_straight_fixpoint(self):
        net = two_site_net(np.array([(0.0, 0.0), (1.0, 0.0), (4.0, 0.0)]))
        before = net.tubes[0].path.copy()
        _, tens = contract_step(net, 1.0, 0.5)
        assert np.array_equal(net.tubes[0].path, before)
        assert tens[0] == 0.0

    def test_full_relaxation(self):
        net = two_site_net(semicircle())
        contract_step(net, 1.0, 1.0)
        assert net.tubes[0].deviation() == pytest.approx(0.0, abs=1e-12)
        assert tortuosity(net.tubes[0]) == pytest.approx(1.0, abs=1e-12)

    def test_semicircle_converges(self):
        net = two_site_net(semicircle())
        t = net.tubes[0]
        d0 = t.deviation()
        prev = tortuosity(t)
        for n in range(1, 201):
            contract_step(net, 1.0, 0.1)
            cur = tortuosity(t)
            assert cur < prev or cur - 1.0 < 1e-12
            assert t.deviation() <= (1 - 0.1) ** n * d0 * (1 + 1e-9)
            prev = cur
        assert prev < 1.01

    def test_rejects_overshoot(self):
        net = two_site_net(semicircle())
        with pytest.raises(ConfigurationError):
            contract_step(net, 1.0, 2.0)

    def test_gain_scales_rate(self):
        a, b = two_site_net(semicircle()), two_site_net(semicircle())
        b.tubes[0].gain = 2.0
        contract_step(a, 1.0, 0.2)
        contract_step(a, 1.0, 0.2)
        contract_step(b, 1.0, 0.2)
        # one doubled step removes 40% of the offset, two plain steps 36%
        assert a.tubes[0].deviation() == pytest.approx(0.64 * 10.0, rel=1e-9)
        assert b.tubes[0].deviation() == pytest.approx(0.60 * 10.0, rel=1e-9)

    @settings(max_examples=10, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_tortuosity_non_increasing(self, seed):
        # random wiggly network: a star of curved tubes around a junction
        rng = np.random.default_rng(seed)
        net = TubeNetwork()
        net.add_node(TubeNode("j", JUNCTION, Vec2(0, 0)))
        for k in range(3):
            end = rng.uniform(-20, 20, 2)
            net.add_node(TubeNode(f"s{k}", SITE, Vec2(*end)))
            s = np.linspace(0, 1, 30)[:, None]
            wiggle = rng.normal(0, 3, (30, 2)) * np.sin(math.pi * s)
            net.add_tube("j", f"s{k}", s * end + wiggle)
        lam = rng.uniform(0.01, 0.5)
        for _ in range(50):
            before = {tid: tortuosity(t) for tid, t in net.tubes.items()}
            _, tens = contract_step(net, 1.0, lam)
            for tid, t in net.tubes.items():
                assert tortuosity(t) <= before[tid] + 1e-9
                assert tens[tid] >= 0.0


class TestTension:
    def test_formula(self):
        t = Tube(0, ("a", "b"), [(0, 0), (1, 0), (1, 1)], stiffness=3.0)
        chord = math.sqrt(2)
        assert tension_of(t) == pytest.approx(3.0 * (2 - chord) / chord)

    def test_zero_iff_straight(self):
        assert tension_of(Tube(0, ("a", "b"), [(0, 0), (5, 0)])) == 0.0
        assert tension_of(Tube(0, ("a", "b"), [(0, 0), (2.5, 1e-3), (5, 0)])) > 0.0


class TestSimplify:
    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.tuples(st.floats(-10, 10), st.floats(-10, 10)), min_size=2, max_size=30))
    def test_within_tolerance(self, pts):
        path = np.array(pts, dtype=float)
        out = simplify(path, 0.05)
        assert np.array_equal(out[0], path[0]) and np.array_equal(out[-1], path[-1])
        # every dropped vertex lies near some kept segment
        for p in path:
            best = math.inf
            for a, b in zip(out[:-1], out[1:]):
                ab = b - a
                L2 = ab @ ab
                u = 0.0 if L2 == 0 else min(max((p - a) @ ab / L2, 0.0), 1.0)
                best = min(best, float(np.hypot(*(p - a - u * ab))))
            assert best <= 0.05 + 1e-9

    def test_collinear_points_removed(self):
        path = np.array([(0, 0), (1, 0.01), (2, 0), (3, -0.01), (4, 0)], dtype=float)
        assert len(simplify(path, 0.05)) == 2


class TestPrune:
    def test_star_fixpoint(self):
        net = TubeNetwork()
        net.add_node(TubeNode("j", JUNCTION, Vec2(0, 0)))
        for k, p in enumerate([(5, 0), (-5, 0), (0, 5)]):
            net.add_node(TubeNode(f"s{k}", SITE, Vec2(*p)))
            net.add_tube("j", f"s{k}", [(0, 0), p])
        prune_redundant(net)
        assert len(net.tubes) == 3 and len(net.nodes) == 4

    def test_chain_merge(self):
        net = TubeNetwork()
        net.add_node(TubeNode("a", SITE, Vec2(0, 0)))
        net.add_node(TubeNode("m", JUNCTION, Vec2(1, 1)))
        net.add_node(TubeNode("b", SITE, Vec2(2, 0)))
        net.add_tube("a", "m", [(0, 0), (0.5, 0.8), (1, 1)])
        net.add_tube("m", "b", [(1, 1), (2, 0)])
        prune_redundant(net)
        assert set(net.nodes) == {"a", "b"}
        (t,) = net.tubes.values()
        assert t.oriented("a").tolist() == [[0, 0], [0.5, 0.8], [1, 1], [2, 0]]

    def test_twigs_removed(self):
        # spine s0 - j0 - j1 - j2 - s1 with five dead-end junction twigs
        net = TubeNetwork()
        net.add_node(TubeNode("s0", SITE, Vec2(0, 0)))
        net.add_node(TubeNode("s1", SITE, Vec2(8, 0)))
        spine = ["s0", "j0", "j1", "j2", "s1"]
        for i, k in enumerate(spine[1:-1], start=1):
            net.add_node(TubeNode(k, JUNCTION, Vec2(2 * i, 0)))
        for a, b in zip(spine, spine[1:]):
            net.add_tube(a, b, [net.nodes[a].position.as_tuple(), net.nodes[b].position.as_tuple()])
        twigs = [("j0", "t0"), ("j1", "t1"), ("j2", "t2"), ("t2", "t3"), ("j1", "t4")]
        for i, (a, b) in enumerate(twigs):
            net.add_node(TubeNode(b, JUNCTION, Vec2(i, 3 + i)))
            net.add_tube(a, b, [net.nodes[a].position.as_tuple(), net.nodes[b].position.as_tuple()])
        prune_redundant(net)
        assert set(net.nodes) == {"s0", "s1"}
        assert net.is_connected() and len(net.tubes) == 1

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_random_trees(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 25))
        net = TubeNetwork()
        kinds = rng.random(n) < 0.4
        kinds[0] = True
        for i in range(n):
            net.add_node(TubeNode(f"n{i}", SITE if kinds[i] else JUNCTION, Vec2(*rng.uniform(-9, 9, 2))))
        for i in range(1, n):
            j = int(rng.integers(0, i))
            net.add_tube(f"n{j}", f"n{i}", [net.nodes[f"n{j}"].position.as_tuple(),
                                             net.nodes[f"n{i}"].position.as_tuple()])
        sites = {k for k, v in net.nodes.items() if v.is_site}
        prune_redundant(net)
        assert sites <= set(net.nodes)
        assert net.is_connected()
        assert len(net.tubes) == len(net.nodes) - 1
        for k, v in net.nodes.items():
            if not v.is_site:
                assert net.degree(k) >= 3


class TestExtract:
    def setup_method(self):
        self.fld = build_arena(ArenaSpec.disc(20.0, 0.5))

    def test_no_reward(self):
        st_ = seed_at(Vec2(0, 0), 50.0, self.fld)
        net = extract_network(st_)
        assert list(net.nodes) == ["seed"] and not net.tubes

    def test_single_branch(self):
        st_ = seed_at(Vec2(0, 0), 50.0, self.fld, GrowthParams(initial_tips=1, site_tips=0))
        tip = st_.tips[0]
        b = st_.branches[tip.branch_id]
        for k in range(1, 11):
            b.path.append((0.5 * k, 0.0))
        tip.position = Vec2(5.0, 0.0)
        src = NutrientSource("oat", Vec2(5.2, 0.0))
        engulf_check(st_, [src])
        net = extract_network(st_, [src])
        assert set(net.nodes) == {"seed", "src:oat"}
        (t,) = net.tubes.values()
        assert t.chord() == pytest.approx(5.2)
        assert len(t.path) == 2  # collinear vertices simplified away

    def test_body_attachment_tracks(self):
        body = FloatingBody("foam", 1.0, Vec2(5.0, 0.0), carries_food=True)
        st_ = seed_at(Vec2(0, 0), 50.0, self.fld, GrowthParams(initial_tips=1, site_tips=0))
        tip = st_.tips[0]
        b = st_.branches[tip.branch_id]
        for k in range(1, 9):
            b.path.append((0.5 * k, 0.0))
        tip.position = Vec2(4.0, 0.0)
        src = NutrientSource("oat", body.position, host_body="foam")
        bodies = {"foam": body}
        (ev,) = engulf_check(st_, [src], bodies)
        assert ev.body_id == "foam"
        net = extract_network(st_, [src], bodies)
        assert "body:foam" in net.nodes
        body.position = Vec2(6.0, 0.0)
        net.sync([src], bodies)
        assert net.nodes["body:foam"].position == Vec2(6.0, 0.0)
        assert tuple(net.tubes[0].oriented("seed")[-1]) == (6.0, 0.0)

    def test_edge_rows(self):
        net = two_site_net(np.array([(0.0, 0.0), (1.0, 1.0), (2.0, 0.0)]))
        contract_step(net, 1.0, 0.1)
        (row,) = edge_rows(net)
        assert row["node_a"] == "a" and row["length"] >= row["chord"]
        assert row["tension"] == pytest.approx(tension_of(net.tubes[0]))
