import warnings
from dataclasses import dataclass, field

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from physarum_surface.errors import ConfigurationError, GraphStoreError
from physarum_surface.graphstore import (
    AbstractRealizer, CommandQueue, IndeterminatePullWarning, PreferenceTable, PullManeuver, PushManeuver,
    StorageGraph, add_node, color_weight, link, pull_node, push_node, set_active, unlink,
)
from physarum_surface.mechanics import FloatingBody, ForceAccumulator, integrate_bodies
from physarum_surface.tubes import Tube
from physarum_surface.vec import Vec2

BINDINGS = [f"s{i}" for i in range(8)]


def graph(bindings=BINDINGS, bodies=None, cap=5):
    return StorageGraph(AbstractRealizer(set(bindings), bodies=bodies or {}), degree_cap=cap)


def star(k):
    g = graph()
    ids = [add_node(g, b, "oat") for b in BINDINGS[: k + 1]]
    for n in ids[1:]:
        link(g, ids[0], n)
    return g, ids


class TestStorageGraph:
    def test_first_node_active_and_joined(self):
        g = graph()
        n = add_node(g, "s0", "oat")
        assert g.active.id == n and g.nodes[n].joined
        m = add_node(g, "s1", "oat")
        assert not g.nodes[m].is_active and not g.nodes[m].joined
        g.check()

    def test_degree_cap(self):
        g, ids = star(5)
        assert g.degree(ids[0]) == 5
        extra = add_node(g, "s6", "oat")
        before = g.snapshot()
        with pytest.raises(GraphStoreError, match="degree cap"):
            link(g, ids[0], extra)
        assert g.snapshot() == before

    def test_link_idempotent(self):
        g, ids = star(1)
        before = g.snapshot()
        assert link(g, ids[0], ids[1]) is False
        assert g.snapshot() == before

    def test_self_link(self):
        g, ids = star(1)
        with pytest.raises(GraphStoreError):
            link(g, ids[0], ids[0])

    def test_unlink_only_edge_rejected(self):
        g, ids = star(1)
        with pytest.raises(GraphStoreError, match="disconnect"):
            unlink(g, ids[0], ids[1])
        g.check()

    def test_unlink_cycle_edge(self):
        g, ids = star(2)
        link(g, ids[1], ids[2])
        unlink(g, ids[0], ids[1])
        g.check()
        assert g.realizer.live == {("s0", "s2"), ("s1", "s2")}

    def test_dangling_binding(self):
        g = graph()
        with pytest.raises(GraphStoreError, match="does not exist"):
            add_node(g, "nowhere", "oat")
        add_node(g, "s0", "oat")
        with pytest.raises(GraphStoreError, match="already has a node"):
            add_node(g, "s0", "oat")

    def test_unreachable_binding(self):
        class Islands(AbstractRealizer):
            def reachable(self, a, b):
                return a[0] == b[0]

        g = StorageGraph(Islands({"a1", "a2", "b1"}))
        add_node(g, "a1", "oat")
        add_node(g, "a2", "oat")
        with pytest.raises(GraphStoreError, match="not reachable"):
            add_node(g, "b1", "oat")

    def test_link_between_unjoined(self):
        g = graph()
        add_node(g, "s0", "oat")
        a, b = add_node(g, "s1", "oat"), add_node(g, "s2", "oat")
        with pytest.raises(GraphStoreError, match="connected structure"):
            link(g, a, b)

    def test_set_active_neighbour_only(self):
        g, ids = star(2)
        set_active(g, ids[1])
        assert g.active.id == ids[1]
        with pytest.raises(GraphStoreError, match="neighbour"):
            set_active(g, ids[2])
        set_active(g, ids[1])  # no-op
        g.check()

    def test_failed_realisation(self):
        class Broken(AbstractRealizer):
            def realize_link(self, a, b):
                return None

        g = StorageGraph(Broken(set(BINDINGS)))
        a, b = add_node(g, "s0", "oat"), add_node(g, "s1", "oat")
        with pytest.raises(GraphStoreError, match="realise"):
            link(g, a, b)

    def test_bad_cap(self):
        with pytest.raises(GraphStoreError):
            StorageGraph(degree_cap=0)


ops = st.lists(
    st.tuples(st.sampled_from(["add", "link", "unlink", "active"]),
              st.integers(0, 9), st.integers(0, 9)),
    max_size=60,
)


@settings(max_examples=200, deadline=None)
@given(ops, st.integers(1, 5))
def test_random_operation_sequences(seq, cap):
    g = graph(bindings=[f"s{i}" for i in range(10)], cap=cap)
    for op, i, j in seq:
        a, b = f"n{i}", f"n{j}"
        before = g.snapshot()
        try:
            if op == "add":
                add_node(g, f"s{i}", "oat")
            elif op == "link":
                link(g, a, b)
            elif op == "unlink":
                unlink(g, a, b)
            else:
                set_active(g, a)
        except GraphStoreError:
            assert g.snapshot() == before
        g.check()


@dataclass
class World:
    bodies: dict
    sites: dict = field(default_factory=dict)
    tubes: dict = field(default_factory=dict)
    push_mag: float = 0.05
    push_range: float = 3.0
    tip_speed: float = 0.08

    def tube_for(self, token):
        return self.tubes.get(token)

    def position_of(self, binding):
        if binding in self.bodies:
            return self.bodies[binding].position
        return self.sites[binding]


def drive(queue, world, ticks, dt=1.0):
    events = []
    acc = ForceAccumulator()
    for _ in range(ticks):
        acc.clear()
        for bid, f in queue.forces(world).items():
            acc.add(bid, f)
        integrate_bodies(world.bodies, acc, dt)
        events += queue.advance(world, dt)
    return events


def body_graph():
    foam = FloatingBody("foam", 1.0, Vec2(0, 0))
    food = FloatingBody("food", 1.0, Vec2(10, 0), carries_food=True)
    pin = FloatingBody("pin", 1.0, Vec2(-10, 0), anchored=True)
    twin = FloatingBody("twin", 1.0, Vec2(0, 10))
    bodies = {b.id: b for b in (foam, food, pin, twin)}
    g = graph(bindings=["site", *bodies], bodies=bodies)
    ids = {k: add_node(g, k, "oat") for k in ["site", *bodies]}
    for k in bodies:
        link(g, ids["site"], ids[k])
    return g, ids, bodies


class TestManeuvers:
    def test_push_preconditions(self):
        g, ids, _ = body_graph()
        with pytest.raises(GraphStoreError, match="carries food"):
            push_node(g, ids["food"], Vec2(1, 0), 10)
        with pytest.raises(GraphStoreError, match="anchored"):
            push_node(g, ids["pin"], Vec2(1, 0), 10)
        with pytest.raises(GraphStoreError, match="not bound"):
            push_node(g, ids["site"], Vec2(1, 0), 10)
        with pytest.raises(GraphStoreError, match="non-zero"):
            push_node(g, ids["foam"], Vec2(0, 0), 10)
        with pytest.raises(GraphStoreError, match="duration"):
            push_node(g, ids["foam"], Vec2(1, 0), 0)

    def test_push_east_moves_east(self):
        g, ids, bodies = body_graph()
        q = CommandQueue()
        q.submit(push_node(g, ids["foam"], Vec2(2, 0), 120))
        events = drive(q, World(bodies), 200)
        kinds = [k for k, _ in events]
        assert kinds == ["started", "completed"]
        assert events[-1][1].outcome == "retracted"
        p = bodies["foam"].position
        assert p.x > 0.5 and p.y == 0.0
        assert bodies["pin"].position == Vec2(-10, 0)
        assert q.idle

    def test_pull_links_and_boosts(self):
        g, ids, bodies = body_graph()
        link(g, ids["pin"], ids["foam"])
        unlink(g, ids["site"], ids["foam"])
        g.check()
        m = pull_node(g, ids["foam"], ids["site"], boost=4.0, window=30)
        assert frozenset((ids["foam"], ids["site"])) in g.edges
        tube = Tube(0, ("a", "b"), [(0, 0), (5, 0)])
        world = World(bodies, {"site": Vec2(20, 0)}, {m.token: tube})
        q = CommandQueue()
        q.submit(m)
        q.forces(world)
        assert tube.gain == 4.0
        events = drive(q, world, 40)
        assert m.outcome == "expired" and tube.gain == 1.0
        assert ("completed", m) in events

    def test_pull_arrives(self):
        g, ids, bodies = body_graph()
        m = pull_node(g, ids["foam"], ids["site"])
        world = World(bodies, {"site": Vec2(0, -20)})
        q = CommandQueue()
        q.submit(m)
        drive(q, world, 5)
        assert not m.done
        bodies["foam"].position = Vec2(0, -19.5)
        drive(q, world, 1)
        assert m.outcome == "arrived"

    def test_pull_indeterminate(self):
        g, ids, _ = body_graph()
        with pytest.warns(IndeterminatePullWarning):
            pull_node(g, ids["foam"], ids["twin"])
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            pull_node(g, ids["foam"], ids["pin"])

    def test_pull_rejections_leave_graph(self):
        g, ids, _ = body_graph()
        before = g.snapshot()
        for bad in (lambda: pull_node(g, ids["foam"], "n99"),
                    lambda: pull_node(g, ids["foam"], ids["site"], boost=0.5),
                    lambda: pull_node(g, ids["pin"], ids["site"])):
            with pytest.raises(GraphStoreError):
                bad()
            assert g.snapshot() == before

    def test_queue_serialises(self):
        g, ids, bodies = body_graph()
        a = push_node(g, ids["foam"], Vec2(1, 0), 5)
        b = push_node(g, ids["twin"], Vec2(0, 1), 5)
        q = CommandQueue()
        q.submit(a)
        q.submit(b)
        events = drive(q, World(bodies), 20)
        assert [(k, m is a) for k, m in events] == [
            ("started", True), ("completed", True), ("started", False), ("completed", False)]
        assert isinstance(a, PushManeuver) and not isinstance(a, PullManeuver)


class TestPreferences:
    def test_ranking(self):
        t = PreferenceTable({"oat": 1.0, "sugar": 3.0, "salt": -2.0, "bran": 3.0})
        assert t.ranking() == ["bran", "sugar", "oat", "salt"]
        assert [t.classify(c) for c in ("sugar", "oat", "salt")] == ["attract", "neutral", "repel"]

    @pytest.mark.parametrize("w", [0.0, 0.5, float("nan"), float("inf")])
    def test_rejects_ambiguous(self, w):
        with pytest.raises(ConfigurationError):
            PreferenceTable({"x": w})

    def test_unknown_colour(self):
        with pytest.raises(ConfigurationError, match="unknown colour"):
            color_weight(PreferenceTable.default(), "mauve")

    def test_default(self):
        assert PreferenceTable.default().weights == {"oat": 1.0}
