"""Canonical replica scenarios."""
from __future__ import annotations

from typing import Callable

from ..arena import ArenaSpec, NutrientSource
from ..errors import ScenarioError
from ..plasmodium import GrowthParams
from ..vec import Vec2
from .model import BodySpec, FieldParams, Scenario, Schedule, SeedSpec

HOUR = 600  # ticks
# 1 mm cells hold about four overlapping strands
DISH_GROWTH = GrowthParams(density_cap=4.0)
# open-water seeding: only nearby food is sensed, so the early front stays round
BARE_GROWTH = GrowthParams(density_cap=4.0, gradient_threshold=2e-3)
DISH_MASS = 1000.0


def fig2_links(seed: int = 0) -> Scenario:
    """Seed between two food sources that are taken one after the other."""
    arena = ArenaSpec.disc(45.0, cell_size=1.0)
    sources = [
        NutrientSource("near", Vec2(-15.0, 0.0), 1.0),
        NutrientSource("far", Vec2(25.0, 5.0), 1.0),
    ]
    return Scenario(
        "fig2_links", arena, sources, SeedSpec(Vec2(-5.0, 0.0)),
        schedule=Schedule(ticks=16 * HOUR), rng_seed=seed,
    )


def fig3_tree3(seed: int = 0) -> Scenario:
    """Three anchored foam sites with food in a 90 mm dish; seed on the western one."""
    arena = ArenaSpec.disc(45.0, cell_size=1.0)
    bodies = [
        BodySpec("west", Vec2(-25.0, 0.0), 2.5, anchored=True),
        BodySpec("north", Vec2(18.0, 20.0), 2.5, anchored=True),
        BodySpec("south", Vec2(18.0, -20.0), 2.5, anchored=True),
    ]
    sources = [NutrientSource(b.id, b.position, 1.0, host_body=b.id) for b in bodies]
    return Scenario(
        "fig3_tree3", arena, sources, SeedSpec("west", DISH_MASS), bodies,
        growth=DISH_GROWTH, schedule=Schedule(ticks=18 * HOUR), rng_seed=seed,
    )


def fig4_bare_seed(seed: int = 0) -> Scenario:
    """Seed on open water with two anchored food domains."""
    arena = ArenaSpec.disc(45.0, cell_size=1.0)
    bodies = [
        BodySpec("east", Vec2(34.0, 6.0), 4.0, anchored=True),
        BodySpec("west", Vec2(-32.0, -10.0), 4.0, anchored=True),
    ]
    sources = [NutrientSource(b.id, b.position, 1.0, host_body=b.id) for b in bodies]
    return Scenario(
        "fig4_bare_seed", arena, sources, SeedSpec(Vec2(0.0, 0.0), DISH_MASS), bodies,
        growth=BARE_GROWTH, schedule=Schedule(ticks=16 * HOUR), rng_seed=seed,
    )


def fig5_straighten(seed: int = 0) -> Scenario:
    """Two food sites a short way apart; the connecting tube straightens."""
    arena = ArenaSpec.disc(10.0, cell_size=0.5)
    bodies = [
        BodySpec("a", Vec2(-6.0, 0.0), 1.5, anchored=True),
        BodySpec("b", Vec2(6.0, 0.0), 1.5, anchored=True),
    ]
    sources = [NutrientSource("b", bodies[1].position, 1.0, host_body="b")]
    return Scenario(
        "fig5_straighten", arena, sources, SeedSpec("a"), bodies,
        schedule=Schedule(ticks=12 * HOUR), rng_seed=seed,
    )


def fig6_push(seed: int = 0) -> Scenario:
    """A small foodless free foam a few millimetres from the seed."""
    arena = ArenaSpec.disc(45.0, cell_size=1.0)
    bodies = [BodySpec("foam", Vec2(5.0, 0.0), 2.5)]
    return Scenario(
        "fig6_push", arena, [], SeedSpec(Vec2(0.0, 0.0)), bodies,
        schedule=Schedule(ticks=16 * HOUR), rng_seed=seed,
    )


def fig7_pull(seed: int = 0) -> Scenario:
    """Free foam between an anchored seed site and an anchored food site."""
    arena = ArenaSpec.disc(45.0, cell_size=1.0)
    bodies = [
        BodySpec("S", Vec2(-20.0, 0.0), 2.5, anchored=True),
        BodySpec("F", Vec2(20.0, 0.0), 2.5, anchored=True),
        BodySpec("foam", Vec2(0.0, 0.0), 2.5),
    ]
    sources = [NutrientSource("F", bodies[1].position, 1.0, host_body="F")]
    return Scenario(
        "fig7_pull", arena, sources, SeedSpec("S", DISH_MASS), bodies, growth=DISH_GROWTH,
        schedule=Schedule(ticks=32 * HOUR), rng_seed=seed,
    )


def tank_explore(seed: int = 0) -> Scenario:
    """A 200 by 150 mm tank with distant sources."""
    arena = ArenaSpec.rectangle(200.0, 150.0, cell_size=2.0)
    sources = [
        NutrientSource("ne", Vec2(70.0, 50.0), 1.0),
        NutrientSource("se", Vec2(60.0, -55.0), 1.0),
        NutrientSource("w", Vec2(-80.0, 10.0), 1.0),
    ]
    return Scenario(
        "tank_explore", arena, sources, SeedSpec(Vec2(0.0, 0.0), mass=400.0),
        field=FieldParams(diffusion=2.0, decay=0.002),
        schedule=Schedule(ticks=48 * HOUR), rng_seed=seed,
    )


BUILTINS: dict[str, Callable[..., Scenario]] = {
    "fig2_links": fig2_links,
    "fig3_tree3": fig3_tree3,
    "fig4_bare_seed": fig4_bare_seed,
    "fig5_straighten": fig5_straighten,
    "fig6_push": fig6_push,
    "fig7_pull": fig7_pull,
    "tank_explore": tank_explore,
}


def builtin(name: str, seed: int = 0) -> Scenario:
    try:
        make = BUILTINS[name]
    except KeyError:
        raise ScenarioError(
            f"unknown builtin {name!r}; valid names: {', '.join(sorted(BUILTINS))}"
        ) from None
    return make(seed)
