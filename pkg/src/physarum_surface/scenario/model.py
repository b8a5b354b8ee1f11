"""Scenario value types and their canonical form."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, fields, is_dataclass
from dataclasses import field as dc_field
from typing import Optional, Union

from ..arena import DEFAULT_DECAY, DEFAULT_DIFFUSION, ArenaSpec, NutrientSource, build_arena
from ..errors import ConfigurationError, ValidationError
from ..graphstore.preferences import PreferenceTable
from ..mechanics import DEFAULT_GAMMA, DEFAULT_PUSH_MAG, DEFAULT_PUSH_RANGE, FloatingBody
from ..plasmodium import GrowthParams
from ..tubes import DEFAULT_LAMBDA, DEFAULT_STIFFNESS, SIMPLIFY_TOL
from ..vec import Vec2

TICK_MINUTES = 0.1


@dataclass(frozen=True)
class BodySpec:
    id: str
    position: Vec2
    radius: float = 2.5
    gamma: float = DEFAULT_GAMMA
    anchored: bool = False
    polygon: Optional[tuple] = None

    def build(self, carries_food: bool) -> FloatingBody:
        return FloatingBody(
            self.id, self.radius, self.position, self.gamma, self.anchored,
            carries_food, self.polygon,
        )


@dataclass(frozen=True)
class SeedSpec:
    where: Union[Vec2, str]
    mass: float = 200.0


@dataclass(frozen=True)
class FieldParams:
    diffusion: float = DEFAULT_DIFFUSION
    decay: float = DEFAULT_DECAY
    stencil: int = 9


@dataclass(frozen=True)
class MechanicsParams:
    push_mag: float = DEFAULT_PUSH_MAG
    push_range: float = DEFAULT_PUSH_RANGE


@dataclass(frozen=True)
class TubeParams:
    stiffness: float = DEFAULT_STIFFNESS
    contraction: float = DEFAULT_LAMBDA
    simplify_tol: float = SIMPLIFY_TOL
    extract_every: int = 10


@dataclass(frozen=True)
class Schedule:
    ticks: int = 14400
    substep: int = 10  # ticks per growth / mechanics step
    snapshot_every: int = 0
    metric_every: int = 600


@dataclass(frozen=True)
class Scenario:
    name: str
    arena: ArenaSpec
    sources: tuple
    seed: SeedSpec
    bodies: tuple = ()
    growth: GrowthParams = dc_field(default_factory=GrowthParams)
    field: FieldParams = dc_field(default_factory=FieldParams)
    mechanics: MechanicsParams = dc_field(default_factory=MechanicsParams)
    tubes: TubeParams = dc_field(default_factory=TubeParams)
    preferences: PreferenceTable = dc_field(default_factory=PreferenceTable.default)
    schedule: Schedule = dc_field(default_factory=Schedule)
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "sources", tuple(self.sources))
        object.__setattr__(self, "bodies", tuple(self.bodies))
        validate(self)
        object.__setattr__(self, "sources", host_positions(self))

    @property
    def tick_minutes(self) -> float:
        return TICK_MINUTES

    @property
    def substep_minutes(self) -> float:
        return self.schedule.substep * TICK_MINUTES

    def body_map(self) -> dict:
        return {b.id: b for b in self.bodies}

    def sites(self) -> list[Vec2]:
        """Points the network should span: every source, plus the seed if it is not on one."""
        pts = [s.position for s in self.sources]
        seed = self.seed_position()
        tol = max(self.growth.step_length, 1e-6)
        hosts = {s.host_body for s in self.sources if s.host_body}
        if isinstance(self.seed.where, str) and self.seed.where in hosts:
            return pts
        if all(seed.dist(p) > tol for p in pts):
            pts.append(seed)
        return pts

    def seed_position(self) -> Vec2:
        if isinstance(self.seed.where, str):
            return self.body_map()[self.seed.where].position
        return self.seed.where

    def replace(self, **changes) -> Scenario:
        from dataclasses import replace as _replace
        return _replace(self, **changes)

    def canonical(self) -> dict:
        return _canon(self)

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form (rng seed included)."""
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _canon(v):
    if isinstance(v, Vec2):
        return [_num(v.x), _num(v.y)]
    if isinstance(v, PreferenceTable):
        return {k: _num(w) for k, w in sorted(v.weights.items())}
    if is_dataclass(v):
        return {f.name: _canon(getattr(v, f.name)) for f in fields(v) if not f.name.startswith("_")}
    if isinstance(v, (list, tuple)):
        return [_canon(x) for x in v]
    if isinstance(v, float):
        return _num(v)
    return v


def _num(x: float):
    return repr(float(x)) if not math.isfinite(x) else float(x)


def validate(s: Scenario) -> None:
    """Cross-reference checks; raises :class:`ValidationError` naming the field."""
    ids = [b.id for b in s.bodies]
    if len(set(ids)) != len(ids):
        raise ValidationError("bodies", "duplicate body id")
    bodies = s.body_map()
    for b in s.bodies:
        if not (b.radius > 0 and math.isfinite(b.radius)):
            raise ValidationError(f"bodies.{b.id}.radius", "must be > 0")
        if not (b.gamma > 0 and math.isfinite(b.gamma)):
            raise ValidationError(f"bodies.{b.id}.gamma", "must be > 0")
        if not s.arena.contains(b.position):
            raise ValidationError(f"bodies.{b.id}.position", "outside the arena")
    sids = [src.id for src in s.sources]
    if len(set(sids)) != len(sids):
        raise ValidationError("sources", "duplicate source id")
    for src in s.sources:
        if src.host_body is not None:
            if src.host_body not in bodies:
                raise ValidationError(f"sources.{src.id}.host_body", f"unknown body {src.host_body!r}")
        elif not s.arena.contains(src.position):
            raise ValidationError(f"sources.{src.id}.position", "outside the arena")
        if src.color not in s.preferences.weights:
            raise ValidationError(f"sources.{src.id}.color", f"colour {src.color!r} not in preference table")
    if isinstance(s.seed.where, str):
        if s.seed.where not in bodies:
            raise ValidationError("seed.body", f"unknown body {s.seed.where!r}")
    elif not s.arena.contains(s.seed.where):
        raise ValidationError("seed.position", "outside the arena")
    if not (s.seed.mass > 0 and math.isfinite(s.seed.mass)):
        raise ValidationError("seed.mass", "must be > 0")
    fp = s.field
    if fp.stencil not in (5, 9):
        raise ValidationError("field.stencil", "must be 5 or 9")
    try:
        build_arena(s.arena, fp.diffusion, fp.decay, TICK_MINUTES, fp.stencil)
    except ConfigurationError as exc:
        raise ValidationError("field", str(exc)) from None
    sch = s.schedule
    for name in ("ticks", "snapshot_every", "metric_every"):
        if getattr(sch, name) < 0:
            raise ValidationError(f"schedule.{name}", "must be >= 0")
    if sch.substep < 1:
        raise ValidationError("schedule.substep", "must be >= 1")
    if s.tubes.extract_every < 1:
        raise ValidationError("tubes.extract_every", "must be >= 1")
    if s.tubes.contraction < 0 or s.tubes.contraction * s.substep_minutes > 1:
        raise ValidationError("tubes.contraction", "need 0 <= contraction * substep minutes <= 1")
    if s.tubes.stiffness < 0:
        raise ValidationError("tubes.stiffness", "must be >= 0")
    if s.mechanics.push_mag < 0:
        raise ValidationError("mechanics.push_mag", "must be >= 0")
    if not s.mechanics.push_range > 0:
        raise ValidationError("mechanics.push_range", "must be > 0")
    if not 0 <= s.rng_seed < 2**64:
        raise ValidationError("rng_seed", "must be a 64-bit unsigned integer")


def host_positions(s: Scenario) -> tuple:
    """Sources with ``host_body`` placed on their host's centroid."""
    bodies = s.body_map()
    out = []
    for src in s.sources:
        if src.host_body is not None:
            pos = bodies[src.host_body].position
            if pos != src.position:
                src = NutrientSource(src.id, pos, src.emission_rate, src.color, src.host_body)
        out.append(src)
    return tuple(out)
