"""Strict TOML loader for scenario files.

Unknown keys are rejected, defaults fill omitted parameters, and every
failure names the offending key.  The schema is documented in
``docs/scenario-format.md``.
"""
from __future__ import annotations

import math
import re
import sys
from dataclasses import fields
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..arena import ArenaSpec, NutrientSource
from ..errors import ConfigurationError, InputError, ParseError, ValidationError
from ..graphstore.preferences import PreferenceTable
from ..plasmodium import GrowthParams
from ..vec import Vec2
from .model import BodySpec, FieldParams, MechanicsParams, Scenario, Schedule, SeedSpec, TubeParams

TOP_KEYS = {"name", "rng_seed", "arena", "seed", "sources", "bodies", "growth", "field",
            "mechanics", "tubes", "preferences", "schedule"}
ARENA_KEYS = {"shape", "radius", "width", "height", "cell_size"}
SEED_KEYS = {"position", "body", "mass"}
SOURCE_KEYS = {"id", "position", "emission_rate", "color", "host_body"}
BODY_KEYS = {"id", "position", "radius", "gamma", "anchored", "polygon"}

_LOC = re.compile(r"\(at line (\d+), column (\d+)\)")


def _names(cls) -> set:
    return {f.name for f in fields(cls)}


def _check_keys(table: dict, allowed: set, where: str) -> None:
    if not isinstance(table, dict):
        raise ValidationError(where, "expected a table")
    for k in table:
        if k not in allowed:
            path = f"{where}.{k}" if where else k
            raise ValidationError(path, f"unknown key (allowed: {', '.join(sorted(allowed))})")


def _number(v, where: str, integer: bool = False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValidationError(where, "expected an integer" if integer else "expected a number")
    if integer:
        if not isinstance(v, int):
            raise ValidationError(where, "expected an integer")
        return v
    if not math.isfinite(v):
        raise ValidationError(where, "must be finite")
    return float(v)


def _bool(v, where: str) -> bool:
    if not isinstance(v, bool):
        raise ValidationError(where, "expected true or false")
    return v


def _string(v, where: str) -> str:
    if not isinstance(v, str) or not v:
        raise ValidationError(where, "expected a non-empty string")
    return v


def _point(v, where: str) -> Vec2:
    if not (isinstance(v, list) and len(v) == 2):
        raise ValidationError(where, "expected [x, y]")
    return Vec2(_number(v[0], f"{where}[0]"), _number(v[1], f"{where}[1]"))


def _params(cls, table: dict, where: str, ints: set = frozenset()):
    """Build a flat numeric parameter dataclass from ``table``."""
    _check_keys(table, _names(cls), where)
    kw = {k: _number(v, f"{where}.{k}", k in ints) for k, v in table.items()}
    try:
        return cls(**kw)
    except ConfigurationError as exc:
        raise ValidationError(where, str(exc)) from None


def _arena(t: dict) -> ArenaSpec:
    _check_keys(t, ARENA_KEYS, "arena")
    if "shape" not in t:
        raise ValidationError("arena.shape", "required (disc or rectangle)")
    shape = t["shape"]
    if shape not in ("disc", "rectangle"):
        raise ValidationError("arena.shape", "must be 'disc' or 'rectangle'")
    need = ("radius",) if shape == "disc" else ("width", "height")
    for k in need:
        if k not in t:
            raise ValidationError(f"arena.{k}", f"required for a {shape} arena")
    kw = {k: _number(t[k], f"arena.{k}") for k in ("radius", "width", "height", "cell_size") if k in t}
    try:
        return ArenaSpec(shape, **kw)
    except ConfigurationError as exc:
        raise ValidationError("arena", str(exc)) from None


def _seed(t: dict) -> SeedSpec:
    _check_keys(t, SEED_KEYS, "seed")
    if ("position" in t) == ("body" in t):
        raise ValidationError("seed", "give exactly one of position or body")
    where = _point(t["position"], "seed.position") if "position" in t else _string(t["body"], "seed.body")
    mass = _number(t.get("mass", SeedSpec.mass), "seed.mass")
    return SeedSpec(where, mass)


def _sources(items) -> list:
    if not isinstance(items, list):
        raise ValidationError("sources", "expected an array of tables")
    out = []
    for i, t in enumerate(items):
        label = f"sources[{i}]"
        _check_keys(t, SOURCE_KEYS, label)
        if "id" not in t:
            raise ValidationError(f"{label}.id", "required")
        sid = _string(t["id"], f"{label}.id")
        label = f"sources.{sid}"
        host = _string(t["host_body"], f"{label}.host_body") if "host_body" in t else None
        if "position" in t:
            pos = _point(t["position"], f"{label}.position")
        elif host is not None:
            pos = Vec2(0.0, 0.0)  # replaced by the host centroid
        else:
            raise ValidationError(f"{label}.position", "required unless host_body is given")
        rate = _number(t.get("emission_rate", 1.0), f"{label}.emission_rate")
        if rate < 0:
            raise ValidationError(f"{label}.emission_rate", "must be >= 0")
        color = _string(t.get("color", "oat"), f"{label}.color")
        out.append(NutrientSource(sid, pos, rate, color, host))
    return out


def _bodies(items) -> list:
    if not isinstance(items, list):
        raise ValidationError("bodies", "expected an array of tables")
    out = []
    for i, t in enumerate(items):
        label = f"bodies[{i}]"
        _check_keys(t, BODY_KEYS, label)
        for k in ("id", "position"):
            if k not in t:
                raise ValidationError(f"{label}.{k}", "required")
        bid = _string(t["id"], f"{label}.id")
        label = f"bodies.{bid}"
        poly = None
        if "polygon" in t:
            if not isinstance(t["polygon"], list) or len(t["polygon"]) < 3:
                raise ValidationError(f"{label}.polygon", "expected at least three [x, y] vertices")
            poly = tuple(_point(p, f"{label}.polygon[{j}]").as_tuple() for j, p in enumerate(t["polygon"]))
        out.append(BodySpec(
            bid,
            _point(t["position"], f"{label}.position"),
            _number(t.get("radius", BodySpec.radius), f"{label}.radius"),
            _number(t.get("gamma", BodySpec.gamma), f"{label}.gamma"),
            _bool(t.get("anchored", False), f"{label}.anchored"),
            poly,
        ))
    return out


def _preferences(t: dict) -> PreferenceTable:
    if not isinstance(t, dict):
        raise ValidationError("preferences", "expected a table")
    weights = {}
    for k, v in t.items():
        weights[k] = _number(v, f"preferences.{k}")
    try:
        return PreferenceTable(weights)
    except ConfigurationError as exc:
        raise ValidationError("preferences", str(exc)) from None


def scenario_from_dict(doc: dict, default_name: str = "scenario") -> Scenario:
    _check_keys(doc, TOP_KEYS, "")
    if "arena" not in doc:
        raise ValidationError("arena", "required section missing")
    arena = _arena(doc["arena"])
    if "seed" not in doc:
        raise ValidationError("seed", "required section missing")
    kw = {}
    if "growth" in doc:
        kw["growth"] = _params(GrowthParams, doc["growth"], "growth", {"initial_tips", "site_tips"})
    if "field" in doc:
        kw["field"] = _params(FieldParams, doc["field"], "field", {"stencil"})
    if "mechanics" in doc:
        kw["mechanics"] = _params(MechanicsParams, doc["mechanics"], "mechanics")
    if "tubes" in doc:
        kw["tubes"] = _params(TubeParams, doc["tubes"], "tubes", {"extract_every"})
    if "schedule" in doc:
        kw["schedule"] = _params(Schedule, doc["schedule"], "schedule", set(_names(Schedule)))
    if "preferences" in doc:
        kw["preferences"] = _preferences(doc["preferences"])
    if "rng_seed" in doc:
        kw["rng_seed"] = _number(doc["rng_seed"], "rng_seed", integer=True)
    name = _string(doc.get("name", default_name), "name")
    try:
        return Scenario(
            name, arena, _sources(doc.get("sources", [])), _seed(doc["seed"]),
            _bodies(doc.get("bodies", [])), **kw,
        )
    except ValidationError:
        raise
    except ConfigurationError as exc:
        raise ValidationError(name, str(exc)) from None


def loads_scenario(text: str, default_name: str = "scenario") -> Scenario:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        line = getattr(exc, "lineno", None)
        col = getattr(exc, "colno", None)
        msg = getattr(exc, "msg", str(exc))
        if line is None:
            m = _LOC.search(str(exc))
            if m:
                line, col = int(m.group(1)), int(m.group(2))
        raise ParseError(_LOC.sub("", msg).strip(), line, col) from None
    return scenario_from_dict(doc, default_name)


def load_scenario(path) -> Scenario:
    """Parse and validate a scenario file."""
    p = Path(path)
    try:
        raw = p.read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read scenario {p}: {exc.strerror or exc}") from None
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"{p}: not valid UTF-8 ({exc.reason})") from None
    return loads_scenario(text, default_name=p.stem)
