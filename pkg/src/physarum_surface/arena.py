"""Arena geometry and the chemoattractant / repellent field.

The field lives on a cell-centred grid whose origin is the arena centre.
Row index grows with ``y`` and column index with ``x``; arrays are shaped
``(ny, nx)``.  Cells outside the arena mask hold exactly zero and exchange
no flux with the interior (closed dish).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Literal, Optional

import numpy as np

from .errors import ConfigurationError, QueryError, ScenarioError
from .graphstore.preferences import PreferenceTable, color_weight
from .vec import Vec2

MIN_CELLS = 8

DEFAULT_CELL_SIZE = 0.5
DEFAULT_DIFFUSION = 0.6
DEFAULT_DECAY = 0.005
DEFAULT_DT = 0.1
DEFAULT_COLOR = "oat"

# Isotropic 9-point Laplacian: edge neighbours weigh 4/6, diagonals 1/6.
_EDGE_W = 4.0 / 6.0
_DIAG_W = 1.0 / 6.0


@dataclass(frozen=True)
class ArenaSpec:
    shape: Literal["disc", "rectangle"]
    radius: float = 0.0
    width: float = 0.0
    height: float = 0.0
    cell_size: float = DEFAULT_CELL_SIZE

    def __post_init__(self):
        if not (self.cell_size > 0 and math.isfinite(self.cell_size)):
            raise ConfigurationError(f"cell_size must be > 0, got {self.cell_size}")
        if self.shape == "disc":
            if not self.radius > 0:
                raise ConfigurationError(f"disc radius must be > 0, got {self.radius}")
        elif self.shape == "rectangle":
            if not (self.width > 0 and self.height > 0):
                raise ConfigurationError(
                    f"rectangle width/height must be > 0, got {self.width}x{self.height}"
                )
        else:
            raise ConfigurationError(f"unknown arena shape {self.shape!r}")
        nx, ny = self.grid_shape
        if min(nx, ny) < MIN_CELLS:
            raise ConfigurationError(
                f"grid {nx}x{ny} has fewer than {MIN_CELLS} cells per axis "
                f"(cell_size={self.cell_size})"
            )

    @classmethod
    def disc(cls, radius: float, cell_size: float = DEFAULT_CELL_SIZE) -> ArenaSpec:
        return cls("disc", radius=radius, cell_size=cell_size)

    @classmethod
    def rectangle(cls, width: float, height: float, cell_size: float = DEFAULT_CELL_SIZE) -> ArenaSpec:
        return cls("rectangle", width=width, height=height, cell_size=cell_size)

    @property
    def extent(self) -> tuple[float, float]:
        if self.shape == "disc":
            return 2 * self.radius, 2 * self.radius
        return self.width, self.height

    @property
    def grid_shape(self) -> tuple[int, int]:
        """``(nx, ny)`` cell counts."""
        w, h = self.extent
        return (math.ceil(w / self.cell_size - 1e-9), math.ceil(h / self.cell_size - 1e-9))

    def contains(self, p: Vec2, margin: float = 0.0) -> bool:
        """Geometric containment, optionally shrunk by ``margin``."""
        if self.shape == "disc":
            return math.hypot(p.x, p.y) <= self.radius - margin
        return abs(p.x) <= self.width / 2 - margin and abs(p.y) <= self.height / 2 - margin

    def contains_many(self, pts: np.ndarray, margin: float = 0.0) -> np.ndarray:
        if self.shape == "disc":
            return np.hypot(pts[:, 0], pts[:, 1]) <= self.radius - margin
        return (np.abs(pts[:, 0]) <= self.width / 2 - margin) & (
            np.abs(pts[:, 1]) <= self.height / 2 - margin
        )

    def project_inside(self, p: Vec2, margin: float = 0.0) -> Vec2:
        """Closest point of the arena shrunk by ``margin`` (identity when inside)."""
        if self.shape == "disc":
            lim = max(self.radius - margin, 0.0)
            r = math.hypot(p.x, p.y)
            if r <= lim:
                return p
            return Vec2(p.x * lim / r, p.y * lim / r)
        hx = max(self.width / 2 - margin, 0.0)
        hy = max(self.height / 2 - margin, 0.0)
        return Vec2(min(max(p.x, -hx), hx), min(max(p.y, -hy), hy))

    def build_mask(self) -> np.ndarray:
        nx, ny = self.grid_shape
        h = self.cell_size
        xs = (np.arange(nx) + 0.5) * h - nx * h / 2
        ys = (np.arange(ny) + 0.5) * h - ny * h / 2
        X, Y = np.meshgrid(xs, ys)
        if self.shape == "disc":
            return np.hypot(X, Y) <= self.radius
        return (np.abs(X) <= self.width / 2) & (np.abs(Y) <= self.height / 2)


@dataclass(frozen=True)
class NutrientSource:
    id: str
    position: Vec2
    emission_rate: float = 1.0
    color: str = DEFAULT_COLOR
    host_body: Optional[str] = None

    def __post_init__(self):
        if not (self.emission_rate >= 0 and math.isfinite(self.emission_rate)):
            raise ConfigurationError(
                f"source {self.id}: emission_rate must be >= 0, got {self.emission_rate}"
            )


@dataclass(frozen=True, eq=False)
class ChemoField:
    spec: ArenaSpec
    mask: np.ndarray
    attractant: np.ndarray
    repellent: np.ndarray
    diffusion: float
    decay: float
    dt: float
    stencil: int = 9
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.attractant.shape

    @property
    def cell_size(self) -> float:
        return self.spec.cell_size

    @property
    def origin(self) -> tuple[float, float]:
        ny, nx = self.attractant.shape
        h = self.spec.cell_size
        return (-nx * h / 2, -ny * h / 2)

    def cell_of(self, p: Vec2) -> tuple[int, int]:
        """``(row, col)`` of the cell containing ``p`` (clamped to the grid)."""
        ny, nx = self.attractant.shape
        x0, y0 = self.origin
        h = self.spec.cell_size
        col = min(max(int(math.floor((p.x - x0) / h)), 0), nx - 1)
        row = min(max(int(math.floor((p.y - y0) / h)), 0), ny - 1)
        return row, col

    def cells_of(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        ny, nx = self.attractant.shape
        x0, y0 = self.origin
        h = self.spec.cell_size
        col = np.clip(np.floor((pts[:, 0] - x0) / h).astype(np.int64), 0, nx - 1)
        row = np.clip(np.floor((pts[:, 1] - y0) / h).astype(np.int64), 0, ny - 1)
        return row, col

    def cell_center(self, row: int, col: int) -> Vec2:
        x0, y0 = self.origin
        h = self.spec.cell_size
        return Vec2(x0 + (col + 0.5) * h, y0 + (row + 0.5) * h)

    def cell_centres(self) -> np.ndarray:
        """Cell-centre coordinates, shape ``(ny, nx, 2)``."""
        ny, nx = self.attractant.shape
        x0, y0 = self.origin
        h = self.spec.cell_size
        X, Y = np.meshgrid(x0 + (np.arange(nx) + 0.5) * h, y0 + (np.arange(ny) + 0.5) * h)
        return np.stack([X, Y], axis=-1)

    def contains(self, p: Vec2) -> bool:
        if not self.spec.contains(p):
            return False
        return bool(self.mask[self.cell_of(p)])

    def contains_many(self, pts: np.ndarray) -> np.ndarray:
        inside = self.spec.contains_many(pts)
        row, col = self.cells_of(pts)
        return inside & self.mask[row, col]

    def neighbour_weights(self) -> np.ndarray:
        """Per-cell sum of stencil weights over in-mask neighbours."""
        if "nw" not in self._cache:
            m = _padded(self.mask.astype(float))
            edges = m[:-2, 1:-1] + m[2:, 1:-1] + m[1:-1, :-2] + m[1:-1, 2:]
            if self.stencil == 9:
                diag = m[:-2, :-2] + m[2:, 2:] + m[:-2, 2:] + m[2:, :-2]
                nw = _EDGE_W * edges + _DIAG_W * diag
            else:
                nw = edges
            self._cache["nw"] = nw * self.mask
        return self._cache["nw"]

    def total_mass(self) -> tuple[float, float]:
        return float(self.attractant.sum()), float(self.repellent.sum())


def _padded(a: np.ndarray) -> np.ndarray:
    out = np.zeros((a.shape[0] + 2, a.shape[1] + 2), dtype=a.dtype)
    out[1:-1, 1:-1] = a
    return out


def stability_limit(cell_size: float, diffusion: float) -> float:
    """Largest explicit time step ``cell_size**2 / (4 D)``."""
    if diffusion <= 0:
        return math.inf
    return cell_size**2 / (4.0 * diffusion)


def build_arena(
    spec: ArenaSpec,
    diffusion: float = DEFAULT_DIFFUSION,
    decay: float = DEFAULT_DECAY,
    dt: float = DEFAULT_DT,
    stencil: int = 9,
) -> ChemoField:
    """Zero-initialised field over ``spec`` with stability checked for ``dt``."""
    if not (diffusion >= 0 and math.isfinite(diffusion)):
        raise ConfigurationError(f"diffusion coefficient must be >= 0, got {diffusion}")
    if not (decay >= 0 and math.isfinite(decay)):
        raise ConfigurationError(f"decay rate must be >= 0, got {decay}")
    if not dt > 0:
        raise ConfigurationError(f"dt must be > 0, got {dt}")
    if stencil not in (5, 9):
        raise ConfigurationError(f"stencil must be 5 or 9, got {stencil}")
    h = spec.cell_size
    limit = stability_limit(h, diffusion)
    if dt > limit * (1 + 1e-12):
        raise ConfigurationError(
            f"unstable explicit step: dt={dt} exceeds cell_size^2/(4D)={limit:.6g} "
            f"(cell_size={h}, D={diffusion})"
        )
    centre_loss = (20.0 / 6.0 if stencil == 9 else 4.0) * diffusion * dt / h**2 + decay * dt
    if centre_loss > 1 + 1e-12:
        raise ConfigurationError(
            f"dt={dt} with D={diffusion}, decay={decay}, cell_size={h} gives a negative "
            f"centre weight ({1 - centre_loss:.3g}); reduce dt or decay"
        )
    mask = spec.build_mask()
    zeros = np.zeros(mask.shape, dtype=float)
    return ChemoField(spec, mask, zeros, zeros.copy(), float(diffusion), float(decay), float(dt), stencil)


def emit_sources(
    fld: ChemoField,
    sources: Iterable[NutrientSource],
    dt: float,
    preferences: PreferenceTable | None = None,
) -> ChemoField:
    """Add ``rate * dt * weight`` of each source to the cell containing it.

    Sources whose colour weight is negative deposit ``|weight|`` into the
    repellent grid.
    """
    sources = list(sources)
    if not sources:
        return fld
    att = fld.attractant.copy()
    rep = fld.repellent
    rep_copied = False
    for src in sources:
        if not fld.contains(src.position):
            raise ScenarioError(f"source {src.id} at {src.position.as_tuple()} lies outside the arena")
        w = color_weight(preferences, src.color) if preferences is not None else 1.0
        cell = fld.cell_of(src.position)
        amount = src.emission_rate * dt
        if w < 0:
            if not rep_copied:
                rep = rep.copy()
                rep_copied = True
            rep[cell] += amount * -w
        else:
            att[cell] += amount * w
    return replace(fld, attractant=att, repellent=rep, _cache=_carry(fld))


def _carry(fld: ChemoField) -> dict:
    # field-independent cache entries survive value updates
    return {k: v for k, v in fld._cache.items() if k == "nw"}


def _laplacian(fld: ChemoField, c: np.ndarray) -> np.ndarray:
    p = _padded(c)
    lap = p[:-2, 1:-1] + p[2:, 1:-1]
    lap += p[1:-1, :-2]
    lap += p[1:-1, 2:]
    if fld.stencil == 9:
        lap *= _EDGE_W
        diag = p[:-2, :-2] + p[2:, 2:]
        diag += p[:-2, 2:]
        diag += p[2:, :-2]
        diag *= _DIAG_W
        lap += diag
    lap -= c * fld.neighbour_weights()
    lap *= fld.mask
    return lap


def _step_grid(fld: ChemoField, c: np.ndarray, dt: float) -> np.ndarray:
    if fld.diffusion == 0.0 and fld.decay == 0.0:
        return c.copy()
    h2 = fld.spec.cell_size ** 2
    out = c.copy()
    if fld.diffusion != 0.0:
        lap = _laplacian(fld, c)
        lap *= dt * fld.diffusion / h2
        out += lap
    if fld.decay != 0.0:
        out -= (dt * fld.decay) * c
    np.maximum(out, 0.0, out=out)
    return out


def diffuse_decay_step(fld: ChemoField, dt: float | None = None) -> ChemoField:
    """One explicit diffusion + first-order decay step with zero-flux walls."""
    dt = fld.dt if dt is None else dt
    if dt > stability_limit(fld.spec.cell_size, fld.diffusion) * (1 + 1e-12):
        raise ConfigurationError(f"dt={dt} violates the stability bound for this field")
    att = _step_grid(fld, fld.attractant, dt)
    if fld.repellent.any():
        rep = _step_grid(fld, fld.repellent, dt)
    else:
        rep = fld.repellent
    return replace(fld, attractant=att, repellent=rep, _cache=_carry(fld))


def _central_gradient(fld: ChemoField, c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Central differences, mirroring the centre value across the mask edge."""
    h = fld.spec.cell_size
    p = _padded(c)
    pm = _padded(fld.mask)
    east = np.where(pm[1:-1, 2:], p[1:-1, 2:], c)
    west = np.where(pm[1:-1, :-2], p[1:-1, :-2], c)
    north = np.where(pm[2:, 1:-1], p[2:, 1:-1], c)
    south = np.where(pm[:-2, 1:-1], p[:-2, 1:-1], c)
    gx = (east - west) / (2 * h) * fld.mask
    gy = (north - south) / (2 * h) * fld.mask
    return gx, gy


def gradient_grids(fld: ChemoField) -> tuple[np.ndarray, np.ndarray]:
    """Net (attractant minus repellent) gradient on cell centres, cached per field."""
    if "grad" not in fld._cache:
        net = fld.attractant - fld.repellent if fld.repellent.any() else fld.attractant
        fld._cache["grad"] = _central_gradient(fld, net)
    return fld._cache["grad"]


def gradient_many(fld: ChemoField, pts: np.ndarray) -> np.ndarray:
    """Bilinearly interpolated net gradient at each row of ``pts`` (N, 2).

    Interpolation weights falling on out-of-mask cells are dropped and the
    rest renormalised.  Points outside the arena get a zero gradient; callers
    that care should test containment first.
    """
    gx, gy = gradient_grids(fld)
    ny, nx = gx.shape
    x0, y0 = fld.origin
    h = fld.spec.cell_size
    fx = (pts[:, 0] - x0) / h - 0.5
    fy = (pts[:, 1] - y0) / h - 0.5
    j0 = np.floor(fx).astype(np.int64)
    i0 = np.floor(fy).astype(np.int64)
    tx = fx - j0
    ty = fy - i0
    out = np.zeros((len(pts), 2))
    wsum = np.zeros(len(pts))
    for di, dj, w in (
        (0, 0, (1 - ty) * (1 - tx)),
        (0, 1, (1 - ty) * tx),
        (1, 0, ty * (1 - tx)),
        (1, 1, ty * tx),
    ):
        ii = i0 + di
        jj = j0 + dj
        ok = (ii >= 0) & (ii < ny) & (jj >= 0) & (jj < nx)
        iic = np.clip(ii, 0, ny - 1)
        jjc = np.clip(jj, 0, nx - 1)
        ok &= fld.mask[iic, jjc]
        w = np.where(ok, w, 0.0)
        out[:, 0] += w * gx[iic, jjc]
        out[:, 1] += w * gy[iic, jjc]
        wsum += w
    nz = wsum > 0
    out[nz] /= wsum[nz, None]
    return out


def gradient_at(fld: ChemoField, p: Vec2) -> Vec2:
    """Net chemo-gradient at ``p`` in concentration per mm."""
    if not fld.contains(p):
        raise QueryError(f"gradient query at {p.as_tuple()} is outside the arena")
    g = gradient_many(fld, np.array([[p.x, p.y]]))[0]
    return Vec2(float(g[0]), float(g[1]))
