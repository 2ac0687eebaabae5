"""Steiner-symmetric domains on grids: construction, validation and section geometry."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Sequence

import numpy as np
from scipy import ndimage

from .grid import Grid, make_grid

__all__ = [
    "DomainSpec",
    "DomainMask",
    "SteinerStatus",
    "AxisClass",
    "InfinityProfile",
    "InconclusiveClassification",
    "EmptyDomainError",
    "GALLERY",
    "gallery_spec",
    "bump",
    "realize_domain",
    "validate_steiner",
    "inradius",
    "inradius_center",
    "section_inradius",
    "classify_infinity",
    "measure_density",
    "boundary_points",
    "domain_extent",
    "grid_for",
]

FAMILIES = (
    "slab",
    "cross",
    "ball",
    "box",
    "interval",
    "half_slab",
    "pinched_minus",
    "pinched_plus",
    "staircase",
    "custom",
)


class EmptyDomainError(ValueError):
    pass


class InconclusiveClassification(RuntimeError):
    pass


def bump(s):
    """Default pinch profile ``exp(1 - 1/(1 - s^2))`` on ``(-1, 1)``, zero elsewhere."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inner = np.abs(s) < 1
    out[inner] = np.exp(1.0 - 1.0 / (1.0 - s[inner] ** 2))
    return out


_PROFILES = {"bump": bump}


@dataclass(frozen=True)
class DomainSpec:
    """A named open set. ``predicate`` is only used by the ``custom`` family.

    Geometric parameters (all optional, defaults in brackets):

    * slab: ``half_width`` [1], the last axis is the bounded one
    * cross: ``half_width`` [1], union of tubes along each axis
    * ball: ``radius`` [1]; interval: ``half_width`` [1] (one dimension)
    * box: ``half_extents`` [1 per axis]
    * half_slab: ``half_width`` [1], ``x_0 > 0``
    * pinched_minus / pinched_plus: ``eps`` [0.5], ``profile`` ["bump"]
    * staircase: ``|y| < 1/(floor|x| + 1)``
    * custom: ``bounded`` flag and optional per-axis ``extent``
    """

    family: str
    params: dict = field(default_factory=dict)
    predicate: Callable | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown domain family {self.family!r}")
        if self.family == "custom" and self.predicate is None:
            raise ValueError("custom domains need a membership predicate")
        for key in ("half_width", "radius"):
            if key in self.params and not self.params[key] > 0:
                raise ValueError(f"{key} must be positive")
        if "eps" in self.params and not 0 < self.params["eps"] < 1:
            raise ValueError("eps must lie in (0, 1)")
        if "half_extents" in self.params:
            he = np.atleast_1d(np.asarray(self.params["half_extents"], float))
            if np.any(he <= 0):
                raise ValueError("box half extents must be positive")

    def get(self, key, default):
        return self.params.get(key, default)

    @property
    def name(self) -> str:
        return self.params.get("name", self.family) if self.family == "custom" else self.family

    def contains(self, coords: Sequence[np.ndarray]) -> np.ndarray:
        """Membership of the points given as per-axis coordinate arrays."""
        X = [np.asarray(c, dtype=float) for c in coords]
        dim = len(X)
        fam = self.family
        if fam == "custom":
            return np.asarray(self.predicate(*X), dtype=bool)
        if fam == "slab":
            return np.abs(X[-1]) < self.get("half_width", 1.0)
        if fam == "cross":
            w = self.get("half_width", 1.0)
            if dim == 1:
                return np.ones_like(X[0], dtype=bool)
            out = np.zeros(np.broadcast(*X).shape, dtype=bool)
            for i in range(dim):
                tube = np.ones_like(out)
                for j in range(dim):
                    if j != i:
                        tube &= np.abs(X[j]) < w
                out |= tube
            return out
        if fam in ("ball", "interval"):
            r = self.get("radius", self.get("half_width", 1.0))
            return sum(x * x for x in X) < r * r
        if fam == "box":
            he = np.broadcast_to(np.atleast_1d(np.asarray(self.get("half_extents", 1.0), float)), (dim,))
            out = np.ones(np.broadcast(*X).shape, dtype=bool)
            for x, a in zip(X, he):
                out &= np.abs(x) < a
            return out
        if fam == "half_slab":
            w = self.get("half_width", 1.0)
            out = X[0] > 0
            for x in X[1:]:
                out = out & (np.abs(x) < w)
            return out
        if fam in ("pinched_minus", "pinched_plus"):
            eps = self.get("eps", 0.5)
            phi = _PROFILES[self.get("profile", "bump")]
            rprime = np.sqrt(sum(x * x for x in X[:-1])) if dim > 1 else np.zeros_like(X[0])
            sign = -1.0 if fam == "pinched_minus" else 1.0
            return np.abs(X[-1]) < 1.0 + sign * eps * phi(rprime / eps)
        if fam == "staircase":
            if dim != 2:
                raise ValueError("the staircase set is two-dimensional")
            return np.abs(X[1]) < 1.0 / (np.floor(np.abs(X[0])) + 1.0)
        raise AssertionError(fam)

    def to_json(self) -> dict:
        if self.family == "custom":
            raise ValueError("custom domains carry a Python predicate and are not serialisable")
        return {"family": self.family, "params": dict(self.params)}

    @classmethod
    def from_json(cls, data: dict | str) -> "DomainSpec":
        if isinstance(data, str):
            return gallery_spec(data)
        family = data["family"]
        params = dict(data.get("params", {}))
        if family in GALLERY and not params:
            return gallery_spec(family)
        return cls(family, params)


GALLERY: dict[str, DomainSpec] = {
    "slab": DomainSpec("slab", {"half_width": 1.0}),
    "cross": DomainSpec("cross", {"half_width": 1.0}),
    "half_slab": DomainSpec("half_slab", {"half_width": 1.0}),
    "pinched_minus": DomainSpec("pinched_minus", {"eps": 0.5, "profile": "bump"}),
    "pinched_plus": DomainSpec("pinched_plus", {"eps": 0.5, "profile": "bump"}),
    "ball": DomainSpec("ball", {"radius": 1.0}),
    "box": DomainSpec("box", {"half_extents": [1.0, 0.5]}),
    "staircase": DomainSpec("staircase", {}),
}


def gallery_spec(name: str) -> DomainSpec:
    if name == "interval":
        return DomainSpec("interval", {"half_width": 1.0})
    try:
        return GALLERY[name]
    except KeyError:
        raise KeyError(f"unknown gallery domain {name!r}; known: {sorted(GALLERY)}") from None


def domain_extent(spec: DomainSpec, dim: int) -> tuple[float, ...]:
    """Per-axis half-extent of the domain, ``inf`` along unbounded axes."""
    inf = math.inf
    fam = spec.family
    if fam == "slab":
        return (inf,) * (dim - 1) + (spec.get("half_width", 1.0),)
    if fam == "cross":
        return (inf,) * dim
    if fam in ("ball", "interval"):
        return (spec.get("radius", spec.get("half_width", 1.0)),) * dim
    if fam == "box":
        he = np.broadcast_to(np.atleast_1d(np.asarray(spec.get("half_extents", 1.0), float)), (dim,))
        return tuple(float(a) for a in he)
    if fam == "half_slab":
        return (inf,) + (spec.get("half_width", 1.0),) * (dim - 1)
    if fam == "pinched_minus":
        return (inf,) * (dim - 1) + (1.0,)
    if fam == "pinched_plus":
        return (inf,) * (dim - 1) + (1.0 + spec.get("eps", 0.5),)
    if fam == "staircase":
        return (inf, 1.0)
    extent = spec.get("extent", None)
    if extent is None:
        return (inf,) * dim
    return tuple(float(e) for e in np.broadcast_to(np.atleast_1d(extent), (dim,)))


def grid_for(spec: DomainSpec, dim: int, half_extent: float | Sequence[float], spacing: float) -> Grid:
    """Grid whose box is ``L`` along unbounded axes and hugs the domain elsewhere.

    Bounded axes get two spare cells beyond the domain so the exterior is
    represented inside the box.
    """
    L = np.broadcast_to(np.atleast_1d(np.asarray(half_extent, float)), (dim,))
    ext = domain_extent(spec, dim)
    box = [min(float(l), e + 2 * spacing) if math.isfinite(e) else float(l) for l, e in zip(L, ext)]
    return make_grid(dim, box, spacing)


class SteinerStatus(str, Enum):
    UNCHECKED = "unchecked"
    VALIDATED = "validated"
    VIOLATED = "violated"


@dataclass(frozen=True, eq=False)
class DomainMask:
    """Cell membership of a domain on a grid.

    ``violation`` holds ``(axis, line)`` for a violated mask, where ``line``
    is the grid index of the offending line with the axis entry set to -1.
    """

    grid: Grid
    inside: np.ndarray
    steiner: SteinerStatus = SteinerStatus.UNCHECKED
    violation: tuple | None = None
    spec: DomainSpec | None = None

    def __post_init__(self):
        inside = np.array(self.inside, dtype=bool, copy=True)
        if inside.shape != self.grid.shape:
            raise ValueError("mask shape does not match grid")
        inside.flags.writeable = False
        object.__setattr__(self, "inside", inside)

    @property
    def validated(self) -> bool:
        return self.steiner is SteinerStatus.VALIDATED

    @property
    def count(self) -> int:
        return int(self.inside.sum())

    def touches_box(self, axis: int | None = None) -> bool:
        """Whether inside cells reach the outer layer of the box (truncation)."""
        axes = range(self.grid.dim) if axis is None else [axis]
        for a in axes:
            first = np.take(self.inside, 0, axis=a)
            last = np.take(self.inside, -1, axis=a)
            if first.any() or last.any():
                return True
        return False

    def contains_point(self, points: np.ndarray) -> np.ndarray:
        """Membership of arbitrary cell-lattice points, falling back to the domain predicate beyond the box."""
        pts = np.atleast_2d(points)
        idx = np.rint(pts / self.grid.spacing).astype(int) + np.asarray(self.grid.half_counts)
        within = np.all((idx >= 0) & (idx < np.asarray(self.grid.shape)), axis=1)
        out = np.zeros(len(pts), dtype=bool)
        out[within] = self.inside[tuple(idx[within].T)]
        if self.spec is not None and np.any(~within):
            out[~within] = self.spec.contains(tuple(pts[~within].T))
        return out


def realize_domain(spec: DomainSpec, grid: Grid) -> DomainMask:
    """Mark the cells whose centres lie in the domain."""
    inside = np.asarray(spec.contains(grid.mesh()), dtype=bool)
    inside = np.broadcast_to(inside, grid.shape)
    if not inside.any():
        raise EmptyDomainError(f"{spec.name} has no cell centre inside the grid box")
    return DomainMask(grid, inside, spec=spec)


def _line_runs(inside: np.ndarray, axis: int):
    """Per-line count, first and last inside index along ``axis``."""
    lines = np.moveaxis(inside, axis, -1)
    n = lines.shape[-1]
    count = lines.sum(axis=-1)
    first = np.argmax(lines, axis=-1)
    last = n - 1 - np.argmax(lines[..., ::-1], axis=-1)
    return lines.shape[:-1], count, first, last, n


def validate_steiner(mask: DomainMask) -> DomainMask:
    """Check symmetry and convexity along every axis; record the first failure."""
    for axis in range(mask.grid.dim):
        shape, count, first, last, n = _line_runs(mask.inside, axis)
        centre = (n - 1) // 2
        nonempty = count > 0
        contiguous = (last - first + 1) == count
        symmetric = (first + last) == 2 * centre
        bad = nonempty & ~(contiguous & symmetric)
        if bad.any():
            pos = np.unravel_index(int(np.flatnonzero(bad.ravel())[0]), shape)
            line = list(pos)
            line.insert(axis, -1)
            return replace(mask, steiner=SteinerStatus.VIOLATED, violation=(axis, tuple(int(k) for k in line)))
    return replace(mask, steiner=SteinerStatus.VALIDATED, violation=None)


def _edt(inside: np.ndarray, h: float) -> np.ndarray:
    # pad so the box exterior counts as outside
    padded = np.pad(inside, 1, mode="constant", constant_values=False)
    dist = ndimage.distance_transform_edt(padded, sampling=h)
    return dist[tuple(slice(1, -1) for _ in range(inside.ndim))]


def inradius_center(mask: DomainMask) -> tuple[float, tuple[float, ...]]:
    """Largest distance from an inside cell centre to the nearest outside one.

    Ties are broken by the centre of smallest norm.
    """
    dist = _edt(mask.inside, mask.grid.spacing)
    best = dist.max()
    cand = np.argwhere(dist >= best * (1 - 1e-12))
    norms = np.linalg.norm(cand - np.asarray(mask.grid.half_counts), axis=1)
    idx = cand[int(np.argmin(norms))]
    return float(best), mask.grid.point(idx)


def inradius(mask: DomainMask) -> float:
    return inradius_center(mask)[0]


def section_inradius(mask: DomainMask, axis: int, t: float) -> float:
    """Inradius of the slice ``{x_axis = t}`` measured inside the hyperplane."""
    grid = mask.grid
    if not 0 <= axis < grid.dim:
        raise ValueError(f"axis {axis} out of range for a {grid.dim}-d grid")
    k = int(round(t / grid.spacing)) + grid.half_counts[axis]
    if not 0 <= k < grid.shape[axis]:
        raise ValueError(f"t = {t} outside the grid range")
    sl = np.take(mask.inside, k, axis=axis)
    if grid.dim == 1:
        return math.inf if bool(sl) else 0.0
    if not sl.any():
        return 0.0
    return float(_edt(sl, grid.spacing).max())


class AxisClass(str, Enum):
    BOUNDED = "bounded"
    SHRINKING = "shrinking"
    TUBULAR = "tubular"


@dataclass(frozen=True)
class InfinityProfile:
    """Behaviour of the sections at infinity along each axis.

    ``witness[i]`` is ``t_i`` for a bounded axis, ``R_i`` for a tubular one
    and the last sampled section inradius for a shrinking one.
    """

    classes: tuple[AxisClass, ...]
    witness: tuple[float, ...]
    samples: tuple[tuple[tuple[float, float], ...], ...]
    tail_samples: tuple[tuple[tuple[float, float], ...], ...]

    def to_json(self) -> dict:
        return {
            "axes": [
                {"class": c.value, "witness": w, "tail_samples": [list(s) for s in ts]}
                for c, w, ts in zip(self.classes, self.witness, self.tail_samples)
            ]
        }


def classify_infinity(
    spec: DomainSpec,
    dim: int,
    schedule: Sequence[float] = (4.0, 8.0, 16.0),
    spacing: float = 1 / 32,
) -> InfinityProfile:
    """Classify each axis as bounded, shrinking or tubular at infinity.

    The domain is realised on the box of the largest ``L`` in ``schedule``.
    An axis is bounded if its sections vanish for good before the box edge.
    Otherwise the section inradius is sampled at ``t = L/2`` for each ``L`` of
    the schedule: a value that stops changing (to within one cell) is tubular,
    a strictly decreasing one is shrinking.
    """
    schedule = sorted(float(s) for s in schedule)
    if len(schedule) < 2:
        raise ValueError("need at least two schedule points")
    grid = grid_for(spec, dim, schedule[-1], spacing)
    mask = realize_domain(spec, grid)
    h = grid.spacing
    classes, witness, samples, tails = [], [], [], []
    for axis in range(dim):
        m = grid.half_counts[axis]
        lines = np.moveaxis(mask.inside, axis, 0)
        nonempty = lines.reshape(lines.shape[0], -1).any(axis=1)[m:]
        stride = max(1, m // 64)
        samples.append(tuple((k * h, section_inradius(mask, axis, k * h)) for k in range(0, m + 1, stride)))
        empty_from = None
        for k in range(m + 1):
            if not nonempty[k:].any():
                empty_from = k
                break
        if empty_from is not None and empty_from < m:
            classes.append(AxisClass.BOUNDED)
            witness.append(empty_from * h)
            tails.append(())
            continue
        tail = tuple((L / 2, section_inradius(mask, axis, L / 2)) for L in schedule)
        tails.append(tail)
        r = np.array([v for _, v in tail])
        if abs(r[-1] - r[-2]) <= h * (1 + 1e-9) and r[-1] > h:
            classes.append(AxisClass.TUBULAR)
            witness.append(float(r[-1]))
        elif np.all(np.diff(r) < 0):
            classes.append(AxisClass.SHRINKING)
            witness.append(float(r[-1]))
        else:
            raise InconclusiveClassification(
                f"axis {axis} of {spec.name}: section inradii {r.tolist()} are neither stable nor decreasing"
            )
    return InfinityProfile(tuple(classes), tuple(witness), tuple(samples), tuple(tails))


def measure_density(mask: DomainMask, x: Sequence[float], r: float) -> float:
    """Fraction of ``B_r(x)`` outside the domain, by counting cell centres."""
    grid = mask.grid
    h = grid.spacing
    x = np.asarray(x, dtype=float)
    if not r > 2 * h:
        raise ValueError("radius must exceed two cells")
    tol = h * math.sqrt(grid.dim) * (1 + 1e-9)
    near = np.rint(x / h)
    offsets = np.array(np.meshgrid(*([np.arange(-1, 2)] * grid.dim), indexing="ij")).reshape(grid.dim, -1).T
    neigh = (near + offsets) * h
    d = np.linalg.norm(neigh - x, axis=1)
    member = mask.contains_point(neigh)
    close = d <= tol
    if not (member & close).any():
        raise ValueError(f"point {x.tolist()} is not within a cell of the domain")
    if not (~member & close).any():
        raise ValueError(f"point {x.tolist()} is interior, not on the boundary")
    k = int(math.ceil(r / h)) + 1
    axes = [np.arange(-k, k + 1) + near[i] for i in range(grid.dim)]
    pts = np.array(np.meshgrid(*axes, indexing="ij")).reshape(grid.dim, -1).T * h
    in_ball = np.linalg.norm(pts - x, axis=1) < r
    pts = pts[in_ball]
    outside = ~mask.contains_point(pts)
    return float(outside.sum()) / len(pts)


def boundary_points(mask: DomainMask, count: int, seed: int = 0) -> np.ndarray:
    """Midpoints of inside/outside neighbour pairs, sampled deterministically.

    Only pairs with both cells in the box are used, so truncation faces are
    never mistaken for the boundary of the domain.
    """
    grid = mask.grid
    pts = []
    origin = np.asarray(grid.half_counts)
    for axis in range(grid.dim):
        a = np.take(mask.inside, range(0, grid.shape[axis] - 1), axis=axis)
        b = np.take(mask.inside, range(1, grid.shape[axis]), axis=axis)
        for idx in np.argwhere(a != b):
            p = (idx - origin).astype(float)
            p[axis] += 0.5
            pts.append(p * grid.spacing)
    if not pts:
        raise ValueError("mask has no boundary inside the box")
    pts = np.array(pts)
    rng = np.random.default_rng(seed)
    pick = rng.choice(len(pts), size=min(count, len(pts)), replace=False)
    return pts[np.sort(pick)]
