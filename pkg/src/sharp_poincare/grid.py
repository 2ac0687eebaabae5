"""Uniform cell-centred grids, finite-difference energies and quadrature.

Every field lives on a tensor grid of cells whose centres are ``k * h`` for
``k = -m, ..., m`` along each axis, so the origin is always a cell centre.
Cells outside the computational box are treated as zero, which is how the
homogeneous Dirichlet condition enters the discrete energies.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "Grid",
    "GridFunction",
    "make_grid",
    "gradient_pnorm",
    "lq_norm",
    "weighted_pnorm",
    "cell_gradients",
    "energy_gradient",
    "save_field",
    "load_field",
]

# tolerance for the floor in the odd-cell-count rule, guards L/h = 2.9999999
_ROUND_EPS = 1e-9


@dataclass(frozen=True)
class Grid:
    """Cell-centred tensor grid on the box ``prod_i (-L_i, L_i)``."""

    dim: int
    half_extent: tuple[float, ...]
    spacing: float
    cells_per_axis: tuple[int, ...]

    def __post_init__(self):
        if len(self.half_extent) != self.dim or len(self.cells_per_axis) != self.dim:
            raise ValueError("half_extent and cells_per_axis must have one entry per axis")
        for n, L in zip(self.cells_per_axis, self.half_extent):
            if n % 2 != 1:
                raise ValueError("cells_per_axis must be odd")
            if self.spacing * (n - 1) / 2 > L * (1 + _ROUND_EPS):
                raise ValueError("cell centres exceed the half extent")

    @property
    def shape(self) -> tuple[int, ...]:
        return self.cells_per_axis

    @property
    def half_counts(self) -> tuple[int, ...]:
        return tuple((n - 1) // 2 for n in self.cells_per_axis)

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    @property
    def origin_index(self) -> tuple[int, ...]:
        return self.half_counts

    def coords(self, axis: int) -> np.ndarray:
        m = self.half_counts[axis]
        return self.spacing * np.arange(-m, m + 1, dtype=float)

    def mesh(self) -> list[np.ndarray]:
        return np.meshgrid(*(self.coords(i) for i in range(self.dim)), indexing="ij")

    def radius(self) -> np.ndarray:
        """Euclidean norm of every cell centre."""
        r2 = np.zeros(self.shape)
        for X in self.mesh():
            r2 += X * X
        return np.sqrt(r2)

    def point(self, index: Sequence[int]) -> tuple[float, ...]:
        return tuple(
            float(self.spacing * (k - m)) for k, m in zip(index, self.half_counts)
        )

    def index_of(self, point: Sequence[float]) -> tuple[int, ...]:
        """Nearest cell index to ``point`` (may fall outside the grid)."""
        return tuple(
            int(round(x / self.spacing)) + m for x, m in zip(point, self.half_counts)
        )

    def contains_index(self, index: Sequence[int]) -> bool:
        return all(0 <= k < n for k, n in zip(index, self.shape))

    def header(self) -> dict:
        return {
            "dim": self.dim,
            "half_extent": list(self.half_extent),
            "spacing": self.spacing,
            "cells_per_axis": list(self.cells_per_axis),
        }

    @classmethod
    def from_header(cls, header: dict) -> "Grid":
        return cls(
            dim=int(header["dim"]),
            half_extent=tuple(float(v) for v in header["half_extent"]),
            spacing=float(header["spacing"]),
            cells_per_axis=tuple(int(v) for v in header["cells_per_axis"]),
        )


def make_grid(dim: int, half_extent: float | Sequence[float], spacing: float) -> Grid:
    """Build the grid with the largest odd cell count whose centres fit in ``[-L, L]``.

    >>> make_grid(1, 1.0, 0.3).cells_per_axis
    (7,)
    """
    if dim < 1:
        raise ValueError("dim must be at least 1")
    if not spacing > 0:
        raise ValueError("spacing must be positive")
    if np.isscalar(half_extent):
        extents = (float(half_extent),) * dim
    else:
        extents = tuple(float(v) for v in half_extent)
        if len(extents) != dim:
            raise ValueError("half_extent needs one value per axis")
    counts = []
    for L in extents:
        if L < spacing:
            raise ValueError(f"half extent {L} smaller than spacing {spacing}")
        m = int(math.floor(L / spacing + _ROUND_EPS))
        counts.append(2 * m + 1)
    return Grid(dim=dim, half_extent=extents, spacing=float(spacing), cells_per_axis=tuple(counts))


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Scalar field on a grid, zero outside its mask.

    ``mask`` is a :class:`~sharp_poincare.geometry.DomainMask` or ``None``
    (no support restriction beyond the box). Values are copied and frozen.
    """

    grid: Grid
    values: np.ndarray
    mask: object = None
    signed: bool = False

    def __post_init__(self):
        vals = np.array(self.values, dtype=float, copy=True)
        if vals.shape != self.grid.shape:
            raise ValueError(f"values shape {vals.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid function values must be finite")
        if self.mask is not None:
            inside = self.mask.inside
            if np.any(vals[~inside] != 0):
                raise ValueError("grid function must vanish outside its mask")
        if not self.signed and np.any(vals < 0):
            raise ValueError("negative values in an unsigned grid function")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_callable(cls, grid: Grid, func, mask=None, signed: bool = False) -> "GridFunction":
        vals = np.asarray(func(*grid.mesh()), dtype=float) * np.ones(grid.shape)
        if mask is not None:
            vals = np.where(mask.inside, vals, 0.0)
        return cls(grid, vals, mask, signed)

    def with_values(self, values: np.ndarray, signed: bool | None = None) -> "GridFunction":
        return GridFunction(self.grid, values, self.mask, self.signed if signed is None else signed)

    def scaled(self, c: float) -> "GridFunction":
        return self.with_values(c * self.values)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        if other.grid != self.grid:
            raise ValueError("grid mismatch")
        return GridFunction(self.grid, self.values - other.values, None, signed=True)

    def argmax(self) -> tuple[float, ...]:
        idx = np.unravel_index(int(np.argmax(self.values)), self.grid.shape)
        return self.grid.point(idx)

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))


def _padded(values: np.ndarray) -> np.ndarray:
    return np.pad(values, 1, mode="constant")


def _shift_slices(shape: Sequence[int], axis: int) -> tuple[tuple[slice, ...], tuple[slice, ...]]:
    """Slices of a padded array selecting base cells and their ``+e_axis`` neighbours.

    Base cells run over padded indices ``0..n`` on every axis; together with
    the neighbour this covers every link touching an interior cell.
    """
    base = tuple(slice(0, n + 1) for n in shape)
    shifted = tuple(slice(1, n + 2) if i == axis else slice(0, n + 1) for i, n in enumerate(shape))
    return base, shifted


def cell_gradients(values: np.ndarray, h: float) -> list[np.ndarray]:
    """Forward differences per axis on the zero-padded field."""
    P = _padded(values)
    grads = []
    for axis in range(values.ndim):
        base, shifted = _shift_slices(values.shape, axis)
        grads.append((P[shifted] - P[base]) / h)
    return grads


def _grad_norm2(grads: list[np.ndarray]) -> np.ndarray:
    g2 = grads[0] * grads[0]
    for g in grads[1:]:
        g2 = g2 + g * g
    return g2


def _check_p(p: float) -> None:
    if not p > 1:
        raise ValueError(f"exponent p must exceed 1, got {p}")


def _values(u) -> tuple[np.ndarray, float]:
    if isinstance(u, GridFunction):
        return u.values, u.grid.spacing
    raise TypeError("expected a GridFunction")


def gradient_pnorm(u: GridFunction, p: float, delta: float = 0.0) -> float:
    """Midpoint approximation of ``int |grad u|^p`` (not its ``p``-th root).

    ``delta > 0`` switches to the smoothed integrand ``(|g|^2 + delta^2)^(p/2)``.
    """
    _check_p(p)
    vals, h = _values(u)
    g2 = _grad_norm2(cell_gradients(vals, h))
    if delta:
        g2 = g2 + delta * delta
    integrand = g2 if p == 2 else g2 ** (p / 2)
    return float(np.sum(integrand) * h**vals.ndim)


def energy_gradient(values: np.ndarray, h: float, p: float, delta: float = 0.0) -> tuple[float, np.ndarray]:
    """Energy ``int |grad u|^p`` and its gradient with respect to the cell values."""
    grads = cell_gradients(values, h)
    g2 = _grad_norm2(grads)
    if delta:
        g2 = g2 + delta * delta
    n = values.ndim
    if p == 2:
        energy = float(np.sum(g2)) * h**n
        weight = np.full_like(g2, 2.0)
    else:
        energy = float(np.sum(g2 ** (p / 2))) * h**n
        with np.errstate(divide="ignore", invalid="ignore"):
            weight = p * g2 ** ((p - 2) / 2)
        weight[g2 == 0] = 0.0
    dP = np.zeros(tuple(s + 2 for s in values.shape))
    for axis, g in enumerate(grads):
        flux = weight * g
        base, shifted = _shift_slices(values.shape, axis)
        dP[shifted] += flux
        dP[base] -= flux
    interior = tuple(slice(1, s + 1) for s in values.shape)
    return energy, dP[interior] * h ** (n - 1)


def lq_norm(u: GridFunction, q: float) -> float:
    """Midpoint ``L^q`` norm; ``q = inf`` gives the maximum modulus."""
    if not q >= 1:
        raise ValueError(f"q must be at least 1, got {q}")
    vals, h = _values(u)
    a = np.abs(vals)
    if math.isinf(q):
        return float(np.max(a)) if a.size else 0.0
    peak = float(np.max(a)) if a.size else 0.0
    if peak == 0.0:
        return 0.0
    # rescale by the peak so large q does not underflow
    s = float(np.sum((a / peak) ** q)) * h**vals.ndim
    return peak * s ** (1.0 / q)


def weighted_pnorm(u: GridFunction, p: float, alpha: float) -> float:
    """Midpoint approximation of ``int |x|^alpha |u|^p``."""
    if p < 1:
        raise ValueError("p must be at least 1")
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    vals, h = _values(u)
    w = u.grid.radius() ** alpha if alpha else 1.0
    return float(np.sum(w * np.abs(vals) ** p)) * h**vals.ndim


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def save_field(path: str | Path, u: GridFunction) -> Path:
    """Write ``u`` as a JSON header line followed by CSV rows of inside cells.

    Rows hold the signed cell offsets from the origin and the value; the
    set of rows is the mask.
    """
    path = Path(path)
    grid = u.grid
    inside = u.mask.inside if u.mask is not None else np.ones(grid.shape, bool)
    idx = np.argwhere(inside)
    offsets = idx - np.asarray(grid.half_counts)
    vals = u.values[inside]
    cols = ",".join(f"i{k}" for k in range(grid.dim))
    lines = ["# " + json.dumps(grid.header(), sort_keys=True), f"{cols},value"]
    for off, v in zip(offsets, vals):
        lines.append(",".join(str(int(k)) for k in off) + "," + _fmt(v))
    path.write_text("\n".join(lines) + "\n")
    return path


def load_field(path: str | Path):
    """Inverse of :func:`save_field`; returns ``(GridFunction, DomainMask)``."""
    from .geometry import DomainMask

    text = Path(path).read_text().splitlines()
    if not text or not text[0].startswith("# "):
        raise ValueError(f"{path}: missing grid header")
    grid = Grid.from_header(json.loads(text[0][2:]))
    rows = np.loadtxt(text[2:], delimiter=",", ndmin=2) if len(text) > 2 else np.zeros((0, grid.dim + 1))
    inside = np.zeros(grid.shape, bool)
    values = np.zeros(grid.shape)
    if rows.size:
        idx = tuple((rows[:, k].astype(int) + grid.half_counts[k]) for k in range(grid.dim))
        inside[idx] = True
        values[idx] = rows[:, -1]
    mask = DomainMask(grid, inside)
    return GridFunction(grid, values, mask, signed=bool(np.any(values < 0))), mask
