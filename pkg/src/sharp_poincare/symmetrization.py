"""Discrete Steiner symmetrization of sets and nonnegative grid functions.

Along a grid line of ``n`` cells (``n`` odd, centre ``c``) the values are
sorted in decreasing order and dealt out to the cells ``c, c+1, c-1, c+2,
c-2, ...``. The same placement order applied to indicator functions gives
the set version, so the two agree through the layer-cake formula.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import DomainMask, SteinerStatus
from .grid import GridFunction, gradient_pnorm, weighted_pnorm

__all__ = [
    "placement_order",
    "symmetrize_line",
    "symmetrize_set",
    "symmetrize_fn",
    "full_symmetrize",
    "full_symmetrize_set",
    "RearrangementReport",
    "rearrangement_report",
    "contractivity_check",
    "line_distances",
]


def placement_order(n: int) -> np.ndarray:
    """Cell positions in the order ranks are assigned: centre, then right before left."""
    c = (n - 1) // 2
    order = [c]
    for k in range(1, n):
        if c + k < n:
            order.append(c + k)
        if c - k >= 0:
            order.append(c - k)
        if len(order) >= n:
            break
    return np.asarray(order[:n], dtype=int)


def _rearrange_rows(rows: np.ndarray) -> np.ndarray:
    """Symmetric decreasing rearrangement of each row of a 2-D array."""
    n = rows.shape[-1]
    ranked = -np.sort(-rows, axis=-1, kind="stable")
    out = np.empty_like(rows)
    out[..., placement_order(n)] = ranked
    return out


def symmetrize_line(values: Sequence[float]) -> np.ndarray:
    """Rearrange one line of values.

    >>> symmetrize_line([0, 3, 1, 2, 0]).tolist()
    [0.0, 1.0, 3.0, 2.0, 0.0]
    """
    return _rearrange_rows(np.asarray(values, dtype=float)[None, :])[0]


def _along_axis(values: np.ndarray, axis: int) -> np.ndarray:
    moved = np.moveaxis(values, axis, -1)
    out = _rearrange_rows(moved.reshape(-1, moved.shape[-1])).reshape(moved.shape)
    return np.moveaxis(out, -1, axis)


def _check_axis(dim: int, axis: int) -> None:
    if not 0 <= axis < dim:
        raise ValueError(f"axis {axis} out of range for dimension {dim}")


def symmetrize_set(mask: DomainMask, axis: int) -> DomainMask:
    """Replace the inside cells of every line along ``axis`` by a centred run of the same count."""
    _check_axis(mask.grid.dim, axis)
    inside = _along_axis(mask.inside.astype(float), axis) > 0.5
    return DomainMask(mask.grid, inside, SteinerStatus.UNCHECKED, None, mask.spec)


def full_symmetrize_set(mask: DomainMask) -> DomainMask:
    for axis in range(mask.grid.dim):
        mask = symmetrize_set(mask, axis)
    return mask


def _check_nonneg(u: GridFunction) -> None:
    if np.any(u.values < 0):
        raise ValueError("symmetrization needs a nonnegative function")


def symmetrize_fn(u: GridFunction, axis: int) -> GridFunction:
    """Symmetric decreasing rearrangement of ``u`` along every line parallel to ``axis``.

    The result vanishes outside the symmetrized mask of ``u``.
    """
    _check_axis(u.grid.dim, axis)
    _check_nonneg(u)
    vals = _along_axis(u.values, axis)
    mask = None if u.mask is None else symmetrize_set(u.mask, axis)
    if mask is not None:
        # an already symmetric mask is its own image; keep its metadata
        if np.array_equal(mask.inside, u.mask.inside):
            mask = u.mask
    return GridFunction(u.grid, vals, mask, signed=False)


def full_symmetrize(u: GridFunction) -> GridFunction:
    """Compose the one-axis rearrangements over axes ``0, ..., N-1``."""
    for axis in range(u.grid.dim):
        u = symmetrize_fn(u, axis)
    return u


@dataclass(frozen=True)
class RearrangementReport:
    """Comparison of ``u`` with its full symmetrization.

    ``pz_defect`` is the energy of ``u`` minus that of its rearrangement and
    ``potential_defects`` holds ``(alpha, int |x|^alpha (u^p - S(u)^p))``.
    """

    equimeasurable: bool
    pz_defect: float
    relative_pz_defect: float
    potential_defects: tuple[tuple[float, float], ...]

    def to_json(self) -> dict:
        return {
            "equimeasurable": self.equimeasurable,
            "pz_defect": self.pz_defect,
            "relative_pz_defect": self.relative_pz_defect,
            "potential_defects": [list(t) for t in self.potential_defects],
        }


def _equimeasurable(a: np.ndarray, b: np.ndarray) -> bool:
    return bool(np.array_equal(np.sort(a, axis=None), np.sort(b, axis=None)))


def rearrangement_report(
    u: GridFunction, p: float, alphas: Sequence[float] = (), axis: int | None = None
) -> RearrangementReport:
    """Measure what symmetrizing ``u`` does to its energy and weighted moments.

    ``axis=None`` uses :func:`full_symmetrize`, otherwise a single axis.
    The energy defect needs ``p > 1`` and is NaN for ``p = 1``.
    """
    if p < 1:
        raise ValueError("p must be at least 1")
    _check_nonneg(u)
    s = full_symmetrize(u) if axis is None else symmetrize_fn(u, axis)
    if p > 1:
        energy = gradient_pnorm(u, p)
        defect = energy - gradient_pnorm(s, p)
        rel = defect / energy if energy > 0 else 0.0
    else:
        defect = rel = math.nan
    pot = tuple((float(a), weighted_pnorm(u, p, a) - weighted_pnorm(s, p, a)) for a in alphas)
    return RearrangementReport(_equimeasurable(u.values, s.values), float(defect), float(rel), pot)


def line_distances(u: GridFunction, v: GridFunction, p: float, axis: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-line ``sum |S u - S v|^p`` and ``sum |u - v|^p`` along ``axis``.

    Sums are correctly rounded (``math.fsum``) so that equal multisets of
    terms compare equal regardless of their order on the line.
    """
    if u.grid != v.grid:
        raise ValueError("grid mismatch")
    _check_axis(u.grid.dim, axis)
    _check_nonneg(u)
    _check_nonneg(v)

    def rows(a):
        moved = np.moveaxis(a, axis, -1)
        return moved.reshape(-1, moved.shape[-1])

    ru, rv = rows(u.values), rows(v.values)
    su, sv = _rearrange_rows(ru), _rearrange_rows(rv)
    sym = np.array([math.fsum(t) for t in np.abs(su - sv) ** p])
    orig = np.array([math.fsum(t) for t in np.abs(ru - rv) ** p])
    return sym, orig


def contractivity_check(u: GridFunction, v: GridFunction, p: float, axis: int) -> tuple[float, float]:
    """Return ``(||S u - S v||_p, ||u - v||_p)`` for the rearrangement along ``axis``."""
    sym, orig = line_distances(u, v, p, axis)
    vol = u.grid.cell_volume
    return (math.fsum(sym) * vol) ** (1 / p), (math.fsum(orig) * vol) ** (1 / p)

