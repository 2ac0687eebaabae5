import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial import cKDTree

from sharp_poincare.geometry import (
    GALLERY,
    AxisClass,
    DomainMask,
    DomainSpec,
    EmptyDomainError,
    InconclusiveClassification,
    SteinerStatus,
    boundary_points,
    classify_infinity,
    grid_for,
    inradius,
    inradius_center,
    measure_density,
    realize_domain,
    section_inradius,
    validate_steiner,
)
from sharp_poincare.grid import make_grid


def mask_of(name_or_spec, dim=2, L=4.0, h=0.125):
    spec = GALLERY[name_or_spec] if isinstance(name_or_spec, str) else name_or_spec
    return validate_steiner(realize_domain(spec, grid_for(spec, dim, L, h)))


def brute_inradius(mask):
    """Largest distance from an inside centre to the nearest outside centre, box exterior included."""
    grid = mask.grid
    h = grid.spacing
    shape = tuple(s + 2 for s in grid.shape)
    padded = np.zeros(shape, bool)
    padded[tuple(slice(1, -1) for _ in shape)] = mask.inside
    pts_in = np.argwhere(padded) * h
    pts_out = np.argwhere(~padded) * h
    dist, _ = cKDTree(pts_out).query(pts_in)
    return dist.max()


def test_realize_slab_rows():
    spec = GALLERY["slab"]
    grid = make_grid(2, 4.0, 0.25)
    mask = realize_domain(spec, grid)
    y = grid.coords(1)
    assert mask.steiner is SteinerStatus.UNCHECKED
    assert np.array_equal(mask.inside, np.broadcast_to(np.abs(y) < 1, grid.shape))


def test_realize_cross_and_half_slab_membership():
    cross = GALLERY["cross"]
    assert cross.contains(([2.0], [0.5]))[0]
    assert not cross.contains(([2.0], [1.5]))[0]
    assert not GALLERY["half_slab"].contains(([-0.5], [0.0]))[0]


def test_empty_realization_raises():
    with pytest.raises(EmptyDomainError):
        realize_domain(DomainSpec("custom", predicate=lambda x, y: x > 5), make_grid(2, 1.0, 0.25))


@pytest.mark.parametrize(
    "family, params",
    [("ball", {"radius": -1.0}), ("slab", {"half_width": 0.0}), ("pinched_minus", {"eps": 1.5}), ("nope", {})],
)
def test_spec_validation(family, params):
    with pytest.raises(ValueError):
        DomainSpec(family, params)


def test_spec_json_round_trip():
    spec = DomainSpec("pinched_plus", {"eps": 0.3, "profile": "bump"})
    assert DomainSpec.from_json(spec.to_json()) == spec
    assert DomainSpec.from_json("cross") == GALLERY["cross"]


@pytest.mark.parametrize(
    "name, status, axis",
    [
        ("slab", SteinerStatus.VALIDATED, None),
        ("cross", SteinerStatus.VALIDATED, None),
        ("ball", SteinerStatus.VALIDATED, None),
        ("box", SteinerStatus.VALIDATED, None),
        ("pinched_plus", SteinerStatus.VALIDATED, None),
        ("staircase", SteinerStatus.VALIDATED, None),
        ("half_slab", SteinerStatus.VIOLATED, 0),
        ("pinched_minus", SteinerStatus.VIOLATED, 0),
    ],
)
def test_gallery_validation(name, status, axis):
    mask = mask_of(name)
    assert mask.steiner is status
    if axis is not None:
        assert mask.violation[0] == axis


def test_pinched_minus_fails_convexity_not_symmetry():
    # lines along axis 0 through the pinch are symmetric but have a gap
    mask = mask_of("pinched_minus")
    axis, line = mask.violation
    row = mask.inside[:, line[1]]
    idx = np.flatnonzero(row)
    assert np.array_equal(row, row[::-1])
    assert idx[-1] - idx[0] + 1 > len(idx)


@pytest.mark.parametrize(
    "name, expected, h",
    [("slab", 1.0, 1 / 16), ("cross", math.sqrt(2), 1 / 16), (DomainSpec("ball", {"radius": 0.7}), 0.7, 1 / 32)],
)
def test_inradius_examples(name, expected, h):
    mask = mask_of(name, L=4.0, h=h)
    assert abs(inradius(mask) - expected) <= h


@pytest.mark.parametrize("name", ["cross", "slab", "staircase", "pinched_plus", "half_slab"])
def test_inradius_matches_brute_force(name):
    mask = mask_of(name, L=3.0, h=1 / 8)
    assert inradius(mask) == pytest.approx(brute_inradius(mask), abs=1e-12)


@pytest.mark.parametrize("name", ["slab", "cross", "ball", "box", "pinched_plus", "staircase"])
def test_steiner_inradius_attained_at_origin(name):
    mask = mask_of(name, L=3.0, h=1 / 16)
    grid = mask.grid
    # distance from the origin to the nearest outside centre (box exterior is outside)
    outside = grid.radius()[~mask.inside]
    face = min(L + grid.spacing for L in np.asarray(grid.half_counts) * grid.spacing)
    at_origin = min(outside.min() if outside.size else math.inf, face)
    assert inradius(mask) - at_origin <= grid.spacing


@pytest.mark.parametrize(
    "name, axis, t, expected",
    [("slab", 0, 3.0, 1.0), ("cross", 0, 2.0, 1.0), ("ball", 0, 0.6, 0.8)],
)
def test_section_inradius_examples(name, axis, t, expected):
    h = 1 / 32
    mask = mask_of(name, L=4.0, h=h)
    assert abs(section_inradius(mask, axis, t) - expected) <= h


def test_section_inradius_errors_and_empty():
    mask = mask_of("ball", L=2.0, h=1 / 8)
    with pytest.raises(ValueError):
        section_inradius(mask, 2, 0.0)
    assert section_inradius(mask, 0, 1.1) == 0.0


@pytest.mark.parametrize("name", ["slab", "cross", "ball", "box", "pinched_plus", "staircase"])
def test_section_inradius_even_and_nonincreasing(name):
    mask = mask_of(name, L=4.0, h=1 / 16)
    h = mask.grid.spacing
    for axis in range(2):
        ts = mask.grid.coords(axis)
        ts = ts[ts >= 0]
        vals = [section_inradius(mask, axis, t) for t in ts]
        neg = [section_inradius(mask, axis, -t) for t in ts]
        assert vals == neg
        assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize(
    "name, classes, witness",
    [
        ("slab", (AxisClass.TUBULAR, AxisClass.BOUNDED), (1.0, 1.0)),
        ("cross", (AxisClass.TUBULAR, AxisClass.TUBULAR), (1.0, 1.0)),
        ("ball", (AxisClass.BOUNDED, AxisClass.BOUNDED), (1.0, 1.0)),
        ("staircase", (AxisClass.SHRINKING, AxisClass.BOUNDED), (None, 1.0)),
    ],
)
def test_classify_infinity(name, classes, witness):
    prof = classify_infinity(GALLERY[name], 2)
    assert prof.classes == classes
    for w, exp in zip(prof.witness, witness):
        if exp is not None:
            assert abs(w - exp) <= 1 / 32 + 1e-12


def test_classify_inconclusive_custom():
    # sections grow then shrink across the schedule: neither stable nor decreasing
    spec = DomainSpec("custom", {"name": "wobble"}, predicate=lambda x, y: np.abs(y) < 1 + 0.5 * np.sin(np.abs(x)))
    with pytest.raises(InconclusiveClassification):
        classify_infinity(spec, 2)


@pytest.mark.parametrize(
    "name, point, expected",
    [("cross", (1.0, 1.0), 0.25), ("slab", (0.0, 1.0), 0.5)],
)
def test_measure_density_examples(name, point, expected):
    h, r = 1 / 64, 0.5
    mask = mask_of(name, L=3.0, h=h)
    assert measure_density(mask, point, r) == pytest.approx(expected, abs=4 * h / r)


def test_measure_density_errors():
    mask = mask_of("slab", L=3.0, h=1 / 16)
    with pytest.raises(ValueError):
        measure_density(mask, (0.0, 0.0), 0.5)  # interior
    with pytest.raises(ValueError):
        measure_density(mask, (0.0, 1.0), 0.05)  # radius below two cells


@pytest.mark.parametrize("name", ["slab", "cross", "ball", "box", "pinched_plus", "staircase"])
def test_measure_density_lower_bound(name):
    h, r = 1 / 32, 0.5
    mask = mask_of(name, L=3.0, h=h)
    for x in boundary_points(mask, 12, seed=1):
        assert measure_density(mask, x, r) >= 0.25 - 2 * h / r


@settings(max_examples=30, deadline=None)
@given(a=st.floats(0.3, 2.0), b=st.floats(0.3, 2.0), power=st.floats(0.5, 4.0))
def test_random_superellipse_is_steiner(a, b, power):
    # |x/a|^s + |y/b|^s < 1 is symmetric and convex along both axes
    spec = DomainSpec(
        "custom", {"name": "superellipse", "bounded": True},
        predicate=lambda x, y: np.abs(x / a) ** power + np.abs(y / b) ** power < 1,
    )
    mask = validate_steiner(realize_domain(spec, make_grid(2, 2.2, 0.1)))
    assert mask.validated


def test_asymmetric_mask_reports_first_line():
    grid = make_grid(2, 1.0, 0.25)
    inside = np.zeros(grid.shape, bool)
    inside[3:6, 2:7] = True
    inside[6, 4] = True  # breaks symmetry along axis 0 in column 4
    mask = validate_steiner(DomainMask(grid, inside))
    assert mask.steiner is SteinerStatus.VIOLATED
    assert mask.violation == (0, (-1, 4))
