"""Acceptance suite: one pass/fail line per criterion, shown in the pytest summary."""

import math
import time

import numpy as np
import pytest
from scipy.linalg import eigh_tridiagonal
from scipy.special import jn_zeros

from sharp_poincare.analysis import decay_constants, scaling_check, subadditivity_violations, tail_report
from sharp_poincare.geometry import GALLERY, DomainSpec, boundary_points, grid_for, inradius, measure_density, realize_domain, validate_steiner
from sharp_poincare.grid import GridFunction, lq_norm, make_grid
from sharp_poincare.solver import ProblemConfig, confinement_sweep, drift_test, q_sweep, solve_extremal, solve_linfty
from sharp_poincare.symmetrization import full_symmetrize, line_distances, rearrangement_report

INTERVAL = DomainSpec("interval", {"half_width": 1.0})


def timed(fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t0


def test_c01_interval_eigenvalue(record):
    h = 1 / 200
    res, dt = timed(solve_extremal, ProblemConfig(1, 2, 2, INTERVAL, h))
    # oracle: Dirichlet tridiagonal matrix on the 399 interior cells of (-1, 1)
    n = res.mask.count
    oracle = eigh_tridiagonal(np.full(n, 2 / h**2), np.full(n - 1, -1 / h**2), select="i", select_range=(0, 0))[0][0]
    err = abs(res.lambda_est / (math.pi**2 / 4) - 1)
    ok = err < 0.01 and abs(res.lambda_est / oracle - 1) < 1e-6 and dt < 10
    record(1, ok, f"lambda={res.lambda_est:.6f} oracle={oracle:.6f} err={err:.2e} time={dt:.2f}s")
    assert ok


def test_c02_disc_eigenvalue(record):
    res, dt = timed(solve_extremal, ProblemConfig(2, 2, 2, GALLERY["ball"], 1 / 64))
    exact = jn_zeros(0, 1)[0] ** 2
    err = abs(res.lambda_est / exact - 1)
    ok = err < 0.02 and dt < 60
    record(2, ok, f"lambda={res.lambda_est:.5f} j01^2={exact:.5f} err={err:.2e} time={dt:.2f}s")
    assert ok


@pytest.mark.parametrize("p", [2.0, 3.0])
def test_c03_linfty_closed_form(record, p):
    res, dt = timed(solve_linfty, ProblemConfig(1, p, math.inf, INTERVAL, 1 / 200))
    err = abs(res.lambda_est / 2 - 1)
    ok = err < 0.01 and dt < 10
    record(3, ok, f"p={p:g} lambda={res.lambda_est:.6f} err={err:.2e} time={dt:.2f}s")
    assert ok


@pytest.mark.parametrize("dim, p, q", [(1, 2, 2), (2, 2, 4)])
def test_c04_scaling_law(record, dim, p, q):
    predicted, measured = scaling_check(p, q, dim, 2.0, 1 / 32)
    err = abs(measured / predicted - 1)
    ok = err < 0.02
    record(4, ok, f"(N,p,q)=({dim},{p},{q}) ratio={measured:.5f} predicted={predicted:.5f} err={err:.2e}")
    assert ok


def test_c05_confinement_monotone(record):
    slack = 1e-6
    sweep = confinement_sweep(ProblemConfig(1, 2, 4, INTERVAL, 1 / 200), [0, 3, 15, 100], slack)
    lams = sweep.lambdas
    mono = all(b <= a * (1 + slack) for a, b in zip(lams, lams[1:]))
    gap = abs(lams[-1] / sweep.unconfined.lambda_est - 1)
    ok = mono and gap < 0.005
    record(5, ok, f"lambdas={[round(v, 5) for v in lams]} unconfined={sweep.unconfined.lambda_est:.5f} gap={gap:.2e}")
    assert ok


def _random_field(rng, shape):
    vals = rng.uniform(0, 1, shape)
    vals[rng.uniform(0, 1, shape) < 0.3] = 0.0
    return vals


def _smooth_field(x, y):
    return np.clip((1 - x**2) * (1 - y**2) * np.exp(-4 * ((x - 0.3) ** 2 + (y - 0.2) ** 2)), 0, None)


def test_c06_symmetrization_suite(record):
    rng = np.random.default_rng(6)
    h = 1 / 8
    grid = make_grid(2, 1.0, h)
    equi = contr = pot = True
    worst_pot = math.inf
    for _ in range(1000):
        u = GridFunction(grid, _random_field(rng, grid.shape))
        s = full_symmetrize(u)
        equi &= bool(np.array_equal(np.sort(s.values, axis=None), np.sort(u.values, axis=None)))
        rep = rearrangement_report(u, 2.0, [0.5, 1.0, 2.0])
        scale = float(np.sum(u.values**2)) * grid.cell_volume
        worst = min(d for _, d in rep.potential_defects) / scale
        worst_pot = min(worst_pot, worst)
        pot &= worst >= -h
        v = GridFunction(grid, _random_field(rng, grid.shape))
        for axis in range(2):
            sym, orig = line_distances(u, v, 2.0, axis)
            contr &= bool(np.all(sym <= orig))
    floors = []
    for n in (25, 50, 100):
        u = GridFunction.from_callable(make_grid(2, 1.0, 1 / n), _smooth_field)
        floors.append(min(0.0, rearrangement_report(u, 2.0).relative_pz_defect))
    pz = all(b >= a for a, b in zip(floors, floors[1:])) and floors[-1] <= 0
    ok = equi and contr and pot and pz
    record(6, ok, f"equimeasurable={equi} contractive={contr} pz_floor={floors} potential_min={worst_pot:.1e}")
    assert ok


def test_c07_subadditivity(record):
    count, dt = timed(subadditivity_violations, 10_000, seed=7)
    ok = count == 0 and dt < 1
    record(7, ok, f"violations={count} time={dt:.3f}s")
    assert ok


def test_c08_slab_extremal_structure(record):
    res = solve_extremal(ProblemConfig(2, 2, 4, GALLERY["slab"], 1 / 16, 8.0))
    u = res.u
    defect = lq_norm(u - full_symmetrize(u), 2) / lq_norm(u, 2)
    ok = bool(np.all(u.values >= 0)) and res.argmax == (0.0, 0.0) and defect < 1e-3
    record(8, ok, f"lambda={res.lambda_est:.5f} argmax={res.argmax} sym_defect={defect:.1e}")
    assert ok


def test_c09_decay_recursion(record):
    res = solve_extremal(ProblemConfig(2, 2, 4, GALLERY["slab"], 1 / 16, 16.0))
    consts = decay_constants(2, 4, math.pi**2 / 4, res.lambda_est)
    again = decay_constants(2, 4, math.pi**2 / 4, res.lambda_est)
    stable = (consts.C7, consts.K, consts.a) == (again.C7, again.K, again.a)
    values = consts.C7 == 96.0 and abs(consts.K - 78.82) < 0.01 and abs(consts.a - 0.00315) < 1e-5
    rep = tail_report(res.u, 4, consts)
    rate = rep.fitted_rate[0]
    ok = stable and values and rep.recursion_pass and rate >= consts.a
    record(9, ok, f"C7={consts.C7:g} K={consts.K:.4f} a={consts.a:.6f} r0={rep.r0} "
                  f"recursion={rep.recursion_pass} rate={rate:.4f}")
    assert ok


@pytest.mark.parametrize("name, expect_drift", [("half_slab", True), ("pinched_minus", True), ("pinched_plus", False)])
def test_c10_non_attainment(record, name, expect_drift):
    h = 1 / 8
    rep = drift_test(ProblemConfig(2, 2, 4, GALLERY[name], h), [8.0, 16.0, 32.0])
    d = rep.distances
    if expect_drift:
        ok = all(b > a for a, b in zip(d, d[1:]))
    else:
        ok = max(d) <= h
    record(10, ok, f"{name} distances={d}")
    assert ok


def test_c11_q_to_infinity(record):
    sweep = q_sweep(ProblemConfig(1, 2, 4, INTERVAL, 1 / 200), [4, 8, 16, 32])
    lams = [lam for _, lam, _, _ in sweep.entries]
    dists = [d for *_, d in sweep.entries]
    gaps = [abs(v - sweep.limit.lambda_est) for v in lams]
    ok = all(b < a for a, b in zip(gaps, gaps[1:])) and all(b < a for a, b in zip(dists, dists[1:]))
    record(11, ok, f"lambdas={[round(v, 4) for v in lams]} limit={sweep.limit.lambda_est:.4f} "
                   f"w12_dist={[round(v, 4) for v in dists]}")
    assert ok


def test_c12_geometry(record):
    h = 1 / 64
    cross = validate_steiner(realize_domain(GALLERY["cross"], grid_for(GALLERY["cross"], 2, 3.0, h)))
    rho = inradius(cross)
    r = 0.5
    densities = []
    for name in ("cross", "slab"):
        mask = cross if name == "cross" else realize_domain(GALLERY["slab"], grid_for(GALLERY["slab"], 2, 3.0, h))
        densities += [measure_density(mask, x, r) for x in boundary_points(mask, 20, seed=12)]
    ok = abs(rho - math.sqrt(2)) <= h and min(densities) >= 0.25 - 2 * h / r
    record(12, ok, f"inradius={rho:.5f} sqrt2={math.sqrt(2):.5f} min_density={min(densities):.4f} "
                   f"bound={0.25 - 2 * h / r:.4f} points={len(densities)}")
    assert ok
