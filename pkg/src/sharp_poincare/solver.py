"""Discrete minimisation of the Poincaré-Sobolev Rayleigh quotient.

The unknowns are the values at the inside cells of a domain mask. The
energy ``int |grad u|^p + int V |u|^p`` is assembled from sparse forward
difference operators, one per axis, acting on those unknowns; outside cells
are zero. Minimisation is a projected, preconditioned gradient descent on
the quotient ``G(u) / ||u||_q^p`` with an Armijo line search:

* the preconditioner is the (weighted) discrete Laplacian, so for
  ``p = q = 2`` a unit step is exactly one step of inverse iteration;
* iterates are clamped at zero and renormalised, which keeps them in the
  nonnegative part of the unit ``L^q`` sphere;
* on validated Steiner masks the iterate is replaced every ``k_sym`` steps
  by its full symmetrization whenever that does not raise the quotient.

The point-constrained problem (``q = inf``) minimises the energy with the
origin value pinned to 1, which is convex.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .geometry import (
    DomainMask,
    DomainSpec,
    domain_extent,
    grid_for,
    inradius,
    realize_domain,
    validate_steiner,
)
from .grid import Grid, GridFunction, gradient_pnorm, lq_norm, weighted_pnorm
from .symmetrization import full_symmetrize

__all__ = [
    "InfeasibleProblem",
    "SolverOptions",
    "ProblemConfig",
    "SolveResult",
    "check_feasible",
    "rayleigh",
    "solve_extremal",
    "solve_linfty",
    "confinement_sweep",
    "box_sweep",
    "q_sweep",
    "drift_test",
    "embed",
    "w1p_distance",
]

log = logging.getLogger(__name__)


class InfeasibleProblem(ValueError):
    """The exponents admit no extremal problem of the requested kind."""


@dataclass(frozen=True)
class SolverOptions:
    """Descent controls.

    Stops when the quotient decreased by less than ``tol`` (relative) over
    the last ``window`` iterations, when the line search cannot make
    progress, or after ``max_iter`` iterations (flagged as not converged).
    """

    k_sym: int = 10
    tol: float = 1e-9
    window: int = 50
    max_iter: int = 200_000
    delta: float = 0.0
    armijo: float = 1e-4
    max_step: float = 16.0


@dataclass(frozen=True)
class ProblemConfig:
    """Exponents, domain, discretisation and solver settings of one problem.

    ``q = math.inf`` selects the point-constrained problem. ``half_extent``
    is the truncation ``L`` used along unbounded axes.
    """

    dim: int
    p: float
    q: float
    domain: DomainSpec
    spacing: float
    half_extent: float = 8.0
    confinement_n: int | None = None
    solver: SolverOptions = field(default_factory=SolverOptions)

    @property
    def bounded(self) -> bool:
        if self.domain.family == "custom":
            return bool(self.domain.get("bounded", False))
        return all(math.isfinite(e) for e in domain_extent(self.domain, self.dim))

    def grid(self) -> Grid:
        return grid_for(self.domain, self.dim, self.half_extent, self.spacing)

    def with_(self, **changes) -> "ProblemConfig":
        return replace(self, **changes)


def critical_exponent(dim: int, p: float) -> float:
    return dim * p / (dim - p) if p < dim else math.inf


def check_feasible(dim: int, p: float, q: float, bounded: bool = False, internal: bool = False) -> None:
    """Reject exponent pairs outside the admissible range.

    ``q = p`` is the eigenvalue case: accepted on bounded domains and for
    internal use; on unbounded domains the infimum need not be attained.
    """
    if not p > 1:
        raise InfeasibleProblem(f"p must exceed 1, got {p}")
    if math.isinf(q):
        if not p > dim:
            raise InfeasibleProblem(f"q = inf requires p > N (got p = {p}, N = {dim})")
        return
    if q < p:
        raise InfeasibleProblem(f"q = {q} < p = {p}: the constant is zero and no extremal exists")
    if q == p and not (bounded or internal):
        raise InfeasibleProblem(
            f"q = p = {p} on an unbounded domain: the eigenvalue is not attained in general "
            "(the q <= p regime lacks the compactness that q > p provides)"
        )
    if p < dim and not q < critical_exponent(dim, p):
        raise InfeasibleProblem(f"q = {q} must be below the critical exponent {critical_exponent(dim, p)}")
    if p == dim and math.isinf(q):
        raise InfeasibleProblem("q must be finite when p = N")


@dataclass(frozen=True, eq=False)
class SolveResult:
    """Computed constant, extremal and diagnostics.

    ``u`` has unit ``L^q`` norm (unit maximum for ``q = inf``).
    ``ball_floor`` is the minimum of ``u`` over the cells within
    ``r / (3 sqrt N)`` of the origin, ``r`` the inradius of the mask.
    """

    lambda_est: float
    u: GridFunction
    residual: float
    iterations: int
    argmax: tuple[float, ...]
    sup: float
    ball_floor: float
    energy_history: tuple[float, ...]
    residual_history: tuple[float, ...]
    converged: bool
    p: float
    q: float
    confinement_n: int | None = None
    sym_violation: bool = False

    @property
    def mask(self) -> DomainMask:
        return self.u.mask

    def summary(self) -> dict:
        return {
            "lambda": self.lambda_est,
            "p": self.p,
            "q": self.q if math.isfinite(self.q) else "inf",
            "confinement_n": self.confinement_n,
            "residual": self.residual,
            "iterations": self.iterations,
            "converged": self.converged,
            "argmax": list(self.argmax),
            "sup": self.sup,
            "ball_floor": self.ball_floor,
            "steiner": self.mask.steiner.value,
            "sym_violation": self.sym_violation,
        }


# --- discretisation -------------------------------------------------------


class _Discretization:
    """Sparse difference operators and energies on the inside cells of a mask."""

    def __init__(self, mask: DomainMask, p: float, potential: np.ndarray | None, delta: float = 0.0):
        self.mask = mask
        self.grid = grid = mask.grid
        self.p = float(p)
        self.delta = float(delta)
        self.vol = grid.cell_volume
        h = grid.spacing
        self.flat = np.flatnonzero(mask.inside.ravel())
        self.n = len(self.flat)
        col = -np.ones(mask.inside.size, dtype=np.int64)
        col[self.flat] = np.arange(self.n)
        col = col.reshape(grid.shape)
        base_shape = tuple(s + 1 for s in grid.shape)
        self.base_shape = base_shape
        idx = np.argwhere(mask.inside)
        self.D = []
        for axis in range(grid.dim):
            rows, cols, vals = [], [], []
            # link from cell k (inside) to k + e_axis: -1/h on its base row
            rows.append(np.ravel_multi_index(tuple((idx + 1).T), base_shape))
            cols.append(col[tuple(idx.T)])
            vals.append(np.full(len(idx), -1.0 / h))
            # link from k - e_axis to k: +1/h
            prev = idx.copy()
            prev[:, axis] -= 1
            rows.append(np.ravel_multi_index(tuple((prev + 1).T), base_shape))
            cols.append(col[tuple(idx.T)])
            vals.append(np.full(len(idx), 1.0 / h))
            m = sp.csr_matrix(
                (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                shape=(int(np.prod(base_shape)), self.n),
            )
            self.D.append(m)
        self.lap = sum(d.T @ d for d in self.D).tocsc()
        self.potential = None if potential is None else potential.ravel()[self.flat]
        self._lu = None

    def full(self, x: np.ndarray) -> np.ndarray:
        out = np.zeros(self.mask.inside.size)
        out[self.flat] = x
        return out.reshape(self.grid.shape)

    def restrict(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values, dtype=float).ravel()[self.flat]

    def energy_grad(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        p, vol = self.p, self.vol
        if p == 2 and not self.delta:
            ax = self.lap @ x
            energy = vol * float(x @ ax)
            grad = 2 * vol * ax
        else:
            g = [d @ x for d in self.D]
            g2 = sum(gi * gi for gi in g)
            if self.delta:
                g2 = g2 + self.delta**2
            energy = vol * float(np.sum(g2 ** (p / 2)))
            with np.errstate(divide="ignore", invalid="ignore"):
                w = p * g2 ** ((p - 2) / 2)
            w[g2 == 0] = 0.0
            grad = vol * sum(d.T @ (w * gi) for d, gi in zip(self.D, g))
        if self.potential is not None:
            ax = np.abs(x)
            energy += vol * float(np.sum(self.potential * ax**p))
            grad = grad + vol * p * self.potential * ax ** (p - 1) * np.sign(x)
        return energy, grad

    def lq(self, x: np.ndarray, q: float) -> float:
        peak = float(np.max(np.abs(x))) if self.n else 0.0
        if peak == 0.0:
            return 0.0
        if math.isinf(q):
            return peak
        return peak * (float(np.sum((np.abs(x) / peak) ** q)) * self.vol) ** (1 / q)

    def preconditioner(self, x: np.ndarray):
        """Callable applying the inverse of a Laplacian-type operator."""
        p, vol = self.p, self.vol
        if p == 2 and not self.delta:
            if self._lu is None:
                mat = self.lap
                if self.potential is not None:
                    mat = mat + sp.diags(self.potential)
                self._lu = splu((2 * vol * mat).tocsc())
            return self._lu.solve
        return splu(_weighted_matrix(self, x)).solve


def _confinement(grid: Grid, n: int | None) -> np.ndarray | None:
    if n is None:
        return None
    if n < 0:
        raise ValueError("confinement index must be nonnegative")
    return grid.radius() / (n + 1)


def rayleigh(u: GridFunction, cfg: ProblemConfig) -> float:
    """Quotient ``(int |grad u|^p + int V_n |u|^p) / ||u||_q^p``."""
    denom = lq_norm(u, cfg.q)
    if denom == 0:
        raise ValueError("Rayleigh quotient of the zero function")
    num = gradient_pnorm(u, cfg.p, cfg.solver.delta)
    if cfg.confinement_n is not None:
        num += weighted_pnorm(u, cfg.p, 1.0) / (cfg.confinement_n + 1)
    return num / denom**cfg.p


# --- fields ----------------------------------------------------------------


def embed(u: GridFunction | np.ndarray, source: Grid | None, grid: Grid, mask: DomainMask) -> np.ndarray:
    """Copy values onto another grid with the same spacing, matching cell centres.

    Cells absent from the source are zero; cells outside ``mask`` are cleared.
    """
    if isinstance(u, GridFunction):
        source, vals = u.grid, u.values
    else:
        vals = np.asarray(u, dtype=float)
        if source is None:
            source = grid
    if not math.isclose(source.spacing, grid.spacing, rel_tol=1e-12):
        raise ValueError("warm starts need equal spacings")
    out = np.zeros(grid.shape)
    src, dst = [], []
    for ms, md in zip(source.half_counts, grid.half_counts):
        k = min(ms, md)
        src.append(slice(ms - k, ms + k + 1))
        dst.append(slice(md - k, md + k + 1))
    out[tuple(dst)] = vals[tuple(src)]
    return np.where(mask.inside, np.maximum(out, 0.0), 0.0)


def _bump_init(mask: DomainMask) -> np.ndarray:
    grid = mask.grid
    vals = np.where(mask.inside, np.exp(-grid.radius()), 0.0)
    if mask.validated:
        vals = full_symmetrize(GridFunction(grid, vals, mask)).values
    return vals


def _ground_mode_init(disc: _Discretization, its: int = 30) -> np.ndarray:
    """Approximate Laplacian ground mode, tilted along axis 0.

    The tilt breaks the reflection symmetry of domains such as the pinched
    slab, whose truncated minimisers otherwise sit on an unstable symmetric
    configuration.
    """
    lu = splu(disc.lap.tocsc())
    x = np.ones(disc.n)
    for _ in range(its):
        x = lu.solve(x)
        x /= np.max(np.abs(x))
    x = np.abs(x)
    grid = disc.grid
    L = grid.half_extent[0]
    tilt = 1.0 + 0.25 * grid.mesh()[0] / L
    return disc.full(x) * tilt


def _random_init(mask: DomainMask, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return np.where(mask.inside, rng.uniform(0.1, 1.0, mask.grid.shape), 0.0)


def prepare_mask(cfg: ProblemConfig) -> DomainMask:
    return validate_steiner(realize_domain(cfg.domain, cfg.grid()))


def _ball_floor(u: GridFunction, mask: DomainMask) -> float:
    grid = mask.grid
    r = inradius(mask) / (3 * math.sqrt(grid.dim))
    sel = (grid.radius() <= r) & mask.inside
    if not sel.any():
        sel = np.zeros(grid.shape, bool)
        sel[grid.origin_index] = True
    return float(np.min(u.values[sel]))


def _start_values(cfg, mask, disc, init, seed) -> np.ndarray:
    if init is None:
        return _bump_init(mask) if mask.validated else _ground_mode_init(disc)
    if isinstance(init, str):
        if init == "random":
            return _random_init(mask, seed)
        if init == "bump":
            return _bump_init(mask)
        if init == "ground":
            return _ground_mode_init(disc)
        raise ValueError(f"unknown initialisation {init!r}")
    return embed(init, None, mask.grid, mask)


# --- finite q ----------------------------------------------------------------


def solve_extremal(
    cfg: ProblemConfig,
    init=None,
    mask: DomainMask | None = None,
    seed: int = 0,
    internal: bool = False,
) -> SolveResult:
    """Minimise the Rayleigh quotient for finite ``q``.

    Parameters
    ----------
    cfg : ProblemConfig
        Problem definition; ``q`` must be finite.
    init : None, str, GridFunction or array, optional
        Starting field. ``None`` picks a symmetrized bump on validated
        Steiner masks and a tilted Laplacian ground mode otherwise;
        ``"random"`` uses ``seed``. Fields on other grids with the same
        spacing are embedded by cell centre.
    mask : DomainMask, optional
        Precomputed mask matching ``cfg.grid()``.
    internal : bool
        Allow ``q = p`` on unbounded domains (eigenvalue path).

    Returns
    -------
    SolveResult
        ``converged`` is False when ``max_iter`` ran out; the best iterate is
        returned either way.
    """
    if math.isinf(cfg.q):
        raise InfeasibleProblem("q = inf is the point-constrained problem; use solve_linfty")
    check_feasible(cfg.dim, cfg.p, cfg.q, cfg.bounded, internal)
    if mask is None:
        mask = prepare_mask(cfg)
    if not mask.validated:
        log.warning("domain %s is not Steiner symmetric on this grid; symmetrization disabled", cfg.domain.name)
    grid = mask.grid
    opts = cfg.solver
    p, q = float(cfg.p), float(cfg.q)
    disc = _Discretization(mask, p, _confinement(grid, cfg.confinement_n), opts.delta)
    vol = disc.vol

    x = disc.restrict(_start_values(cfg, mask, disc, init, seed))
    x = np.maximum(x, 0.0)
    if not np.any(x > 0):
        raise ValueError("initial field vanishes on the domain")
    x /= disc.lq(x, q)

    def quotient(y):
        e, g = disc.energy_grad(y)
        return e, g

    energy, grad_e = quotient(x)
    history = [energy]
    residuals = []
    step = 1.0
    converged = False
    it = 0
    residual = math.inf
    while it < opts.max_iter:
        it += 1
        grad = grad_e - p * energy * vol * x ** (q - 1)
        apply_inv = disc.preconditioner(x)
        z = apply_inv(grad)
        slope = float(grad @ z)
        residual = math.sqrt(max(slope, 0.0))
        residuals.append(residual)
        if slope <= 0 or residual <= 1e-14 * max(energy, 1.0):
            converged = True
            break
        def attempt(t):
            trial = np.maximum(x - t * z, 0.0)
            nrm = disc.lq(trial, q)
            if nrm == 0:
                return None
            trial /= nrm
            return (t, trial) + quotient(trial)

        found = _line_search(attempt, energy, slope, step, opts)
        if found is None:
            # no descent along the preconditioned direction at machine precision
            converged = True
            break
        t, trial, e_t, g_t = found
        step = t
        x, energy, grad_e = trial, e_t, g_t
        if mask.validated and opts.k_sym and it % opts.k_sym == 0:
            s = disc.restrict(full_symmetrize(GridFunction(grid, disc.full(x), mask)).values)
            e_s, g_s = quotient(s)
            if e_s <= energy:
                x, energy, grad_e = s, e_s, g_s
        history.append(energy)
        if len(history) > opts.window:
            old = history[-1 - opts.window]
            if (old - energy) <= opts.tol * abs(energy):
                converged = True
                break

    u = GridFunction(grid, disc.full(x), mask)
    return SolveResult(
        lambda_est=float(energy),
        u=u,
        residual=float(residual),
        iterations=it,
        argmax=u.argmax(),
        sup=u.sup(),
        ball_floor=_ball_floor(u, mask),
        energy_history=tuple(history),
        residual_history=tuple(residuals),
        converged=converged,
        p=p,
        q=q,
        confinement_n=cfg.confinement_n,
    )


def _line_search(attempt, energy, slope, t0, opts):
    """Armijo search from ``t0``: expand while the value keeps dropping, else halve.

    ``attempt(t)`` returns ``(t, point, value, gradient)`` or ``None`` for an
    inadmissible step.
    """

    def ok(res):
        return res is not None and res[2] <= energy - opts.armijo * res[0] * slope

    t = min(t0, opts.max_step)
    best = attempt(t)
    if ok(best):
        while 2 * best[0] <= opts.max_step:
            nxt = attempt(2 * best[0])
            if not ok(nxt) or nxt[2] >= best[2]:
                break
            best = nxt
        return best
    while t > 1e-14:
        t *= 0.5
        res = attempt(t)
        if ok(res):
            return res
    return None


# --- q = inf -------------------------------------------------------------


def solve_linfty(cfg: ProblemConfig, init=None, mask: DomainMask | None = None, seed: int = 0) -> SolveResult:
    """Minimise ``int |grad u|^p`` subject to ``u(0) = 1``; requires ``p > N``.

    The returned constant is the minimal energy divided by ``sup u ^ p``;
    ``sym_violation`` is set if the maximum exceeds the pinned value.
    """
    check_feasible(cfg.dim, cfg.p, math.inf)
    if mask is None:
        mask = prepare_mask(cfg)
    grid = mask.grid
    origin = grid.origin_index
    if not mask.inside[origin]:
        raise ValueError("the origin must lie in the domain")
    if not mask.validated:
        log.warning("domain %s is not Steiner symmetric; the pinned maximum may be misplaced", cfg.domain.name)
    opts = cfg.solver
    p = float(cfg.p)
    disc = _Discretization(mask, p, _confinement(grid, cfg.confinement_n), opts.delta)
    pin = int(np.searchsorted(disc.flat, np.ravel_multi_index(origin, grid.shape)))
    free = np.ones(disc.n, bool)
    free[pin] = False

    if init is None:
        x = disc.restrict(_bump_init(mask))
    else:
        x = disc.restrict(_start_values(cfg, mask, disc, init, seed))
    x = np.maximum(x, 0.0)
    x[pin] = 1.0

    energy, grad = disc.energy_grad(x)
    history = [energy]
    residuals = []
    step = 1.0
    converged = False
    it = 0
    residual = math.inf
    linear = p == 2 and not opts.delta
    lu = None
    while it < opts.max_iter:
        it += 1
        if linear:
            if lu is None:
                mat = disc.lap
                if disc.potential is not None:
                    mat = mat + sp.diags(disc.potential)
                sub = (2 * disc.vol * mat).tocsc()[free][:, free]
                lu = splu(sub.tocsc())
            solve = lu.solve
        else:
            mat = _weighted_matrix(disc, x)
            solve = splu(mat[free][:, free].tocsc()).solve
        g = grad[free]
        z = np.zeros(disc.n)
        z[free] = solve(g)
        slope = float(g @ z[free])
        residual = math.sqrt(max(slope, 0.0))
        residuals.append(residual)
        if slope <= 0 or residual <= 1e-14 * max(energy, 1.0):
            converged = True
            break
        def attempt(t):
            trial = np.maximum(x - t * z, 0.0)
            trial[pin] = 1.0
            return (t, trial) + disc.energy_grad(trial)

        found = _line_search(attempt, energy, slope, 1.0 if linear else step, opts)
        if found is None:
            converged = True
            break
        t, trial, e_t, g_t = found
        step = t
        x, energy, grad = trial, e_t, g_t
        history.append(energy)
        if len(history) > opts.window and (history[-1 - opts.window] - energy) <= opts.tol * abs(energy):
            converged = True
            break

    sup = float(np.max(x))
    u = GridFunction(grid, disc.full(x), mask)
    return SolveResult(
        lambda_est=float(energy / sup**p),
        u=u,
        residual=float(residual),
        iterations=it,
        argmax=u.argmax(),
        sup=sup,
        ball_floor=_ball_floor(u, mask),
        energy_history=tuple(history),
        residual_history=tuple(residuals),
        converged=converged,
        p=p,
        q=math.inf,
        confinement_n=cfg.confinement_n,
        sym_violation=bool(sup > 1.0 + 1e-9),
    )


def _weighted_matrix(disc: _Discretization, x: np.ndarray) -> sp.csc_matrix:
    """Second-variation proxy of the ``p``-energy at ``x`` (lagged diffusivity)."""
    p, vol = disc.p, disc.vol
    g = [d @ x for d in disc.D]
    g2 = sum(gi * gi for gi in g) + disc.delta**2
    pos = g2[g2 > 0]
    floor = (1e-3 * math.sqrt(float(np.mean(pos)))) ** 2 if pos.size else 1e-12
    w = (g2 + max(floor, 1e-12)) ** ((p - 2) / 2)
    c = p * (p - 1) if p >= 2 else p
    mat = c * vol * sum(d.T @ sp.diags(w) @ d for d in disc.D)
    if disc.potential is not None:
        mat = mat + sp.diags(c * vol * disc.potential * (np.abs(x) + 1e-3) ** (p - 2))
    return mat.tocsc()


# --- sweeps ------------------------------------------------------------------


@dataclass(frozen=True)
class ConfinementSweep:
    """Confined constants ``(n, lambda_n, result)`` and the unconfined reference."""

    entries: tuple[tuple[int, float, SolveResult], ...]
    unconfined: SolveResult | None
    slack: float

    @property
    def lambdas(self) -> list[float]:
        return [lam for _, lam, _ in self.entries]

    @property
    def monotone(self) -> bool:
        lam = self.lambdas
        return all(b <= a * (1 + self.slack) for a, b in zip(lam, lam[1:]))

    @property
    def floor_min(self) -> float:
        return min(r.ball_floor for _, _, r in self.entries)


def confinement_sweep(
    cfg: ProblemConfig,
    n_schedule: Sequence[int],
    slack: float = 1e-6,
    unconfined: bool = True,
    init=None,
) -> ConfinementSweep:
    """Solve the confined problems along an increasing schedule with warm starts."""
    sched = [int(n) for n in n_schedule]
    if any(b <= a for a, b in zip(sched, sched[1:])) or any(n < 0 for n in sched):
        raise ValueError("confinement schedule must be increasing nonnegative integers")
    mask = prepare_mask(cfg)
    entries = []
    start = init
    for n in sched:
        res = solve_extremal(cfg.with_(confinement_n=n), init=start, mask=mask)
        entries.append((n, res.lambda_est, res))
        start = res.u
    ref = solve_extremal(cfg.with_(confinement_n=None), init=start, mask=mask) if unconfined else None
    return ConfinementSweep(tuple(entries), ref, slack)


def aitken(values: Sequence[float]) -> float:
    """Aitken's delta-squared extrapolation of the last three values."""
    if len(values) < 3:
        return float(values[-1])
    a, b, c = values[-3:]
    den = (c - b) - (b - a)
    if den == 0 or not math.isfinite(den):
        return float(c)
    lim = c - (c - b) ** 2 / den
    # a non-geometric tail can send the formula far off; fall back to the last value
    if not min(a, b, c) - abs(a - c) <= lim <= max(a, b, c) + abs(a - c):
        return float(c)
    return float(lim)


@dataclass(frozen=True)
class BoxSweep:
    entries: tuple[tuple[float, float, SolveResult], ...]
    slack: float

    @property
    def lambdas(self) -> list[float]:
        return [lam for _, lam, _ in self.entries]

    @property
    def monotone(self) -> bool:
        lam = self.lambdas
        return all(b <= a * (1 + self.slack) for a, b in zip(lam, lam[1:]))

    @property
    def extrapolated(self) -> float:
        return aitken(self.lambdas)


def box_sweep(cfg: ProblemConfig, L_schedule: Sequence[float], slack: float = 1e-6) -> BoxSweep:
    """Solve on growing truncation boxes, warm-starting each from the last."""
    sched = [float(v) for v in L_schedule]
    if len(sched) < 2:
        raise ValueError("a box sweep needs at least two truncation sizes")
    if any(b <= a for a, b in zip(sched, sched[1:])):
        raise ValueError("truncation sizes must increase")
    entries = []
    prev = None
    for L in sched:
        c = cfg.with_(half_extent=L)
        res = solve_extremal(c, init=prev)
        entries.append((L, res.lambda_est, res))
        prev = res.u
    return BoxSweep(tuple(entries), slack)


def w1p_distance(u: GridFunction, v: GridFunction, p: float) -> float:
    """``(||u - v||_p^p + ||grad(u - v)||_p^p)^(1/p)``."""
    d = u - v
    return (lq_norm(d, p) ** p + gradient_pnorm(d, p)) ** (1 / p)


@dataclass(frozen=True)
class QSweep:
    """``(q, lambda_q, u_q, ||u_q - u_inf||_{W^{1,p}})`` and the limit problem."""

    entries: tuple[tuple[float, float, SolveResult, float], ...]
    limit: SolveResult

    @property
    def distances(self) -> list[float]:
        return [d for *_, d in self.entries]

    @property
    def distances_decreasing(self) -> bool:
        d = self.distances
        return all(b < a for a, b in zip(d, d[1:]))

    @property
    def gaps(self) -> list[float]:
        return [abs(lam - self.limit.lambda_est) for _, lam, _, _ in self.entries]


def q_sweep(cfg: ProblemConfig, q_schedule: Sequence[float]) -> QSweep:
    """Solve for each finite ``q`` and compare with the point-constrained extremal."""
    if not cfg.p > cfg.dim:
        raise InfeasibleProblem("the q -> inf limit needs p > N")
    sched = [float(q) for q in q_schedule]
    if any(b <= a for a, b in zip(sched, sched[1:])):
        raise ValueError("q schedule must increase")
    mask = prepare_mask(cfg)
    limit = solve_linfty(cfg.with_(q=math.inf), mask=mask)
    entries = []
    prev = None
    for q in sched:
        res = solve_extremal(cfg.with_(q=q), init=prev, mask=mask)
        entries.append((q, res.lambda_est, res, w1p_distance(res.u, limit.u, cfg.p)))
        prev = res.u
    return QSweep(tuple(entries), limit)


@dataclass(frozen=True)
class DriftReport:
    """Per truncation: ``(L, argmax point, distance along axis 0, lambda)``."""

    entries: tuple[tuple[float, tuple[float, ...], float, float], ...]
    steiner_valid: bool

    @property
    def distances(self) -> list[float]:
        return [d for _, _, d, _ in self.entries]

    @property
    def drifting(self) -> bool:
        d = self.distances
        return all(b > a for a, b in zip(d, d[1:]))

    @property
    def lambdas(self) -> list[float]:
        return [lam for *_, lam in self.entries]


def drift_test(cfg: ProblemConfig, L_schedule: Sequence[float]) -> DriftReport:
    """Track where truncated minimisers peak as the box grows.

    Mass escaping along axis 0 (distance strictly increasing with ``L``)
    signals that the infimum on the untruncated domain is not attained.
    """
    sched = [float(v) for v in L_schedule]
    if len(sched) < 3:
        raise ValueError("a drift test needs at least three truncation sizes to show a trend")
    entries = []
    valid = True
    for L in sched:
        c = cfg.with_(half_extent=L)
        mask = prepare_mask(c)
        valid = valid and mask.validated
        res = solve_extremal(c, mask=mask)
        entries.append((L, res.argmax, abs(res.argmax[0]), res.lambda_est))
    return DriftReport(tuple(entries), valid)
