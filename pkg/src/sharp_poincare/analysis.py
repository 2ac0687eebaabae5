"""Quantitative checks on computed constants and extremals.

Covers the concave-power subadditivity bound, the interpolation inequality
ratio, the power-law equivalence of constants, inradius and ball-scaling
laws, and the tail-mass machinery behind exponential decay of extremals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import AxisClass, DomainMask, DomainSpec, InfinityProfile, inradius, section_inradius
from .grid import GridFunction, gradient_pnorm, lq_norm
from .solver import InfeasibleProblem, ProblemConfig, SolveResult, check_feasible, solve_extremal

__all__ = [
    "subadditivity_check",
    "subadditivity_violations",
    "gns_check",
    "Band",
    "equivalence_exponent",
    "equivalence_band",
    "inradius_bound_check",
    "scaling_exponent",
    "scaling_check",
    "confinement_upper_bound",
    "linf_shape_ratio",
    "DecayConstants",
    "decay_constants",
    "TailUnresolved",
    "DecayReport",
    "tail_report",
    "AxisVerdict",
    "directional_profile_check",
]


# --- elementary inequalities ----------------------------------------------


def subadditivity_check(alpha: float, A: float, B: float) -> tuple[float, float]:
    """Both sides of ``(A+B)^a <= A^a + B^a - (1-a)/2^(a+1) min(A^a, B^a)``.

    >>> lhs, rhs = subadditivity_check(0.5, 4.0, 1.0)
    >>> round(lhs, 4), round(rhs, 4)
    (2.2361, 2.8232)
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if not (A > 0 and B > 0):
        raise ValueError("A and B must be positive")
    a, b = A**alpha, B**alpha
    lhs = (A + B) ** alpha
    rhs = a + b - (1 - alpha) / 2 ** (alpha + 1) * min(a, b)
    return lhs, rhs


def subadditivity_violations(samples: int, seed: int = 0) -> int:
    """Count failures of the bound over random ``(alpha, A, B)``.

    ``A`` and ``B`` are log-uniform over twelve decades so that both the
    balanced and the lopsided regimes are sampled.
    """
    rng = np.random.default_rng(seed)
    alpha = rng.uniform(0.0, 1.0, samples)
    alpha = np.where(alpha == 0.0, 0.5, alpha)
    A = 10.0 ** rng.uniform(-6, 6, samples)
    B = 10.0 ** rng.uniform(-6, 6, samples)
    a, b = A**alpha, B**alpha
    lhs = (A + B) ** alpha
    rhs = a + b - (1 - alpha) / 2 ** (alpha + 1) * np.minimum(a, b)
    return int(np.count_nonzero(lhs > rhs))


def gns_check(psi: GridFunction, p: float, r: float) -> tuple[float, float]:
    """Return ``(ratio, theta)`` with ``theta = N/p - N/r`` and
    ``ratio = ||psi||_r / (||grad psi||_p^theta ||psi||_p^(1-theta))``.
    """
    dim = psi.grid.dim
    if r != p:
        check_feasible(dim, p, r, internal=True)
    elif not p > 1:
        raise InfeasibleProblem("p must exceed 1")
    norm_p = lq_norm(psi, p)
    if norm_p == 0:
        raise ValueError("interpolation ratio of the zero function")
    theta = dim / p - (0.0 if math.isinf(r) else dim / r)
    grad_p = gradient_pnorm(psi, p) ** (1 / p)
    ratio = lq_norm(psi, r) / (grad_p**theta * norm_p ** (1 - theta))
    return float(ratio), float(theta)


# --- constant comparisons -------------------------------------------------


def equivalence_exponent(dim: int, p: float, q: float) -> float:
    return 1 - dim / p + dim / q


@dataclass(frozen=True)
class Band:
    """Range of ``lambda_pq / lambda_p^exponent`` over a family of domains."""

    exponent: float
    ratios: tuple[float, ...]

    @property
    def low(self) -> float:
        return min(self.ratios)

    @property
    def high(self) -> float:
        return max(self.ratios)

    @property
    def width(self) -> float:
        return self.high / self.low


def equivalence_band(pairs: Sequence[tuple[float, float]], dim: int, p: float, q: float) -> Band:
    """Band of normalised constants from ``(lambda_pq, lambda_p)`` pairs."""
    if len(pairs) < 3:
        raise ValueError("an equivalence band needs at least three instances")
    e = equivalence_exponent(dim, p, q)
    ratios = []
    for lam, lam_p in pairs:
        if not (lam > 0 and lam_p > 0 and math.isfinite(lam) and math.isfinite(lam_p)):
            raise ValueError(f"degenerate instance ({lam}, {lam_p})")
        ratios.append(lam / lam_p**e)
    return Band(e, tuple(ratios))


def inradius_bound_check(result: SolveResult, mask: DomainMask | None = None) -> float:
    """``lambda * r^(p - N + N p / q)``, bounded below for every domain."""
    mask = result.mask if mask is None else mask
    if mask.inside.all():
        raise ValueError("the mask fills the box; the inradius is not resolved")
    dim, p, q = mask.grid.dim, result.p, result.q
    expo = p - dim + (0.0 if math.isinf(q) else dim * p / q)
    return float(result.lambda_est * inradius(mask) ** expo)


def scaling_exponent(dim: int, p: float, q: float) -> float:
    return dim - p - (0.0 if math.isinf(q) else p * dim / q)


def scaling_check(
    p: float, q: float, dim: int, r: float, spacing: float, solver=None
) -> tuple[float, float]:
    """Predicted and measured ``lambda(B_r) / lambda(B_1)`` on a common spacing."""
    kw = {} if solver is None else {"solver": solver}
    lams = []
    for radius in (1.0, float(r)):
        spec = DomainSpec("ball", {"radius": radius})
        res = solve_extremal(ProblemConfig(dim, p, q, spec, spacing, radius + 1.0, **kw))
        lams.append(res.lambda_est)
    return float(r) ** scaling_exponent(dim, p, q), lams[1] / lams[0]


def unit_ball_volume(dim: int) -> float:
    return math.pi ** (dim / 2) / math.gamma(dim / 2 + 1)


def confinement_upper_bound(dim: int, p: float, q: float, r: float, n: int, lambda_unit_ball: float) -> float:
    """Upper bound for the confined constant of a domain containing ``B_r``.

    Obtained by testing the confined quotient with the rescaled unit-ball
    extremal; the second term bounds the confinement contribution.
    """
    if not q > p:
        raise ValueError("the bound needs q > p")
    w = dim * unit_ball_volume(dim)
    term = (w / (dim + q / (q - p))) ** ((q - p) / q) * r ** (dim + 1 - p * dim / q)
    return r ** scaling_exponent(dim, p, q) * lambda_unit_ball + term / (n + 1)


def linf_shape_ratio(result: SolveResult) -> float:
    """``sup u / lambda^(N / (p q - (q - p) N))``; bounded over a domain-size sweep."""
    dim, p, q = result.mask.grid.dim, result.p, result.q
    den = p * q - (q - p) * dim
    if den <= 0:
        raise ValueError("exponent undefined for these (N, p, q)")
    return result.sup / result.lambda_est ** (dim / den)


# --- decay -------------------------------------------------------------------


@dataclass(frozen=True)
class DecayConstants:
    """Constants of the tail-mass recursion ``A(R+1) <= K/(K+1) A(R)``."""

    p: float
    q: float
    lambda_p: float
    lambda_pq: float
    C7: float
    eps_threshold: float
    K: float
    a: float

    @property
    def contraction(self) -> float:
        return self.K / (self.K + 1)

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in ("p", "q", "lambda_p", "lambda_pq", "C7", "eps_threshold", "K", "a")}


def decay_constants(p: float, q: float, lambda_p: float, lambda_pq: float) -> DecayConstants:
    """Evaluate the explicit decay constants.

    >>> c = decay_constants(2.0, 4.0, math.pi ** 2 / 4, 5.0)
    >>> c.C7, round(c.K, 2), round(c.a, 5)
    (96.0, 78.81, 0.00315)
    """
    if not (math.isfinite(q) and q > p):
        raise ValueError("decay constants need a finite q > p")
    if not lambda_p > 0 or not lambda_pq > 0:
        raise ValueError("constants must be positive")
    c7 = 4.0**p * (p * (q - p + 1)) ** (p - 1)
    try:
        eps = (lambda_p / (2 * c7 * lambda_pq)) ** (1 / (q - p))
    except OverflowError:  # base > 1 with q close to p: the threshold never binds
        eps = math.inf
    K = 1 + 2 * c7 / lambda_p
    a = math.log((K + 1) / K) / q
    return DecayConstants(float(p), float(q), float(lambda_p), float(lambda_pq), c7, eps, K, a)


class TailUnresolved(RuntimeError):
    """The truncation box is too small for the tail to fall below threshold."""


def _fit_rate(t: np.ndarray, v: np.ndarray) -> float:
    if len(t) < 2:
        return math.nan
    slope, _ = np.polyfit(t, -np.log(v), 1)
    return float(slope)


@dataclass(frozen=True)
class DecayReport:
    """Tail masses, tail maxima and fitted exponential rates of an extremal.

    ``tail_mass`` holds ``(R, int_{|x| >= R} u^q)`` and ``tail_sup`` holds
    ``(R, max_{|x| >= R} u)`` on integer ``R``. ``sup_ratios`` holds
    ``(R, tail_sup(R+1) / ||u||_{L^q(|x| >= R)})``. ``fitted_rate`` maps
    each truncated axis to the slope of ``-log u(t e_i)``.
    """

    constants: DecayConstants
    r0: int
    tail_mass: tuple[tuple[int, float], ...]
    tail_sup: tuple[tuple[int, float], ...]
    recursion_pass: bool
    recursion_failures: tuple[int, ...]
    fitted_rate: dict
    sup_ratios: tuple[tuple[int, float], ...]

    @property
    def rate_pass(self) -> bool:
        return all(r >= self.constants.a for r in self.fitted_rate.values())

    @property
    def monotone(self) -> bool:
        A = [v for _, v in self.tail_mass]
        S = [v for _, v in self.tail_sup]
        return all(b <= a for a, b in zip(A, A[1:])) and all(b <= a for a, b in zip(S, S[1:]))

    def to_json(self) -> dict:
        return {
            "constants": self.constants.to_json(),
            "r0": self.r0,
            "recursion_pass": self.recursion_pass,
            "recursion_failures": list(self.recursion_failures),
            "fitted_rate": {str(k): v for k, v in self.fitted_rate.items()},
            "rate_pass": self.rate_pass,
            "monotone": self.monotone,
            "sup_ratio_max": max((r for _, r in self.sup_ratios), default=0.0),
        }


def tail_report(u: GridFunction, q: float, constants: DecayConstants, mask: DomainMask | None = None) -> DecayReport:
    """Tail-mass recursion, tail maxima and exponential fits for an extremal.

    Raises
    ------
    TailUnresolved
        If the domain is truncated by the box and ``u`` still exceeds the
        threshold at half the truncation size.
    """
    mask = u.mask if mask is None else mask
    grid = u.grid
    radius = grid.radius()
    vals = u.values
    vol = grid.cell_volume
    truncated = [a for a in range(grid.dim) if mask.touches_box(a)]
    rmax = int(math.floor(radius[mask.inside].max())) + 1
    Rs = np.arange(0, rmax + 1)
    mass, sup = [], []
    for R in Rs:
        sel = radius >= R
        mass.append(math.fsum((vals[sel] ** q).ravel()) * vol)
        sup.append(float(vals[sel].max()) if sel.any() else 0.0)
    eps = constants.eps_threshold
    if truncated:
        L = min(grid.half_extent[a] for a in truncated)
        half = radius >= L / 2
        if float(vals[half].max(initial=0.0)) > eps:
            raise TailUnresolved(
                f"max of u beyond |x| = {L / 2:g} exceeds the threshold {eps:.3g}; enlarge the box"
            )
    below = [R for R, s in zip(Rs, sup) if s <= eps]
    if not below:
        raise TailUnresolved("the tail never falls below the threshold")
    r0 = int(below[0])
    k = constants.contraction
    failures = tuple(int(R) for R in Rs[:-1] if R >= r0 and mass[R + 1] > k * mass[R])
    ratios = []
    for R in Rs[:-1]:
        denom = mass[R] ** (1 / q)
        if denom > 0:
            ratios.append((int(R), sup[R + 1] / denom))
    rates = {}
    tiny = 100 * np.finfo(float).eps
    for a in truncated:
        line_idx = list(grid.origin_index)
        line_idx[a] = slice(grid.half_counts[a], None)
        line = vals[tuple(line_idx)]
        t = grid.coords(a)[grid.half_counts[a]:]
        # stay one unit clear of the truncation face, where the zero exterior bends the profile
        keep = (t >= r0 + 1) & (line > tiny) & (t <= grid.half_extent[a] - 1)
        if keep.any():
            last = np.flatnonzero(keep)[-1]
            keep[last + 1:] = False
        rates[a] = _fit_rate(t[keep], line[keep])
    return DecayReport(
        constants=constants,
        r0=r0,
        tail_mass=tuple((int(R), float(m)) for R, m in zip(Rs, mass)),
        tail_sup=tuple((int(R), float(s)) for R, s in zip(Rs, sup)),
        recursion_pass=not failures,
        recursion_failures=failures,
        fitted_rate=rates,
        sup_ratios=tuple(ratios),
    )


@dataclass(frozen=True)
class AxisVerdict:
    """Outcome of the per-axis decay check; ``data`` holds the sampled evidence."""

    axis: int
    cls: AxisClass
    passed: bool
    data: tuple

    def to_json(self) -> dict:
        return {"axis": self.axis, "class": self.cls.value, "passed": self.passed, "data": [list(d) for d in self.data]}


def directional_profile_check(
    u: GridFunction,
    profile: InfinityProfile,
    p: float,
    q: float,
    ratio_bound: float = 10.0,
) -> list[AxisVerdict]:
    """Check the decay mechanism of each axis against its class at infinity.

    * bounded axes: ``u(t e_i) = 0`` for ``|t| >= t_i``
    * shrinking axes: ``u((t+1) e_i) / r_i(t)^(p/q)`` stays within
      ``ratio_bound`` times its value at the first sample, for integer
      ``t`` in ``[2, L-2]``
    * tubular axes: an exponential fit of ``u(t e_i)`` has a positive rate
    """
    grid = u.grid
    mask = u.mask
    verdicts = []
    for axis, cls in enumerate(profile.classes):
        m = grid.half_counts[axis]
        line_idx = list(grid.origin_index)
        line_idx[axis] = slice(None)
        line = u.values[tuple(line_idx)]
        t = grid.coords(axis)
        if cls is AxisClass.BOUNDED:
            beyond = np.abs(t) >= profile.witness[axis] - 1e-12
            verdicts.append(AxisVerdict(axis, cls, bool(np.all(line[beyond] == 0)), tuple(zip(t[beyond], line[beyond]))))
        elif cls is AxisClass.SHRINKING:
            L = grid.half_extent[axis]
            data = []
            for tt in range(2, int(math.floor(L - 2)) + 1):
                r = section_inradius(mask, axis, float(tt))
                k = m + int(round((tt + 1) / grid.spacing))
                if r <= 0 or k >= len(line):
                    continue
                data.append((float(tt), float(line[k] / r ** (p / q))))
            ok = bool(data) and max(v for _, v in data) <= ratio_bound * max(data[0][1], 1e-300)
            verdicts.append(AxisVerdict(axis, cls, ok, tuple(data)))
        else:
            half = line[m:]
            tt = t[m:]
            keep = (half > 100 * np.finfo(float).eps) & (tt >= 1) & (tt <= grid.half_extent[axis] - 1)
            rate = _fit_rate(tt[keep], half[keep])
            verdicts.append(AxisVerdict(axis, cls, bool(rate > 0), ((float("nan"), rate),)))
    return verdicts
