"""Command-line front end.

Exit codes: 0 success, 2 configuration or feasibility error, 3 solver
non-convergence (or a failed sweep member), 4 unresolved tail.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import TailUnresolved, decay_constants, directional_profile_check, tail_report
from .geometry import (
    GALLERY,
    DomainSpec,
    InconclusiveClassification,
    classify_infinity,
    gallery_spec,
    inradius,
)
from .grid import load_field, save_field
from .solver import (
    InfeasibleProblem,
    ProblemConfig,
    SolverOptions,
    box_sweep,
    check_feasible,
    confinement_sweep,
    drift_test,
    prepare_mask,
    q_sweep,
    solve_extremal,
    solve_linfty,
)
from .symmetrization import full_symmetrize, rearrangement_report

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

log = logging.getLogger("sharp_poincare")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_TAIL = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


class SolverFailure(RuntimeError):
    pass


# --- serialisation -------------------------------------------------------------


def _num(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return format(x, ".17g")


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON with every float written to 17 significant digits and sorted keys."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in sorted(obj.items(), key=lambda kv: str(kv[0]))]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent, _level + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    if obj is None:
        return "null"
    if isinstance(obj, Path):
        return json.dumps(str(obj))
    return json.dumps(obj)


def write_json(path: Path, obj) -> Path:
    path.write_text(dumps(obj) + "\n")
    return path


def write_csv(path: Path, header: list[str], rows) -> Path:
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for v in row:
            if isinstance(v, (bool, np.bool_)):
                cells.append("true" if v else "false")
            elif isinstance(v, (float, np.floating)):
                cells.append(_num(v).strip('"'))
            else:
                cells.append(str(v))
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n")
    return path


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(out: Path, command: str, config_path, outputs, started: float) -> Path:
    manifest = {
        "command": command,
        "config_path": str(config_path) if config_path else None,
        "outputs": [{"path": p.name, "sha256": _sha256(p)} for p in outputs],
        "wall_time": time.perf_counter() - started,
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    return write_json(out / "manifest.json", manifest)


# --- configuration ---------------------------------------------------------


def _number(value, key: str) -> float:
    if isinstance(value, bool):
        raise ConfigError(f"{key}: expected a number")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        if value.strip().lower() in ("inf", "infinity"):
            return math.inf
        try:
            return float(Fraction(value.strip()))
        except (ValueError, ZeroDivisionError):
            pass
    raise ConfigError(f"{key}: cannot read {value!r} as a number")


def load_raw_config(path: Path) -> dict:
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if path.suffix.lower() == ".json" or text.lstrip().startswith("{"):
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: invalid TOML: {exc}") from exc


def _domain(raw) -> DomainSpec:
    try:
        if isinstance(raw, str):
            return gallery_spec(raw)
        if isinstance(raw, dict):
            return DomainSpec.from_json(raw)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"domain: {exc}") from exc
    raise ConfigError("domain must be a gallery name or a {family, params} table")


def build_config(raw: dict, tolerance: float | None = None) -> ProblemConfig:
    """Translate a parsed TOML/JSON document into a :class:`ProblemConfig`."""
    try:
        dim = int(raw.get("dim", raw.get("N")))
    except (TypeError, ValueError):
        raise ConfigError("dim (or N) is required") from None
    if dim < 1:
        raise ConfigError("dim must be positive")
    for key in ("p", "q"):
        if key not in raw:
            raise ConfigError(f"{key} is required")
    p, q = _number(raw["p"], "p"), _number(raw["q"], "q")
    h = raw.get("h", raw.get("spacing"))
    if h is None:
        raise ConfigError("h (grid spacing) is required")
    spacing = _number(h, "h")
    if not spacing > 0:
        raise ConfigError("h must be positive")
    if "domain" not in raw:
        raise ConfigError("domain is required")
    domain = _domain(raw["domain"])
    L = _number(raw.get("half_extent", raw.get("L", 8.0)), "half_extent")
    n = raw.get("confinement_n")
    solver_raw = dict(raw.get("solver", {}))
    known = {f.name for f in fields(SolverOptions)}
    unknown = set(solver_raw) - known
    if unknown:
        raise ConfigError(f"unknown solver options: {sorted(unknown)}")
    for k in ("tol", "delta", "armijo", "max_step"):
        if k in solver_raw:
            solver_raw[k] = _number(solver_raw[k], f"solver.{k}")
    for k in ("k_sym", "window", "max_iter"):
        if k in solver_raw:
            solver_raw[k] = int(solver_raw[k])
    if tolerance is not None:
        solver_raw["tol"] = tolerance
    try:
        return ProblemConfig(
            dim=dim,
            p=p,
            q=q,
            domain=domain,
            spacing=spacing,
            half_extent=L,
            confinement_n=None if n is None else int(n),
            solver=SolverOptions(**solver_raw),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def config_to_json(cfg: ProblemConfig) -> dict:
    return {
        "dim": cfg.dim,
        "p": cfg.p,
        "q": cfg.q,
        "h": cfg.spacing,
        "half_extent": cfg.half_extent,
        "confinement_n": cfg.confinement_n,
        "domain": cfg.domain.to_json(),
        "solver": {f.name: getattr(cfg.solver, f.name) for f in fields(SolverOptions)},
    }


def _read_config(args) -> tuple[dict, ProblemConfig]:
    if args.config is None:
        raise ConfigError("--config is required")
    raw = load_raw_config(Path(args.config))
    cfg = build_config(raw, args.tolerance)
    return raw, cfg


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# --- solve -------------------------------------------------------------------


def _init_choice(raw: dict, args):
    init = raw.get("init")
    if init in (None, "default"):
        return "random" if args.seed is not None else None
    return init


def run_solve(cfg: ProblemConfig, init=None, seed: int = 0):
    if math.isinf(cfg.q):
        check_feasible(cfg.dim, cfg.p, cfg.q)
        return solve_linfty(cfg, init=init, seed=seed)
    return solve_extremal(cfg, init=init, seed=seed)


def cmd_solve(args) -> int:
    started = time.perf_counter()
    raw, cfg = _read_config(args)
    check_feasible(cfg.dim, cfg.p, cfg.q, cfg.bounded)
    out = _out_dir(args)
    res = run_solve(cfg, _init_choice(raw, args), args.seed or 0)
    field = save_field(out / "extremal.csv", res.u)
    energy = write_csv(
        out / "energy.csv",
        ["iteration", "energy", "residual"],
        [(i, e, res.residual_history[i] if i < len(res.residual_history) else res.residual)
         for i, e in enumerate(res.energy_history)],
    )
    result = {"config": config_to_json(cfg), "field": field.name, **res.summary()}
    rpath = write_json(out / "result.json", result)
    write_manifest(out, "solve", args.config, [rpath, field, energy], started)
    print(f"lambda = {_num(res.lambda_est)}  iterations = {res.iterations}  converged = {res.converged}")
    if not res.converged:
        print("solver did not converge within max_iter", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


# --- sweep -------------------------------------------------------------------


def _flags_nonincreasing(values, slack):
    flags = [True]
    for a, b in zip(values, values[1:]):
        flags.append(b <= a * (1 + slack))
    return flags


def cmd_sweep(args) -> int:
    started = time.perf_counter()
    raw, cfg = _read_config(args)
    sweep = raw.get("sweep")
    if not isinstance(sweep, dict) or "kind" not in sweep or "schedule" not in sweep:
        raise ConfigError("a [sweep] table with kind and schedule is required")
    kind = sweep["kind"]
    schedule = list(sweep["schedule"])
    slack = _number(sweep.get("slack", 1e-6), "sweep.slack")
    out = _out_dir(args)
    path = out / "sweep.csv"
    rows, header, status = [], [], "complete"
    try:
        if kind == "confinement":
            header = ["n", "lambda", "ball_floor", "iterations", "converged", "nonincreasing"]
            res = confinement_sweep(cfg, [int(v) for v in schedule], slack)
            flags = _flags_nonincreasing(res.lambdas, slack)
            for (n, lam, r), f in zip(res.entries, flags):
                rows.append((n, lam, r.ball_floor, r.iterations, r.converged, f))
            if res.unconfined is not None:
                u = res.unconfined
                rows.append(("none", u.lambda_est, u.ball_floor, u.iterations, u.converged,
                             u.lambda_est <= res.lambdas[-1] * (1 + slack)))
            members = [r for *_, r in res.entries]
        elif kind == "box":
            header = ["L", "lambda", "argmax_0", "iterations", "converged", "nonincreasing"]
            res = box_sweep(cfg, [_number(v, "schedule") for v in schedule], slack)
            flags = _flags_nonincreasing(res.lambdas, slack)
            for (L, lam, r), f in zip(res.entries, flags):
                rows.append((L, lam, r.argmax[0], r.iterations, r.converged, f))
            rows.append(("extrapolated", res.extrapolated, "", "", "", ""))
            members = [r for *_, r in res.entries]
        elif kind == "q":
            header = ["q", "lambda", "w1p_distance", "argmax_0", "converged", "distance_decreasing"]
            res = q_sweep(cfg, [_number(v, "schedule") for v in schedule])
            d = res.distances
            dec = [True] + [b < a for a, b in zip(d, d[1:])]
            for (q, lam, r, dist), f in zip(res.entries, dec):
                rows.append((q, lam, dist, r.argmax[0], r.converged, f))
            rows.append(("inf", res.limit.lambda_est, 0.0, res.limit.argmax[0], res.limit.converged, ""))
            members = [r for _, _, r, _ in res.entries]
        else:
            raise ConfigError(f"unknown sweep kind {kind!r}; use confinement, box or q")
        if not all(r.converged for r in members):
            status = "incomplete"
    except (ConfigError, InfeasibleProblem):
        raise
    except Exception as exc:  # member failure: keep what we have
        log.error("sweep member failed: %s", exc)
        status = "incomplete"
    rows.append(("status", status) + ("",) * (len(header) - 2) if header else ("status", status))
    write_csv(path, header or ["key", "value"], rows)
    write_manifest(out, f"sweep:{kind}", args.config, [path], started)
    print(f"sweep {kind}: {len(rows) - 1} rows, {status}")
    return EXIT_OK if status == "complete" else EXIT_SOLVER


# --- gallery -----------------------------------------------------------------

_GALLERY_DIM = 2
_GALLERY_P, _GALLERY_Q = 2.0, 4.0


def gallery_report(name: str, spacing: float = 1 / 8, half_extent: float = 8.0,
                   drift_schedule=(8.0, 16.0, 32.0)) -> dict:
    """Validation, geometry and solve (or drift) summary for a named gallery domain."""
    spec = gallery_spec(name)
    cfg = ProblemConfig(_GALLERY_DIM, _GALLERY_P, _GALLERY_Q, spec, spacing, half_extent)
    mask = prepare_mask(cfg)
    report = {
        "name": name,
        "domain": spec.to_json(),
        "dim": _GALLERY_DIM,
        "p": _GALLERY_P,
        "q": _GALLERY_Q,
        "h": spacing,
        "steiner": mask.steiner.value,
        "violation_axis": None if mask.violation is None else mask.violation[0],
        "inradius": inradius(mask),
    }
    try:
        profile = classify_infinity(spec, _GALLERY_DIM)
        report["infinity"] = profile.to_json()
    except InconclusiveClassification as exc:
        profile = None
        report["infinity"] = {"error": str(exc)}
    if not mask.validated:
        drift = drift_test(cfg, drift_schedule)
        report["drift"] = {
            "L": [e[0] for e in drift.entries],
            "argmax": [list(e[1]) for e in drift.entries],
            "distance": drift.distances,
            "lambda": drift.lambdas,
            "drift_detected": drift.drifting,
        }
        return report
    res = solve_extremal(cfg, mask=mask)
    report["solve"] = res.summary()
    lam_p = solve_extremal(cfg.with_(q=cfg.p), mask=mask, internal=True).lambda_est
    consts = decay_constants(cfg.p, cfg.q, lam_p, res.lambda_est)
    try:
        report["decay"] = tail_report(res.u, cfg.q, consts).to_json()
    except TailUnresolved as exc:
        report["decay"] = {"error": str(exc), "constants": consts.to_json()}
    if profile is not None:
        report["directional"] = [v.to_json() for v in directional_profile_check(res.u, profile, cfg.p, cfg.q)]
    return report


def cmd_gallery(args) -> int:
    started = time.perf_counter()
    if args.all == (args.name is not None):
        raise ConfigError("give exactly one of a gallery name or --all")
    names = sorted(GALLERY) if args.all else [args.name]
    for n in names:
        if n not in GALLERY:
            raise ConfigError(f"unknown gallery domain {n!r}; known: {sorted(GALLERY)}")
    out = _out_dir(args)
    kw = {"spacing": args.spacing, "half_extent": args.half_extent}
    if args.jobs > 1 and len(names) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            reports = list(pool.map(_gallery_member, [(n, kw) for n in names]))
    else:
        reports = [gallery_report(n, **kw) for n in names]
    paths = []
    for rep in reports:
        paths.append(write_json(out / f"gallery_{rep['name']}.json", rep))
        verdict = rep.get("drift", {}).get("drift_detected")
        tail = f" drift={verdict}" if verdict is not None else f" lambda={_num(rep['solve']['lambda'])}"
        print(f"{rep['name']}: {rep['steiner']} inradius={rep['inradius']:.4f}{tail}")
    write_manifest(out, "gallery", None, paths, started)
    return EXIT_OK


def _gallery_member(item):
    name, kw = item
    return gallery_report(name, **kw)


# --- decay -------------------------------------------------------------------


def cmd_decay(args) -> int:
    started = time.perf_counter()
    rpath = Path(args.result)
    if rpath.is_dir():
        rpath = rpath / "result.json"
    try:
        result = json.loads(rpath.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read result file {rpath}: {exc}") from exc
    cfg = build_config(result["config"])
    if math.isinf(cfg.q):
        raise ConfigError("decay analysis needs a finite q")
    u, _ = load_field(rpath.parent / result["field"])
    mask = prepare_mask(cfg)
    if not np.array_equal(mask.inside, u.mask.inside):
        raise ConfigError("stored field does not match the configured domain")
    u = type(u)(u.grid, u.values, mask)
    lam_p = solve_extremal(cfg.with_(q=cfg.p, confinement_n=None), mask=mask, internal=True).lambda_est
    consts = decay_constants(cfg.p, cfg.q, lam_p, float(result["lambda"]))
    out = _out_dir(args)
    try:
        rep = tail_report(u, cfg.q, consts)
    except TailUnresolved as exc:
        print(f"tail unresolved: {exc}", file=sys.stderr)
        write_json(out / "decay.json", {"error": "tail unresolved", "detail": str(exc), "constants": consts.to_json()})
        return EXIT_TAIL
    dpath = write_json(out / "decay.json", rep.to_json())
    sup = dict(rep.tail_sup)
    tpath = write_csv(out / "tail.csv", ["R", "A", "tail_sup"], [(R, A, sup[R]) for R, A in rep.tail_mass])
    write_manifest(out, "decay", rpath, [dpath, tpath], started)
    print(f"r0 = {rep.r0}  recursion_pass = {rep.recursion_pass}  rates = {rep.fitted_rate}")
    return EXIT_OK


# --- symmetrize --------------------------------------------------------------


def cmd_symmetrize(args) -> int:
    started = time.perf_counter()
    try:
        u, _ = load_field(args.field)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot read field {args.field}: {exc}") from exc
    if u.signed:
        raise ConfigError("symmetrization needs a nonnegative field")
    out = _out_dir(args)
    s = full_symmetrize(u)
    fpath = save_field(out / "symmetrized.csv", s)
    rep = rearrangement_report(u, args.p, args.alphas)
    rpath = write_json(out / "rearrangement.json", rep.to_json())
    write_manifest(out, "symmetrize", args.field, [fpath, rpath], started)
    print(f"pz_defect = {_num(rep.pz_defect)}  equimeasurable = {rep.equimeasurable}")
    return EXIT_OK


# --- entry point ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML or JSON problem file")
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("--jobs", type=int, default=1, help="parallel workers for independent members")
    common.add_argument("--seed", type=int, default=None, help="seed for random initial fields")
    common.add_argument("--tolerance", type=float, default=None, help="override the relative stopping tolerance")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="sharp-poincare", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="compute a constant and its extremal").set_defaults(func=cmd_solve)
    sub.add_parser("sweep", parents=[common], help="confinement, box or q sweep").set_defaults(func=cmd_sweep)
    g = sub.add_parser("gallery", parents=[common], help="report on named example domains")
    g.add_argument("name", nargs="?")
    g.add_argument("--all", action="store_true")
    g.add_argument("--spacing", type=float, default=1 / 8)
    g.add_argument("--half-extent", type=float, default=8.0)
    g.set_defaults(func=cmd_gallery)
    d = sub.add_parser("decay", parents=[common], help="tail analysis of a solve result")
    d.add_argument("result", help="result.json or the directory holding it")
    d.set_defaults(func=cmd_decay)
    s = sub.add_parser("symmetrize", parents=[common], help="symmetrize a stored field")
    s.add_argument("field")
    s.add_argument("--p", type=float, default=2.0)
    s.add_argument("--alphas", type=float, nargs="*", default=[0.5, 1.0, 2.0])
    s.set_defaults(func=cmd_symmetrize)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, InfeasibleProblem) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TailUnresolved as exc:
        print(f"tail unresolved: {exc}", file=sys.stderr)
        return EXIT_TAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
