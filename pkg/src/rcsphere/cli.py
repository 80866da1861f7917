"""Command-line interface.

Sub-commands::

    rcsphere table1    CH and optimised minimum coverage / SEV(0) for a list of p
    rcsphere optimize  optimise a radius function, write radius + summary JSON
    rcsphere curves    coverage/SEV curves and radius samples for plotting
    rcsphere verify    compare quadrature with Monte Carlo
    rcsphere ch-radius write the Casella-Hwang radius as a radius file

Exit codes: 0 success, 1 numerical failure, 2 input or validation error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from .mc_oracle import McConfig, estimate
from .optimizer import DEFAULT_GRID, InfeasibleError, OptimizationProblem, solve
from .performance import PerformanceError, coverage_probability, curve, sev
from .quadrature import QuadratureConfig
from .sphere import DEFAULT_K, RadiusFunction, casella_hwang_radius, hermite_radius, radius_eval, standard_radius

log = logging.getLogger("rcsphere")

TABLE1_P = (3, 5, 7, 9, 11, 13, 15, 17, 19)
EXIT_OK, EXIT_NUMERIC, EXIT_INPUT = 0, 1, 2


class InputError(ValueError):
    pass


# ---------------------------------------------------------------------------
# radius files


def radius_to_dict(r: RadiusFunction) -> dict:
    out = {"kind": r.kind, "p": int(r.p), "alpha": float(r.alpha), "d": float(r.d), "k": float(r.k)}
    if r.kind == "hermite":
        out["knots"] = [{"x": float(x), "b": float(b)} for x, b in zip(r.knots, r.values)]
    return out


def radius_from_dict(obj: dict) -> RadiusFunction:
    if not isinstance(obj, dict):
        raise InputError("radius file must hold a JSON object")
    allowed = {"kind", "p", "alpha", "d", "k", "knots"}
    extra = set(obj) - allowed
    if extra:
        raise InputError(f"unknown keys in radius file: {sorted(extra)}")
    try:
        kind, p, alpha, d = obj["kind"], obj["p"], float(obj["alpha"]), float(obj["d"])
    except KeyError as exc:
        raise InputError(f"radius file is missing {exc}") from None
    k = float(obj.get("k", DEFAULT_K))
    if not isinstance(p, int):
        raise InputError("p must be an integer")
    try:
        expected = standard_radius(p, alpha)
        if not math.isclose(expected, d, rel_tol=0, abs_tol=1e-9):
            raise InputError(f"d={d} does not match p={p}, alpha={alpha} (expected {expected})")
        if kind == "hermite":
            knots = obj.get("knots")
            if not knots:
                raise InputError("hermite radius needs knots")
            xs = [float(kn["x"]) for kn in knots]
            bs = [float(kn["b"]) for kn in knots]
            return hermite_radius(p, alpha, xs, bs, k=k, d=d)
        if kind == "casella_hwang":
            if "knots" in obj:
                raise InputError("casella_hwang radius takes no knots")
            return RadiusFunction("casella_hwang", p, d, alpha, k)
        raise InputError(f"unsupported radius kind {kind!r}")
    except InputError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise InputError(f"invalid radius: {exc}") from None


def dump_radius(r: RadiusFunction, path) -> None:
    Path(path).write_text(json.dumps(radius_to_dict(r), indent=2) + "\n")


def load_radius(path) -> RadiusFunction:
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"cannot parse {path}: {exc}") from None
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    return radius_from_dict(obj)


# ---------------------------------------------------------------------------
# run configuration

_QUAD_KEYS = {"rel_tol", "min_segments", "max_doublings", "abs_floor"}
_PROBLEM_KEYS = {f.name for f in fields(OptimizationProblem)} - {"quadrature"}
_RUN_KEYS = _PROBLEM_KEYS | _QUAD_KEYS | {"samples", "seed", "out", "summary_out"}


def load_config(path) -> dict:
    try:
        cfg = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"cannot parse {path}: {exc}") from None
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise InputError("config must be a JSON object")
    extra = set(cfg) - _RUN_KEYS
    if extra:
        raise InputError(f"unknown config keys: {sorted(extra)}")
    if "p" not in cfg:
        raise InputError("config needs p")
    return cfg


def problem_from_config(cfg: dict) -> OptimizationProblem:
    kw = {k: cfg[k] for k in _PROBLEM_KEYS if k in cfg}
    try:
        quad = QuadratureConfig(**{k: cfg[k] for k in _QUAD_KEYS if k in cfg})
        for key in ("knots", "gamma_grid", "starts"):
            if key in kw and kw[key] is not None:
                kw[key] = tuple(kw[key])
        return OptimizationProblem(quadrature=quad, **kw)
    except (TypeError, ValueError) as exc:
        raise InputError(f"invalid config: {exc}") from None


# ---------------------------------------------------------------------------
# commands


def _fmt(v: float, digits: int = 5) -> str:
    return f"{v:.{digits}f}"


def ch_min_coverage(p: int, alpha: float, step: float = 0.01, gamma_max: float = 20.0, asymptote: float = 65.0):
    """Minimum coverage of the CH radius over a fine grid, the asymptote point and the limit ``1 - alpha``."""
    r = casella_hwang_radius(p, alpha)
    gammas = step * np.arange(int(round(gamma_max / step)) + 1)
    cp = curve(r, gammas).value
    far = coverage_probability(r, asymptote)
    return min(float(cp.min()), far, 1 - alpha), far


def cmd_table1(args) -> int:
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    radius_dir = Path(args.radius_dir) if args.radius_dir else None
    if radius_dir:
        radius_dir.mkdir(parents=True, exist_ok=True)
    for p in args.p:
        if p < 3 or p % 2 == 0:
            print(f"error: p must be odd and >= 3, got {p}", file=sys.stderr)
            return EXIT_INPUT
    with out.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["p", "ch_min_cp", "ch_sev0", "new_min_cp", "new_sev0"])
        fh.flush()
        for p in args.p:
            try:
                ch_cp, _ = ch_min_coverage(p, args.alpha)
                ch_sev = sev(casella_hwang_radius(p, args.alpha), 0.0)
                res = solve(OptimizationProblem(p, args.alpha, args.k))
            except (PerformanceError, InfeasibleError, ArithmeticError) as exc:
                fh.write(f"# failed at p={p}: {exc}\n")
                print(f"error: p={p}: {exc}", file=sys.stderr)
                return EXIT_NUMERIC
            new_cp = min(res.global_min_coverage, 1 - args.alpha)
            w.writerow([p, _fmt(ch_cp), _fmt(ch_sev), _fmt(new_cp), _fmt(res.sev_at_zero)])
            fh.flush()
            if radius_dir:
                dump_radius(res.radius, radius_dir / f"new_p{p}.json")
            log.info("p=%d done: sev0=%.6f min_cp=%.6f", p, res.sev_at_zero, res.global_min_coverage)
    return EXIT_OK


def cmd_optimize(args) -> int:
    cfg = load_config(args.config) if args.config else {}
    for key in ("p", "alpha", "k"):
        v = getattr(args, key)
        if v is not None:
            cfg[key] = v
    if "p" not in cfg:
        raise InputError("give --p or a config with p")
    problem = problem_from_config(cfg)
    out = Path(args.out or cfg.get("out") or f"radius_p{problem.p}.json")
    summary_path = Path(args.summary or cfg.get("summary_out") or out.with_name(out.stem + "_summary.json"))
    try:
        res = solve(problem)
    except (PerformanceError, InfeasibleError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    out.parent.mkdir(parents=True, exist_ok=True)
    dump_radius(res.radius, out)
    summary = {
        "sev_at_zero": res.sev_at_zero,
        "min_coverage_on_grid": res.min_coverage_on_grid,
        "global_min_coverage": res.global_min_coverage,
        "argmin_gamma": res.argmin_gamma,
        "iterations": res.iterations,
        "converged": res.converged,
    }
    summary_path.write_text(json.dumps(summary, indent=2) + "\n")
    if not res.converged:
        print("warning: solver did not report convergence", file=sys.stderr)
    return EXIT_OK


def cmd_curves(args) -> int:
    r = load_radius(args.radius)
    if args.step <= 0 or args.gamma_max < 0:
        raise InputError("need step > 0 and gamma-max >= 0")
    n = int(math.floor(args.gamma_max / args.step + 1e-9))
    gammas = args.step * np.arange(n + 1)
    try:
        cov = curve(r, gammas, "coverage").value
        vol = curve(r, gammas, "sev").value
    except PerformanceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    out = Path(args.out)
    radius_out = Path(args.radius_out) if args.radius_out else out.with_name(out.stem + "_radius.csv")
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        with out.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["gamma", "coverage", "sev"])
            for g, c, s in zip(gammas, cov, vol):
                w.writerow([_fmt(g, 4), _fmt(c), _fmt(s)])
        xs = 0.01 * np.arange(int(round(r.k / 0.01)) + 1)
        bs = radius_eval(r, xs)
        with radius_out.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "b"])
            for x, b in zip(xs, bs):
                w.writerow([_fmt(x, 2), repr(float(b))])
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_verify(args) -> int:
    r = load_radius(args.radius)
    cfg = McConfig(samples=args.samples, seed=args.seed)
    ok = True
    print(f"{'gamma':>8} {'cp_quad':>10} {'cp_mc':>10} {'cp_se':>9} {'sev_quad':>10} {'sev_mc':>10} {'sev_se':>9}  status")
    for g in args.gammas:
        try:
            cq = coverage_probability(r, g)
            sq = sev(r, g)
        except PerformanceError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        est = estimate(r, g, cfg)
        good = abs(cq - est.cp_hat) <= 4 * est.cp_se and abs(sq - est.sev_hat) <= max(4 * est.sev_se, 1e-12)
        ok &= good
        print(
            f"{g:8.3f} {cq:10.6f} {est.cp_hat:10.6f} {est.cp_se:9.2e} "
            f"{sq:10.6f} {est.sev_hat:10.6f} {est.sev_se:9.2e}  {'ok' if good else 'FAIL'}"
        )
    return EXIT_OK if ok else EXIT_NUMERIC


def cmd_ch_radius(args) -> int:
    dump_radius(casella_hwang_radius(args.p, args.alpha, args.k), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rcsphere", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    t = sub.add_parser("table1", help="reproduce the minimum-coverage / SEV(0) comparison table")
    t.add_argument("--p", type=int, nargs="*", default=list(TABLE1_P))
    t.add_argument("--alpha", type=float, default=0.05)
    t.add_argument("--k", type=float, default=DEFAULT_K)
    t.add_argument("--out", default="table1.csv")
    t.add_argument("--radius-dir", help="also write each optimised radius here")
    t.set_defaults(func=cmd_table1)

    o = sub.add_parser("optimize", help="optimise a new radius function")
    o.add_argument("--config")
    o.add_argument("--p", type=int)
    o.add_argument("--alpha", type=float)
    o.add_argument("--k", type=float)
    o.add_argument("--out")
    o.add_argument("--summary")
    o.set_defaults(func=cmd_optimize)

    c = sub.add_parser("curves", help="coverage and SEV curves plus radius samples")
    c.add_argument("--radius", required=True)
    c.add_argument("--gamma-max", type=float, default=20.0)
    c.add_argument("--step", type=float, default=0.05)
    c.add_argument("--out", default="curves.csv")
    c.add_argument("--radius-out")
    c.set_defaults(func=cmd_curves)

    v = sub.add_parser("verify", help="check quadrature against Monte Carlo")
    v.add_argument("--radius", required=True)
    v.add_argument("--samples", type=int, default=1_000_000)
    v.add_argument("--seed", type=int, default=20140101)
    v.add_argument("--gammas", type=float, nargs="+", default=[0.0, 1.0, 5.0])
    v.set_defaults(func=cmd_verify)

    h = sub.add_parser("ch-radius", help="write the Casella-Hwang radius file")
    h.add_argument("--p", type=int, required=True)
    h.add_argument("--alpha", type=float, default=0.05)
    h.add_argument("--k", type=float, default=DEFAULT_K)
    h.add_argument("--out", required=True)
    h.set_defaults(func=cmd_ch_radius)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
