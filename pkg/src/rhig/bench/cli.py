"""Command line entry point: ``rhig run | bounds | selftest``."""

from __future__ import annotations

import argparse
import configparser
import csv
import math
import sys
from pathlib import Path

import numpy as np

from ..bounds import (BoundConstants, corollary1_bound, corollary2_bound, corollary3_bound,
                      theorem1_bound, theorem3_lower, theorem5_bound, theorem6_K, variation_VT)
from ..core import FeasibleSet, InstanceError
from ..offline import OfflineConvergenceError, offline_optimum, total_cost
from .runner import (ALGORITHMS, AlgoSpec, NumericalFailure, execute, read_csv, run_experiment,
                     summarize, write_csv)
from .scenarios import DEFAULTS, Scenario

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class ConfigError(Exception):
    pass


def parse_W(text: str):
    text = text.strip().lower()
    if text in ("inf", "infinity"):
        return math.inf
    try:
        W = int(text)
    except ValueError as exc:
        raise ConfigError(f"W must be an integer or 'inf', got {text!r}") from exc
    if W < 0:
        raise ConfigError("W must be nonnegative")
    return W


def _coerce(kind: str, key: str, raw: str):
    defaults = DEFAULTS[kind]
    if key not in defaults:
        raise ConfigError(f"unknown {kind} parameter {key!r}")
    ref = defaults[key]
    raw = raw.strip()
    try:
        if isinstance(ref, bool):
            if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return raw.lower() in ("true", "1", "yes")
        if isinstance(ref, int):
            return int(raw)
        if raw.lower() == "none":
            return None
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc


def load_config(path, kind: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    parser.optionxform = str  # keys are case-sensitive (T vs t)
    try:
        parser.read_string("[params]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    return {k: _coerce(kind, k, v) for k, v in parser["params"].items()}


def _params_path(out: Path) -> Path:
    return out.with_name(out.name + ".params")


def build_scenario(args) -> Scenario:
    params = {}
    if args.config:
        params.update(load_config(args.config, args.scenario))
    if args.gamma is not None:
        params["gamma"] = args.gamma
    try:
        return Scenario(args.scenario, params)
    except InstanceError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_run(args) -> int:
    scenario = build_scenario(args)
    Ws = [parse_W(w) for w in args.W.split(",")]
    names = [a.strip() for a in args.algo.split(",")]
    algos = []
    for name in names:
        if name not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {name!r}")
        for W in Ws:
            if name in ("afhc", "chc") and (W == math.inf or W < 1):
                raise ConfigError(f"{name} needs a finite W >= 1")
            v = args.v if args.v is not None else scenario.params["v"]
            algos.append(AlgoSpec(name, 0 if name == "ogd" else W,
                                  v=min(v, W) if name == "chc" else None))
    algos = list(dict.fromkeys(algos))
    reports = run_experiment(scenario, algos, args.seeds, args.base_seed, args.jobs)
    out = Path(args.out)
    write_csv(reports, out, with_timing=not args.no_timing)
    with open(_params_path(out), "w") as fh:
        fh.write(f"# scenario={scenario.kind} base_seed={args.base_seed}\n")
        for k, v in scenario.params.items():
            fh.write(f"{k} = {v}\n")
    for (name, W, extra), (mean, se, n) in summarize(reports).items():
        print(f"{name:5s} W={W!s:4s} {extra:5s} mean regret {mean:.6g} (se {se:.3g}, n={n})")
    failed = [r for r in reports if r.error is not None]
    for r in failed:
        print(f"error: {r.algorithm} W={r.W} seed={r.seed}: {r.error}", file=sys.stderr)
    return EXIT_NUMERIC if failed else EXIT_OK


BOUND_NAMES = ["V_T", "theorem1", "corollary1_part1", "corollary1_part2", "corollary2",
               "corollary2_condition", "theorem3_lower", "theorem5", "corollary3", "theorem6_K"]


def bound_rows(scenario: Scenario, row: dict) -> list:
    seed = int(row["seed"])
    W = parse_W(row["W"])
    name = row["algorithm"]
    inst = scenario.build(seed)
    if name not in ("rhig", "ogd", "rhgd"):
        return []
    if name == "ogd":
        W = 0
    c = BoundConstants.from_spec(inst.spec)
    opt = offline_optimum(inst.spec, inst.theta, inst.fset, inst.x0)
    _, init = execute(AlgoSpec(name, W), inst)
    reg_phi = 0.0 if init is None else total_cost(inst.spec, init, inst.theta, inst.x0) - opt.cost
    e = np.zeros(inst.T) if name == "rhgd" else inst.table.error_norms_sq()
    T = inst.T
    vals = {}
    box = inst.fset if inst.fset.is_box else None
    if box is None:
        # the variation needs a bounded set; use the hull of the targets and decisions
        pts = np.vstack([inst.theta, opt.x_star, inst.x0[None]])
        box = FeasibleSet.box(pts.min(axis=0) - 1e-9, pts.max(axis=0) + 1e-9)
    VT = variation_VT(inst.spec, inst.theta, inst.theta0, box)
    vals["V_T"] = VT
    vals["theorem1"] = theorem1_bound(c, W, reg_phi, e)
    VTn = min(max(VT, 1.0), T)
    p1, p2 = corollary1_bound(c, W, T, VTn, e)
    vals["corollary1_part1"], vals["corollary1_part2"] = p1, p2
    v2, cond = corollary2_bound(c, e, VTn, T)
    vals["corollary2"], vals["corollary2_condition"] = v2, float(cond)
    vals["theorem3_lower"] = theorem3_lower(c, e)
    if inst.model is not None:
        vals["theorem5"] = theorem5_bound(c, W, T, inst.model, reg_phi)
        vals["corollary3"] = corollary3_bound(c, W, T, inst.model, VTn)
        vals["theorem6_K"] = theorem6_K(c, W, T, inst.model)
    return [(k, vals[k]) for k in BOUND_NAMES if k in vals]


def cmd_bounds(args) -> int:
    src = Path(args.source)
    try:
        rows = read_csv(src)
    except (OSError, InstanceError) as exc:
        raise ConfigError(f"cannot read run: {exc}") from exc
    if not rows:
        raise ConfigError("run CSV has no rows")
    kind = rows[0]["scenario"]
    params = {}
    ppath = _params_path(src)
    if ppath.exists():
        params.update(load_config(ppath, kind))
    if args.config:
        params.update(load_config(args.config, kind))
    scenario = Scenario(kind, params)
    out = Path(args.out) if args.out else src.with_name(src.stem + "_bounds.csv")
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scenario", "algorithm", "W", "extra_param", "seed", "bound_name", "value"])
        for row in rows:
            for bname, val in bound_rows(scenario, row):
                w.writerow([kind, row["algorithm"], row["W"], row["extra_param"], row["seed"],
                            bname, f"{val:.17g}"])
    print(f"wrote {out}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    return EXIT_OK if run_selftest(args.seed) else EXIT_NUMERIC


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rhig", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="Monte Carlo regret experiment")
    r.add_argument("--scenario", choices=sorted(DEFAULTS), default="planning")
    r.add_argument("--algo", default="rhig", help="comma-separated subset of " + ",".join(ALGORITHMS))
    r.add_argument("--W", default="3", help="lookahead, int or inf; comma list for a sweep")
    r.add_argument("--seeds", type=int, default=200)
    r.add_argument("--base-seed", type=int, default=0)
    r.add_argument("--gamma", type=float)
    r.add_argument("--v", type=int, help="CHC commitment level")
    r.add_argument("--config", help="key=value file overriding scenario parameters")
    r.add_argument("--jobs", type=int, default=1, help="worker processes")
    r.add_argument("--no-timing", action="store_true", help="write wall_ms as 0")
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("bounds", help="annotate a finished run with bound values")
    b.add_argument("--from", dest="source", required=True)
    b.add_argument("--config")
    b.add_argument("--out")
    b.set_defaults(func=cmd_bounds)

    s = sub.add_parser("selftest", help="run the fast property checks")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        if getattr(args, "seeds", 1) < 1:
            raise ConfigError("--seeds must be at least 1")
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InstanceError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OfflineConvergenceError, NumericalFailure, FloatingPointError,
            np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
