"""Command-line entry point ``endslab``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ..asym import ConjectureOnly, Unsupported, classify_coe, check_doe, end_ordering, predict_heat_center, predict_poincare
from ..model import validate_model_conditions
from .fitting import FitError, fit_exponents, read_table
from .scenario import ScenarioError, load_scenario
from .sweep import run_and_report

QUANTITY = {"spectrum": "gap", "heat": "heat", "whitney": "whitney", "lower": "lower_bound"}


def _predict(args) -> int:
    s = load_scenario(args.scenario)
    ends = s.ends
    out = {"ends": [f"({e.volume.alpha}, {[str(b) for b in e.volume.betas]}) N={e.dim} {e.label}" for e in ends]}
    order = end_ordering(ends)
    out["largest_end"], out["second_largest_end"] = order.m, order.n
    try:
        out["poincare"] = predict_poincare(ends).text()
    except Unsupported as exc:
        out["poincare"] = None
        out["poincare_unsupported"] = str(exc)
    heat = predict_heat_center(ends)
    if isinstance(heat, ConjectureOnly):
        out["heat_center"] = heat.law.text()
        out["heat_basis"] = "conjecture"
    else:
        out["heat_center"] = heat.text()
        out["heat_basis"] = "theorem"
    cert = classify_coe(ends)
    out["coe"] = "certified" if cert else f"violated ({cert.clause}): {cert.reason}"
    out["doe_end"] = check_doe(ends)
    print(json.dumps(out, indent=2, sort_keys=True))
    return 0


def _validate(args) -> int:
    s = load_scenario(args.scenario)
    ok = True
    r_max = s.data["discretization"]["R_max"]
    for i, p in enumerate(s.profiles(), start=1):
        top = max(r_max, 20 * p.r_splice)
        rep = validate_model_conditions(p, top)
        status = "ok" if rep.passed else "FAIL"
        print(f"end {i}: {p!r}: {status} max V/r^N={rep.max_v_over_rN:.4g} "
              f"rV'/V in [{rep.min_local_exponent:.4g}, {rep.max_local_exponent:.4g}]")
        for reason in rep.reasons:
            print(f"  {reason}")
        ok &= rep.passed
    print(f"config_hash {s.hash}")
    return 0 if ok else 1


def _sweep(args) -> int:
    s = load_scenario(args.scenario).with_overrides(QUANTITY[args.command], args.delta, args.rmax)
    out_dir = args.out or s.data.get("output") or f"out/{Path(args.scenario).stem}"
    report = run_and_report(s, out_dir, threads=args.threads)
    v = report["verdict"]
    fit = report.get("fit") or {}
    print(f"{report['quantity']}: prediction {report['prediction']} fit a={fit.get('a', float('nan')):.4f} "
          f"b={fit.get('b', float('nan')):.4f} -> {v['verdict']}")
    print(f"wrote {out_dir}")
    return 0 if v["verdict"] != "FAIL" else 2


def _fit(args) -> int:
    x, y = read_table(args.csv)
    window = args.window if args.window else None
    res = fit_exponents(x, y, use_loglog=args.loglog, window=window)
    print(json.dumps(res.as_dict(), indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="endslab", description="Poincaré constants and heat decay on manifolds with ends")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("predict", "validate"):
        sp = sub.add_parser(name)
        sp.add_argument("scenario")
    for name in QUANTITY:
        sp = sub.add_parser(name)
        sp.add_argument("scenario")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--delta", type=float, default=None, help="override the base grid step")
        sp.add_argument("--rmax", type=float, default=None, help="override R_max")
    sp = sub.add_parser("fit")
    sp.add_argument("csv")
    sp.add_argument("--loglog", action="store_true", help="include the log log term")
    sp.add_argument("--window", type=float, nargs=2, default=None)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"predict": _predict, "validate": _validate, "fit": _fit}.get(args.command, _sweep)
    try:
        return handler(args)
    except (ScenarioError, FitError, FileNotFoundError) as exc:
        print(f"endslab: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
