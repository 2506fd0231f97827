"""Command-line interface.

Exit codes: 0 when every requested bound is reproduced, 1 when a result was
computed but a bound or the cell budget failed, 2 on invalid configuration.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from decimal import Decimal, InvalidOperation
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

from .buchstab import build_table, omega
from .enclosure import Enclosure
from .errors import ConfigError, InfeasibleError, SieveBoundsError
from .integrals import (DEFAULT_TAU, QuadratureConfig, admissible_tau, compute_term,
                        solve_tau)
from .oracle import empirical_rho, mc_term
from .report import (LEGACY_TAU, LEGACY_VALUES, TARGET_TAU, build_report, checks_for, dec_hi,
                     dec_lo)
from .terms import TermId

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

log = logging.getLogger("sievebounds")

FIXED_TERMS = tuple(TermId(f"G{i}") for i in range(7))


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(Decimal(text)) if "/" not in text else Fraction(text)
    except (InvalidOperation, ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from exc


def _count(text: str) -> int:
    try:
        v = Fraction(Decimal(text))
    except InvalidOperation as exc:
        raise argparse.ArgumentTypeError(f"not a count: {text!r}") from exc
    if v.denominator != 1:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    return int(v)


def _positive(text: str) -> float:
    try:
        v = float(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from exc
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--mode", choices=("rigorous", "fast"), default="rigorous")
    common.add_argument("--route", choices=("reduced", "direct"), default="reduced",
                        help="reduced: inner integral in closed form (default); direct: full-dimensional boxes")
    common.add_argument("--width", type=_positive, default=None,
                        help="target enclosure width per term (default depends on route and dimension)")
    common.add_argument("--max-cells", type=_count, default=None)
    common.add_argument("--tau", type=_fraction, default=DEFAULT_TAU)
    common.add_argument("--umax", type=float, default=10.0)
    common.add_argument("--h", type=float, default=1e-4)
    common.add_argument("--workers", type=int, default=None,
                        help="threads for box evaluation (default: $SIEVEBOUNDS_WORKERS or 1)")
    common.add_argument("--no-seeds", action="store_true", help="disable seeded breakpoints")
    common.add_argument("--out", type=Path, default=None)
    common.add_argument("--format", choices=("json", "csv", "human"), default="human")
    common.add_argument("--legacy-bounds", action="store_true")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="sievebounds", description="Certified Buchstab sieve integrals.")
    sub = p.add_subparsers(dest="command", required=True)

    o = sub.add_parser("omega", parents=[common], help="enclosures of the Buchstab function")
    o.add_argument("--u", type=_fraction)
    o.add_argument("--from", dest="start", type=_fraction)
    o.add_argument("--to", dest="stop", type=_fraction)
    o.add_argument("--step", type=_fraction)

    t = sub.add_parser("term", parents=[common], help="evaluate one term")
    t.add_argument("term")

    sub.add_parser("report", parents=[common], help="all terms, aggregates and checks")
    sub.add_parser("solve", parents=[common], help="largest admissible exponent")

    r = sub.add_parser("oracle", parents=[common], help="Monte Carlo cross-check of one term")
    r.add_argument("term")
    r.add_argument("--samples", type=_count, default=10_000_000)
    r.add_argument("--seed", type=_count, default=1)

    e = sub.add_parser("rho-empirical", parents=[common], help="count n with a primitive divisor of n^2+1")
    e.add_argument("--xmax", type=_count, required=True)
    return p


def _config(args) -> QuadratureConfig:
    return QuadratureConfig(mode=args.mode, target_width=args.width, max_cells=args.max_cells,
                            seeded=not args.no_seeds, workers=args.workers, route=args.route)


def _emit(args, text: str) -> None:
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.write_text(text)


def _table(args):
    return build_table(args.umax, args.h)


def _result_dict(res, checks, passed) -> dict:
    e = res.enclosure
    return {
        "id": res.id.value, "lo": dec_lo(e.lo), "hi": dec_hi(e.hi), "width": e.width,
        "claimed_bound": "; ".join(c.describe() for c in checks) or None, "pass": passed,
        "certified": res.certified, "budget_exceeded": res.budget_exceeded,
        "cells": res.cells_evaluated, "seconds": round(res.wall_time, 3),
        "guard_hits": res.guard_hits,
        "parts": [[dec_lo(p.lo), dec_hi(p.hi)] for p in res.parts],
    }


def _render_rows(fmt: str, rows: list[dict]) -> str:
    if fmt == "json":
        return json.dumps(rows if len(rows) != 1 else rows[0], indent=2) + "\n"
    buf = io.StringIO()
    if fmt == "csv":
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
        return buf.getvalue()
    for row in rows:
        for k, v in row.items():
            buf.write(f"{k:>16}: {v}\n")
        buf.write("\n")
    return buf.getvalue()


# commands ------------------------------------------------------------------------------

def cmd_omega(args) -> int:
    if args.u is not None:
        points = [args.u]
    elif None not in (args.start, args.stop, args.step):
        if args.step <= 0 or args.stop < args.start:
            raise ConfigError("need step > 0 and to >= from")
        n = int((args.stop - args.start) / args.step)
        points = [args.start + k * args.step for k in range(n + 1)]
    else:
        raise ConfigError("give --u or all of --from/--to/--step")
    if any(u < 1 or u > args.umax for u in points):
        raise ConfigError(f"u must lie in [1, {args.umax}]")
    table = _table(args)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["u", "lo", "hi"])
    for u in points:
        e = omega(Enclosure.from_fraction(u), table)
        w.writerow([_decimal_text(u), repr(e.lo), repr(e.hi)])
    _emit(args, buf.getvalue())
    return EXIT_OK


def _decimal_text(x: Fraction) -> str:
    d = Decimal(x.numerator) / Decimal(x.denominator)
    return format(d.normalize(), "f")


def cmd_term(args) -> int:
    tid = TermId.parse(args.term)
    table = None if tid.base in (0, 5, 7) else _table(args)
    res = compute_term(tid, _config(args), table, args.tau)
    checks = checks_for(tid, args.tau, args.legacy_bounds)
    ok = all(c.holds(res.enclosure) for c in checks)
    passed = ok and res.certified and not res.budget_exceeded
    _emit(args, _render_rows(args.format, [_result_dict(res, checks, passed)]))
    if res.budget_exceeded:
        log.error("cell budget exhausted before the target width")
    if not res.certified:
        log.warning("fast mode: estimate is not certified")
    return EXIT_OK if passed else EXIT_FAIL


def _all_results(args, terms):
    table = _table(args)
    config = _config(args)
    return {t: compute_term(t, config, table, args.tau) for t in terms}


def cmd_report(args) -> int:
    results = _all_results(args, tuple(TermId))
    cfg = {**_config(args).as_dict(), "u_max": args.umax, "h": args.h}
    rep = build_report(results, args.tau, args.legacy_bounds, cfg)
    fmt = "json" if args.format == "human" and args.out is not None and args.out.suffix == ".json" else args.format
    _emit(args, rep.render(fmt))
    if rep.budget_exceeded:
        log.error("at least one term exhausted its cell budget; report is partial")
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_solve(args) -> int:
    if args.legacy_bounds:
        results = {t: r.enclosure for t, r in _all_results(args, (TermId.G0, TermId.G5)).items()}
        results.update({t: Enclosure.from_fraction(v) for t, v in LEGACY_VALUES.items()})
        target = LEGACY_TAU
    else:
        raw = _all_results(args, FIXED_TERMS)
        if any(r.budget_exceeded or not r.certified for r in raw.values()):
            log.error("fixed sum is not certified")
            return EXIT_FAIL
        results = {t: r.enclosure for t, r in raw.items()}
        target = TARGET_TAU
    tau = solve_tau(results)
    adm = admissible_tau(tau)
    row = {"tau_lo": repr(tau.lo), "tau_hi": repr(tau.hi), "admissible": str(adm),
           "target": str(Decimal(target.numerator) / Decimal(target.denominator)),
           "meets_target": Fraction(adm) >= target}
    if args.format == "human":
        _emit(args, f"{adm}\n")
    else:
        _emit(args, _render_rows(args.format, [row]))
    return EXIT_OK if row["meets_target"] else EXIT_FAIL


def cmd_oracle(args) -> int:
    tid = TermId.parse(args.term)
    est = mc_term(tid, args.samples, args.seed, args.tau)
    table = None if tid.base in (0, 5, 7) else _table(args)
    res = compute_term(tid, _config(args), table, args.tau)
    e = res.enclosure
    ok = res.certified and est.agrees_with(e.lo, e.hi)
    row = {"id": tid.value, "mean": est.mean, "stderr": est.stderr, "samples": est.samples,
           "seed": est.seed, "accepted": est.accepted, "degenerate": est.degenerate,
           "rigorous_lo": dec_lo(e.lo), "rigorous_hi": dec_hi(e.hi),
           "deviation_in_stderr": (abs(est.mean - e.mid) / est.stderr) if est.stderr > 0 else None,
           "verdict": "ok" if ok else "disagree"}
    _emit(args, _render_rows(args.format, [row]))
    return EXIT_OK if ok else EXIT_FAIL


def cmd_rho_empirical(args) -> int:
    pc = empirical_rho(args.xmax)
    row = {"x_max": pc.x_max, "count": pc.count, "ratio": pc.ratio,
           "inside_asymptotic_window": 0.5377 < pc.ratio < 0.838}
    _emit(args, _render_rows(args.format, [row]))
    return EXIT_OK


COMMANDS = {
    "omega": cmd_omega,
    "term": cmd_term,
    "report": cmd_report,
    "solve": cmd_solve,
    "oracle": cmd_oracle,
    "rho-empirical": cmd_rho_empirical,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except InfeasibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (ConfigError, SieveBoundsError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
