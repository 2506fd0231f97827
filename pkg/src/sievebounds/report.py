"""Bounds report: per-term checks, aggregates and serialisation.

Enclosure endpoints are written as decimal strings with 12 significant
digits, lower endpoints rounded down and upper endpoints rounded up.
Aggregates are computed from the already-rounded per-term enclosures, so a
reader re-deriving them from the document gets the emitted values exactly.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from decimal import ROUND_CEILING, ROUND_FLOOR, Context, Decimal
from fractions import Fraction
from typing import Mapping, Optional

from .enclosure import Enclosure, round_down, round_up
from .errors import ConfigError, InfeasibleError
from .integrals import (TermResult, admissible_tau, fixed_sum, rho_coefficient, solve_tau,
                        total_S)
from .terms import TermId, as_fraction

SCHEMA_VERSION = 1
DIGITS = 12

AGGREGATE_TARGET = Fraction("0.9993")
LEGACY_AGGREGATE_TARGET = Fraction("0.998")
RHO_TARGET = Fraction("0.838")
TARGET_TAU = Fraction("1.317")
LEGACY_TAU = Fraction("1.312")


@dataclass(frozen=True)
class Check:
    """``hi <= value`` (``upper``), ``lo >= value`` (``lower``) or ``lo <= value <= hi`` (``contains``)."""

    kind: str
    value: Fraction

    def holds(self, e: Enclosure) -> bool:
        if self.kind == "upper":
            return Fraction(e.hi) <= self.value
        if self.kind == "lower":
            return Fraction(e.lo) >= self.value
        return e.contains(self.value)

    def describe(self) -> str:
        sym = {"upper": "hi <=", "lower": "lo >=", "contains": "contains"}[self.kind]
        return f"{sym} {_fmt_fraction(self.value)}"


def _fmt_fraction(x: Fraction) -> str:
    if x.denominator == 1 or (10**12 % x.denominator == 0):
        return str(Decimal(x.numerator) / Decimal(x.denominator))
    return f"{x.numerator}/{x.denominator}"


_U, _L, _C = "upper", "lower", "contains"
F = Fraction

TARGET_CHECKS: dict[TermId, tuple[Check, ...]] = {
    TermId.G0: (Check(_C, F(1, 6)),),
    TermId.G1: (Check(_U, F("0.028611")),),
    TermId.G2: (Check(_U, F("0.086062")),),
    TermId.G3: (Check(_U, F("0.030992")),),
    TermId.G4: (Check(_U, F("0.0001")),),
    TermId.G5: (Check(_C, F(29, 72)),),
    TermId.G6: (Check(_L, F("0.059841")),),
    TermId.G0p: (Check(_U, F("0.154151")),),
    TermId.G1p: (Check(_U, F("0.027475")),),
    TermId.G2p: (Check(_U, F("0.077933")),),
    TermId.G3p: (Check(_U, F("0.026835")),),
    TermId.G4p: (Check(_U, F("0.00009")),),
    TermId.G5p: (Check(_C, F(1, 3)),),
    TermId.G6p: (Check(_L, F("0.05016")),),
}

LEGACY_CHECKS: dict[TermId, tuple[Check, ...]] = {
    TermId.G1: (Check(_U, F("0.0287")),),
    TermId.G2: (Check(_U, F("0.08622")),),
    TermId.G3: (Check(_U, F("0.03107")),),
    TermId.G4: (Check(_U, F("0.00011")),),
    TermId.G6: (Check(_L, F("0.035631")),),
}

#: values standing in for G1..G4 and G6 in the legacy aggregate
LEGACY_VALUES = {t: c[0].value for t, c in LEGACY_CHECKS.items()}


def checks_for(term: TermId, tau, legacy: bool = False) -> tuple[Check, ...]:
    """Bound checks for ``term``; G7/G7p are checked against their closed form at ``tau``."""
    tau = as_fraction(tau)
    if legacy and term in LEGACY_CHECKS:
        return LEGACY_CHECKS[term]
    if term is TermId.G7:
        out = [Check(_C, 2 * (tau * tau - F(25, 16)))]
        if tau == LEGACY_TAU:
            out.append(Check(_U, F("0.31769")))
        return tuple(out)
    if term is TermId.G7p:
        out = [Check(_C, 4 * (tau - F(5, 4)))]
        if tau == TARGET_TAU and out[0].value != F("0.268"):
            out.append(Check(_C, F("0.268")))
        return tuple(out)
    return TARGET_CHECKS.get(term, ())


# decimal rounding -------------------------------------------------------------------

def _round(x: float, rounding) -> Decimal:
    d = Decimal(x)
    if d == 0:
        return Decimal(0)
    return Context(prec=DIGITS, rounding=rounding).plus(d)


def dec_lo(x: float) -> str:
    return format(_round(x, ROUND_FLOOR), "g") if x != 0 else "0"


def dec_hi(x: float) -> str:
    return format(_round(x, ROUND_CEILING), "g") if x != 0 else "0"


def parse_enclosure(lo: str, hi: str) -> Enclosure:
    """Enclosure of the decimal interval ``[lo, hi]`` (outward to binary64)."""
    return Enclosure(round_down(Fraction(Decimal(lo))), round_up(Fraction(Decimal(hi))))


def _enc_doc(e: Enclosure) -> dict:
    return {"lo": dec_lo(e.lo), "hi": dec_hi(e.hi)}


# report --------------------------------------------------------------------------------

@dataclass
class TermEntry:
    """One term as reported; the decimal endpoints are authoritative."""

    id: TermId
    lo_text: str
    hi_text: str
    checks: tuple[Check, ...]
    certified: bool
    budget_exceeded: bool
    cells: int
    seconds: float
    guard_hits: int = 0

    @property
    def enclosure(self) -> Enclosure:
        return parse_enclosure(self.lo_text, self.hi_text)

    @property
    def passed(self) -> Optional[bool]:
        if not self.checks:
            return None
        return self.certified and not self.budget_exceeded and all(c.holds(self.enclosure) for c in self.checks)


@dataclass
class BoundsReport:
    tau: Fraction
    legacy: bool
    entries: list[TermEntry]
    config: dict = field(default_factory=dict)

    # derived -----------------------------------------------------------------------
    def enclosures(self) -> dict[TermId, Enclosure]:
        return {e.id: e.enclosure for e in self.entries}

    @property
    def fixed_sum(self) -> Enclosure:
        return fixed_sum(self.enclosures())

    @property
    def total(self) -> Enclosure:
        return total_S(self.tau, self.enclosures())

    @property
    def rho(self) -> Enclosure:
        return rho_coefficient(self.tau, self.enclosures())

    def solved_tau(self) -> Optional[Enclosure]:
        try:
            return solve_tau(self.enclosures())
        except InfeasibleError:
            return None

    def legacy_results(self) -> dict[TermId, Enclosure]:
        res = self.enclosures()
        for t, v in LEGACY_VALUES.items():
            res[t] = Enclosure.from_fraction(v)
        return res

    @property
    def legacy_total(self) -> Enclosure:
        return total_S(self.tau, self.legacy_results())

    @property
    def aggregate_target(self) -> Fraction:
        return LEGACY_AGGREGATE_TARGET if self.legacy else AGGREGATE_TARGET

    @property
    def gated_total(self) -> Enclosure:
        return self.legacy_total if self.legacy else self.total

    @property
    def budget_exceeded(self) -> bool:
        return any(e.budget_exceeded for e in self.entries)

    @property
    def bounds_passed(self) -> bool:
        return all(e.passed is not False for e in self.entries)

    @property
    def passed(self) -> bool:
        return (self.bounds_passed and not self.budget_exceeded
                and Fraction(self.gated_total.hi) < self.aggregate_target
                and Fraction(self.rho.hi) < RHO_TARGET)

    # serialisation ------------------------------------------------------------------
    def to_dict(self) -> dict:
        terms = []
        for e in self.entries:
            terms.append({
                "id": e.id.value,
                "lo": e.lo_text,
                "hi": e.hi_text,
                "claimed_bound": "; ".join(c.describe() for c in e.checks) or None,
                "pass": e.passed,
                "certified": e.certified,
                "budget_exceeded": e.budget_exceeded,
                "cells": e.cells,
                "guard_hits": e.guard_hits,
                "seconds": round(e.seconds, 3),
            })
        total, rho = self.total, self.rho
        agg = {
            "fixed_sum": _enc_doc(self.fixed_sum),
            "total": {**_enc_doc(total), "target": _fmt_fraction(AGGREGATE_TARGET),
                      "below_target": Fraction(total.hi) < AGGREGATE_TARGET,
                      "below_one": total.hi < 1.0},
            "rho_coefficient": {**_enc_doc(rho), "target": _fmt_fraction(RHO_TARGET),
                                "below_target": Fraction(rho.hi) < RHO_TARGET},
        }
        st = self.solved_tau()
        agg["solved_tau"] = None if st is None else {**_enc_doc(st), "admissible": str(admissible_tau(st))}
        if self.legacy:
            lt = self.legacy_total
            lst = _safe_solve(self.legacy_results())
            agg["legacy"] = {
                "fixed_sum": _enc_doc(fixed_sum(self.legacy_results())),
                "total": {**_enc_doc(lt), "target": _fmt_fraction(LEGACY_AGGREGATE_TARGET),
                          "below_target": Fraction(lt.hi) < LEGACY_AGGREGATE_TARGET},
                "solved_tau": None if lst is None else {**_enc_doc(lst), "admissible": str(admissible_tau(lst))},
            }
        return {
            "schema_version": SCHEMA_VERSION,
            "tau": _fmt_fraction(self.tau),
            "legacy_bounds": self.legacy,
            "config": self.config,
            "terms": terms,
            "aggregates": agg,
            "passed": self.passed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["id", "lo", "hi", "claimed_bound", "pass", "cells", "seconds"])
        for row in self.to_dict()["terms"]:
            w.writerow([row["id"], row["lo"], row["hi"], row["claimed_bound"] or "",
                        "" if row["pass"] is None else row["pass"], row["cells"], row["seconds"]])
        d = self.to_dict()["aggregates"]
        for name in ("fixed_sum", "total", "rho_coefficient"):
            w.writerow([name, d[name]["lo"], d[name]["hi"], "", "", "", ""])
        return buf.getvalue()

    def to_human(self) -> str:
        d = self.to_dict()
        lines = [f"tau = {d['tau']}" + ("  (legacy bounds)" if self.legacy else ""), ""]
        lines.append(f"{'term':<5} {'lo':>18} {'hi':>18}  {'check':<22} {'pass':<5} {'cells':>8} {'s':>7}")
        for row in d["terms"]:
            ok = "-" if row["pass"] is None else ("yes" if row["pass"] else "NO")
            lines.append(f"{row['id']:<5} {row['lo']:>18} {row['hi']:>18}  {row['claimed_bound'] or '':<22} "
                         f"{ok:<5} {row['cells']:>8} {row['seconds']:>7.2f}")
        a = d["aggregates"]
        lines.append("")
        lines.append(f"fixed sum        [{a['fixed_sum']['lo']}, {a['fixed_sum']['hi']}]")
        lines.append(f"total S(tau)     [{a['total']['lo']}, {a['total']['hi']}]  "
                     f"< {a['total']['target']}: {a['total']['below_target']}  < 1: {a['total']['below_one']}")
        lines.append(f"rho coefficient  [{a['rho_coefficient']['lo']}, {a['rho_coefficient']['hi']}]  "
                     f"< {a['rho_coefficient']['target']}: {a['rho_coefficient']['below_target']}")
        if a["solved_tau"]:
            lines.append(f"solved tau       [{a['solved_tau']['lo']}, {a['solved_tau']['hi']}]  "
                         f"admissible {a['solved_tau']['admissible']}")
        if "legacy" in a:
            lg = a["legacy"]
            lines.append(f"legacy total     [{lg['total']['lo']}, {lg['total']['hi']}]  "
                         f"< {lg['total']['target']}: {lg['total']['below_target']}")
            if lg["solved_tau"]:
                lines.append(f"legacy tau       admissible {lg['solved_tau']['admissible']}")
        lines.append("")
        lines.append("PASS" if d["passed"] else "FAIL")
        return "\n".join(lines) + "\n"

    def render(self, fmt: str) -> str:
        if fmt == "json":
            return self.to_json()
        if fmt == "csv":
            return self.to_csv()
        if fmt == "human":
            return self.to_human()
        raise ConfigError(f"unknown format {fmt!r}")


def _safe_solve(results) -> Optional[Enclosure]:
    try:
        return solve_tau(results)
    except InfeasibleError:
        return None


def build_report(results: Mapping[TermId, TermResult], tau, legacy: bool = False,
                 config: Optional[dict] = None) -> BoundsReport:
    """Report from computed term results; enclosures are rounded outward first."""
    tau = as_fraction(tau)
    entries = []
    for tid in TermId:
        if tid not in results:
            raise ConfigError(f"missing result for {tid}")
        r = results[tid]
        entries.append(TermEntry(tid, dec_lo(r.enclosure.lo), dec_hi(r.enclosure.hi),
                                 checks_for(tid, tau, legacy),
                                 r.certified, r.budget_exceeded, r.cells_evaluated,
                                 r.wall_time, r.guard_hits))
    return BoundsReport(tau, legacy, entries, config or {})


def read_report(doc: dict) -> BoundsReport:
    """Rebuild a report from its document form (for re-deriving aggregates)."""
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema version {doc.get('schema_version')!r}")
    tau = Fraction(Decimal(doc["tau"])) if "/" not in doc["tau"] else Fraction(doc["tau"])
    legacy = bool(doc.get("legacy_bounds"))
    entries = []
    for row in doc["terms"]:
        tid = TermId.parse(row["id"])
        entries.append(TermEntry(tid, row["lo"], row["hi"], checks_for(tid, tau, legacy),
                                 row["certified"], row["budget_exceeded"], row["cells"], row["seconds"],
                                 row.get("guard_hits", 0)))
    return BoundsReport(tau, legacy, entries, doc.get("config", {}))
