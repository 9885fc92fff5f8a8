"""Command-line surface: bound evaluation, table reproduction, exponent
curves, ensemble simulation and code verification.

Exit statuses: 0 success/pass, 1 verification fail, 2 usage error,
3 numeric failure.  Every command is deterministic given its full flag set
(including --seed); output defaults to a human table on a terminal and CSV
when redirected, with --format overriding.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Any, Sequence

from . import bounds, ensemble, verifier
from .numerics import (
    BracketError,
    ConvergenceError,
    DomainError,
    NonFiniteError,
)

EXIT_OK = 0
EXIT_VERIFY_FAIL = 1
EXIT_USAGE = 2
EXIT_NUMERIC = 3

EXCLUDED_STATUS = "excluded: requires external R1(s)"

#: Schema for the JSON output envelope of every command.
OUTPUT_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "ldlab command output",
    "type": "object",
    "required": ["command", "params", "rows"],
    "properties": {
        "command": {"type": "string"},
        "params": {"type": "object"},
        "meta": {"type": "object"},
        "rows": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": {
                    "type": ["number", "string", "boolean", "null"]
                },
            },
        },
    },
}


@dataclass
class RunConfig:
    """Validated parameters of one CLI invocation."""

    command: str
    params: dict[str, Any]
    fmt: str | None = None
    output: str | None = None
    threads: int = 1
    strict: bool = False
    opt_tol: float = 1e-10
    root_tol: float = 1e-12
    extras: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.fmt not in (None, "table", "csv", "json"):
            raise DomainError(f"unknown format {self.fmt!r}")
        if self.threads < 1:
            raise DomainError(f"--threads must be >= 1, got {self.threads}")
        if self.strict:
            self.opt_tol = 1e-12
            self.root_tol = 1e-13
        if self.opt_tol <= 0 or self.root_tol <= 0:
            raise DomainError("tolerances must be positive")


def _fmt_value(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


def _emit(cfg: RunConfig, rows: list[dict[str, Any]], meta: dict[str, Any]) -> None:
    fmt = cfg.fmt
    out = sys.stdout
    if fmt is None:
        fmt = "table" if out.isatty() else "csv"
    if cfg.output:
        out = open(cfg.output, "w", encoding="utf-8", newline="")
    try:
        if fmt == "json":
            doc = {
                "command": cfg.command,
                "params": cfg.params,
                "meta": meta,
                "rows": rows,
            }
            out.write(json.dumps(doc, sort_keys=True, indent=2))
            out.write("\n")
        elif fmt == "csv":
            cols = list(rows[0].keys()) if rows else []
            writer = csv.writer(out, lineterminator="\n")
            writer.writerow(cols)
            for row in rows:
                writer.writerow([_fmt_value(row.get(c)) for c in cols])
        else:
            for k in sorted(meta):
                out.write(f"# {k} = {_fmt_value(meta[k])}\n")
            if rows:
                cols = list(rows[0].keys())
                table = [[_fmt_value(r.get(c)) for c in cols] for r in rows]
                widths = [
                    max(len(c), *(len(tr[i]) for tr in table))
                    for i, c in enumerate(cols)
                ]
                out.write("  ".join(c.ljust(w) for c, w in zip(cols, widths)).rstrip() + "\n")
                for tr in table:
                    out.write("  ".join(v.ljust(w) for v, w in zip(tr, widths)).rstrip() + "\n")
    finally:
        if cfg.output:
            out.close()


# ---------------------------------------------------------------------------
# bound
# ---------------------------------------------------------------------------

_BOUND_FORMULAS = {
    "capacity": "max over Q of h(Q) - (1-(1-Q)^s) h(Q/(1-(1-Q)^s))",
    "rate": "max over Q of A_L(s,Q) / (s+L-1)",
    "exponent": "max over Q, min over q of A(s,Q,q) + L [h(Q) - q h(Q/q) - R]^+",
    "rcrit": "h(Q) - q2 h(Q/q2) at the rate-optimal Q (or curve bisection)",
    "rate-inf": "log2((s-1)^(s-1) / s^s + 1)",
}


def cmd_bound(cfg: RunConfig) -> int:
    p = cfg.params
    kind = p["kind"]
    s, L, Q, R = p.get("s"), p.get("L"), p.get("Q"), p.get("R")
    row: dict[str, Any] = {
        "kind": kind, "s": s, "L": L, "Q": Q, "R": R,
        "value": None, "argmax_Q": None, "root_y": None,
    }
    if kind == "capacity":
        if Q is not None:
            row["value"] = bounds.capacity_at_Q(s, Q)
        else:
            res = bounds.capacity(s, opt_tol=cfg.opt_tol)
            row["value"], row["argmax_Q"] = res.value, res.argmax_Q
    elif kind == "rate":
        if Q is not None:
            row["value"] = bounds.exponent_A_L(s, L, Q) / (s + L - 1)
            row["root_y"] = bounds.y_root_theorem1(s, L, Q)
        else:
            res = bounds.rate_rc(s, L, opt_tol=cfg.opt_tol)
            row["value"], row["argmax_Q"] = res.value, res.argmax_Q
            row["root_y"] = res.q_or_y_root
    elif kind == "exponent":
        if R is None:
            raise DomainError("bound exponent requires --R")
        if Q is not None:
            row["value"] = bounds.exponent_at_Q(s, L, R, Q)
        else:
            res = bounds.exponent(s, L, R, opt_tol=cfg.opt_tol)
            row["value"], row["argmax_Q"] = res.value, res.argmax_Q
    elif kind == "rcrit":
        if cfg.extras.get("method") == "curve":
            row["value"] = bounds.r_critical(s, L)
        else:
            rr = bounds.rate_rc(s, L, opt_tol=cfg.opt_tol)
            row["value"] = bounds.r_critical_at_Q(s, L, rr.argmax_Q)
            row["argmax_Q"] = rr.argmax_Q
    elif kind == "rate-inf":
        row["value"] = bounds.rate_rc_inf(s)
    else:
        raise DomainError(f"unknown bound kind {kind!r}")
    meta = {"formula": _BOUND_FORMULAS[kind]}
    _emit(cfg, [row], meta)
    return EXIT_OK


# ---------------------------------------------------------------------------
# table1
# ---------------------------------------------------------------------------


def _parse_cells(text: str) -> list[tuple[int, int]] | None:
    if text == "all":
        return None
    cells = []
    for part in text.split(";"):
        bits = part.split(",")
        if len(bits) != 2:
            raise DomainError(f"--cells: cannot parse {part!r} (want 's,L')")
        cells.append((int(bits[0]), int(bits[1])))
    return cells


def cmd_table1(cfg: RunConfig) -> int:
    cells = _parse_cells(cfg.params.get("cells", "all"))
    report = bounds.table1(cells=cells, threads=cfg.threads)
    rows: list[dict[str, Any]] = []
    for c in report.cells:
        rows.append({
            "block": "cell", "s": c.s, "L": c.L,
            "Q": c.Q, "rate": c.rate, "r_crit": c.r_cr,
            "capacity": None, "r_crit_1": None,
            "status": EXCLUDED_STATUS if c.excluded else "ok",
        })
    if cells is None:
        for b in report.bottom:
            rows.append({
                "block": "capacity", "s": b.s, "L": None,
                "Q": b.Q, "rate": None, "r_crit": None,
                "capacity": b.capacity, "r_crit_1": b.r_cr_1,
                "status": "ok",
            })
    _emit(cfg, rows, {"threads": cfg.threads})
    return EXIT_OK


# ---------------------------------------------------------------------------
# curve
# ---------------------------------------------------------------------------


def _parse_r_grid(text: str) -> tuple[float, float, int]:
    bits = text.split(":")
    if len(bits) != 3:
        raise DomainError(f"--r-grid: want 'lo:hi:n', got {text!r}")
    lo, hi, n = float(bits[0]), float(bits[1]), int(bits[2])
    if not (0.0 <= lo < hi) or n < 2:
        raise DomainError(f"--r-grid: bad grid {text!r}")
    return lo, hi, n


def _branch_name(R: float, r_cr: float, cap: float) -> str:
    if R < r_cr:
        return "line"
    if R < cap:
        return "curve"
    return "zero"


def cmd_curve(cfg: RunConfig) -> int:
    p = cfg.params
    s, L = p["s"], p["L"]
    lo, hi, n = _parse_r_grid(p["r_grid"])
    rows: list[dict[str, Any]] = []
    if p["q_mode"] == "optimize":
        cap = bounds.capacity(s, opt_tol=cfg.opt_tol)
        r_cr = bounds.r_critical(s, L)
        meta = {"s": s, "L": L, "Q": "optimized",
                "r_critical": r_cr, "capacity": cap.value}
        for i in range(n):
            R = lo + (hi - lo) * i / (n - 1)
            res = bounds.exponent(s, L, R, opt_tol=cfg.opt_tol)
            try:
                deriv = bounds.exponent_derivative_at_Q(s, L, R, res.argmax_Q)
            except DomainError:
                deriv = None
            rows.append({"R": R, "E": res.value, "Q_star": res.argmax_Q,
                         "branch": _branch_name(R, r_cr, cap.value),
                         "dEdR": deriv})
    else:
        Q = p["Q"]
        if Q is None:
            raise DomainError("curve with --q fixed requires --Q")
        curve = bounds.exponent_curve(s, L, Q, lo, hi, n)
        meta = {"s": s, "L": L, "Q": Q,
                "r_critical": curve.r_critical, "capacity": curve.capacity}
        for R, E in curve.samples:
            try:
                deriv = bounds.exponent_derivative_at_Q(s, L, R, Q)
            except DomainError:
                deriv = None
            rows.append({"R": R, "E": E, "Q_star": Q,
                         "branch": _branch_name(R, curve.r_critical, curve.capacity),
                         "dEdR": deriv})
    _emit(cfg, rows, meta)
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def cmd_simulate(cfg: RunConfig) -> int:
    p = cfg.params
    s, L, N, Q = p["s"], p["L"], p["N"], p["Q"]
    if (p.get("t") is None) == (p.get("R") is None):
        raise DomainError("simulate requires exactly one of --t or --R")
    if p.get("t") is not None:
        t = p["t"]
        R = math.log2(t) / N
    else:
        R = p["R"]
        scale = 2.0 ** (R * N)
        t = math.floor(scale) if p.get("floor_t") else math.ceil(scale)
    if t < s + L:
        raise DomainError(f"simulate: t={t} smaller than s+L={s + L}")
    spec = ensemble.EnsembleSpec(N=N, t=t, Q=Q, seed=p["seed"])
    mode = p["mode"]
    row: dict[str, Any] = {
        "s": s, "L": L, "N": N, "t": t, "w": spec.w, "Q": Q, "R": R,
        "exact": None, "union_bound": None, "lemma1_lower": None,
        "mc_estimate": None, "mc_stderr": None, "mc_trials": None,
        "theory_exponent": None, "theory_prob_log2": None,
    }
    if mode in ("exact", "both"):
        row["exact"] = ensemble.exact_bad_prob(s, L, spec)
        row["union_bound"] = ensemble.union_bound_bad_prob(s, L, spec)
        row["lemma1_lower"] = ensemble.lemma1_lower_bad_prob(s, L, spec)
    if mode in ("mc", "both"):
        est = ensemble.monte_carlo_bad_prob(
            s, L, spec, trials=p["trials"], streams=p["streams"]
        )
        row["mc_estimate"] = est.estimate
        row["mc_stderr"] = est.stderr
        row["mc_trials"] = est.trials
    e_theory = bounds.exponent_at_Q(s, L, R, Q)
    row["theory_exponent"] = e_theory
    row["theory_prob_log2"] = -N * e_theory
    _emit(cfg, [row], {"seed": p["seed"], "mode": mode})
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


def cmd_verify(cfg: RunConfig) -> int:
    p = cfg.params
    s, L, eps = p["s"], p["L"], p["epsilon"]
    with open(p["code_file"], "r", encoding="utf-8") as fh:
        code = verifier.parse_code(fh.read())
    if p["mode"] == "sampled":
        report = verifier.count_bad_sampled(code, s, L, p["samples"], seed=p["seed"])
    else:
        report = verifier.count_bad(code, s, L, budget=p["budget"])
    passed = report.epsilon <= eps
    row: dict[str, Any] = {
        "N": code.N, "t": code.t, "s": s, "L": L, "mode": report.mode,
        "bad": report.bad, "good": report.good, "total": report.total,
        "epsilon": report.epsilon, "stderr": report.stderr,
        "threshold": eps, "pass": passed,
        "witness_S": None, "witness_covered": None,
    }
    if report.witness is not None:
        row["witness_S"] = " ".join(map(str, report.witness[0]))
        row["witness_covered"] = " ".join(map(str, report.witness[1]))
    _emit(cfg, [row], {"file": p["code_file"]})
    return EXIT_OK if passed else EXIT_VERIFY_FAIL


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _default_threads() -> int:
    env = os.environ.get("LDLAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _add_common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--format", choices=("table", "csv", "json"), default=None,
                    help="output format (default: table on a tty, csv otherwise)")
    sp.add_argument("--output", default=None, help="write output to this path")
    sp.add_argument("--threads", type=int, default=_default_threads(),
                    help="worker pool size (results are thread-count independent)")
    sp.add_argument("--strict", action="store_true",
                    help="tighten tolerances to 1e-13/1e-12 for regression fixtures")
    sp.add_argument("--opt-tol", type=float, default=1e-10,
                    help="argmax tolerance for scalar maximizations")
    sp.add_argument("--root-tol", type=float, default=1e-12,
                    help="bracket-width tolerance for root solves")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="ldlab",
        description="Bounds, ensemble simulation and verification for "
                    "almost disjunctive list-decoding codes.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bound", help="evaluate one analytic bound")
    b.add_argument("kind", choices=("capacity", "rate", "exponent", "rcrit", "rate-inf"))
    b.add_argument("--s", type=int, required=True)
    b.add_argument("--L", type=int, default=None)
    b.add_argument("--Q", type=float, default=None)
    b.add_argument("--R", type=float, default=None)
    b.add_argument("--method", choices=("at-rate-q", "curve"), default="at-rate-q",
                   help="rcrit only: fixed-Q knee at the rate-optimal Q, or "
                        "bisection on the optimized exponent curve")
    _add_common(b)

    t = sub.add_parser("table1", help="reproduce the optimized-bound table")
    t.add_argument("--cells", default="all",
                   help="'all' or a semicolon list like '2,2;3,4'")
    _add_common(t)

    c = sub.add_parser("curve", help="sample an exponent-vs-rate curve")
    c.add_argument("--s", type=int, required=True)
    c.add_argument("--L", type=int, required=True)
    c.add_argument("--q", dest="q_mode", choices=("fixed", "optimize"), default="fixed")
    c.add_argument("--Q", type=float, default=None, help="weight for --q fixed")
    c.add_argument("--r-grid", required=True, help="rate grid as lo:hi:n")
    _add_common(c)

    m = sub.add_parser("simulate", help="evaluate the random ensemble")
    m.add_argument("--s", type=int, required=True)
    m.add_argument("--L", type=int, required=True)
    m.add_argument("--N", type=int, required=True)
    m.add_argument("--t", type=int, default=None)
    m.add_argument("--R", type=float, default=None)
    m.add_argument("--Q", type=float, required=True)
    m.add_argument("--mode", choices=("exact", "mc", "both"), default="both")
    m.add_argument("--trials", type=int, default=100_000)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--streams", type=int, default=8,
                   help="independent RNG streams merged by summing hits")
    m.add_argument("--floor-t", action="store_true",
                   help="use t = floor(2^(R N)) instead of the ceiling")
    _add_common(m)

    v = sub.add_parser("verify", help="verify an explicit code file")
    v.add_argument("code_file")
    v.add_argument("--s", type=int, required=True)
    v.add_argument("--L", type=int, required=True)
    v.add_argument("--epsilon", type=float, default=0.0)
    v.add_argument("--mode", choices=("exact", "sampled"), default="exact")
    v.add_argument("--samples", type=int, default=100_000)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--budget", type=int, default=verifier.DEFAULT_SUBSET_BUDGET)
    _add_common(v)
    return ap


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    params: dict[str, Any]
    extras: dict[str, Any] = {}
    if args.command == "bound":
        if args.kind in ("rate", "exponent", "rcrit") and args.L is None:
            raise DomainError(f"bound {args.kind} requires --L")
        params = {"kind": args.kind, "s": args.s, "L": args.L,
                  "Q": args.Q, "R": args.R}
        extras = {"method": args.method}
    elif args.command == "table1":
        params = {"cells": args.cells}
    elif args.command == "curve":
        params = {"s": args.s, "L": args.L, "q_mode": args.q_mode,
                  "Q": args.Q, "r_grid": args.r_grid}
    elif args.command == "simulate":
        params = {"s": args.s, "L": args.L, "N": args.N, "t": args.t,
                  "R": args.R, "Q": args.Q, "mode": args.mode,
                  "trials": args.trials, "seed": args.seed,
                  "streams": args.streams, "floor_t": args.floor_t}
    else:
        params = {"code_file": args.code_file, "s": args.s, "L": args.L,
                  "epsilon": args.epsilon, "mode": args.mode,
                  "samples": args.samples, "seed": args.seed,
                  "budget": args.budget}
    cfg = RunConfig(
        command=args.command,
        params=params,
        fmt=args.format,
        output=args.output,
        threads=args.threads,
        strict=args.strict,
        opt_tol=args.opt_tol,
        root_tol=args.root_tol,
        extras=extras,
    )
    return cfg


_DISPATCH = {
    "bound": cmd_bound,
    "table1": cmd_table1,
    "curve": cmd_curve,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
}


def main(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        cfg = _config_from_args(args)
        return _DISPATCH[args.command](cfg)
    except (DomainError, verifier.CodeFormatError, FileNotFoundError) as exc:
        print(f"ldlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (BracketError, ConvergenceError, NonFiniteError,
            ensemble.EnumerationBudgetError, ArithmeticError) as exc:
        print(f"ldlab: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except verifier.SubsetBudgetError as exc:
        print(f"ldlab: numeric failure: {exc} (try --mode sampled)", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
