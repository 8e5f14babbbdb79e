"""Command-line front end.

Subcommands: `bounds` (corner tables and point queries), `curve` (tradeoff
data behind the plots, CSV or JSON), `simulate` (one seeded retrieval run
with audits, optional transcript persistence), `audit` (structural / exact /
Monte-Carlo privacy checks), and `gap` (inner-corner gap table and the
asymptotic worst case).

Exit codes are a stable contract: 0 on success, 1 on verification or
operational failure, 2 on usage errors.  Ratios are parsed strictly as
``p/q`` or an integer.  Files render every rational both as an exact ``p/q``
token and as a decimal; the decimals are advisory, exactness lives in the
fractions.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from decimal import Decimal, localcontext
from fractions import Fraction

from . import audit as audit_mod
from .bounds import (
    Params,
    binom,
    corner_message_length,
    corner_points,
    corner_ratio,
    curve_point,
    gap as gap_at,
    inner_corner,
    worst_case_gap,
)
from .protocol import CacheState, DecodeError, MessageStore, Transcript, retrieve
from .rng import derive_rng
from .scheme import QueryPlan, build_corner_plan

CURVE_HEADER = (
    "r,r_exact,outer,outer_exact,inner,inner_exact,"
    "baseline,baseline_exact,gap,gap_exact"
)

_RATIO_RE = re.compile(r"^[+-]?\d+(/\d+)?$")


def parse_ratio(text: str) -> Fraction:
    """Strict ``p/q`` or integer ratio parser."""
    if not _RATIO_RE.match(text):
        raise ValueError(f"ratio must be an integer or p/q, got {text!r}")
    return Fraction(text)


def fraction_token(value: Fraction) -> str:
    """Canonical ``p/q`` rendering used in files (denominator always explicit)."""
    return f"{value.numerator}/{value.denominator}"


def decimal_str(value: Fraction, precision: int = 12) -> str:
    """Exactly-rounded decimal with `precision` significant digits."""
    with localcontext() as ctx:
        ctx.prec = precision
        quotient = Decimal(value.numerator) / Decimal(value.denominator)
    return str(quotient)


# ---------------------------------------------------------------------------
# transcript files


def transcript_to_dict(t: Transcript) -> dict:
    return {
        "k": t.params.k,
        "n": t.params.n,
        "theta": t.theta,
        "r": fraction_token(t.r),
        "seed": t.seed,
        "length": t.length,
        "blocks": [[s, count] for s, count in t.plan.blocks],
        "per_db": [
            [[list(ref) for ref in sorted(eq)] for eq in eqs]
            for eqs in t.plan.per_db
        ],
        "answers": [list(a) for a in t.answers],
        "decoded": t.decoded_bits(),
        "cache": {
            "indices": [list(idx) for idx in t.cache.indices],
            "values": [list(vals) for vals in t.cache.values],
        },
        "messages": [f"{w:0{(t.length + 3) // 4}x}" for w in t.store.bits],
        "per_db_downloads": list(t.per_db_downloads),
        "total_downloads": t.total_downloads,
        "cost": fraction_token(t.cost),
    }


def transcript_from_dict(data: dict) -> Transcript:
    params = Params(data["k"], data["n"])
    length = data["length"]
    plan = QueryPlan(
        k=params.k,
        n=params.n,
        length=length,
        theta=data["theta"],
        r=Fraction(data["r"]),
        seed=data["seed"],
        blocks=tuple((s, count) for s, count in data["blocks"]),
        per_db=tuple(
            tuple(frozenset((m, b) for m, b in eq) for eq in eqs)
            for eqs in data["per_db"]
        ),
    )
    cache = CacheState(
        length=length,
        indices=tuple(tuple(idx) for idx in data["cache"]["indices"]),
        values=tuple(tuple(vals) for vals in data["cache"]["values"]),
    )
    store = MessageStore(
        count=params.k,
        length=length,
        bits=tuple(int(w, 16) for w in data["messages"]),
    )
    decoded = sum(bit << j for j, bit in enumerate(data["decoded"]))
    return Transcript(
        params=params,
        theta=data["theta"],
        r=Fraction(data["r"]),
        seed=data["seed"],
        plan=plan,
        answers=tuple(tuple(a) for a in data["answers"]),
        decoded=decoded,
        per_db_downloads=tuple(data["per_db_downloads"]),
        total_downloads=data["total_downloads"],
        cost=Fraction(data["cost"]),
        store=store,
        cache=cache,
    )


def write_transcript(t: Transcript, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(transcript_to_dict(t), fh, indent=1)
        fh.write("\n")


def load_transcript(path: str) -> Transcript:
    with open(path, encoding="utf-8") as fh:
        return transcript_from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# curve files


def curve_grid(p: Params, samples: int) -> list[Fraction]:
    """Uniform grid joined with every outer corner and inner corner."""
    grid = {Fraction(j, samples - 1) for j in range(samples)}
    grid.update(corner_ratio(p, s) for s in range(p.k))
    grid.update(inner_corner(p, i) for i in range(1, p.k))
    grid.add(Fraction(1))
    return sorted(grid)


def curve_rows(p: Params, samples: int):
    return [curve_point(p, r) for r in curve_grid(p, samples)]


def write_curve_csv(p: Params, samples: int, precision: int, fh) -> None:
    fh.write(CURVE_HEADER + "\n")
    for pt in curve_rows(p, samples):
        cells = []
        for value in (pt.r, pt.outer, pt.inner, pt.baseline, pt.gap):
            cells.append(decimal_str(value, precision))
            cells.append(fraction_token(value))
        fh.write(",".join(cells) + "\n")


def write_curve_json(p: Params, samples: int, precision: int, fh) -> None:
    points = []
    for pt in curve_rows(p, samples):
        entry = {}
        for name, value in (
            ("r", pt.r),
            ("outer", pt.outer),
            ("inner", pt.inner),
            ("baseline", pt.baseline),
            ("gap", pt.gap),
        ):
            entry[name] = fraction_token(value)
            entry[name + "_decimal"] = decimal_str(value, precision)
        points.append(entry)
    json.dump(
        {"k": p.k, "n": p.n, "samples": samples, "precision": precision, "points": points},
        fh,
        indent=1,
    )
    fh.write("\n")


# ---------------------------------------------------------------------------
# subcommands


def _show(value: Fraction, precision: int) -> str:
    return f"{value}  ({decimal_str(value, precision)})"


def cmd_bounds(args) -> int:
    p = Params(args.k, args.n)
    precision = args.precision
    print(f"corner points for k={p.k} messages, n={p.n} databases")
    print(f"{'s':>4} {'r_s':>14} {'L(s)':>10} {'D(r_s)':>10}  cost")
    for corner in corner_points(p):
        print(
            f"{corner.s:>4} {str(corner.ratio):>14} {corner.msg_len:>10} "
            f"{corner.total_download:>10}  {_show(corner.cost, precision)}"
        )
    print(f"{'-':>4} {'1':>14} {'-':>10} {'0':>10}  0")
    if args.r is not None:
        pt = curve_point(p, args.r)
        print(f"at r = {pt.r}:")
        print(f"  outer    = {_show(pt.outer, precision)}")
        print(f"  inner    = {_show(pt.inner, precision)}")
        print(f"  baseline = {_show(pt.baseline, precision)}")
        print(f"  gap      = {_show(pt.gap, precision)}")
    return 0


def cmd_curve(args) -> int:
    p = Params(args.k, args.n)
    if args.samples < 2:
        raise ValueError(f"need at least 2 samples, got {args.samples}")
    writer = write_curve_csv if args.format == "csv" else write_curve_json
    if args.out is None:
        writer(p, args.samples, args.precision, sys.stdout)
    else:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            writer(p, args.samples, args.precision, fh)
        print(f"wrote {args.format} curve for k={p.k}, n={p.n} to {args.out}")
    return 0


def cmd_simulate(args) -> int:
    p = Params(args.k, args.n)
    if (args.r is None) == (args.s is None):
        raise ValueError("give exactly one of --r and --s")
    r = args.r if args.r is not None else corner_ratio(p, args.s)
    precision = args.precision
    try:
        t = retrieve(p, args.theta, r, args.seed)
    except DecodeError as err:
        print(f"decode failed: {err}", file=sys.stderr)
        return 1
    decoded_ok = t.decoded == t.store.bits[t.theta]
    cost_ok = audit_mod.verify_cost(t)
    rank_ok = audit_mod.verify_decodability(t)
    symmetry = audit_mod.structural_symmetry(t.plan)
    print(
        f"k={p.k} n={p.n} theta={t.theta} r={t.r} seed={args.seed} "
        f"length={t.length}"
    )
    print(f"downloads per database: {list(t.per_db_downloads)} (total {t.total_downloads})")
    print(f"cost = {_show(t.cost, precision)}")
    print(f"decode exact:        {'pass' if decoded_ok else 'FAIL'}")
    print(f"cost reconciliation: {'pass' if cost_ok else 'FAIL'}")
    print(f"decodability rank:   {'pass' if rank_ok else 'FAIL'}")
    print(f"structural symmetry: {'pass' if symmetry.passed else 'FAIL'}")
    if args.out is not None:
        write_transcript(t, args.out)
        print(f"transcript written to {args.out}")
    return 0 if decoded_ok and cost_ok and rank_ok and symmetry.passed else 1


def _plan_for_audit(p: Params, s: int, seed) -> QueryPlan:
    length = corner_message_length(p, s)
    cached = binom(p.k - 2, s - 1)
    rng = derive_rng(seed, "audit-cache")
    indices = tuple(
        tuple(sorted(rng.sample(range(length), cached))) for _ in range(p.k)
    )
    cache = CacheState(
        length=length,
        indices=indices,
        values=tuple((0,) * cached for _ in range(p.k)),
    )
    return build_corner_plan(p, s, 0, cache, seed)


def _print_report(report) -> None:
    print(f"mode:      {report.mode}")
    print(f"distance:  {report.distance}  (threshold {report.threshold})")
    print(f"per-db:    {list(report.per_db)}")
    if report.trials is not None:
        print(f"trials:    {report.trials}")
    if report.detail:
        print(f"detail:    {report.detail}")
    print(f"verdict:   {'pass' if report.passed else 'FAIL'}")


def cmd_audit(args) -> int:
    p = Params(args.k, args.n)
    if args.mode == "structural":
        report = audit_mod.structural_symmetry(_plan_for_audit(p, args.s, args.seed))
    elif args.mode == "exact":
        report = audit_mod.enumerate_privacy(p, args.s)
    else:
        report = audit_mod.montecarlo_privacy(p, args.s, args.trials, args.seed)
    _print_report(report)
    return 0 if report.passed else 1


def cmd_gap(args) -> int:
    if args.kmax < 2:
        raise ValueError(f"--kmax must be at least 2, got {args.kmax}")
    p = Params(args.kmax, args.n)
    precision = args.precision
    print(f"gap at the inner corners for k={p.k}, n={p.n}")
    for i in range(1, p.k):
        r = inner_corner(p, i)
        print(f"  i={i:<3} r={str(r):<28} gap={_show(gap_at(p, r), precision)}")
    if args.asymptotic:
        r_star, delta = worst_case_gap(args.n, max(args.kmax, 10))
        print("asymptotic worst case (outer asymptote vs converse):")
        print(f"  argmax r = {r_star}")
        print(f"  max gap  = {_show(delta, precision)}")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cachepir",
        description=(
            "Exact bounds, query plans, simulation, and privacy audits for "
            "cache-aided private information retrieval with unknown uncoded "
            "prefetching."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(sp, *, k=True):
        if k:
            sp.add_argument("--k", type=int, required=True, help="number of messages")
        sp.add_argument("--n", type=int, required=True, help="number of databases")
        sp.add_argument(
            "--precision",
            type=int,
            default=12,
            help="significant digits for decimal rendering",
        )

    sp = sub.add_parser("bounds", help="corner table and point bounds")
    add_common(sp)
    sp.add_argument("--r", type=parse_ratio, help="caching ratio p/q to evaluate")
    sp.set_defaults(handler=cmd_bounds)

    sp = sub.add_parser("curve", help="emit the tradeoff curve")
    add_common(sp)
    sp.add_argument("--samples", type=int, default=101, help="uniform grid size")
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    sp.add_argument("--out", help="output path (stdout when omitted)")
    sp.set_defaults(handler=cmd_curve)

    sp = sub.add_parser("simulate", help="run one seeded retrieval")
    add_common(sp)
    sp.add_argument("--theta", type=int, required=True, help="desired message index")
    sp.add_argument("--r", type=parse_ratio, help="caching ratio p/q")
    sp.add_argument("--s", type=int, help="corner index instead of --r")
    sp.add_argument("--seed", type=int, required=True, help="master seed")
    sp.add_argument("--out", help="write the transcript to this path")
    sp.set_defaults(handler=cmd_simulate)

    sp = sub.add_parser("audit", help="privacy audits over fresh plans")
    add_common(sp)
    sp.add_argument("--s", type=int, required=True, help="corner index")
    sp.add_argument(
        "--mode", choices=("structural", "exact", "montecarlo"), required=True
    )
    sp.add_argument("--trials", type=int, default=10000)
    sp.add_argument("--seed", type=int, required=True, help="master seed")
    sp.set_defaults(handler=cmd_audit)

    sp = sub.add_parser("gap", help="inner-corner gap table and worst case")
    add_common(sp, k=False)
    sp.add_argument("--kmax", type=int, default=100, help="message count to evaluate")
    sp.add_argument(
        "--asymptotic",
        action="store_true",
        help="also report the asymptotic worst-case gap and its argmax",
    )
    sp.set_defaults(handler=cmd_gap)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
