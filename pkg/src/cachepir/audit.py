"""Verification instruments for transcripts and query plans.

Decodability is double-checked: the decoder is re-run, and independently the
GF(2) span of {downloaded equations} ∪ {cached-bit unit vectors} must contain
every unit vector of the desired message.  Costs are reconciled exactly
against the bounds module.  Privacy is audited on per-database *signatures*:
the canonical form of a query list with bit identities erased but message
identities and bit-reuse structure kept.  Under the uniform per-message index
permutation the raw indices are exchangeable, so the signature is the
permutation-invariant statistic a database could actually act on.  Signatures
are compared exactly (full enumeration of the randomness space, tiny
instances only) or statistically (Monte-Carlo total-variation estimate).

Mutation operators provide negative controls: an audit that cannot fail is
worthless.  Note that `sort_queries` (the skipped-shuffle stand-in) does NOT
fail the structural census on purpose: query order is not part of the census,
only the distributional audits see it, and the signature quotients it out.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, replace
from fractions import Fraction
from itertools import combinations, permutations, product
from math import factorial

from .bounds import Params, binom, corner_download_total, corner_message_length, outer_bound
from .protocol import CacheState, DecodeError, Transcript, decode
from .rng import derive_rng
from .scheme import QueryPlan, build_corner_plan, corner_equations

__all__ = [
    "Signature",
    "PrivacyReport",
    "plan_signature",
    "verify_decodability",
    "verify_cost",
    "structural_symmetry",
    "enumerate_privacy",
    "montecarlo_privacy",
    "drop_undesired_equation",
    "bias_mixture_assignment",
    "skip_message_symmetry",
    "sort_queries",
]

Signature = tuple


def plan_signature(equations) -> Signature:
    """Canonical form of one database's query list.

    Bit identities are erased, message identities and the repetition
    structure of bit references are kept: each reference is colored by
    (message, multiplicity), each equation by the sorted multiset of its
    reference colors, then references are refined once by the sorted multiset
    of colors of the equations containing them.  The result is invariant
    under query reordering and per-message bit relabeling, and never reads a
    desired index.
    """
    eqs = [tuple(sorted(eq)) for eq in equations]
    multiplicity = Counter(ref for eq in eqs for ref in eq)
    base = {ref: (ref[0], count) for ref, count in multiplicity.items()}
    eq_colors = [tuple(sorted(base[ref] for ref in eq)) for eq in eqs]
    containing = defaultdict(list)
    for color, eq in zip(eq_colors, eqs):
        for ref in eq:
            containing[ref].append(color)
    refined = {
        ref: (base[ref], tuple(sorted(containing[ref]))) for ref in multiplicity
    }
    return tuple(sorted(tuple(sorted(refined[ref] for ref in eq)) for eq in eqs))


@dataclass(frozen=True)
class PrivacyReport:
    """Outcome of one privacy audit; `distance` is the worst per-database value."""

    mode: str
    passed: bool
    distance: object
    per_db: tuple
    threshold: object
    trials: int | None = None
    seed: object = None
    detail: str = ""


def _span_basis(rows: list[int]) -> dict[int, int]:
    basis: dict[int, int] = {}
    for row in rows:
        while row:
            pivot = row.bit_length() - 1
            if pivot in basis:
                row ^= basis[pivot]
            else:
                basis[pivot] = row
                break
    return basis


def _in_span(vec: int, basis: dict[int, int]) -> bool:
    while vec:
        pivot = vec.bit_length() - 1
        if pivot not in basis:
            return False
        vec ^= basis[pivot]
    return True


def verify_decodability(t: Transcript) -> bool:
    """Decode equality plus an algebra-independent GF(2) rank check.

    True iff re-running the decoder reproduces the stored desired message
    bit-for-bit AND the span of the downloaded equations together with all
    cached-bit unit vectors contains every unit vector of the desired
    message.
    """
    try:
        redecoded = decode(t.plan, [list(a) for a in t.answers], t.cache)
    except DecodeError:
        return False
    if redecoded != t.decoded or redecoded != t.store.bits[t.theta]:
        return False

    length = t.length
    rows = [
        sum(1 << (m * length + j) for m, j in eq)
        for eqs in t.plan.per_db
        for eq in eqs
    ]
    rows.extend(
        1 << (m * length + j)
        for m in range(t.params.k)
        for j in t.cache.indices[m]
    )
    basis = _span_basis(rows)
    offset = t.theta * length
    return all(_in_span(1 << (offset + j), basis) for j in range(length))


def verify_cost(t: Transcript) -> bool:
    """Equal per-database load and normalized cost exactly on the outer bound."""
    if len(set(t.per_db_downloads)) > 1:
        return False
    if sum(t.per_db_downloads) != t.total_downloads:
        return False
    return Fraction(t.total_downloads, t.length) == outer_bound(t.params, t.r)


def structural_symmetry(plan: QueryPlan) -> PrivacyReport:
    """Census check: equal equation counts over every message subset of each size.

    For each database and each equation size t, the number of equations
    touching each t-subset of the k messages must be the same for all
    binom(k, t) subsets; this is the structural face of message symmetry.
    Query order is deliberately ignored.
    """
    per_db = []
    violations = []
    for db, eqs in enumerate(plan.per_db):
        census = Counter(
            (len(eq), frozenset(m for m, _ in eq)) for eq in eqs
        )
        worst = Fraction(0)
        for size in sorted({size for size, _ in census}):
            counts = [
                census.get((size, frozenset(sub)), 0)
                for sub in combinations(range(plan.k), size)
            ]
            low, high = min(counts), max(counts)
            if low != high:
                worst = max(worst, 1 - Fraction(low, high))
                violations.append(
                    f"db {db}: size-{size} subset counts range {low}..{high}"
                )
        per_db.append(worst)
    distance = max(per_db, default=Fraction(0))
    return PrivacyReport(
        mode="structural",
        passed=distance == 0,
        distance=distance,
        per_db=tuple(per_db),
        threshold=Fraction(0),
        detail="; ".join(violations),
    )


def _tv_exact(a: Counter, b: Counter, total: int) -> Fraction:
    keys = set(a) | set(b)
    return Fraction(sum(abs(a[k] - b[k]) for k in keys), 2 * total)


def enumerate_privacy(p: Params, s: int, *, max_outcomes: int = 10**7) -> PrivacyReport:
    """Exact signature distributions over the whole randomness space.

    Enumerates every per-message index permutation (cache placement plus both
    consumption orders) for every desired index and compares the resulting
    per-database signature distributions; passes only on total-variation
    distance exactly 0.  Query shuffles are counted in the size guard but not
    iterated: the signature is order-invariant, so they scale every
    distribution uniformly.
    """
    length = corner_message_length(p, s)
    cached = binom(p.k - 2, s - 1)
    per_db_eqs = corner_download_total(p, s) // p.n
    outcomes = factorial(length) ** p.k * factorial(per_db_eqs) ** p.n
    if outcomes > max_outcomes:
        raise ValueError(
            f"instance too large for exact enumeration: {outcomes} outcomes "
            f"exceed the {max_outcomes} guard"
        )

    dists: dict[tuple[int, int], Counter] = defaultdict(Counter)
    for theta in range(p.k):
        for perms in product(permutations(range(length)), repeat=p.k):
            cached_order = [list(perm[:cached]) for perm in perms]
            fresh_order = [list(perm[cached:]) for perm in perms]
            per_db = corner_equations(p, s, theta, cached_order, fresh_order)
            for db, eqs in enumerate(per_db):
                dists[theta, db][plan_signature(eqs)] += 1

    total = factorial(length) ** p.k
    per_db = []
    for db in range(p.n):
        worst = Fraction(0)
        for a, b in combinations(range(p.k), 2):
            worst = max(worst, _tv_exact(dists[a, db], dists[b, db], total))
        per_db.append(worst)
    distance = max(per_db)
    return PrivacyReport(
        mode="exact",
        passed=distance == 0,
        distance=distance,
        per_db=tuple(per_db),
        threshold=Fraction(0),
        trials=outcomes,
    )


def _indices_only_cache(length: int, per_message: list[tuple[int, ...]]) -> CacheState:
    # Planning reads cache indices only; zero values keep the audit content-free.
    return CacheState(
        length=length,
        indices=tuple(per_message),
        values=tuple((0,) * len(idx) for idx in per_message),
    )


def montecarlo_privacy(
    p: Params,
    s: int,
    trials: int,
    seed,
    *,
    threshold: float = 0.05,
    mutation=None,
) -> PrivacyReport:
    """Estimate the signature total-variation distance between two desired indices.

    Samples `trials` fresh (cache, plan) pairs for desired index 0 and again
    for index 1 and compares the empirical per-database signature
    distributions; passes when the worst estimate stays below `threshold`
    (0.05 is a loose bound on multinomial sampling noise at 10^4 trials).
    `mutation` hooks a plan transform in front of the statistic, which is how
    the negative controls are exercised.
    """
    if trials < 1000:
        raise ValueError(f"need at least 1000 trials, got {trials}")
    length = corner_message_length(p, s)
    cached = binom(p.k - 2, s - 1)
    counters: dict[tuple[int, int], Counter] = defaultdict(Counter)
    for theta in (0, 1):
        for trial in range(trials):
            rng = derive_rng(seed, "mc-cache", theta, trial)
            per_message = [
                tuple(sorted(rng.sample(range(length), cached)))
                for _ in range(p.k)
            ]
            cache = _indices_only_cache(length, per_message)
            plan = build_corner_plan(p, s, theta, cache, f"{seed}:mc:{theta}:{trial}")
            if mutation is not None:
                plan = mutation(plan)
            for db, eqs in enumerate(plan.per_db):
                counters[theta, db][plan_signature(eqs)] += 1

    per_db = []
    for db in range(p.n):
        a, b = counters[0, db], counters[1, db]
        keys = set(a) | set(b)
        per_db.append(sum(abs(a[k] - b[k]) for k in keys) / (2 * trials))
    distance = max(per_db)
    return PrivacyReport(
        mode="montecarlo",
        passed=distance < threshold,
        distance=distance,
        per_db=tuple(per_db),
        threshold=threshold,
        trials=trials,
        seed=seed,
    )


def _single_corner(plan: QueryPlan) -> int:
    real = [(s, count) for s, count in plan.blocks if s is not None]
    if len(real) != 1 or real[0][1] != 1:
        raise ValueError("mutation operators expect a single-corner plan")
    return real[0][0]


def skip_message_symmetry(plan: QueryPlan) -> QueryPlan:
    """Negative control: strip every undesired equation.

    The remaining queries all touch the desired message, so the census is
    lopsided and the signature distributions of different desired indices
    separate completely.
    """
    per_db = tuple(
        tuple(eq for eq in eqs if any(m == plan.theta for m, _ in eq))
        for eqs in plan.per_db
    )
    return replace(plan, per_db=per_db)


def drop_undesired_equation(plan: QueryPlan) -> QueryPlan:
    """Negative control: delete one undesired equation from the first database."""
    eqs = list(plan.per_db[0])
    for i, eq in enumerate(eqs):
        if all(m != plan.theta for m, _ in eq):
            del eqs[i]
            break
    else:
        raise ValueError("plan has no undesired equation to drop")
    return replace(plan, per_db=(tuple(eqs),) + plan.per_db[1:])


def bias_mixture_assignment(plan: QueryPlan) -> QueryPlan:
    """Negative control: collapse every cached-bit mixture onto one message subset.

    All opening-round desired equations are rewritten to reuse the
    lexicographically smallest mixture, skewing the per-subset census and
    introducing bit reuse the signature can see.
    """
    s = _single_corner(plan)
    if s < 1:
        raise ValueError("corner s=0 has no cached-bit mixtures to bias")
    size = s + 1
    mixtures = []
    for eqs in plan.per_db:
        for eq in eqs:
            if len(eq) == size and any(m == plan.theta for m, _ in eq):
                mixtures.append(frozenset(ref for ref in eq if ref[0] != plan.theta))
    pinned = min(mixtures, key=lambda mix: tuple(sorted(mix)))
    per_db = []
    for eqs in plan.per_db:
        rewritten = []
        for eq in eqs:
            own = [ref for ref in eq if ref[0] == plan.theta]
            if len(eq) == size and own:
                rewritten.append(frozenset(own) | pinned)
            else:
                rewritten.append(eq)
        per_db.append(tuple(rewritten))
    return replace(plan, per_db=tuple(per_db))


def sort_queries(plan: QueryPlan) -> QueryPlan:
    """Order-normalized plan, standing in for a skipped final shuffle.

    Passes structural_symmetry by design (the census ignores order); it
    exists to document that boundary of the structural check.
    """
    per_db = tuple(
        tuple(sorted(eqs, key=lambda eq: tuple(sorted(eq)))) for eqs in plan.per_db
    )
    return replace(plan, per_db=per_db)
