"""End-to-end retrieval simulation over replicated bit-vector databases.

A run generates random message content, prefetches a uniform random cache,
builds the query plan for the requested caching ratio, computes each
database's GF(2) answers, and decodes the desired message, producing an
immutable transcript.  Database unawareness is structural: `answer` receives
only the message store and the equations, never the cache or the desired
index.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import reduce

from .bounds import Params
from .rng import derive_rng
from .scheme import ContractViolation, Equation, QueryPlan, compose_plans, split_for_ratio

__all__ = [
    "MessageStore",
    "CacheState",
    "Transcript",
    "DecodeError",
    "random_store",
    "prefetch",
    "answer",
    "decode",
    "retrieve",
]


@dataclass(frozen=True)
class MessageStore:
    """k messages of identical length, each packed little-endian into one int."""

    count: int
    length: int
    bits: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.bits) != self.count:
            raise ValueError("message count does not match stored messages")
        if any(not 0 <= w < (1 << self.length) for w in self.bits):
            raise ValueError("message content wider than declared length")

    def bit(self, m: int, j: int) -> int:
        return (self.bits[m] >> j) & 1


def random_store(k: int, length: int, seed) -> MessageStore:
    """Uniform random content; each message drawn from its own derived stream."""
    if length < 1:
        raise ValueError(f"message length must be positive, got {length}")
    return MessageStore(
        count=k,
        length=length,
        bits=tuple(derive_rng(seed, "content", m).getrandbits(length) for m in range(k)),
    )


@dataclass(frozen=True)
class CacheState:
    """Per-message cached bit indices and their values, hidden from databases."""

    length: int
    indices: tuple[tuple[int, ...], ...]
    values: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        sizes = {len(idx) for idx in self.indices}
        if len(sizes) > 1:
            raise ValueError("all messages must cache the same number of bits")
        for idx, vals in zip(self.indices, self.values):
            if len(idx) != len(vals):
                raise ValueError("cached values misaligned with cached indices")
            if any(not 0 <= i < self.length for i in idx):
                raise ValueError("cached index outside message length")
            if len(set(idx)) != len(idx):
                raise ValueError("cached indices must be distinct")

    @property
    def bits_per_message(self) -> int:
        return len(self.indices[0]) if self.indices else 0

    def maps(self) -> list[dict[int, int]]:
        return [dict(zip(idx, vals)) for idx, vals in zip(self.indices, self.values)]


def prefetch(store: MessageStore, bits_per_message: int, seed) -> CacheState:
    """Cache a uniform random index subset of every message, values copied in.

    Index choice is independent of message content and of any later desired
    index; only the seed and the message length matter.
    """
    if not 0 <= bits_per_message <= store.length:
        raise ValueError(
            f"cannot cache {bits_per_message} of {store.length} bits per message"
        )
    indices = []
    values = []
    for m in range(store.count):
        rng = derive_rng(seed, "cache", m)
        chosen = tuple(sorted(rng.sample(range(store.length), bits_per_message)))
        indices.append(chosen)
        values.append(tuple(store.bit(m, j) for j in chosen))
    return CacheState(length=store.length, indices=tuple(indices), values=tuple(values))


def answer(store: MessageStore, equations: list[Equation]) -> list[int]:
    """GF(2) sum of the referenced bits, one output bit per equation.

    Pure function of (store, equations): this is the whole database-side
    computation, and by taking no cache and no desired index it cannot leak
    what it never sees.
    """
    out = []
    for eq in equations:
        acc = 0
        for m, j in eq:
            if not (0 <= m < store.count and 0 <= j < store.length):
                raise ContractViolation(f"bit reference ({m}, {j}) out of range")
            acc ^= (store.bits[m] >> j) & 1
        out.append(acc)
    return out


class DecodeError(Exception):
    """Decoding could not complete; carries the offending structure."""

    def __init__(self, reason: str, *, db: int | None = None, equation=None, missing=()):
        self.reason = reason
        self.db = db
        self.equation = tuple(sorted(equation)) if equation is not None else None
        self.missing = tuple(missing)
        parts = [reason]
        if db is not None:
            parts.append(f"db={db}")
        if self.equation is not None:
            parts.append(f"equation={self.equation}")
        if self.missing:
            parts.append(f"missing bits={self.missing}")
        super().__init__("; ".join(parts))


def decode(plan: QueryPlan, answers: list[list[int]], cache: CacheState) -> int:
    """Recover the desired message from the answers, packed little-endian.

    Every downloaded sum without a desired-message term is side information
    whose value is its own answer bit; every sum with a desired term is
    cancelled either against cached bits or against one such side-information
    sum appearing verbatim inside it.  Cached desired bits are copied from
    the cache.  Structural problems (unresolvable sums, unrecovered or
    conflicting bits) raise DecodeError rather than returning wrong content.
    """
    if len(answers) != plan.n:
        raise ContractViolation("answers do not cover every database")
    theta = plan.theta
    side: dict[Equation, int] = {}
    desired: list[tuple[int, Equation, tuple[int, int], int]] = []
    for db, (eqs, bits) in enumerate(zip(plan.per_db, answers)):
        if len(eqs) != len(bits):
            raise ContractViolation(f"answer length mismatch at database {db}")
        for eq, value in zip(eqs, bits):
            own = [ref for ref in eq if ref[0] == theta]
            if not own:
                side[eq] = value
            elif len(own) == 1:
                desired.append((db, eq, own[0], value))
            else:
                raise DecodeError(
                    "equation carries multiple desired-message terms",
                    db=db,
                    equation=eq,
                )

    lookup = cache.maps()
    recovered: dict[int, int] = dict(lookup[theta])
    for db, eq, (_, j), value in desired:
        rest = eq - {(theta, j)}
        if not rest:
            bit = value
        elif rest in side:
            bit = value ^ side[rest]
        elif all(b in lookup[m] for m, b in rest):
            bit = value ^ reduce(lambda acc, ref: acc ^ lookup[ref[0]][ref[1]], rest, 0)
        else:
            raise DecodeError(
                "side information neither cached nor downloaded",
                db=db,
                equation=eq,
            )
        if recovered.get(j, bit) != bit:
            raise DecodeError("conflicting recoveries for desired bit", db=db, equation=eq)
        recovered[j] = bit

    if len(recovered) != plan.length:
        raise DecodeError(
            "desired bits unrecovered",
            missing=sorted(set(range(plan.length)) - recovered.keys()),
        )
    return sum(bit << j for j, bit in recovered.items())


@dataclass(frozen=True)
class Transcript:
    """One full retrieval run, immutable and self-contained for audits."""

    params: Params
    theta: int
    r: Fraction
    seed: object
    plan: QueryPlan
    answers: tuple[tuple[int, ...], ...]
    decoded: int
    per_db_downloads: tuple[int, ...]
    total_downloads: int
    cost: Fraction
    store: MessageStore
    cache: CacheState

    def __post_init__(self) -> None:
        if self.cost != Fraction(self.total_downloads, self.length):
            raise ValueError("normalized cost is not total downloads / message length")

    @property
    def length(self) -> int:
        return self.plan.length

    def decoded_bits(self) -> list[int]:
        return [(self.decoded >> j) & 1 for j in range(self.length)]


def retrieve(
    p: Params, theta: int, r, seed, *, max_denominator: int = 10**6
) -> Transcript:
    """Run one complete retrieval at caching ratio r under one master seed.

    The ratio must be rational with denominator at most `max_denominator`
    (the simulated message length scales with it); analytic bound queries
    have no such limit.  Identical arguments produce bit-identical
    transcripts.
    """
    if not 0 <= theta < p.k:
        raise ValueError(f"theta={theta} outside [0, {p.k - 1}]")
    r = Fraction(r)
    if not 0 <= r <= 1:
        raise ValueError(f"caching ratio {r} outside [0, 1]")
    if r.denominator > max_denominator:
        raise ValueError(
            f"ratio denominator {r.denominator} exceeds simulation limit "
            f"{max_denominator}"
        )

    split = split_for_ratio(p, r)
    store = random_store(p.k, split.total_length, seed)
    cache = prefetch(store, split.cached_per_message, seed)
    plan = compose_plans(p, r, theta, cache, seed)
    per_db_answers = tuple(tuple(answer(store, list(eqs))) for eqs in plan.per_db)
    decoded = decode(plan, [list(a) for a in per_db_answers], cache)
    counts = tuple(len(a) for a in per_db_answers)
    total = sum(counts)
    return Transcript(
        params=p,
        theta=theta,
        r=r,
        seed=seed,
        plan=plan,
        answers=per_db_answers,
        decoded=decoded,
        per_db_downloads=counts,
        total_downloads=total,
        cost=Fraction(total, split.total_length),
        store=store,
        cache=cache,
    )
