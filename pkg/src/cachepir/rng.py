"""Deterministic sub-seed derivation.

Every randomized step of a run (message content, cache index choice, bit
consumption order per message, per-database query shuffle, Monte-Carlo
trials) draws from its own stream derived from one master seed and a label
path, so reruns are bit-identical and streams for different purposes never
alias.
"""

from __future__ import annotations

import random


def derive_rng(seed, *labels) -> random.Random:
    """Random stream for (seed, *labels).

    String seeding of `random.Random` hashes the bytes, which is stable
    across runs and platforms; the ":"-joined label path keeps distinct
    purposes on distinct streams.
    """
    return random.Random(":".join(str(part) for part in (seed, *labels)))
