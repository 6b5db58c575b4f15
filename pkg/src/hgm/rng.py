"""Splittable, reproducible random streams.

Every sampler in the package takes an explicit ``numpy.random.Generator``.
Substreams are derived from a root seed plus a tuple of integer/string tags,
so parallel trials are reproducible regardless of scheduling.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _tag_to_int(tag) -> int:
    if isinstance(tag, (int, np.integer)):
        return int(tag) & 0xFFFFFFFFFFFFFFFF
    if isinstance(tag, str):
        digest = hashlib.sha256(tag.encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "little")
    raise TypeError(f"unsupported stream tag {tag!r}")


def substream(seed: int, *tags) -> np.random.Generator:
    """Derive an independent generator from (seed, *tags).

    The same (seed, tags) tuple always yields an identical stream; distinct
    tag tuples yield statistically independent streams.
    """
    entropy = [_tag_to_int(seed)] + [_tag_to_int(t) for t in tags]
    return np.random.default_rng(np.random.SeedSequence(entropy))
