"""Named, reproducible random substreams.

Every random decision in the package flows from one root seed expanded into
named substreams, e.g. ``generator(seed, "sampling", epoch, bag_id)``.
Substreams are independent of each other and of the order in which they are
drawn, so per-bag sampling gives identical results under serial and parallel
bag processing.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _key_to_int(key) -> int:
    """Stable 64-bit digest of a substream path component."""
    if isinstance(key, (int, np.integer)):
        return int(key) & 0xFFFFFFFFFFFFFFFF
    digest = hashlib.blake2s(str(key).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def substream(seed: int, *path) -> np.random.SeedSequence:
    """Derive a SeedSequence for the substream named by ``path``."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [_key_to_int(k) for k in path]
    return np.random.SeedSequence(entropy)


def generator(seed: int, *path) -> np.random.Generator:
    """A fresh Generator on the substream named by ``path``."""
    return np.random.default_rng(substream(seed, *path))


def derive_int(seed: int, *path) -> int:
    """A 64-bit integer seed derived from the named substream."""
    words = substream(seed, *path).generate_state(2, dtype=np.uint32)
    return int.from_bytes(words.tobytes(), "little")
