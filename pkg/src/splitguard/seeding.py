"""Deterministic stream derivation from a single 64-bit seed.

Every shuffle and draw in the package flows from one seed through
counter-based Philox generators. Sub-streams are derived by XORing the
seed with a stable hash of string tokens, so adding a class (or a fold)
never perturbs the streams of the others. Python's built-in ``hash`` is
process-salted and must not be used here.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .errors import InvalidConfig

MASK64 = (1 << 64) - 1


def stable_hash64(*tokens: str | int) -> int:
    """Hash tokens to a 64-bit integer, stable across processes and runs."""
    h = hashlib.blake2b(digest_size=8)
    for tok in tokens:
        h.update(str(tok).encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "little")


def class_stream(seed: int, class_label: str) -> np.random.Generator:
    """Per-class shuffle stream: seed XOR hash(class_label)."""
    return np.random.Generator(np.random.Philox(key=(seed ^ stable_hash64(class_label)) & MASK64))


def derived_stream(seed: int, *tokens: str | int) -> np.random.Generator:
    """General sub-stream for a namespaced purpose (validation draws, synth)."""
    return np.random.Generator(np.random.Philox(key=(seed ^ stable_hash64(*tokens)) & MASK64))


def check_seed(seed: int) -> int:
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed <= MASK64:
        raise InvalidConfig(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    return seed
