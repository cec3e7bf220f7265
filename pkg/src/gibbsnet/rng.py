"""Keyed random streams.

Every stochastic routine in the package takes an explicit
:class:`numpy.random.Generator`.  Generators are derived from a
``(seed, label, *indices)`` key so that independent pieces of an experiment
(replications, chains, batches) never share state and results do not depend
on the order in which they are executed.
"""

from __future__ import annotations

import zlib

import numpy as np


def _label_key(label: str) -> int:
    return zlib.crc32(label.encode("utf-8"))


def stream(seed: int, label: str, *indices: int) -> np.random.Generator:
    """Return a Philox generator keyed by ``(seed, label, *indices)``."""
    if seed < 0:
        raise ValueError("seed must be non-negative")
    key = (_label_key(label),) + tuple(int(i) for i in indices)
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))


def child(rng: np.random.Generator, label: str, *indices: int) -> np.random.Generator:
    """Derive a keyed child stream from an existing generator.

    The parent is consumed exactly once (one 63-bit draw), so derivation is
    reproducible given the parent state.
    """
    base = int(rng.integers(0, 2**63 - 1))
    return stream(base, label, *indices)
