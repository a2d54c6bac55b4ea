"""Seed derivation and deterministic fan-out of independent work items.

All randomness in an experiment descends from a single 64-bit master seed.
Each work item gets its own generator, seeded from a hash of the master
seed and a labelled path such as ``[("N", 3), ("outer", 17)]``, so results
do not depend on scheduling or on the number of workers.
"""
from __future__ import annotations

import hashlib
import struct
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = ["derive_seed", "make_rng", "pmap", "tree_sum"]

_MASK64 = (1 << 64) - 1


def _normalize(path) -> list[tuple[str, int]]:
    out = []
    for item in path:
        if isinstance(item, tuple):
            label, index = item
        else:
            label, index = str(item), 0
        out.append((str(label), int(index)))
    return out


def derive_seed(master: int, path: Sequence) -> int:
    """Hash ``master`` and a labelled index path into a 64-bit seed.

    Each path element is ``(label, index)`` (a bare label means index 0).
    Labels are length-prefixed so that no two distinct paths share an
    encoding; the order of elements matters.
    """
    h = hashlib.sha256()
    h.update(b"randproj/seed/v1")
    h.update(struct.pack("<Q", int(master) & _MASK64))
    for label, index in _normalize(path):
        raw = label.encode("utf-8")
        h.update(struct.pack("<I", len(raw)))
        h.update(raw)
        h.update(struct.pack("<q", index))
    return struct.unpack("<Q", h.digest()[:8])[0]


def make_rng(master: int, path: Sequence = ()) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, path))


def pmap(fn: Callable, items: Iterable, threads: int = 1) -> list:
    """Map ``fn`` over ``items``; output order follows input order."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def tree_sum(values: Sequence):
    """Pairwise sum in a fixed index order (arrays or scalars)."""
    vals = list(values)
    if not vals:
        raise ValueError("tree_sum of an empty sequence")
    while len(vals) > 1:
        nxt = [vals[i] + vals[i + 1] for i in range(0, len(vals) - 1, 2)]
        if len(vals) % 2:
            nxt.append(vals[-1])
        vals = nxt
    return vals[0]
