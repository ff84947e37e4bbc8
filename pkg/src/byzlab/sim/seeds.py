"""Seed discipline: one master seed, hash-derived per-entity streams.

Every source of randomness in a run is keyed by the master seed plus a
role label and whatever ids scope it (client id, round index, ...), so
reordering clients or adding entities never perturbs unrelated streams.
"""

from __future__ import annotations

import hashlib

import numpy as np

_DOMAIN = b"byzlab/seed/v1"


def _encode_label(label) -> bytes:
    if isinstance(label, bytes):
        body = label
    elif isinstance(label, str):
        body = label.encode("utf-8")
    elif isinstance(label, (int, np.integer)):
        body = b"i" + int(label).to_bytes(8, "big", signed=True)
    else:
        raise TypeError(f"cannot encode seed label of type {type(label)!r}")
    return len(body).to_bytes(4, "big") + body


def stream_seed(master: int, *labels) -> bytes:
    """32-byte seed for hash(master || labels...)."""
    h = hashlib.sha256()
    h.update(_DOMAIN)
    h.update(int(master).to_bytes(16, "big", signed=True))
    for label in labels:
        h.update(_encode_label(label))
    return h.digest()


def child_seed(master: int, *labels) -> int:
    """128-bit integer seed derived from the master seed and labels."""
    return int.from_bytes(stream_seed(master, *labels)[:16], "big")


def rng_for(master: int, *labels) -> np.random.Generator:
    """Independent numpy generator for one (role, ids...) slot."""
    return np.random.default_rng(child_seed(master, *labels))
