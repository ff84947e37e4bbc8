"""Norms and norm clipping for flat parameter vectors.

A parameter vector is a plain 1-D float64 numpy array; the supported
p-norms are p=2 and p=inf.
"""

from __future__ import annotations

import math

import numpy as np

from byzlab.errors import ConfigError


def p_norm(v: np.ndarray, p: float) -> float:
    """L2 or L-infinity norm."""
    v = np.asarray(v, dtype=np.float64)
    if p == 2:
        return float(np.linalg.norm(v))
    if math.isinf(p):
        return float(np.max(np.abs(v))) if v.size else 0.0
    raise ConfigError(f"unsupported norm order {p!r}; use 2 or inf")


def clip_to_norm(v: np.ndarray, bound: float, p: float) -> np.ndarray:
    """Return v unchanged if within the bound, else shrink it onto the bound.

    p=2 rescales (direction preserved); p=inf clamps coordinatewise.
    """
    if bound <= 0:
        raise ConfigError(f"norm bound must be positive, got {bound}")
    v = np.asarray(v, dtype=np.float64)
    if math.isinf(p):
        return np.clip(v, -bound, bound)
    if p == 2:
        norm = float(np.linalg.norm(v))
        if norm <= bound:
            return v.copy()
        scaled = v * (bound / norm)
        # rescaling can overshoot by an ulp; nudge down so a second clip
        # is an exact no-op (idempotence)
        while float(np.linalg.norm(scaled)) > bound:
            scaled = scaled * (1.0 - 1e-15)
        return scaled
    raise ConfigError(f"unsupported norm order {p!r}; use 2 or inf")
