"""Fixed-point quantization bridging float updates and group scalars.

The grid is symmetric around zero: floats in [-R, R] map affinely onto
integer codes in [0, 2^bits), with 0.0 landing exactly on the midpoint
code 2^(bits-1). One grid step is R / 2^(bits-1); rounding is
half-to-even with the top edge clamped, so the roundtrip error is at
most one step per coordinate (half a step away from the +R edge).

Norm bounds are enforced over this grid in coarsened power-of-two form:
a float bound B becomes a bit width, and admissible signed codes occupy
a symmetric window of that width. Committed values are the window-
shifted codes, so a range proof over [0, 2^width) is exactly the
per-coordinate bound check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from byzlab.errors import ConfigError, QuantRangeError


@dataclass(frozen=True)
class QuantSpec:
    """Grid parameters: ``bits`` code width, ``clip`` the float range R."""

    bits: int = 16
    clip: float = 1.0

    def __post_init__(self):
        if not 2 <= self.bits <= 32:
            raise ConfigError(f"quantization bits must be in [2, 32], got {self.bits}")
        if self.clip <= 0:
            raise ConfigError(f"quantization clip range must be positive, got {self.clip}")

    @property
    def step(self) -> float:
        return self.clip / (1 << (self.bits - 1))

    @property
    def offset(self) -> int:
        return 1 << (self.bits - 1)


@dataclass(frozen=True)
class FixedVec:
    """Quantized vector: integer codes in [0, 2^bits) plus its grid."""

    values: np.ndarray  # int64 codes
    spec: QuantSpec

    def signed(self) -> np.ndarray:
        """Signed grid coordinates (codes minus the midpoint offset)."""
        return self.values - self.spec.offset


def quantize(v: np.ndarray, spec: QuantSpec) -> FixedVec:
    """Map floats in [-R, R] onto grid codes; out-of-range input errors.

    Callers clip first; nothing is silently clipped here except the
    single half-step at the +R edge, which rounds up past the top code.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.size and float(np.max(np.abs(v))) > spec.clip:
        raise QuantRangeError(
            f"coordinate magnitude {float(np.max(np.abs(v)))} exceeds clip range "
            f"{spec.clip}; clip before quantizing"
        )
    codes = np.rint(v / spec.step).astype(np.int64) + spec.offset
    np.clip(codes, 0, (1 << spec.bits) - 1, out=codes)
    return FixedVec(values=codes, spec=spec)


def dequantize(fv: FixedVec) -> np.ndarray:
    return (fv.values - fv.spec.offset).astype(np.float64) * fv.spec.step


def signed_to_float(signed: np.ndarray, spec: QuantSpec) -> np.ndarray:
    return np.asarray(signed, dtype=np.float64) * spec.step


# ---------------------------------------------------------------------------
# Power-of-two bound windows
# ---------------------------------------------------------------------------


def bits_for_bound(bound: float | None, spec: QuantSpec) -> int:
    """Bit width whose signed window enforces the float bound (coarsened).

    The window of width w admits signed coordinates in
    [-2^(w-1), 2^(w-1)), i.e. dequantized magnitudes up to
    2^(w-1) * step, which lies in [B/2, B]. No bound means the full
    grid width.
    """
    if bound is None or math.isinf(bound):
        return spec.bits
    if bound <= 0:
        raise ConfigError(f"norm bound must be positive, got {bound}")
    quanta = math.floor(bound / spec.step)
    if quanta < 1:
        return 1
    return min(spec.bits, max(1, math.ceil(math.log2(quanta))))


def window_bound(bits: int, spec: QuantSpec) -> float:
    """Largest float magnitude representable inside a window of ``bits``."""
    return (1 << (bits - 1)) * spec.step


def clamp_to_window(signed: np.ndarray, bits: int) -> np.ndarray:
    """Clamp signed grid coordinates into the window of ``bits``."""
    half = 1 << (bits - 1)
    return np.clip(signed, -half, half - 1)


def to_committed(signed: np.ndarray, bits: int) -> list[int]:
    """Shift window coordinates into [0, 2^bits) for commitment."""
    half = 1 << (bits - 1)
    arr = np.asarray(signed, dtype=np.int64)
    if arr.size and (int(arr.min()) < -half or int(arr.max()) >= half):
        raise QuantRangeError("signed coordinate outside the committed window")
    return [int(s) + half for s in arr]


def from_committed_sum(sums: list[int], count: int, bits: int) -> np.ndarray:
    """Invert :func:`to_committed` over a sum of ``count`` vectors."""
    half = 1 << (bits - 1)
    return np.asarray(sums, dtype=np.int64) - count * half
