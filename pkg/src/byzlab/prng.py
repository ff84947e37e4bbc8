"""Deterministic byte streams and unbiased scalar sampling.

Everything random in the protocol layer (blinding factors, mask
expansion, proof nonces) is drawn from a SHA-256 counter stream keyed by
an explicit seed, so that full runs are reproducible from a master seed
and protocol transcripts can be regenerated exactly.
"""

from __future__ import annotations

import hashlib


class CounterStream:
    """SHA-256 in counter mode over a fixed seed.

    Emits 32-byte blocks ``H(seed || counter)`` with a big-endian 8-byte
    counter. Two streams with different seeds are independent; a stream
    is deterministic and stateful (each call advances the counter).
    """

    def __init__(self, seed: bytes):
        if not isinstance(seed, bytes):
            raise TypeError("stream seed must be bytes")
        self._seed = seed
        self._counter = 0

    def next_block(self) -> bytes:
        block = hashlib.sha256(
            self._seed + self._counter.to_bytes(8, "big")
        ).digest()
        self._counter += 1
        return block

    def next_uint(self, bits: int = 256) -> int:
        """Uniform integer in [0, 2**bits); bits must be a multiple of 8."""
        if bits % 8 != 0 or bits <= 0:
            raise ValueError("bits must be a positive multiple of 8")
        need = bits // 8
        out = b""
        while len(out) < need:
            out += self.next_block()
        return int.from_bytes(out[:need], "big")

    def next_scalar(self, modulus: int) -> int:
        """Uniform integer in [0, modulus) via rejection sampling.

        Candidates are 256-bit draws; any draw at or above the largest
        multiple of ``modulus`` below 2**256 is rejected, which removes
        modulo bias entirely (acceptance probability is at least 1/2).
        """
        if modulus <= 0:
            raise ValueError("modulus must be positive")
        limit = (1 << 256) - ((1 << 256) % modulus)
        while True:
            candidate = self.next_uint(256)
            if candidate < limit:
                return candidate % modulus


def scalar_stream(seed: bytes, modulus: int):
    """Callable returning successive uniform scalars mod ``modulus``."""
    stream = CounterStream(seed)
    return lambda: stream.next_scalar(modulus)
