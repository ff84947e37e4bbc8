"""Bit-decomposition range proofs over extended Pedersen commitments.

Proves that a committed value v lies in [0, 2^bits). The prover commits
to each bit of v and, per bit, runs a non-interactive OR-composition of
two Schnorr proofs ("the bit commitment opens to 0" or "... to 1"), plus
a revealed consistency opening that ties the weighted product of bit
commitments back to the value commitment.

Non-interactivity is Fiat-Shamir style: the challenge is the first 16
bytes of SHA-256 over the serialized statement and announcements, and is
XOR-split between the two branches (the simulated branch's share is
chosen first). Proof size is linear in the bit width; the verification
interface is independent of the backend, so a succinct scheme can be
swapped in later without touching callers.

Per-bit OR proof, for bit commitment (cb, tb) = (g^b * h^rho, g^rho):

  branch 0 statement:  cb       = h^rho      (b = 0)
  branch 1 statement:  cb * g^-1 = h^rho     (b = 1)

A transcript stores (e0, e1, z0, z1) per bit; the verifier recomputes
the announcements A_i = h^(z_i) * X_i^(-e_i) and checks
e0 XOR e1 == H(statement, A0, A1).
"""

from __future__ import annotations

from dataclasses import dataclass
import hashlib

import gmpy2

from byzlab.crypto.commitments import ExtendedCommitment, commit
from byzlab.crypto.groups import (
    GroupParams,
    decode_element,
    encode_element,
    group_pow,
    pow_any,
)
from byzlab.errors import ConfigError, QuantRangeError
from byzlab.prng import CounterStream

_CHALLENGE_BITS = 128
_DOMAIN = b"byzlab/range-proof/v1"


@dataclass(frozen=True)
class BitProof:
    """OR-proof transcript for one bit: XOR-split challenges and responses."""

    e0: int
    e1: int
    z0: int
    z1: int


@dataclass(frozen=True)
class RangeProof:
    bit_commitments: tuple[ExtendedCommitment, ...]
    bit_proofs: tuple[BitProof, ...]
    consistency_opening: int

    def to_bytes(self) -> bytes:
        """Length-prefixed big-endian serialization of the transcript."""
        parts = [len(self.bit_commitments).to_bytes(4, "big")]
        for ec, bp in zip(self.bit_commitments, self.bit_proofs):
            parts.append(encode_element(ec.c))
            parts.append(encode_element(ec.mask_term))
            for val in (bp.e0, bp.e1, bp.z0, bp.z1):
                parts.append(encode_element(val))
        parts.append(encode_element(self.consistency_opening))
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> "RangeProof":
        if len(data) < 4:
            raise ValueError("truncated proof")
        count = int.from_bytes(data[:4], "big")
        offset = 4
        commitments = []
        proofs = []
        for _ in range(count):
            c, offset = decode_element(data, offset)
            mask, offset = decode_element(data, offset)
            vals = []
            for _ in range(4):
                v, offset = decode_element(data, offset)
                vals.append(v)
            commitments.append(ExtendedCommitment(c=c, mask_term=mask))
            proofs.append(BitProof(*vals))
        opening, offset = decode_element(data, offset)
        if offset != len(data):
            raise ValueError("trailing bytes in proof")
        return cls(
            bit_commitments=tuple(commitments),
            bit_proofs=tuple(proofs),
            consistency_opening=opening,
        )


def _challenge(
    params: GroupParams, cb: int, tb: int, a0: int, a1: int
) -> int:
    digest = hashlib.sha256(
        _DOMAIN
        + params.digest()
        + encode_element(cb)
        + encode_element(tb)
        + encode_element(a0)
        + encode_element(a1)
    ).digest()
    return int.from_bytes(digest[: _CHALLENGE_BITS // 8], "big")


def prove_range(
    v: int, r: int, bits: int, params: GroupParams, stream: CounterStream
) -> RangeProof:
    """Prove that commit(v, r) commits to a value in [0, 2^bits).

    ``stream`` supplies all prover randomness, so proofs are reproducible
    from a seed. Refuses to prove out-of-range values.
    """
    if bits <= 0:
        raise ConfigError("bit width must be positive")
    if not 0 <= v < (1 << bits):
        raise QuantRangeError(f"value {v} outside [0, 2^{bits})")
    return _prove_bits(v, r, bits, params, stream)


def _prove_bits(
    v: int, r: int, bits: int, params: GroupParams, stream: CounterStream
) -> RangeProof:
    """Proof construction without the range precondition.

    Running this on an out-of-range v produces a transcript whose
    consistency check cannot pass (the bits reconstruct v mod 2^bits);
    tests use it to exercise verifier soundness.
    """
    p, q, g, h = params.p, params.q, params.g, params.h
    g_inv = int(gmpy2.invert(g, p))

    commitments = []
    proofs = []
    blinding_weight = 0
    for k in range(bits):
        bit = (v >> k) & 1
        rho = stream.next_scalar(q)
        blinding_weight = (blinding_weight + (rho << k)) % q
        ec = commit(bit, rho, params)
        cb = ec.c

        w = stream.next_scalar(q)
        announce_real = group_pow(h, w, params)
        e_sim = stream.next_uint(_CHALLENGE_BITS)
        z_sim = stream.next_scalar(q)
        if bit == 0:
            # simulate branch 1: A1 = h^z1 * (cb/g)^-e1
            x1 = (cb * g_inv) % p
            a0 = announce_real
            a1 = (group_pow(h, z_sim, params) * pow_any(x1, -e_sim, p)) % p
            e = _challenge(params, cb, ec.mask_term, a0, a1)
            e0 = e ^ e_sim
            proofs.append(
                BitProof(e0=e0, e1=e_sim, z0=(w + e0 * rho) % q, z1=z_sim)
            )
        else:
            # simulate branch 0: A0 = h^z0 * cb^-e0
            a0 = (group_pow(h, z_sim, params) * pow_any(cb, -e_sim, p)) % p
            a1 = announce_real
            e = _challenge(params, cb, ec.mask_term, a0, a1)
            e1 = e ^ e_sim
            proofs.append(
                BitProof(e0=e_sim, e1=e1, z0=z_sim, z1=(w + e1 * rho) % q)
            )
        commitments.append(ec)

    opening = (blinding_weight - r) % q
    return RangeProof(
        bit_commitments=tuple(commitments),
        bit_proofs=tuple(proofs),
        consistency_opening=opening,
    )


def verify_range(
    commitment: ExtendedCommitment,
    proof: RangeProof,
    bits: int,
    params: GroupParams,
) -> bool:
    """Deterministically verify a range proof transcript.

    Returns False (never raises) on malformed, tampered, or inconsistent
    transcripts: wrong bit count, out-of-range scalars, failed OR
    proofs, or a bit decomposition that does not reconstitute the value
    commitment (both the c and mask-term components are checked).
    """
    if (
        len(proof.bit_commitments) != bits
        or len(proof.bit_proofs) != bits
        or bits <= 0
    ):
        return False
    p, q, g, h = params.p, params.q, params.g, params.h
    if not (0 < commitment.c < p and 0 < commitment.mask_term < p):
        return False
    g_inv = int(gmpy2.invert(g, p))
    challenge_bound = 1 << _CHALLENGE_BITS

    for ec, bp in zip(proof.bit_commitments, proof.bit_proofs):
        if not (0 < ec.c < p and 0 < ec.mask_term < p):
            return False
        if not (0 <= bp.e0 < challenge_bound and 0 <= bp.e1 < challenge_bound):
            return False
        if not (0 <= bp.z0 < q and 0 <= bp.z1 < q):
            return False
        a0 = (group_pow(h, bp.z0, params) * pow_any(ec.c, -bp.e0, p)) % p
        x1 = (ec.c * g_inv) % p
        a1 = (group_pow(h, bp.z1, params) * pow_any(x1, -bp.e1, p)) % p
        if bp.e0 ^ bp.e1 != _challenge(params, ec.c, ec.mask_term, a0, a1):
            return False

    opening = proof.consistency_opening
    if not 0 <= opening < q:
        return False
    weighted_c = 1
    weighted_mask = 1
    for k, ec in enumerate(proof.bit_commitments):
        weighted_c = (weighted_c * pow_any(ec.c, 1 << k, p)) % p
        weighted_mask = (weighted_mask * pow_any(ec.mask_term, 1 << k, p)) % p
    if weighted_c != (commitment.c * group_pow(h, opening, params)) % p:
        return False
    if weighted_mask != (commitment.mask_term * group_pow(g, opening, params)) % p:
        return False
    return True


def verify_range_bytes(
    commitment: ExtendedCommitment, blob: bytes, bits: int, params: GroupParams
) -> bool:
    """Verify a serialized transcript; undecodable blobs are rejections."""
    try:
        proof = RangeProof.from_bytes(blob)
    except ValueError:
        return False
    return verify_range(commitment, proof, bits, params)
