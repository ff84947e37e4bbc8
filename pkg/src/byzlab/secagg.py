"""Additive-masking secure aggregation with commitment verification.

Protocol shape, per round, over a cohort of participating clients:

1. Every ordered pair of participants agrees on a shared secret via
   Diffie-Hellman in the published group, hashed with the round index.
2. Each client expands its pairwise secrets into a mask vector over
   Z_q; the smaller id of a pair adds the expansion, the larger
   subtracts it, so the masks of a full cohort sum to the zero vector.
3. Each client submits its quantized update coordinatewise masked
   (payload = value + mask mod q) inside an envelope that also carries,
   per coordinate, an extended Pedersen commitment and a range proof.
   The commitment blinding for a coordinate IS the mask scalar for that
   coordinate: that coupling is what lets the server audit the masks.
4. The server verifies every envelope, checks the product of commitment
   mask terms against g^(decoding key) per coordinate, checks that the
   summed payloads are consistent with the commitments, and only then
   unmasks the aggregate. With full participation the decoding key is
   the zero vector; the API takes it explicitly so the client-chosen
   blinding variant can be exercised too.

There is no dropout recovery: a round missing an envelope, or containing
one that fails verification, aborts with transcript evidence.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Mapping, Sequence

from byzlab.crypto.commitments import ExtendedCommitment, commit, verify_mask_sum
from byzlab.crypto.groups import GroupParams, encode_element, group_pow, pow_any
from byzlab.crypto.rangeproof import RangeProof, prove_range, verify_range
from byzlab.errors import (
    MaskSumError,
    PayloadConsistencyError,
    ProtocolOrderError,
    ProtocolStateError,
    QuantRangeError,
    RegistrationError,
    ShapeError,
)
from byzlab.prng import CounterStream

_SEED_DOMAIN = b"byzlab/pairwise-seed/v1"


@dataclass(frozen=True)
class MaskSeed:
    """Pairwise mask seed shared by clients ``pair[0] < pair[1]``."""

    pair: tuple[int, int]
    round_index: int
    seed: bytes


@dataclass(frozen=True)
class MaskedUpdate:
    payload: tuple[int, ...]
    client_id: int
    round_index: int


@dataclass(frozen=True)
class ClientEnvelope:
    """One client's submission for one round.

    ``declared_norm`` is public metadata: honest clients declare the
    p-norm of their dequantized update; adversaries may declare anything
    consistent with their commitments.
    """

    client_id: int
    round_index: int
    bits: int
    payload: tuple[int, ...]
    commitments: tuple[ExtendedCommitment, ...]
    proofs: tuple[RangeProof, ...]
    declared_norm: float


@dataclass(frozen=True)
class EnvelopeVerdict:
    accepted: bool
    reason: str | None = None
    coordinate: int | None = None


# ---------------------------------------------------------------------------
# Pairwise secrets and masks
# ---------------------------------------------------------------------------


def derive_pairwise_secret(
    own_secret: int,
    peer_public: int,
    own_id: int,
    peer_id: int,
    round_index: int,
    params: GroupParams,
) -> MaskSeed:
    """Diffie-Hellman agreement hashed with the round index.

    Symmetric: either endpoint of the pair derives the identical seed
    from its own secret and the peer's public key.
    """
    if own_id == peer_id:
        raise ProtocolStateError("a client has no pairwise secret with itself")
    point = pow_any(peer_public, own_secret % params.q, params.p)
    seed = hashlib.sha256(
        _SEED_DOMAIN
        + encode_element(point)
        + round_index.to_bytes(8, "big")
    ).digest()
    pair = (own_id, peer_id) if own_id < peer_id else (peer_id, own_id)
    return MaskSeed(pair=pair, round_index=round_index, seed=seed)


class RoundKeys:
    """Public-key registry for one round's cohort."""

    def __init__(self, params: GroupParams):
        self.params = params
        self._public: dict[int, int] = {}

    def register(self, client_id: int, public: int) -> None:
        self._public[client_id] = public

    def public_key(self, client_id: int) -> int:
        try:
            return self._public[client_id]
        except KeyError:
            raise RegistrationError(
                f"client {client_id} has no registered public key"
            ) from None

    def derive(
        self, own_secret: int, own_id: int, peer_id: int, round_index: int
    ) -> MaskSeed:
        return derive_pairwise_secret(
            own_secret,
            self.public_key(peer_id),
            own_id,
            peer_id,
            round_index,
            self.params,
        )


def expand_mask(seed: MaskSeed, length: int, modulus: int) -> list[int]:
    """Deterministically expand a pairwise seed into mask scalars mod q."""
    stream = CounterStream(seed.seed)
    return [stream.next_scalar(modulus) for _ in range(length)]


def compute_client_mask(
    client_id: int,
    peer_ids: Sequence[int],
    seeds: Mapping[tuple[int, int], MaskSeed],
    length: int,
    modulus: int,
) -> list[int]:
    """Combine pairwise expansions into this client's mask vector.

    The client with the smaller id in a pair adds the expansion and the
    larger id subtracts it, so over a full cohort the masks telescope to
    the zero vector mod q.
    """
    mask = [0] * length
    for peer in peer_ids:
        if peer == client_id:
            continue
        pair = (client_id, peer) if client_id < peer else (peer, client_id)
        if pair not in seeds:
            raise ProtocolStateError(
                f"missing pairwise seed for clients {pair[0]} and {pair[1]}"
            )
        expansion = expand_mask(seeds[pair], length, modulus)
        if client_id < peer:
            mask = [(m + e) % modulus for m, e in zip(mask, expansion)]
        else:
            mask = [(m - e) % modulus for m, e in zip(mask, expansion)]
    return mask


def mask_update(
    values: Sequence[int],
    mask: Sequence[int],
    modulus: int,
    client_id: int = 0,
    round_index: int = 0,
) -> MaskedUpdate:
    """Coordinatewise value + mask mod q."""
    if len(values) != len(mask):
        raise ShapeError(
            f"update length {len(values)} != mask length {len(mask)}"
        )
    payload = tuple((v + m) % modulus for v, m in zip(values, mask))
    return MaskedUpdate(payload=payload, client_id=client_id, round_index=round_index)


# ---------------------------------------------------------------------------
# Envelopes
# ---------------------------------------------------------------------------


def build_envelope(
    values: Sequence[int],
    mask: Sequence[int],
    bits: int,
    params: GroupParams,
    declared_norm: float,
    client_id: int,
    round_index: int,
    stream: CounterStream,
) -> ClientEnvelope:
    """Commit, range-prove, and mask every coordinate of a quantized update.

    Every value must already lie in [0, 2^bits); out-of-range input is an
    error the caller must fix by clipping first, never silently repaired
    here. The mask scalar of each coordinate doubles as the commitment
    blinding.
    """
    if len(values) != len(mask):
        raise ShapeError(
            f"update length {len(values)} != mask length {len(mask)}"
        )
    top = 1 << bits
    for k, v in enumerate(values):
        if not 0 <= v < top:
            raise QuantRangeError(
                f"coordinate {k} value {v} outside [0, 2^{bits}); clip first"
            )
    commitments = []
    proofs = []
    for v, r in zip(values, mask):
        commitments.append(commit(v, r, params))
        proofs.append(prove_range(v, r, bits, params, stream))
    payload = mask_update(values, mask, params.q, client_id, round_index).payload
    return ClientEnvelope(
        client_id=client_id,
        round_index=round_index,
        bits=bits,
        payload=payload,
        commitments=tuple(commitments),
        proofs=tuple(proofs),
        declared_norm=float(declared_norm),
    )


def verify_envelope(
    envelope: ClientEnvelope, bits: int, params: GroupParams
) -> EnvelopeVerdict:
    """Accept iff the envelope is well formed and every range proof verifies."""
    d = len(envelope.payload)
    if len(envelope.commitments) != d or len(envelope.proofs) != d:
        return EnvelopeVerdict(accepted=False, reason="shape")
    if envelope.bits != bits:
        return EnvelopeVerdict(accepted=False, reason="bit-width")
    for k in range(d):
        if not 0 <= envelope.payload[k] < params.q:
            return EnvelopeVerdict(accepted=False, reason="payload-range", coordinate=k)
        if not verify_range(envelope.commitments[k], envelope.proofs[k], bits, params):
            return EnvelopeVerdict(accepted=False, reason="range", coordinate=k)
    return EnvelopeVerdict(accepted=True)


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------


def aggregate_round(
    envelopes: Sequence[ClientEnvelope],
    decoding_key: Sequence[int],
    params: GroupParams,
    verdicts: Sequence[EnvelopeVerdict],
) -> list[int]:
    """Unmask the coordinatewise sum of the submitted updates.

    Requires one accepting verdict per envelope (protocol order), a
    passing mask-sum check, and payload-commitment consistency; any
    failed check aborts the round with evidence rather than returning a
    corrupt aggregate. Returns the exact committed-value sums, which the
    caller dequantizes.
    """
    if not envelopes:
        raise ShapeError("cannot aggregate an empty round")
    if len(verdicts) != len(envelopes):
        raise ProtocolOrderError("every envelope needs a verification verdict")
    for env, verdict in zip(envelopes, verdicts):
        if not verdict.accepted:
            raise ProtocolOrderError(
                f"envelope from client {env.client_id} was not accepted"
            )
    d = len(envelopes[0].payload)
    bits = envelopes[0].bits
    for env in envelopes:
        if len(env.payload) != d or env.bits != bits:
            raise ShapeError("envelopes disagree on dimension or bit width")
    if len(decoding_key) != d:
        raise ShapeError("decoding key length does not match update dimension")
    if len(envelopes) << bits >= params.q:
        raise ShapeError(
            "group order too small to decode the aggregate unambiguously"
        )

    sums: list[int] = []
    for k in range(d):
        column = [env.commitments[k] for env in envelopes]
        key_k = decoding_key[k] % params.q
        if not verify_mask_sum(column, key_k, params):
            raise MaskSumError(
                f"mask-sum check failed at coordinate {k}",
                evidence={
                    "coordinate": k,
                    "decoding_key": key_k,
                    "mask_terms": [ec.mask_term for ec in column],
                },
            )
        payload_sum = 0
        c_product = 1
        mask_product = 1
        for env in envelopes:
            payload_sum += env.payload[k]
            c_product = (c_product * env.commitments[k].c) % params.p
            mask_product = (mask_product * env.commitments[k].mask_term) % params.p
        lhs = (
            group_pow(params.g, payload_sum, params)
            * group_pow(params.h, key_k, params)
        ) % params.p
        rhs = (c_product * mask_product) % params.p
        if lhs != rhs:
            raise PayloadConsistencyError(
                f"payload-commitment consistency failed at coordinate {k}",
                evidence={"coordinate": k, "payload_sum_mod_q": payload_sum % params.q},
            )
        sums.append((payload_sum - key_k) % params.q)
    return sums
